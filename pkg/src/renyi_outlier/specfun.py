"""Log-space incomplete gamma and beta functions.

Every probability that leaves this module is a natural log (``LogProb``),
so survival values far below the smallest positive double stay usable.
"""

import math
from itertools import islice

import numpy as np

__all__ = [
    "DomainError",
    "log1m_exp",
    "log_gamma_upper_reg",
    "log_gamma_upper_reg_int",
    "log_beta_upper_reg",
    "log_beta_lower_reg",
    "log_beta_lower_reg_logx",
    "lbeta",
]

_EPS = 1e-16
_TINY = 1e-300
_LN2 = math.log(2.0)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_BINOMIAL_MAX_A = 1024
_KERNEL_MAX_N = 512


class DomainError(ValueError):
    """Raised when an argument lies outside a function's domain."""


def _check_finite(name, value):
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


def log1m_exp(logv):
    """Return ``log(1 - exp(logv))`` without cancellation.

    Parameters
    ----------
    logv : float
        Log of a probability, ``logv <= 0``.

    Returns
    -------
    float
        ``-inf`` when ``logv == 0``.
    """
    logv = float(logv)
    if math.isnan(logv) or logv > 0.0:
        raise DomainError(f"log1m_exp needs logv <= 0, got {logv!r}")
    if logv == 0.0:
        return -math.inf
    if logv > -_LN2:
        return math.log(-math.expm1(logv))
    return math.log1p(-math.exp(logv))


def _stirlerr(x):
    """``lgamma(x) - ((x - 0.5) log x - x + 0.5 log 2pi)``."""
    if x < 10.0:
        return math.lgamma(x) - ((x - 0.5) * math.log(x) - x + _HALF_LOG_2PI)
    r = 1.0 / x
    r2 = r * r
    return r * (1.0 / 12 - r2 * (1.0 / 360 - r2 * (1.0 / 1260 - r2 * (
        1.0 / 1680 - r2 * (1.0 / 1188 - r2 * (691.0 / 360360))))))


def lbeta(a, b):
    """Log of the complete beta function, accurate when one shape is huge.

    The naive ``lgamma(a) + lgamma(b) - lgamma(a + b)`` loses about
    ``eps * b log b`` when ``b`` is large; here the two large gamma terms
    are combined analytically through Stirling's series.
    """
    lo, hi = (a, b) if a <= b else (b, a)
    if hi < 10.0:
        return math.lgamma(lo) + math.lgamma(hi) - math.lgamma(lo + hi)
    s = lo + hi
    return (math.lgamma(lo) - (hi - 0.5) * math.log1p(lo / hi)
            - lo * math.log(s) + lo + _stirlerr(hi) - _stirlerr(s))


def _max_iter(scale):
    return 1000 + int(50.0 * math.sqrt(scale))


# ---------------------------------------------------------------------------
# Incomplete gamma


def _log_gamma_lower_series(a, x):
    # P(a, x) = x^a e^-x / Gamma(a + 1) * sum_n x^n / ((a+1)...(a+n))
    term = 1.0
    total = 1.0
    ap = a
    for _ in range(_max_iter(a)):
        ap += 1.0
        term *= x / ap
        total += term
        if term < total * _EPS:
            break
    else:
        raise ArithmeticError(f"gamma series did not converge (a={a}, x={x})")
    return a * math.log(x) - x - math.lgamma(a + 1.0) + math.log(total)


def _log_gamma_upper_cf(a, x):
    # modified Lentz evaluation of the Legendre continued fraction for Q
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _max_iter(a) + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"gamma continued fraction did not converge (a={a}, x={x})")
    return a * math.log(x) - x - math.lgamma(a) + math.log(h)


def log_gamma_upper_reg(shape, x):
    """Log of the regularized upper incomplete gamma function.

    Computes ``log Q(shape, x)`` where ``Q = 1 - G`` and ``G`` is the CDF of
    a Gamma(shape, rate 1) variable.  Uses the power series for
    ``x < shape + 1`` and the continued fraction otherwise, both kept in
    log space so the result never underflows.

    Parameters
    ----------
    shape : float
        Shape parameter, > 0.
    x : float
        Evaluation point, >= 0.

    Returns
    -------
    float
        ``log Q(shape, x) <= 0``.
    """
    shape = float(shape)
    x = float(x)
    _check_finite("shape", shape)
    _check_finite("x", x)
    if shape <= 0.0:
        raise DomainError(f"shape must be > 0, got {shape!r}")
    if x < 0.0:
        raise DomainError(f"x must be >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if x < shape + 1.0:
        return log1m_exp(min(_log_gamma_lower_series(shape, x), 0.0))
    return min(_log_gamma_upper_cf(shape, x), 0.0)


def log_gamma_upper_reg_int(n, x):
    """Vectorized ``log Q(n, x)`` for a positive integer shape ``n``.

    Uses the finite Poisson sum ``Q(n, x) = e^-x sum_{m<n} x^m / m!``, which
    has only positive terms.  Delegates to the active kernel backend for
    ``n <= 512``.
    """
    from ._backend import kernels

    n = int(n)
    if n < 1:
        raise DomainError(f"integer shape must be >= 1, got {n}")
    xs = np.ascontiguousarray(x, dtype=np.float64)
    if np.any(~np.isfinite(xs)) or np.any(xs < 0):
        raise DomainError("x must be finite and >= 0")
    if n > _KERNEL_MAX_N:
        # the kernels' Horner sums would overflow past x ~ 709
        out = np.array([log_gamma_upper_reg(n, float(v)) for v in xs.ravel()])
    else:
        out = kernels.log_gamma_q_int(n, xs.ravel())
    return out.reshape(xs.shape) if xs.ndim else float(out[0])


# ---------------------------------------------------------------------------
# Incomplete beta


def _log_betacf(a, b, x):
    # Lentz evaluation of the continued fraction for I_x(a, b); returns log
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _max_iter(max(a, b)) + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"beta continued fraction did not converge (a={a}, b={b}, x={x})")
    return math.log(h)


def _logsumexp(values):
    top = max(values)
    if top == -math.inf:
        return top
    return top + math.log(math.fsum(math.exp(v - top) for v in values))


def _log_binomial_terms(n, j0, log_x, log_1mx):
    """Yield ``log C(n, j) x^j (1-x)^(n-j)`` for ``j = j0, j0+1, ...``.

    Built by multiplying term ratios, never by differencing ``lgamma`` of
    huge arguments.
    """
    log_odds = log_x - log_1mx
    if j0 == 0:
        lt = n * log_1mx
    else:
        lt = (j0 * log_x + (n - j0) * log_1mx
              - math.log(n + 1.0) - lbeta(j0 + 1.0, n - j0 + 1.0))
    j = j0
    while j <= n:
        yield lt
        lt += math.log((n - j) / (j + 1.0)) + log_odds if j < n else -math.inf
        j += 1


def _log_beta_cdf_sf_int(a, b, log_x, log_1mx):
    # for integer shapes, 1 - I_x(a, b) = P(Binomial(a + b - 1, x) <= a - 1)
    n = a + b - 1
    log_sf = min(_logsumexp(list(islice(_log_binomial_terms(n, 0, log_x, log_1mx), a))), 0.0)
    if log_sf < -_LN2:
        return log1m_exp(log_sf), log_sf
    # I_x(a, b) = P(Binomial >= a); terms past the mode shrink geometrically
    terms = []
    top = -math.inf
    for lt in _log_binomial_terms(n, a, log_x, log_1mx):
        if terms and lt < top - 40.0 and lt <= terms[-1]:
            break
        terms.append(lt)
        top = max(top, lt)
    log_cdf = min(_logsumexp(terms), 0.0)
    return log_cdf, log1m_exp(log_cdf)


def _log_beta_cdf_sf(a, b, log_x, log_1mx):
    """Return ``(log I_x(a, b), log(1 - I_x(a, b)))``.

    ``x`` is passed as the pair ``(log x, log(1 - x))`` so callers holding
    ``x = exp(-s)`` never round it to 1.  Integer shapes with ``a <= 1024``
    use the exact binomial sum; otherwise the continued fraction is run on
    whichever side of the mean converges and the other side is its
    complement.
    """
    if log_x == -math.inf:
        return -math.inf, 0.0
    if log_1mx == -math.inf:
        return 0.0, -math.inf
    if a.is_integer() and b.is_integer() and a <= _BINOMIAL_MAX_A:
        return _log_beta_cdf_sf_int(int(a), int(b), log_x, log_1mx)
    x = math.exp(log_x)
    front = a * log_x + b * log_1mx - lbeta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        log_cdf = min(front + _log_betacf(a, b, x) - math.log(a), 0.0)
        return log_cdf, log1m_exp(log_cdf)
    log_sf = min(front + _log_betacf(b, a, math.exp(log_1mx)) - math.log(b), 0.0)
    return log1m_exp(log_sf), log_sf


def _check_beta_args(a, b):
    a = float(a)
    b = float(b)
    _check_finite("a", a)
    _check_finite("b", b)
    if a <= 0.0 or b <= 0.0:
        raise DomainError(f"beta shapes must be > 0, got a={a!r}, b={b!r}")
    return a, b


def _split_x(x):
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    log_x = math.log(x) if x > 0.0 else -math.inf
    log_1mx = math.log1p(-x) if x < 1.0 else -math.inf
    return log_x, log_1mx


def log_beta_upper_reg(a, b, x):
    """Log survival ``log(1 - I_x(a, b))`` of a Beta(a, b) variable.

    Parameters
    ----------
    a, b : float
        First and second shape parameters, both > 0.
    x : float
        Evaluation point in [0, 1].
    """
    a, b = _check_beta_args(a, b)
    return _log_beta_cdf_sf(a, b, *_split_x(x))[1]


def log_beta_lower_reg(a, b, x):
    """Log CDF ``log I_x(a, b)`` of a Beta(a, b) variable."""
    a, b = _check_beta_args(a, b)
    return _log_beta_cdf_sf(a, b, *_split_x(x))[0]


def log_beta_lower_reg_logx(a, b, log_x):
    """Log CDF ``log I_x(a, b)`` with the argument given as ``log x``.

    Keeps full precision when ``x = exp(log_x)`` is within rounding of 1.
    """
    a, b = _check_beta_args(a, b)
    log_x = float(log_x)
    if math.isnan(log_x) or log_x > 0.0:
        raise DomainError(f"log_x must be <= 0, got {log_x!r}")
    return _log_beta_cdf_sf(a, b, log_x, log1m_exp(log_x))[0]
