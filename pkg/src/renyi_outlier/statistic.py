"""Omnibus outlier statistic over a power-of-two ladder of outlier counts."""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .specfun import DomainError, log_beta_lower_reg_logx, log_gamma_upper_reg
from .transform import TransformResult

__all__ = [
    "X_CAP",
    "LadderSpec",
    "RotResult",
    "CollapsedTail",
    "choose_kstar",
    "collapse_tail",
    "rot_statistic",
    "fixed_k_test",
]

# exp(-745) underflows to 0 in double precision
X_CAP = 745.0


@dataclass(frozen=True)
class LadderSpec:
    """Outlier-count bound ``K``, its power-of-two round-up and the ladder."""

    K: int
    kstar: int
    ladder: tuple
    warnings: tuple = ()


@dataclass
class RotResult:
    """Outcome of the omnibus test.

    ``components`` maps each ladder count ``i`` to
    ``-log Q(i, sum of the first i collapsed exponentials)``; ``rho`` is
    their maximum, attained first at ``argmax_i``.  ``p_value_log`` is
    filled by a calibration lookup.
    """

    rho: float
    components: dict
    argmax_i: int
    kstar: int
    p_value_log: float | None = None
    extrapolated: bool = False
    capped: bool = False
    warnings: list = field(default_factory=list)


class CollapsedTail(NamedTuple):
    values: np.ndarray
    capped: bool


def choose_kstar(K, p):
    """Round ``K`` up to a power of two, clamped to at most ``p``.

    Parameters
    ----------
    K : int
        Upper bound on the plausible number of outliers, ``K >= 1``.
    p : int
        Number of p-values.

    Returns
    -------
    LadderSpec
    """
    if isinstance(K, bool) or not isinstance(K, (int, np.integer)) or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p < 1:
        raise DomainError(f"p must be a positive integer, got {p!r}")
    K, p = int(K), int(p)
    kstar = 1 << (K - 1).bit_length()
    warnings = ()
    if kstar > p:
        clamped = 1 << (p.bit_length() - 1)
        warnings = (f"K*={kstar} exceeds p={p}; using K*={clamped}",)
        kstar = clamped
    ladder = tuple(1 << e for e in range(kstar.bit_length()))
    return LadderSpec(K, kstar, ladder, warnings)


def _as_x(x):
    return x.x if isinstance(x, TransformResult) else np.asarray(x, dtype=np.float64)


def collapse_tail(x, spec):
    """Keep the top ``K* - 1`` exponentials and fold the rest into one.

    The weighted tail sum ``S = sum_{j >= K*} X_j / j`` is the ``K*``-th
    largest of ``p`` unit exponentials under the null, so ``exp(-S)`` is the
    ``K*``-th smallest of ``p`` uniforms, a Beta(K*, p - K* + 1) variable.
    Its log CDF, negated, is a unit exponential that grows with ``S``.

    Parameters
    ----------
    x : TransformResult or array_like
        Reverse-order exponentials ``X_1..X_p``.
    spec : LadderSpec

    Returns
    -------
    CollapsedTail
        ``values`` has length ``K*``.  ``capped`` is set if the folded
        value was not finite and was replaced by ``X_CAP``.
    """
    xs = _as_x(x)
    p = xs.shape[0]
    k = spec.kstar
    if k > p:
        raise DomainError(f"K*={k} exceeds p={p}")
    out = np.empty(k)
    out[:-1] = xs[:k - 1]
    tail = xs[k - 1:] / np.arange(k, p + 1, dtype=np.float64)
    s = math.fsum(tail[::-1].tolist())
    folded = -log_beta_lower_reg_logx(k, p - k + 1, -s)
    capped = not math.isfinite(folded)
    out[-1] = X_CAP if capped else folded
    return CollapsedTail(out, capped)


def rot_statistic(xt, spec):
    """Maximum over the ladder of the fixed-count log survival statistics.

    Parameters
    ----------
    xt : CollapsedTail or array_like
        Length-``K*`` collapsed exponentials.
    spec : LadderSpec

    Returns
    -------
    RotResult
        ``p_value_log`` left unset.
    """
    capped = False
    if isinstance(xt, CollapsedTail):
        xt, capped = xt.values, xt.capped
    xt = np.asarray(xt, dtype=np.float64)
    if xt.shape != (spec.kstar,):
        raise DomainError(f"expected {spec.kstar} values, got shape {xt.shape}")
    vals = xt.tolist()
    components = {}
    best_i, best = None, -math.inf
    for i in spec.ladder:
        s = math.fsum(vals[:i])
        if not math.isfinite(s):
            raise DomainError(f"non-finite partial sum for i={i}")
        comp = -log_gamma_upper_reg(i, s)
        components[i] = comp
        if comp > best:
            best_i, best = i, comp
    return RotResult(best, components, best_i, spec.kstar, capped=capped,
                     warnings=list(spec.warnings))


def fixed_k_test(x, k):
    """Log p-value of the single-count test comparing the top-``k`` sum to Gamma(k, 1)."""
    xs = _as_x(x)
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= xs.shape[0]:
        raise DomainError(f"k must be an integer in [1, {xs.shape[0]}], got {k!r}")
    return log_gamma_upper_reg(int(k), math.fsum(xs[:int(k)].tolist()))
