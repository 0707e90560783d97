"""Generalized Renyi transformation of weighted p-values.

Each element gets a score ``Z_j = eta_j * (-log U_j + log pi_j)``, which
exceeds the threshold ``zeta_j = eta_j * log pi_j``.  Counting the scores
on the time scale of their compensator

    Lambda(t) = sum_j (min(t, Z_j) - min(t, zeta_j)) / eta_j

turns them into a unit-rate Poisson process, so the gaps between
successive transformed scores, read from the largest score downward, are
i.i.d. unit exponentials under the global null.  With unit weights this is
the classical ``j * log(u_{j+1} / u_j)`` spacing transform.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .specfun import DomainError

__all__ = [
    "LOG_FLOOR",
    "LogPValueVector",
    "PriorWeights",
    "TransformResult",
    "compute_scores",
    "renyi_transform",
    "classical_renyi_oracle",
]

LOG_FLOOR = math.log(1e-320)


@dataclass(frozen=True)
class LogPValueVector:
    """Natural-log p-values, optionally labelled.

    Use :meth:`from_logp` or :meth:`from_pvalues` rather than the raw
    constructor; they validate and apply the zero-p-value policy.
    """

    logp: np.ndarray
    ids: tuple | None = None
    clamped: int = 0

    def __len__(self):
        return self.logp.shape[0]

    @classmethod
    def from_logp(cls, logp, ids=None, strict=True, floor=LOG_FLOOR):
        """Validate log p-values.

        ``-inf`` (a p-value of exactly zero) raises in strict mode and is
        clamped to ``floor`` otherwise; ``clamped`` counts such entries.
        """
        arr = np.array(logp, dtype=np.float64, copy=True).reshape(-1)
        if arr.size == 0:
            raise DomainError("need at least one p-value")
        if np.isnan(arr).any() or (arr > 0).any():
            raise DomainError("log p-values must be <= 0 and not NaN")
        zero = np.isneginf(arr)
        n_zero = int(zero.sum())
        if n_zero:
            if strict:
                raise DomainError(
                    f"{n_zero} p-value(s) are exactly 0; rerun in lenient mode to clamp them")
            arr[zero] = floor
        if ids is not None:
            ids = tuple(ids)
            if len(ids) != arr.size:
                raise DomainError("ids and p-values differ in length")
        arr.setflags(write=False)
        return cls(arr, ids, n_zero)

    @classmethod
    def from_pvalues(cls, pvalues, ids=None, strict=True, floor=LOG_FLOOR):
        """Convert raw p-values in [0, 1] to logs immediately."""
        p = np.asarray(pvalues, dtype=np.float64).reshape(-1)
        if np.isnan(p).any() or (p < 0).any() or (p > 1).any():
            raise DomainError("p-values must lie in [0, 1]")
        with np.errstate(divide="ignore"):
            logp = np.log(p)
        return cls.from_logp(logp, ids=ids, strict=strict, floor=floor)


@dataclass(frozen=True)
class PriorWeights:
    """Per-element prior weight ``pi`` and effect-size weight ``eta``.

    Weights are used exactly as given.  Multiplying every ``eta`` by a
    constant, or (with constant ``eta``) every ``pi`` by a constant, leaves
    the transform unchanged.
    """

    pi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=np.float64).reshape(-1)
        eta = np.array(self.eta, dtype=np.float64).reshape(-1)
        if pi.shape != eta.shape:
            raise DomainError("pi and eta differ in length")
        for name, arr in (("pi", pi), ("eta", eta)):
            if not np.isfinite(arr).all() or (arr <= 0).any():
                raise DomainError(f"{name} must be finite and > 0")
            arr.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "eta", eta)

    def __len__(self):
        return self.pi.shape[0]

    @classmethod
    def neutral(cls, p):
        return cls(np.ones(p), np.ones(p))


@dataclass(frozen=True)
class TransformResult:
    """Reverse-order interarrival exponentials.

    Attributes
    ----------
    x : ndarray
        ``x[0]`` is the gap above the second-largest transformed score,
        ``x[-1]`` the first transformed score itself.
    total : float
        ``sum(-log U_j)``; equals ``x.sum()`` up to rounding.
    order : ndarray
        Original indices by descending score; ``order[0]`` is the element
        whose score closes gap ``x[0]``.
    clamped : int
        Number of zero p-values clamped in lenient mode.
    """

    x: np.ndarray
    total: float
    order: np.ndarray
    clamped: int = 0
    warnings: tuple = field(default=())

    @property
    def p(self):
        return self.x.shape[0]


def _coerce(input, w):
    if not isinstance(input, LogPValueVector):
        input = LogPValueVector.from_logp(input)
    if w is None:
        w = PriorWeights.neutral(len(input))
    if len(w) != len(input):
        raise DomainError(f"{len(w)} weights for {len(input)} p-values")
    return input, w


def compute_scores(input, w=None):
    """Scores ``Z_j`` and thresholds ``zeta_j`` for each element.

    Returns
    -------
    z, zeta : ndarray
        ``z = eta * (-logp + log pi)``, ``zeta = eta * log pi``.
    """
    input, w = _coerce(input, w)
    log_pi = np.log(w.pi)
    z = w.eta * (-input.logp + log_pi)
    zeta = w.eta * log_pi
    if not np.isfinite(z).all():
        raise DomainError("non-finite score; check for zero p-values or extreme weights")
    return z, zeta


def renyi_transform(input, w=None):
    """Map weighted log p-values to reverse-order interarrival times.

    The compensator is piecewise linear with a kink at every ``zeta_j`` and
    ``Z_j``.  A single sweep over the sorted kinks integrates its slope
    segment by segment into the gap that contains each segment, so no gap
    is formed by subtracting two large cumulative values.  At equal
    positions thresholds are processed before scores and scores keep their
    input order.

    Parameters
    ----------
    input : LogPValueVector or array_like
        Log p-values (array input is validated in strict mode).
    w : PriorWeights, optional
        Defaults to all-ones weights.

    Returns
    -------
    TransformResult
    """
    input, w = _coerce(input, w)
    z, zeta = compute_scores(input, w)
    p = z.shape[0]
    inv_eta = 1.0 / w.eta
    abscissa = np.concatenate([zeta, z])
    delta = np.concatenate([inv_eta, -inv_eta])
    closes = np.zeros(2 * p, dtype=np.uint8)
    closes[p:] = 1
    perm = np.argsort(abscissa, kind="stable")
    cl = closes[perm]
    gaps = kernels.sweep_gaps(abscissa[perm], delta[perm], cl)
    order = perm[cl.astype(bool)][::-1] - p
    total = math.fsum((-input.logp).tolist())
    warnings = ()
    if input.clamped:
        warnings = (f"{input.clamped} zero p-value(s) clamped to exp({LOG_FLOOR:.2f})",)
    return TransformResult(gaps[::-1].copy(), total, order, input.clamped, warnings)


def classical_renyi_oracle(sorted_u):
    """Classical Renyi spacing transform of ascending uniforms.

    Returns ``j * log(u[j+1] / u[j])`` for ``j < p`` and ``-p * log(u[p])``
    (1-based).  Kept as an independent check on :func:`renyi_transform`.
    """
    u = np.asarray(sorted_u, dtype=np.float64).reshape(-1)
    if u.size == 0 or (u <= 0).any() or (u > 1).any():
        raise DomainError("values must lie in (0, 1]")
    if (np.diff(u) < 0).any():
        raise DomainError("values must be sorted ascending")
    p = u.size
    j = np.arange(1, p + 1, dtype=np.float64)
    out = np.empty(p)
    out[:-1] = j[:-1] * np.log(u[1:] / u[:-1])
    out[-1] = -p * np.log(u[-1])
    return out
