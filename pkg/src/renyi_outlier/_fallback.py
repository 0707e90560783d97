"""Pure-Python (numpy) implementations of the hot kernels.

Mirrors ``_kernels.pyx`` function for function; used when the compiled
extension is unavailable or ``RENYI_OUTLIER_PURE=1`` is set.
"""

import math

import numpy as np


def log_gamma_q_int(n, x):
    """``log Q(n, x)`` for integer ``1 <= n <= 512`` over a 1-D float64 array."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    nn = n - 1
    small = x < n
    if small.any():
        xs = x[small]
        s = np.ones_like(xs)
        for m in range(nn, 0, -1):
            s = 1.0 + s * xs / m
        out[small] = -xs + np.log(s)
    big = ~small
    if big.any():
        xb = x[big]
        t = np.ones_like(xb)
        for k in range(1, nn + 1):
            t = 1.0 + t * k / xb
        out[big] = -xb + nn * np.log(xb) - math.lgamma(n) + np.log(t)
    return np.minimum(out, 0.0)


def ladder_rho(xt, ladder):
    """Row-wise max over the ladder of ``-log Q(i, sum of first i entries)``."""
    xt = np.asarray(xt, dtype=np.float64)
    cs = np.cumsum(xt, axis=1)
    rho = None
    for i in ladder:
        comp = -log_gamma_q_int(int(i), cs[:, int(i) - 1])
        # strict comparison keeps the smallest ladder index on ties
        rho = comp if rho is None else np.where(comp > rho, comp, rho)
    return rho


def sweep_gaps(abscissa, delta, closes):
    """Integrate the piecewise-constant slope between consecutive closes.

    Parameters
    ----------
    abscissa : ndarray
        Sorted event positions, length ``2p``.
    delta : ndarray
        Slope change at each event (``+1/eta`` opens, ``-1/eta`` closes).
    closes : ndarray of bool
        True where the event is a score (deactivation) event.

    Returns
    -------
    ndarray
        Length ``p``; entry ``g`` is the compensator increment between the
        ``g``-th and ``(g+1)``-th close (the first measured from the start).
    """
    closes = np.asarray(closes, dtype=bool)
    p = int(closes.sum())
    # extended precision stands in for compensated accumulation here
    slope = np.cumsum(np.asarray(delta, dtype=np.longdouble)).astype(np.float64)
    np.maximum(slope, 0.0, out=slope)
    seg = slope[:-1] * np.diff(abscissa)
    gap = np.cumsum(closes)[:-1]
    return np.bincount(gap, weights=seg, minlength=p + 1)[:p]
