"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per kernel and backend plus the speedup.
"""

import argparse
import timeit

import numpy as np

from renyi_outlier import _fallback

try:
    from renyi_outlier import _kernels
except ImportError:
    _kernels = None


def sweep_inputs(p, rng):
    eta = rng.uniform(0.5, 2.0, p)
    zeta = eta * np.log(rng.uniform(0.2, 5.0, p))
    z = zeta - eta * np.log(rng.uniform(size=p))
    ab = np.concatenate([zeta, z])
    delta = np.concatenate([1 / eta, -1 / eta])
    closes = np.r_[np.zeros(p, np.uint8), np.ones(p, np.uint8)]
    perm = np.argsort(ab, kind="stable")
    return ab[perm], delta[perm], closes[perm]


def cases(rng):
    ab, delta, closes = sweep_inputs(1_000_000, rng)
    yield "sweep_gaps p=1e6", lambda k: k.sweep_gaps(ab, delta, closes)
    for kstar in (8, 128):
        xt = rng.standard_exponential((65_536, kstar))
        ladder = np.array([1 << e for e in range(kstar.bit_length())], dtype=np.int64)
        yield f"ladder_rho 65536x{kstar}", lambda k, xt=xt, ladder=ladder: k.ladder_rho(xt, ladder)
    x = rng.uniform(0, 300, 1_000_000)
    yield "log_gamma_q_int n=64 1e6", lambda k: k.log_gamma_q_int(64, x)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    backends = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    if _kernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn in cases(np.random.default_rng(args.seed)):
        best = [min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) for _, mod in backends]
        row = f"{label:<28}" + "".join(f"{t * 1e3:>10.1f}ms" for t in best)
        if len(best) == 2:
            row += f"{best[0] / best[1]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
