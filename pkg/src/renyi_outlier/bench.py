"""Monte Carlo power comparison of the omnibus test against simpler tests.

A scenario plants ``k_true`` outlying p-values among ``p`` uniforms and
records how often each method rejects at level ``alpha``.  Replicate ``r``
draws from a Philox stream keyed by ``(seed, r)``, so rates do not depend
on the number of worker threads.
"""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .calibration import default_table_set, lookup_log_pvalue
from .specfun import DomainError
from .statistic import choose_kstar, collapse_tail, fixed_k_test, rot_statistic
from .transform import renyi_transform

__all__ = ["Scenario", "MethodSpec", "load_scenario", "run_power_bench", "write_results_csv"]

_LAWS = ("scaled_uniform", "beta", "fixed")


@dataclass(frozen=True)
class MethodSpec:
    """One method to benchmark: ``rot`` (needs ``K``), ``fixed_k`` (needs ``k``) or ``min_p``."""

    method: str
    param: int | None = None

    @property
    def label(self):
        if self.method == "rot":
            return f"rot(K={self.param})"
        if self.method == "fixed_k":
            return f"fixed_k(k={self.param})"
        return "min_p_bonferroni"


@dataclass(frozen=True)
class Scenario:
    p: int
    k_true: int
    replicates: int
    alpha: float
    methods: tuple
    law: str = "scaled_uniform"
    law_param: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise DomainError("p must be >= 1")
        if not 0 <= self.k_true <= self.p:
            raise DomainError("k_true must lie in [0, p]")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if self.law not in _LAWS:
            raise DomainError(f"outlier law must be one of {_LAWS}")
        if self.law == "scaled_uniform" and not 0.0 < self.law_param <= 1.0:
            raise DomainError("scaled_uniform scale must lie in (0, 1]")
        if self.law == "beta" and not self.law_param > 0:
            raise DomainError("beta shape must be > 0")
        if self.law == "fixed" and not self.law_param <= 0:
            raise DomainError("fixed outlier log p-value must be <= 0")
        if not self.methods:
            raise DomainError("no methods given")
        for m in self.methods:
            if m.method in ("rot", "fixed_k"):
                if m.param is None or m.param < 1:
                    raise DomainError(f"{m.method} needs a positive integer parameter")
                if m.method == "fixed_k" and m.param > self.p:
                    raise DomainError("fixed_k parameter exceeds p")
            elif m.method != "min_p":
                raise DomainError(f"unknown method {m.method!r}")


def _parse_method(entry):
    name = entry.get("method")
    if name == "rot":
        return MethodSpec("rot", int(entry["K"]))
    if name == "fixed_k":
        return MethodSpec("fixed_k", int(entry["k"]))
    if name in ("min_p", "bonferroni"):
        return MethodSpec("min_p")
    raise DomainError(f"unknown method {name!r}")


def load_scenario(source):
    """Build a :class:`Scenario` from a JSON file path or a dict.

    Example::

        {"p": 10000, "k_true": 4, "replicates": 500, "alpha": 0.05, "seed": 1,
         "outlier": {"law": "scaled_uniform", "scale": 1e-6},
         "methods": [{"method": "rot", "K": 16}, {"method": "fixed_k", "k": 128},
                     {"method": "min_p"}]}

    Outlier laws: ``scaled_uniform`` (``scale * Uniform``), ``beta``
    (Beta(a, 1), param ``a``) and ``fixed`` (param ``logp``).
    """
    if isinstance(source, dict):
        cfg = source
    else:
        with open(source) as fh:
            cfg = json.load(fh)
    try:
        outlier = cfg.get("outlier", {"law": "scaled_uniform", "scale": 1e-6})
        law = outlier.get("law", "scaled_uniform")
        key = {"scaled_uniform": "scale", "beta": "a", "fixed": "logp"}.get(law)
        if key is None:
            raise DomainError(f"outlier law must be one of {_LAWS}")
        return Scenario(
            p=int(cfg["p"]),
            k_true=int(cfg.get("k_true", 0)),
            replicates=int(cfg["replicates"]),
            alpha=float(cfg.get("alpha", 0.05)),
            methods=tuple(_parse_method(m) for m in cfg["methods"]),
            law=law,
            law_param=float(outlier[key]),
            seed=int(cfg.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"invalid scenario config: {exc!r}") from None


def _draw_logp(sc, r):
    rng = np.random.Generator(np.random.Philox(key=(r << 64) | sc.seed))
    logp = -rng.standard_exponential(sc.p)
    k = sc.k_true
    if k:
        if sc.law == "scaled_uniform":
            logp[:k] = math.log(sc.law_param) - rng.standard_exponential(k)
        elif sc.law == "beta":
            logp[:k] = -rng.standard_exponential(k) / sc.law_param
        else:
            logp[:k] = sc.law_param
    return logp


def _replicate(sc, r, tables):
    logp = _draw_logp(sc, r)
    tr = renyi_transform(logp)
    out = []
    for m in sc.methods:
        if m.method == "rot":
            spec = choose_kstar(m.param, sc.p)
            res = rot_statistic(collapse_tail(tr, spec), spec)
            lp = -res.rho if spec.kstar == 1 else lookup_log_pvalue(res.rho, tables[spec.kstar])[0]
        elif m.method == "fixed_k":
            lp = fixed_k_test(tr, m.param)
        else:
            lp = min(0.0, math.log(sc.p) + float(logp.min()))
        out.append(lp)
    return out


def run_power_bench(scenario, tables=None, threads=1):
    """Rejection rate of every method with its Monte Carlo standard error.

    Returns
    -------
    list of dict
        Keys ``method``, ``replicates``, ``rejections``, ``rate``, ``mc_se``.
    """
    sc = scenario
    if tables is None:
        tables = default_table_set()
    for m in sc.methods:
        if m.method == "rot":
            kstar = choose_kstar(m.param, sc.p).kstar
            if kstar > 1 and kstar not in tables:
                raise KeyError(f"no calibration table for K*={kstar}")

    def run(r):
        return _replicate(sc, r, tables)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            logps = list(pool.map(run, range(sc.replicates)))
    else:
        logps = [run(r) for r in range(sc.replicates)]
    logps = np.array(logps)
    log_alpha = math.log(sc.alpha)
    rows = []
    for j, m in enumerate(sc.methods):
        rej = int((logps[:, j] <= log_alpha).sum())
        rate = rej / sc.replicates
        rows.append({
            "method": m.label,
            "replicates": sc.replicates,
            "rejections": rej,
            "rate": rate,
            "mc_se": math.sqrt(rate * (1.0 - rate) / sc.replicates),
        })
    return rows


def write_results_csv(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=["method", "replicates", "rejections", "rate", "mc_se"],
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
