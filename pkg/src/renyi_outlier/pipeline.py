"""End-to-end test: transform, collapse, statistic, calibrated p-value."""

from .calibration import default_table_set, lookup_log_pvalue
from .statistic import choose_kstar, collapse_tail, rot_statistic
from .transform import LogPValueVector, PriorWeights, renyi_transform

__all__ = ["rot_test", "MissingTableError"]


class MissingTableError(KeyError):
    """No calibration table is available for the requested ``K*``."""


def rot_test(logp, K, weights=None, tables=None, strict=True):
    """Run the Renyi outlier test on one vector of p-values.

    Parameters
    ----------
    logp : LogPValueVector or array_like
        Natural-log p-values (use ``LogPValueVector.from_pvalues`` for raw
        p-values).
    K : int
        Rough upper bound on the number of outliers.
    weights : PriorWeights, optional
        Prior and effect-size weights; all ones by default.
    tables : TableSet, optional
        Calibration tables; the packaged defaults cover ``K*`` up to 128.
    strict : bool
        Reject zero p-values instead of clamping them.

    Returns
    -------
    RotResult
        With ``p_value_log`` filled in.
    """
    if not isinstance(logp, LogPValueVector):
        logp = LogPValueVector.from_logp(logp, strict=strict)
    if weights is None:
        weights = PriorWeights.neutral(len(logp))
    spec = choose_kstar(K, len(logp))
    tr = renyi_transform(logp, weights)
    result = rot_statistic(collapse_tail(tr, spec), spec)
    result.warnings.extend(tr.warnings)
    if result.capped:
        result.warnings.append("collapsed tail value was infinite and has been capped")
    if spec.kstar == 1:
        result.p_value_log = -result.rho
        return result
    if tables is None:
        tables = default_table_set()
    if spec.kstar not in tables:
        raise MissingTableError(
            f"no calibration table for K*={spec.kstar}; run 'renyi-rot calibrate "
            f"--kstar {spec.kstar}' and pass the file with --tables")
    result.p_value_log, result.extrapolated = lookup_log_pvalue(result.rho, tables[spec.kstar])
    if result.extrapolated:
        result.warnings.append("rho exceeds every simulated value; p-value extrapolated from the tail fit")
    return result

