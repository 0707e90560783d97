import math

import numpy as np
import pytest

from renyi_outlier import LogPValueVector, MissingTableError, PriorWeights, TableSet, rot_test


def test_kstar_one_is_analytic():
    res = rot_test([math.log(0.5)], 1)
    assert res.p_value_log == -res.rho
    assert res.rho == pytest.approx(math.log(2.0))


def test_null_pvalue_is_unremarkable():
    rng = np.random.default_rng(8)
    res = rot_test(np.log(rng.uniform(size=2000)), 8)
    assert res.kstar == 8 and set(res.components) == {1, 2, 4, 8}
    assert -5.0 < res.p_value_log <= 0.0
    assert not res.extrapolated


def test_strong_signal_extrapolates_with_warning():
    rng = np.random.default_rng(9)
    logp = np.log(rng.uniform(size=1000))
    logp[:3] = -200.0
    res = rot_test(logp, 4)
    assert res.extrapolated and any("extrapolated" in w for w in res.warnings)
    assert res.p_value_log < -100


def test_clamp_and_kstar_warnings_propagate():
    v = LogPValueVector.from_pvalues([0.0, 0.4, 0.6], strict=False)
    res = rot_test(v, 8, strict=False)
    assert res.kstar == 2
    assert any("clamped" in w for w in res.warnings)
    assert any("exceeds p" in w for w in res.warnings)


def test_weights_are_used():
    logp = np.log([1e-4, 0.5, 0.3, 0.8])
    flat = rot_test(logp, 2)
    favoured = rot_test(logp, 2, weights=PriorWeights([100.0, 1, 1, 1], [1.0, 1, 1, 1]))
    assert favoured.rho != flat.rho


def test_missing_table():
    with pytest.raises(MissingTableError):
        rot_test(np.log(np.full(10, 0.5)), 4, tables=TableSet({}))
