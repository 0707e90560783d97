import io
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from renyi_outlier.calibration import (
    FORMAT_VERSION,
    CalibrationTable,
    FitConfig,
    MalformedTableError,
    TableInvariantError,
    TableSet,
    TableVersionError,
    default_table_set,
    fit_table,
    load_table_set,
    lookup_log_pvalue,
    lookup_log_pvalues,
    save_table_set,
    simulate_null,
)
from renyi_outlier.specfun import DomainError

KS_001 = 1.6276  # asymptotic Kolmogorov critical value, alpha = 0.01


@pytest.fixture(scope="module")
def exp_table():
    return fit_table(simulate_null(1, 1_000_000, seed=7), 1, seed=7)


@pytest.fixture(scope="module")
def small_set():
    return TableSet({k: fit_table(simulate_null(k, 50_000, seed=k), k, seed=k) for k in (1, 4)})


def dumps(ts):
    buf = io.StringIO()
    save_table_set(ts, buf)
    return buf.getvalue()


# --- simulation ----------------------------------------------------------

def test_kstar_one_samples_are_exponential():
    s = simulate_null(1, 1_000_000, seed=3)
    assert abs(s.mean() - 1.0) < 0.005
    assert (s >= 0).all()


def test_simulation_deterministic():
    a = simulate_null(8, 70_000, seed=5)
    b = simulate_null(8, 70_000, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, simulate_null(8, 70_000, seed=6))


def test_simulation_thread_invariant():
    a = simulate_null(4, 150_000, seed=9, threads=1)
    b = simulate_null(4, 150_000, seed=9, threads=3)
    assert np.array_equal(a, b)


def test_simulation_prefix_stable():
    # block streams make a shorter run a prefix of a longer one
    assert np.array_equal(simulate_null(2, 1000, seed=1), simulate_null(2, 100_000, seed=1)[:1000])


@pytest.mark.parametrize("kstar,n,seed", [(1, 0, 1), (3, 10, 1), (2, -5, 1), (2, 10, -1)])
def test_simulation_errors(kstar, n, seed):
    with pytest.raises(DomainError):
        simulate_null(kstar, n, seed)


# --- fitting -------------------------------------------------------------

def test_exponential_fit(exp_table):
    assert -1.05 <= exp_table.tail_slope <= -0.95
    r = np.linspace(0.1, 5.0, 500)
    assert np.max(np.abs(exp_table.log_survival(r) + r)) < 0.02


def test_fit_continuity(exp_table):
    t = exp_table
    at_cut = t.log_survival(np.array([t.tail_cut]))[0]
    assert at_cut == t.tail_intercept
    # left limit of the last spline piece
    h = t.knots_x[-1] - t.knots_x[-2]
    b, c, d = t.coefs[-2]
    left = t.knots_y[-2] + h * (b + h * (c + h * d))
    assert left == pytest.approx(t.tail_intercept, abs=1e-12)


def test_fit_monotone_on_grid(exp_table, small_set):
    for t in [exp_table, *small_set.tables.values()]:
        grid = np.linspace(0.0, t.max_simulated * 1.5, 1000)
        assert (np.diff(t.log_survival(grid)) <= 1e-12).all()


def test_fit_deterministic():
    s = simulate_null(2, 40_000, seed=2)
    assert fit_table(s, 2, 2) == fit_table(s.copy(), 2, 2)


def test_fit_too_few_tail_points():
    with pytest.raises(DomainError):
        fit_table(simulate_null(2, 5_000, seed=1), 2, 1)


def test_fit_rejects_bad_input():
    with pytest.raises(DomainError):
        fit_table([], 2, 1)
    with pytest.raises(DomainError):
        fit_table(np.ones(10) * np.nan, 2, 1)
    with pytest.raises(DomainError):
        fit_table(simulate_null(2, 20_000, seed=1), 3, 1)


def test_fit_config_validation():
    with pytest.raises(DomainError):
        FitConfig(n_knots=2)
    with pytest.raises(DomainError):
        FitConfig(body_min_q=0.5, body_max_q=0.4)
    with pytest.raises(DomainError):
        FitConfig(tail_fraction=1.5)


def test_reknot_falls_back_to_monotone_cubic():
    # two-point mass plus noise gives a staircase the natural spline overshoots
    rng = np.random.default_rng(0)
    s = np.concatenate([np.full(30_000, 1.0), np.full(30_000, 3.0)]) + rng.uniform(0, 1e-3, 60_000)
    s = np.concatenate([s, 3.0 + rng.standard_exponential(20_000)])
    t = fit_table(s, 2, 0, FitConfig(n_knots=32))
    grid = np.linspace(0, t.max_simulated, 1000)
    assert (np.diff(t.log_survival(grid)) <= 1e-12).all()


# --- lookup --------------------------------------------------------------

def test_lookup_analytic_kstar_one(exp_table):
    lp, ext = lookup_log_pvalue(3.0, exp_table)
    assert lp == -3.0 and not ext
    assert math.exp(lp) == pytest.approx(0.049787, abs=1e-6)


def test_lookup_zero(small_set):
    for t in small_set.tables.values():
        assert lookup_log_pvalue(0.0, t)[0] == 0.0


def test_lookup_at_knots(small_set):
    t = small_set[4]
    lp, _ = lookup_log_pvalues(t.knots_x, t)
    np.testing.assert_allclose(lp, t.knots_y, atol=1e-9)


def test_lookup_extrapolation_flag(small_set):
    t = small_set[4]
    assert lookup_log_pvalue(t.max_simulated * 0.999, t)[1] is False
    lp, ext = lookup_log_pvalue(t.max_simulated + 50.0, t)
    assert ext and lp < lookup_log_pvalue(t.max_simulated, t)[0]


def test_lookup_negative_rho(small_set):
    with pytest.raises(DomainError):
        lookup_log_pvalue(-0.1, small_set[4])


def test_lookup_monotone_dense_grid():
    for t in default_table_set().tables.values():
        lp, _ = lookup_log_pvalues(np.linspace(0, 60, 20_000), t, analytic=False)
        assert (np.diff(lp) <= 0).all() and (lp <= 0).all()


def test_analytic_agrees_with_kstar_one_table():
    t = default_table_set()[1]
    rho = np.linspace(0.0, -math.log(1e-4), 400)
    table_p = np.exp(lookup_log_pvalues(rho, t, analytic=False)[0])
    exact = np.exp(-rho)
    assert np.max(np.abs(table_p / exact - 1.0)) < 0.10


@pytest.mark.parametrize("kstar", [2, 8, 64])
def test_end_to_end_null_uniformity(kstar):
    rho = simulate_null(kstar, 100_000, seed=2 ** 40 + kstar)
    lp, _ = lookup_log_pvalues(rho, default_table_set()[kstar])
    assert stats.kstest(np.exp(lp), "uniform").statistic < KS_001 / math.sqrt(rho.size)


@pytest.mark.parametrize("kstar", [8, 32])
def test_tail_is_log_linear(kstar):
    # residuals of the shipped tail line against a fresh empirical tail
    t = default_table_set()[kstar]
    n = 4_000_000
    s = np.sort(simulate_null(kstar, n, seed=99))
    for surv in (1e-2, 1e-3, 1e-4):
        r = s[int(n * (1 - surv))]
        assert abs(t.log_survival(np.array([r]))[0] - math.log(surv)) < 0.2


# --- serialization -------------------------------------------------------

def test_round_trip(small_set, tmp_path):
    path = tmp_path / "t.rottab"
    save_table_set(small_set, path)
    back = load_table_set(path)
    assert back == small_set
    for k in small_set.tables:
        assert back[k].tail_slope == small_set[k].tail_slope
        assert np.array_equal(back[k].coefs, small_set[k].coefs)
    assert dumps(back) == dumps(small_set)


def test_truncated_file(small_set):
    text = dumps(small_set)
    for cut in (10, len(text) // 2, len(text) - 5):
        with pytest.raises(MalformedTableError):
            load_table_set(io.StringIO(text[:cut]))


def test_garbage_value(small_set):
    text = dumps(small_set).replace("tail_slope ", "tail_slope x", 1)
    with pytest.raises(MalformedTableError):
        load_table_set(io.StringIO(text))


def test_version_mismatch(small_set):
    text = dumps(small_set).replace(f"ROTTAB v{FORMAT_VERSION}", "ROTTAB v99", 1)
    with pytest.raises(TableVersionError):
        load_table_set(io.StringIO(text))


def test_non_monotone_spline_rejected(small_set):
    t = small_set[4]
    coefs = t.coefs.copy()
    coefs[10, 0] = 5.0  # positive slope on one piece
    text = dumps(TableSet({4: replace(t, coefs=coefs)}))
    with pytest.raises(TableInvariantError):
        load_table_set(io.StringIO(text))


def test_discontinuous_tail_rejected(small_set):
    bad = replace(small_set[4], tail_intercept=small_set[4].tail_intercept - 0.1)
    with pytest.raises(TableInvariantError):
        bad.validate()


def test_positive_tail_slope_rejected(small_set):
    with pytest.raises(TableInvariantError):
        replace(small_set[4], tail_slope=0.5).validate()


def test_table_set_key_mismatch(small_set):
    with pytest.raises(TableInvariantError):
        TableSet({2: small_set[4]})


def test_missing_table_guidance(small_set):
    with pytest.raises(KeyError, match="calibrate --kstar 256"):
        small_set[256]


def test_default_tables_present():
    ts = default_table_set()
    assert sorted(ts.tables) == [1, 2, 4, 8, 16, 32, 64, 128]
    for k, t in ts.tables.items():
        assert isinstance(t, CalibrationTable) and t.kstar == k
        assert t.n_sims == 10_000_000
        t.validate()
