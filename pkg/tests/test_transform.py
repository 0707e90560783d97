import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from renyi_outlier.specfun import DomainError
from renyi_outlier.transform import (
    LOG_FLOOR,
    LogPValueVector,
    PriorWeights,
    classical_renyi_oracle,
    compute_scores,
    renyi_transform,
)

LOG5 = math.log(5.0)
TWO_LOG2 = 2.0 * math.log(2.0)


def weights(pi, eta):
    return PriorWeights(np.asarray(pi, float), np.asarray(eta, float))


# --- scores --------------------------------------------------------------

def test_scores_neutral():
    z, zeta = compute_scores([math.log(0.5)])
    assert z[0] == pytest.approx(math.log(2.0))
    assert zeta[0] == 0.0


def test_scores_weighted():
    z, zeta = compute_scores([math.log(0.5)], weights([math.e], [2.0]))
    assert z[0] == pytest.approx(3.386294, abs=1e-6)
    assert zeta[0] == pytest.approx(2.0)


def test_scores_unit_prior_gives_zero_thresholds():
    _, zeta = compute_scores(np.log([0.1, 0.7, 0.3]), weights([1, 1, 1], [0.5, 2.0, 7.0]))
    assert (zeta == 0).all()


def test_scores_length_mismatch():
    with pytest.raises(DomainError):
        compute_scores([-1.0, -2.0], PriorWeights.neutral(3))


# --- input validation ----------------------------------------------------

def test_strict_rejects_zero_pvalue():
    with pytest.raises(DomainError):
        LogPValueVector.from_pvalues([0.0, 0.5])


def test_lenient_clamps_zero_pvalue():
    v = LogPValueVector.from_pvalues([0.0, 0.5], strict=False)
    assert v.clamped == 1 and v.logp[0] == LOG_FLOOR
    tr = renyi_transform(v)
    assert tr.clamped == 1 and tr.warnings
    assert np.isfinite(tr.x).all()


@pytest.mark.parametrize("bad", [[0.1], [math.nan], []])
def test_logp_domain(bad):
    with pytest.raises(DomainError):
        LogPValueVector.from_logp(bad)


@pytest.mark.parametrize("pi,eta", [([0.0], [1.0]), ([1.0], [-1.0]), ([math.inf], [1.0]), ([1, 1], [1])])
def test_weight_domain(pi, eta):
    with pytest.raises(DomainError):
        PriorWeights(pi, eta)


def test_pvalue_one_is_legal():
    tr = renyi_transform(np.log([1.0, 0.5]))
    assert tr.x.tolist() == pytest.approx([math.log(2.0), 0.0])


# --- transform examples --------------------------------------------------

def test_single_pvalue():
    tr = renyi_transform([math.log(0.5)])
    assert tr.x.tolist() == pytest.approx([math.log(2.0)], abs=1e-15)


def test_two_pvalues():
    tr = renyi_transform(np.log([0.5, 0.1]))
    np.testing.assert_allclose(tr.x, [LOG5, TWO_LOG2], atol=1e-15)
    assert tr.order.tolist() == [1, 0]


def test_two_pvalues_common_eta():
    tr = renyi_transform(np.log([0.5, 0.1]), weights([1, 1], [3, 3]))
    np.testing.assert_allclose(tr.x, [LOG5, TWO_LOG2], atol=1e-14)


def test_oracle_examples():
    np.testing.assert_allclose(classical_renyi_oracle([0.1, 0.5]), [LOG5, TWO_LOG2], atol=1e-15)
    assert classical_renyi_oracle([0.3]).tolist() == pytest.approx([-math.log(0.3)])
    np.testing.assert_allclose(classical_renyi_oracle([0.25, 0.25]), [0.0, 2.772589], atol=1e-6)


def test_oracle_rejects_unsorted():
    with pytest.raises(DomainError):
        classical_renyi_oracle([0.5, 0.1])


def test_ties_give_zero_gap():
    tr = renyi_transform(np.log([0.25, 0.25, 0.9]))
    assert tr.x[0] == 0.0
    assert (tr.x[1:] > 0).all()


def test_extreme_pvalue_does_not_cancel():
    # a gap between two moderate scores must not be lost next to a huge one
    logp = np.array([-700.0, math.log(0.2), math.log(0.4)])
    tr = renyi_transform(logp)
    np.testing.assert_allclose(tr.x[1:], [2 * math.log(2.0), 3 * math.log(2.5)], rtol=1e-14)
    assert tr.x[0] == pytest.approx(700.0 + math.log(0.2), rel=1e-15)


# --- properties ----------------------------------------------------------

logp_vectors = arrays(np.float64, st.integers(1, 60),
                      elements=st.floats(-300.0, 0.0, allow_nan=False))
pos = st.floats(0.05, 20.0)


@st.composite
def weighted_inputs(draw):
    logp = draw(logp_vectors)
    p = logp.shape[0]
    pi = draw(arrays(np.float64, p, elements=pos))
    eta = draw(arrays(np.float64, p, elements=pos))
    return logp, PriorWeights(pi, eta)


@settings(max_examples=200, deadline=None)
@given(weighted_inputs())
def test_conservation(args):
    logp, w = args
    tr = renyi_transform(logp, w)
    total = math.fsum((-logp).tolist())
    assert tr.total == total
    assert (tr.x >= 0).all()
    got = math.fsum(tr.x.tolist())
    # event positions eta*(-logp + log pi) are rounded; that rounding, scaled
    # by the slope 1/eta, bounds what any position-based sweep can conserve
    z, zeta = compute_scores(logp, w)
    scale = max(np.abs(z).max(), np.abs(zeta).max()) * (1.0 / w.eta).max()
    assert abs(got - total) <= 1e-12 * total + 8 * z.size * 2.3e-16 * scale


@settings(max_examples=200, deadline=None)
@given(logp_vectors, arrays(np.float64, 60, elements=pos))
def test_conservation_unit_prior(logp, eta):
    # no p-value has -log p below 1e-300 other than p = 1 itself
    logp = np.where(logp > -1e-300, 0.0, logp)
    w = PriorWeights(np.ones(logp.size), eta[:logp.size])
    tr = renyi_transform(logp, w)
    got = math.fsum(tr.x.tolist())
    assert abs(got - tr.total) <= 1e-12 * tr.total


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 1000), elements=st.floats(1e-12, 1.0)))
def test_classical_equivalence(u):
    tr = renyi_transform(np.log(u))
    oracle = classical_renyi_oracle(np.sort(u))
    assert np.max(np.abs(tr.x - oracle)) < 1e-9


@settings(max_examples=100, deadline=None)
@given(weighted_inputs(), st.floats(0.01, 100.0))
def test_common_eta_scaling(args, c):
    logp, w = args
    a = renyi_transform(logp, w).x
    b = renyi_transform(logp, PriorWeights(w.pi, c * w.eta)).x
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * max(1.0, a.sum()))


@settings(max_examples=100, deadline=None)
@given(weighted_inputs(), st.floats(0.01, 100.0), st.floats(0.1, 10.0))
def test_common_pi_scaling_with_constant_eta(args, c, eta0):
    logp, w = args
    eta = np.full(len(w), eta0)
    a = renyi_transform(logp, PriorWeights(w.pi, eta)).x
    b = renyi_transform(logp, PriorWeights(c * w.pi, eta)).x
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * max(1.0, a.sum()))


@settings(max_examples=100, deadline=None)
@given(weighted_inputs(), st.randoms(use_true_random=False))
def test_permutation_invariance(args, rnd):
    logp, w = args
    perm = list(range(logp.shape[0]))
    rnd.shuffle(perm)
    # distinct scores keep the tie order irrelevant
    z, _ = compute_scores(logp, w)
    assume(np.unique(z).size == z.size)
    a = renyi_transform(logp, w)
    b = renyi_transform(logp[perm], PriorWeights(w.pi[perm], w.eta[perm]))
    np.testing.assert_allclose(a.x, b.x, rtol=1e-12, atol=1e-12)
    assert [perm[i] for i in b.order] == a.order.tolist()


def test_order_is_descending_score():
    rng = np.random.default_rng(4)
    logp = np.log(rng.uniform(size=50))
    w = PriorWeights(rng.uniform(0.5, 2, 50), rng.uniform(0.5, 2, 50))
    z, _ = compute_scores(logp, w)
    tr = renyi_transform(logp, w)
    assert (np.diff(z[tr.order]) <= 0).all()


def test_null_exponential_with_random_weights():
    rng = np.random.default_rng(2024)
    pooled = []
    for _ in range(40):
        p = 500
        w = PriorWeights(np.exp(rng.standard_normal(p)), 0.5 + np.abs(rng.standard_normal(p)))
        pooled.append(renyi_transform(np.log(rng.uniform(size=p)), w).x)
    x = np.concatenate(pooled)
    crit = 1.9495 / math.sqrt(x.size)
    assert stats.kstest(x, "expon").statistic < crit
