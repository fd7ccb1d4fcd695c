import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mcme.core import (DimensionError, DomainError, FitConfig, FitResult, LossVector,
                       as_selection, beta_from_tau, beta_rigid, certified_rank, chi2_cdf,
                       chi2_quantile, default_rank, mcme_objective, tau_regression,
                       threshold_selection, truncated_objective)

# scipy.stats.chi2 reference values
CHI2_1_999 = 10.827566170662733
CHI2_3_1EM6 = 30.664849706213598
CHI2_2_99 = 9.21034037197618


def test_mcme_objective_examples():
    assert mcme_objective(LossVector([0.1, 5.0], 1.0), [0, 1]) == pytest.approx(1.1)
    assert mcme_objective(LossVector([0, 0, 0], 1.0), [0, 0, 0]) == 0.0
    assert mcme_objective(LossVector([3, 3], 2.0), [1, 1]) == 4.0


def test_mcme_objective_length_mismatch():
    with pytest.raises(DimensionError):
        mcme_objective(LossVector([1.0, 2.0], 1.0), [0])


def test_truncated_examples():
    val, sel = truncated_objective(LossVector([0.1, 5.0], 1.0))
    assert val == pytest.approx(1.1)
    assert sel.tolist() == [0, 1]
    for beta in (0.3, 1.0, 7.5):
        val, sel = truncated_objective(LossVector([beta, beta], beta))
        assert val == 2 * beta
        assert sel.tolist() == [0, 0]


def test_truncated_matches_enumeration_n8():
    rng = np.random.default_rng(3)
    phi = LossVector(rng.uniform(0, 2, 8), 0.7)
    brute = min(mcme_objective(phi, s) for s in itertools.product((0, 1), repeat=8))
    assert truncated_objective(phi)[0] == pytest.approx(brute, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=9), st.floats(0.01, 5),
       st.data())
def test_truncated_is_lower_bound(phi, beta, data):
    lv = LossVector(phi, beta)
    s = data.draw(st.lists(st.integers(0, 1), min_size=len(phi), max_size=len(phi)))
    assert mcme_objective(lv, s) - truncated_objective(lv)[0] >= -1e-12


def test_loss_vector_validation():
    with pytest.raises(DomainError):
        LossVector([-1.0], 1.0)
    with pytest.raises(DomainError):
        LossVector([1.0], 0.0)
    with pytest.raises(DimensionError):
        LossVector([], 1.0)
    lv = LossVector([1.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        lv.phi[0] = 5.0


def test_selection_validation():
    assert as_selection([0, 1, 1]).dtype == np.int8
    with pytest.raises(DomainError):
        as_selection([0, 2])
    with pytest.raises(DimensionError):
        as_selection([0, 1], n=3)


def test_threshold_tie_goes_to_inlier():
    assert threshold_selection([1.0, 1.0 + 1e-12, 0.5], 1.0).tolist() == [0, 1, 0]


def test_beta_from_tau():
    assert beta_from_tau(0.5) == 0.25
    assert beta_from_tau(4) == 16
    assert beta_from_tau(1) == 1
    with pytest.raises(DomainError):
        beta_from_tau(0)
    with pytest.raises(DomainError):
        beta_from_tau(-1)


def test_chi2_quantile_known():
    assert chi2_quantile(2, 0.5) == pytest.approx(2 * math.log(2), abs=1e-10)
    assert chi2_quantile(1, 0.999) == pytest.approx(CHI2_1_999, abs=1e-8)
    assert chi2_quantile(3, 1 - 1e-6) == pytest.approx(CHI2_3_1EM6, abs=1e-8)
    assert chi2_quantile(2, 0.99) == pytest.approx(CHI2_2_99, abs=1e-8)


@pytest.mark.parametrize("dof", [1, 2, 3, 5, 10, 30])
@pytest.mark.parametrize("p", [1e-6, 0.01, 0.3, 0.5, 0.9, 0.999, 1 - 1e-9])
def test_chi2_quantile_against_scipy(dof, p):
    x = chi2_quantile(dof, p)
    assert chi2_cdf(x, dof) == pytest.approx(p, abs=1e-8)
    assert x == pytest.approx(stats.chi2.ppf(p, dof), rel=1e-8, abs=1e-9)


def test_chi2_quantile_monotone():
    for dof in (1, 2, 3, 7):
        xs = [chi2_quantile(dof, p) for p in np.linspace(0.01, 0.99, 60)]
        assert np.all(np.diff(xs) > 0)


def test_chi2_quantile_bad_args():
    for args in [(1, 0.0), (1, 1.0), (1, -0.1), (0, 0.5), (1.5, 0.5)]:
        with pytest.raises(DomainError):
            chi2_quantile(*args)


def test_beta_presets():
    assert beta_rigid(0.01) == pytest.approx(CHI2_3_1EM6 * 1e-4, rel=1e-10)
    assert tau_regression(0.1) == pytest.approx(math.sqrt(CHI2_1_999) * 0.1, rel=1e-10)


def test_ranks():
    assert default_rank(250) == math.ceil(math.sqrt(500) / 3)
    assert default_rank(100) == 5
    assert default_rank(1) == 2
    for n in (1, 5, 10, 100):
        p = certified_rank(n)
        assert p * (p + 1) >= 2 * (n + 1) > (p - 1) * p


def test_fit_config():
    cfg = FitConfig(beta=1.0)
    assert cfg.rank_for(100) == 5
    assert FitConfig(beta=1.0, rank_p=3).rank_for(100) == 3
    with pytest.raises(DomainError):
        FitConfig(beta=0.0)
    with pytest.raises(DomainError):
        FitConfig(beta=1.0, rank_p=0)
    with pytest.raises(DomainError):
        FitConfig(beta=1.0, qn_grad_tol=0.0)


def test_fit_result_properties():
    r = FitResult(theta=np.zeros(2), selection=np.array([0, 1, 0], np.int8), weights=np.ones(3))
    assert r.consensus == 2
    assert r.inliers.tolist() == [0, 2]
