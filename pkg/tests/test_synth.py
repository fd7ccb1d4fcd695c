import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcme import synth
from mcme.core import DomainError
from mcme.geometry import random_quaternion
from mcme.models import homography_geometric
from mcme.rng import SplitMix64


@pytest.mark.parametrize("ratio, expect", [(0.0, 0), (0.3, 75), (0.55, 137), (0.9, 225)])
def test_outlier_counts(ratio, expect):
    d = synth.gen_linear(250, 8, 0.1, ratio, rng_seed=1)
    assert int(np.sum(~d.inlier)) == expect
    r = synth.gen_rigid(250, 0.01, ratio, rng_seed=1)
    assert int(np.sum(~r.inlier)) == expect
    h = synth.gen_homography(250, 1.0, ratio, rng_seed=1)
    assert int(np.sum(~h.inlier)) == expect


def test_generators_are_deterministic():
    a = synth.gen_linear(40, 3, 0.1, 0.3, rng_seed=9)
    b = synth.gen_linear(40, 3, 0.1, 0.3, rng_seed=9)
    assert np.array_equal(a.model.A, b.model.A) and np.array_equal(a.model.b, b.model.b)
    c = synth.gen_linear(40, 3, 0.1, 0.3, rng_seed=10)
    assert not np.array_equal(a.model.b, c.model.b)


def test_generator_errors():
    with pytest.raises(DomainError):
        synth.gen_linear(10, 1, 0.1, 1.0)
    with pytest.raises(ValueError):
        synth.gen_linear(10, 1, outlier_kind="cauchy")


def test_rigid_bookkeeping_identity():
    from mcme.geometry import quat_rotmat

    for wt in (False, True):
        d = synth.gen_rigid(100, 0.01, 0.4, with_translation=wt, rng_seed=2)
        m = d.model
        assert np.allclose(m.b, m.a @ quat_rotmat(d.q).T + d.t + d.noise + d.outlier)
        assert np.all(d.outlier[d.inlier] == 0)
        assert np.all(np.linalg.norm(d.outlier, axis=1) <= math.sqrt(3) + 1e-12)
        assert m.a.min() >= 0 and m.a.max() <= 1


def test_normalize_cloud():
    p = synth.normalize_cloud([[1.0, 2, 3], [3, 2, 3], [1, 3, 4]])
    assert p.min() == 0 and p.max() == 1
    with pytest.raises(DomainError):
        synth.normalize_cloud([[1.0, 1, 1], [1, 1, 1]])


def test_homography_noise_level():
    d = synth.gen_homography(4000, 1.0, 0.0, rng_seed=3)
    err = np.linalg.norm(d.x - synth.dehom_apply(d.H, d.xp), axis=1)
    assert math.sqrt(np.mean(err ** 2)) == pytest.approx(math.sqrt(2), rel=0.05)
    assert d.H[2, 2] == pytest.approx(1.0)


def test_metric_examples():
    assert synth.relative_error([1.0, 1.0], np.array([1.0, 0.0])) == pytest.approx(1.0)
    q5 = np.array([0, 0, math.sin(math.radians(2.5)), math.cos(math.radians(2.5))])
    assert synth.rotation_error_deg(q5, np.array([0, 0, 0, 1.0])) == pytest.approx(5.0)
    assert synth.rotation_error_deg(-q5, q5) == pytest.approx(0.0, abs=1e-6)
    assert synth.translation_error([3.0, 4.0, 0.0], np.zeros(3)) == 5.0


def test_score_of_exact_homography_is_2NT():
    d = synth.gen_homography(50, 0.0, 0.0, rng_seed=4)
    assert synth.homography_score(d.H, d.x, d.xp) == pytest.approx(2 * 50 * synth.SCORE_THRESHOLD)
    d = synth.gen_homography(50, 1.0, 0.4, rng_seed=4)
    assert synth.homography_score(d.H, d.x, d.xp) < 2 * 50 * synth.SCORE_THRESHOLD


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_rotation_error_triangle_inequality(seed):
    rng = SplitMix64(seed)
    q1, q2, q3 = (random_quaternion(rng) for _ in range(3))
    e = synth.rotation_error_deg
    assert e(q1, q3) <= e(q1, q2) + e(q2, q3) + 1e-6


def test_metrics_records():
    d = synth.gen_linear(30, 2, 0.1, 0.2, rng_seed=5)
    rec = synth.metrics("linear", d.theta, d, model=d.model, tau=0.5)
    assert rec["err_theta"] == 0.0 and rec["consensus"] >= 24
    assert math.isnan(rec["err_rot_deg"])
    r = synth.gen_rigid(30, 0.01, 0.0, with_translation=True, rng_seed=5)
    rec = synth.metrics("euclidean", np.concatenate([r.q, r.t]), r)
    assert rec["err_rot_deg"] < 1e-6 and rec["err_trans"] == 0.0
    h = synth.gen_homography(30, 0.0, 0.0, rng_seed=5)
    rec = synth.metrics("homography", h.H.ravel(), h)
    assert rec["err_theta"] < 1e-12
    with pytest.raises(DomainError):
        synth.metrics("linear", d.theta, r)
    with pytest.raises(DomainError):
        synth.metrics("conic", d.theta, d)


def test_consensus_size_geometric_homography():
    d = synth.gen_homography(60, 0.0, 0.25, rng_seed=6)
    hm = homography_geometric(d.x, d.xp)
    assert synth.consensus_size(hm, hm.theta_from_matrix(d.H), 1e-6) >= 45
