"""Seeded synthetic problems and the error metrics used to score estimates."""

import math
from typing import NamedTuple

import numpy as np

from .core import DomainError, chi2_quantile
from .geometry import quat_rotmat, random_quaternion, rotation_angle_deg
from .models import LinearModel, PointPairSet
from .rng import SplitMix64

SIGMA_LOW, SIGMA_HIGH = 0.01, 0.1
SCORE_THRESHOLD = chi2_quantile(2, 0.99)


def _outlier_mask(n, ratio, rng):
    if not 0.0 <= ratio < 1.0:
        raise DomainError(f"outlier_ratio must lie in [0, 1), got {ratio}")
    n_out = int(math.floor(n * ratio + 1e-9))
    inlier = np.ones(n, dtype=bool)
    inlier[rng.sample(n, n_out)] = False
    return inlier


class LinearData(NamedTuple):
    model: LinearModel
    theta: np.ndarray
    inlier: np.ndarray


def gen_linear(N, d, sigma=0.1, outlier_ratio=0.0, outlier_kind="uniform_pm2", rng_seed=0):
    """b_i = a_i^T theta + n_i + o_i with a_i, theta uniform in [-1, 1]."""
    if outlier_kind not in ("uniform_pm2", "gauss_sd2"):
        raise ValueError(f"unknown outlier kind {outlier_kind!r}")
    rng = SplitMix64(rng_seed)
    A = rng.uniform((N, d), -1.0, 1.0)
    theta = rng.uniform(d, -1.0, 1.0)
    noise = rng.normal(N, sigma)
    inlier = _outlier_mask(N, outlier_ratio, rng)
    if outlier_kind == "uniform_pm2":
        o = rng.uniform(N, -2.0, 2.0)
    else:
        o = rng.normal(N, 2.0)
    b = A @ theta + noise + np.where(inlier, 0.0, o)
    return LinearData(LinearModel(A, b), theta, inlier)


class RigidData(NamedTuple):
    model: PointPairSet
    q: np.ndarray
    t: np.ndarray
    inlier: np.ndarray
    noise: np.ndarray
    outlier: np.ndarray


def uniform_ball(n, radius, rng):
    d = rng.unit_vectors(n, 3)
    r = radius * np.cbrt(rng.uniform(n))
    return d * r[:, None]


def gen_rigid(N, sigma=SIGMA_LOW, outlier_ratio=0.0, with_translation=False, rng_seed=0,
              points=None):
    """b_i = R a_i (+ t) + n_i + o_i on the unit cube.

    Outlier offsets o_i are uniform in the ball of radius sqrt(3) (the
    diameter of the cube's bounding sphere). ``points`` substitutes a cloud
    already scaled into the unit cube.
    """
    rng = SplitMix64(rng_seed)
    if points is None:
        a = rng.uniform((N, 3))
    else:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        a = pts[np.sort(rng.sample(pts.shape[0], N))] if pts.shape[0] > N else pts.copy()
        N = a.shape[0]
    q = random_quaternion(rng)
    t = rng.uniform(3, -1.0, 1.0) if with_translation else np.zeros(3)
    noise = rng.normal((N, 3), sigma) if sigma > 0 else np.zeros((N, 3))
    inlier = _outlier_mask(N, outlier_ratio, rng)
    o = uniform_ball(N, math.sqrt(3.0), rng)
    o[inlier] = 0.0
    b = a @ quat_rotmat(q).T + t + noise + o
    return RigidData(PointPairSet(a, b, with_translation), q, t, inlier, noise, o)


def normalize_cloud(points):
    """Scale a point cloud uniformly into the unit cube [0, 1]^3."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    lo = p.min(axis=0)
    span = float(np.max(p.max(axis=0) - lo))
    if span <= 0:
        raise DomainError("point cloud has zero extent")
    return (p - lo) / span


class HomographyData(NamedTuple):
    x: np.ndarray  # points in the first image, x ~ H x'
    xp: np.ndarray
    H: np.ndarray
    inlier: np.ndarray


def dehom_apply(H, pts):
    p = np.column_stack([pts, np.ones(len(pts))]) @ np.asarray(H, dtype=float).T
    return p[:, :2] / p[:, 2:3]


def random_homography(rng, width, height):
    """Mild projective warp about the image centre, scaled so H33 = 1."""
    c = np.array([width / 2.0, height / 2.0])
    ang = rng.uniform(None, -0.3, 0.3)
    s = rng.uniform(None, 0.8, 1.2)
    shear = rng.uniform(None, -0.1, 0.1)
    A = s * np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    A = A @ np.array([[1.0, shear], [0.0, 1.0]])
    persp = rng.uniform(2, -0.2, 0.2) / max(width, height)
    shift = rng.uniform(2, -0.05, 0.05) * np.array([width, height])
    M = np.eye(3)
    M[:2, :2] = A
    M[2, :2] = persp
    T1 = np.array([[1.0, 0, c[0] + shift[0]], [0, 1.0, c[1] + shift[1]], [0, 0, 1.0]])
    T2 = np.array([[1.0, 0, -c[0]], [0, 1.0, -c[1]], [0, 0, 1.0]])
    H = T1 @ M @ T2
    return H / H[2, 2]


def gen_homography(N, noise_px=1.0, outlier_ratio=0.0, rng_seed=0, width=640, height=480):
    """Correspondences x_i ~ H x'_i with Gaussian pixel noise on x_i.

    Outlier x_i are redrawn uniformly in the image rectangle.
    """
    rng = SplitMix64(rng_seed)
    H = random_homography(rng, width, height)
    xp = rng.uniform((N, 2)) * np.array([width, height])
    x = dehom_apply(H, xp)
    if noise_px > 0:
        x = x + rng.normal((N, 2), noise_px)
    inlier = _outlier_mask(N, outlier_ratio, rng)
    bad = np.flatnonzero(~inlier)
    x[bad] = rng.uniform((bad.size, 2)) * np.array([width, height])
    return HomographyData(x, xp, H, inlier)


# --- metrics -----------------------------------------------------------------

def relative_error(theta_hat, theta_true):
    return float(np.linalg.norm(np.asarray(theta_hat) - theta_true) / np.linalg.norm(theta_true))


def rotation_error_deg(q_hat, q_true):
    return rotation_angle_deg(quat_rotmat(q_hat), quat_rotmat(q_true))


def translation_error(t_hat, t_true):
    return float(np.linalg.norm(np.asarray(t_hat) - t_true))


def consensus_size(model, theta, tau):
    from .baselines import consensus_residuals

    return int(np.sum(consensus_residuals(model, theta) <= tau))


def transfer_errors_sq(H, x, xp):
    """Forward d^2(x, H x') and backward d^2(x', H^-1 x)."""
    fwd = np.sum((x - dehom_apply(H, xp)) ** 2, axis=1)
    bwd = np.sum((xp - dehom_apply(np.linalg.inv(H), x)) ** 2, axis=1)
    return fwd, bwd


def homography_score(H, x, xp, T=SCORE_THRESHOLD):
    """Truncated symmetric transfer score: sum of (T - d^2) over d^2 < T, both directions."""
    fwd, bwd = transfer_errors_sq(H, x, xp)
    d2 = np.concatenate([fwd, bwd])
    d2 = np.where(np.isfinite(d2), d2, np.inf)
    return float(np.sum(np.where(d2 < T, T - d2, 0.0)))


def metrics(kind, theta_hat, truth, model=None, tau=None):
    """Error record for one estimate.

    ``kind`` is "linear", "rotation", "euclidean" or "homography"; ``truth``
    is the matching generator output. Missing entries are NaN.
    """
    rec = {"err_theta": math.nan, "err_rot_deg": math.nan, "err_trans": math.nan,
           "consensus": -1, "score": math.nan}
    if kind == "linear":
        if not isinstance(truth, LinearData):
            raise DomainError("linear metrics need LinearData")
        rec["err_theta"] = relative_error(theta_hat, truth.theta)
    elif kind in ("rotation", "euclidean"):
        if not isinstance(truth, RigidData):
            raise DomainError("rigid metrics need RigidData")
        theta_hat = np.asarray(theta_hat, dtype=float)
        rec["err_rot_deg"] = rotation_error_deg(theta_hat[:4], truth.q)
        if kind == "euclidean":
            rec["err_trans"] = translation_error(theta_hat[4:7], truth.t)
    elif kind == "homography":
        if not isinstance(truth, HomographyData):
            raise DomainError("homography metrics need HomographyData")
        H = np.asarray(theta_hat, dtype=float).reshape(3, 3)
        rec["err_theta"] = relative_error((H / H[2, 2]).ravel(), truth.H.ravel())
        rec["score"] = homography_score(H, truth.x, truth.xp)
    else:
        raise DomainError(f"unknown kind {kind!r}")
    if model is not None and tau is not None and kind != "homography":
        rec["consensus"] = consensus_size(model, theta_hat, tau)
    return rec
