"""Residual models: per-measurement loss and the weighted parameter update.

Every model exposes the same small surface used by the solvers:

``n``             number of measurements
``dim``           length of the parameter vector theta
``minimal_size``  measurements needed by :meth:`fit_minimal`
``loss(theta)``   squared residuals Phi_i (the least-squares loss)
``residuals``     r_i = sqrt(Phi_i), the quantity thresholded by tau
``fit_weighted``  argmin_theta sum_i w_i Phi_i(theta)
``refit``         unweighted fit on the inliers of a selection
``fit_minimal``   hypothesis from a minimal sample, or None if degenerate
"""

import logging
import math

import numpy as np

from .core import DegenerateError, DimensionError, DomainError
from .geometry import build_G, quat_rotmat, rotate, sym4_min_eigvec

log = logging.getLogger(__name__)

MIN_SAMPLE_COND = 1e10


class ResidualModel:
    n: int
    dim: int
    minimal_size: int

    def loss(self, theta) -> np.ndarray:
        raise NotImplementedError

    def residuals(self, theta) -> np.ndarray:
        return np.sqrt(self.loss(theta))

    def fit_weighted(self, weights, theta0=None) -> np.ndarray:
        raise NotImplementedError

    def refit(self, selection, theta0=None) -> np.ndarray:
        return refine_on_inliers(self, selection, theta0)

    def fit_minimal(self, idx):
        raise NotImplementedError

    def _check_weights(self, weights):
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size != self.n:
            raise DimensionError(f"got {w.size} weights for {self.n} measurements")
        if np.any(w < 0):
            raise DomainError("weights must be non-negative")
        if not np.any(w > 0):
            raise DegenerateError("all weights are zero")
        return w


def refine_on_inliers(model, selection, theta0=None):
    """Unweighted fit restricted to the measurements flagged as inliers."""
    sel = np.asarray(selection).reshape(-1)
    if sel.size != model.n:
        raise DimensionError(f"selection length {sel.size} != {model.n}")
    if int(np.sum(sel == 0)) < model.minimal_size:
        raise DegenerateError(
            f"{int(np.sum(sel == 0))} inliers, need at least {model.minimal_size}")
    return model.fit_weighted((sel == 0).astype(float), theta0)


# --- linear residuals ------------------------------------------------------

def _weighted_lsq(A, b, w):
    """argmin sum_j w_j (A_j theta - b_j)^2 via equilibrated normal equations."""
    Aw = A * w[:, None]
    M = A.T @ Aw
    rhs = Aw.T @ b
    d = np.sqrt(np.maximum(np.diag(M), 0.0))
    d[d == 0] = 1.0
    Ms = M / np.outer(d, d)
    if not np.trace(M) > 0:
        raise DegenerateError("weighted design matrix is zero")
    if np.linalg.cond(Ms) > 1e12:
        Ms = Ms + 1e-10 * np.trace(Ms) * np.eye(Ms.shape[0])
    try:
        return np.linalg.solve(Ms, rhs / d) / d
    except np.linalg.LinAlgError as exc:
        raise DegenerateError(f"weighted least squares is singular: {exc}") from None


class LinearModel(ResidualModel):
    """Rows a_j^T theta - b_j; ``group`` consecutive rows form one measurement.

    With ``group > 1`` the loss of a measurement is the sum of its squared
    rows (e.g. the two coordinates of a 2-D transfer error).
    """

    def __init__(self, A, b, group: int = 1):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.ndim == 1:
            A = A[:, None]
        if A.shape[0] != b.size:
            raise DimensionError(f"A has {A.shape[0]} rows but b has {b.size}")
        if A.shape[0] % group:
            raise DimensionError("row count is not a multiple of the group size")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise DomainError("A and b must be finite")
        self.A, self.b, self.group = A, b, int(group)
        self.n = A.shape[0] // self.group
        self.dim = A.shape[1]
        self.minimal_size = math.ceil(self.dim / self.group)
        if self.n < self.minimal_size:
            log.warning("%d measurements for %d unknowns", self.n, self.dim)

    def row_residuals(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.dim:
            raise DimensionError(f"theta has length {theta.size}, expected {self.dim}")
        return self.A @ theta - self.b

    def loss(self, theta):
        r = self.row_residuals(theta)
        return np.sum((r * r).reshape(self.n, self.group), axis=1)

    def fit_weighted(self, weights, theta0=None):
        w = self._check_weights(weights)
        return _weighted_lsq(self.A, self.b, np.repeat(w, self.group))

    def _rows(self, idx):
        idx = np.asarray(idx).reshape(-1)
        return (idx[:, None] * self.group + np.arange(self.group)).reshape(-1)

    def fit_minimal(self, idx):
        rows = self._rows(idx)
        A, b = self.A[rows], self.b[rows]
        if np.linalg.cond(A) > MIN_SAMPLE_COND:
            return None
        if A.shape[0] == A.shape[1]:
            return np.linalg.solve(A, b)
        return np.linalg.lstsq(A, b, rcond=None)[0]

    def subset(self, idx):
        return LinearModel(self.A[self._rows(idx)], self.b[self._rows(idx)], self.group)


def loss_linear(m: LinearModel, theta):
    return m.loss(theta)


def theta_linear(m: LinearModel, weights):
    return m.fit_weighted(weights)


# --- projective linearizations -----------------------------------------------

def _as_points(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise DimensionError("points must have shape (N, 2)")
    return x


class ProjectiveLinearModel(LinearModel):
    """Algebraic-distance linearization of a two-view relation x <-> x'."""

    MIN_POINTS = {"homography": 4, "fundamental": 8, "affinity": 3}

    def __init__(self, kind, A, b, group, x, xp):
        super().__init__(A, b, group)
        self.kind, self.x, self.xp = kind, x, xp

    def matrix(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "homography":
            return np.append(theta, 1.0).reshape(3, 3)
        if self.kind == "fundamental":
            return np.append(theta, 1.0).reshape(3, 3, order="F")
        return np.vstack([theta.reshape(2, 3, order="F"), [0.0, 0.0, 1.0]])

    def theta_from_matrix(self, M):
        M = np.asarray(M, dtype=float)
        if self.kind == "affinity":
            return M[:2].reshape(-1, order="F")
        M = M / M[2, 2]
        if self.kind == "homography":
            return M.reshape(-1)[:8]
        return M.reshape(-1, order="F")[:8]


def linearize_projective(kind, x, xp) -> ProjectiveLinearModel:
    """Linear system for x ~ M x' (homography, affinity) or x^T F x' = 0.

    Homography: theta = (h1..h8) row-major with h9 = 1, two rows per
    correspondence. Affinity: theta = vec(Theta) column-major, two rows.
    Fundamental: theta = vec(F) column-major without F33 = 1, one row.
    """
    x, xp = _as_points(x), _as_points(xp)
    if x.shape != xp.shape:
        raise DimensionError("correspondence arrays differ in length")
    if kind not in ProjectiveLinearModel.MIN_POINTS:
        raise ValueError(f"unknown kind {kind!r}")
    n = x.shape[0]
    if n < ProjectiveLinearModel.MIN_POINTS[kind]:
        raise DimensionError(
            f"{kind} needs at least {ProjectiveLinearModel.MIN_POINTS[kind]} correspondences")
    u, v = x[:, 0], x[:, 1]
    up, vp = xp[:, 0], xp[:, 1]
    one, zero = np.ones(n), np.zeros(n)
    if kind == "homography":
        rx = np.stack([up, vp, one, zero, zero, zero, -u * up, -u * vp], axis=1)
        ry = np.stack([zero, zero, zero, up, vp, one, -v * up, -v * vp], axis=1)
        A = np.stack([rx, ry], axis=1).reshape(2 * n, 8)
        b = np.stack([u, v], axis=1).reshape(-1)
        return ProjectiveLinearModel(kind, A, b, 2, x, xp)
    if kind == "affinity":
        rx = np.stack([up, zero, vp, zero, one, zero], axis=1)
        ry = np.stack([zero, up, zero, vp, zero, one], axis=1)
        A = np.stack([rx, ry], axis=1).reshape(2 * n, 6)
        b = np.stack([u, v], axis=1).reshape(-1)
        return ProjectiveLinearModel(kind, A, b, 2, x, xp)
    # x~^T F x~' = sum_jk x~_j x~'_k F_jk, column-major vec(F)
    xh = np.column_stack([u, v, one])
    xph = np.column_stack([up, vp, one])
    full = (xh[:, :, None] * xph[:, None, :]).transpose(0, 2, 1).reshape(n, 9)
    return ProjectiveLinearModel(kind, full[:, :8], -full[:, 8], 1, x, xp)


# --- quasiconvex (ratio) residuals -------------------------------------------

class QuasiconvexModel(ResidualModel):
    """r_i = |U_i theta + u_i| / (w_i^T theta + w0_i) on the positive half-space."""

    def __init__(self, U, u, w, w0):
        U = np.asarray(U, dtype=float)
        if U.ndim != 3 or U.shape[1] != 2:
            raise DimensionError("U must have shape (N, 2, d)")
        n, _, d = U.shape
        u = np.asarray(u, dtype=float).reshape(n, 2)
        w = np.asarray(w, dtype=float).reshape(n, d)
        w0 = np.asarray(w0, dtype=float).reshape(n)
        for arr in (U, u, w, w0):
            if not np.all(np.isfinite(arr)):
                raise DomainError("model entries must be finite")
        self.U, self.u, self.w, self.w0 = U, u, w, w0
        self.n, self.dim = n, d
        self.minimal_size = math.ceil(d / 2)

    def denominators(self, theta):
        return self.w @ np.asarray(theta, dtype=float) + self.w0

    def loss(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.dim:
            raise DimensionError(f"theta has length {theta.size}, expected {self.dim}")
        den = self.denominators(theta)
        if np.any(den <= 0):
            bad = np.flatnonzero(den <= 0)
            raise DomainError(f"non-positive denominators at indices {bad.tolist()[:20]}")
        num = np.einsum("ijk,k->ij", self.U, theta) + self.u
        return np.sum(num * num, axis=1) / den ** 2

    def objective_grad(self, theta, weights):
        num = np.einsum("ijk,k->ij", self.U, theta) + self.u
        den = self.denominators(theta)
        sq = np.sum(num * num, axis=1)
        f = float(weights @ (sq / den ** 2))
        g = 2.0 * np.einsum("i,ij,ijk->k", weights / den ** 2, num, self.U) \
            - 2.0 * (weights * sq / den ** 3) @ self.w
        return f, g

    def fit_weighted(self, weights, theta0=None):
        if theta0 is None:
            raise DomainError("quasiconvex fits need a strictly feasible theta0")
        return theta_quasiconvex(self, weights, theta0)

    def fit_minimal(self, idx):
        idx = np.asarray(idx).reshape(-1)
        A = self.U[idx].reshape(-1, self.dim)
        b = -self.u[idx].reshape(-1)
        if np.linalg.cond(A) > MIN_SAMPLE_COND:
            return None
        theta = np.linalg.lstsq(A, b, rcond=None)[0]
        if np.any(self.denominators(theta)[idx] <= 0):
            return None
        return theta


def loss_quasiconvex(m: QuasiconvexModel, theta):
    return m.loss(theta)


def theta_quasiconvex(m: QuasiconvexModel, weights, theta0, delta=1e-8,
                      max_iters=500, grad_tol=1e-8, c=1e-4, shrink=0.5):
    """Gradient descent with Armijo backtracking on sum_i w_i Phi_i.

    Every accepted iterate keeps all denominators above ``delta``, so the
    result stays in the model's domain and its objective never exceeds the
    starting one.
    """
    w = m._check_weights(weights)
    theta = np.asarray(theta0, dtype=float).reshape(-1).copy()
    if np.any(m.denominators(theta) <= delta):
        raise DomainError("theta0 is not strictly feasible")
    f, g = m.objective_grad(theta, w)
    step = 1.0
    for _ in range(max_iters):
        gn = float(np.linalg.norm(g))
        if gn < grad_tol:
            break
        accepted = False
        while step > 1e-20:
            trial = theta - step * g
            if np.all(m.denominators(trial) > delta):
                ft, gt = m.objective_grad(trial, w)
                if ft <= f - c * step * gn * gn:
                    accepted = True
                    break
            step *= shrink
        if not accepted:
            break
        theta, f, g = trial, ft, gt
        step *= 2.0
    return theta


class HomographyGeometric(QuasiconvexModel):
    """Transfer error |x_i - dehom(H x~'_i)| in pixels, as a ratio residual.

    The parameters are the first eight entries (row-major) of H expressed in
    Hartley-normalized coordinates with its (3,3) entry fixed to 1; use
    :meth:`matrix` and :meth:`theta_from_matrix` to convert.
    """

    def __init__(self, x, xp, normalize=True):
        x, xp = _as_points(x), _as_points(xp)
        if x.shape != xp.shape:
            raise DimensionError("correspondence arrays differ in length")
        if x.shape[0] < 4:
            raise DimensionError("homography needs at least 4 correspondences")
        self.x, self.xp = x, xp
        self.T1 = _hartley(x) if normalize else np.eye(3)
        self.T2 = _hartley(xp) if normalize else np.eye(3)
        s1 = self.T1[0, 0]
        xn = x * s1 + self.T1[:2, 2]
        xpn = xp * self.T2[0, 0] + self.T2[:2, 2]
        n = x.shape[0]
        U = np.zeros((n, 2, 8))
        U[:, 0, 0:2] = xpn
        U[:, 0, 2] = 1.0
        U[:, 1, 3:5] = xpn
        U[:, 1, 5] = 1.0
        U[:, 0, 6:8] = -xn[:, :1] * xpn
        U[:, 1, 6:8] = -xn[:, 1:2] * xpn
        u = -xn
        w = np.zeros((n, 8))
        w[:, 6:8] = xpn
        # normalized-coordinate error divided by s1 is the pixel error
        super().__init__(U / s1, u / s1, w, np.ones(n))

    def matrix(self, theta):
        Hn = np.append(np.asarray(theta, dtype=float), 1.0).reshape(3, 3)
        H = np.linalg.solve(self.T1, Hn @ self.T2)
        return H / H[2, 2]

    def theta_from_matrix(self, H):
        Hn = self.T1 @ np.asarray(H, dtype=float) @ np.linalg.inv(self.T2)
        return (Hn / Hn[2, 2]).reshape(-1)[:8]


def _hartley(pts):
    c = pts.mean(axis=0)
    d = np.mean(np.linalg.norm(pts - c, axis=1))
    s = math.sqrt(2.0) / d if d > 0 else 1.0
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def homography_geometric(x, xp, normalize=True) -> HomographyGeometric:
    return HomographyGeometric(x, xp, normalize)


def triangulation_model(cameras, points) -> QuasiconvexModel:
    """Reprojection error of a 3-D point theta seen by cameras P_i at x_i."""
    P = np.asarray(cameras, dtype=float).reshape(-1, 3, 4)
    x = _as_points(points)
    M = P[:, :2, :] - x[:, :, None] * P[:, 2:3, :]
    return QuasiconvexModel(M[:, :, :3], M[:, :, 3], P[:, 2, :3], P[:, 2, 3])


# --- point pairs: rotation and rigid motion ------------------------------------

def theta_rotation(a, b, weights):
    """Weighted rotation search: smallest eigenvector of G."""
    return sym4_min_eigvec(build_G(a, b, weights))[1]


def euclidean_objective(a, b, weights, q, t):
    res = b - a @ quat_rotmat(q).T - t
    return float(weights @ np.sum(res * res, axis=1))


def theta_euclidean(a, b, weights, q0=None, t0=None, max_iters=20, tol=1e-10):
    """Rotation and translation by alternating the closed-form t and eigen q steps."""
    w = np.asarray(weights, dtype=float)
    if not w.sum() > 0:
        raise DegenerateError("all weights are zero")
    q = np.array([0.0, 0.0, 0.0, 1.0]) if q0 is None else np.asarray(q0, dtype=float)
    t = np.zeros(3) if t0 is None else np.asarray(t0, dtype=float)
    prev = euclidean_objective(a, b, w, q, t)
    for _ in range(max_iters):
        t = w @ (b - a @ quat_rotmat(q).T) / w.sum()
        q = theta_rotation(a, b - t, w)
        cur = euclidean_objective(a, b, w, q, t)
        if prev - cur < tol * max(1.0, prev):
            break
        prev = cur
    return q, t


class PointPairSet(ResidualModel):
    """Pairs b_i = R a_i (+ t) + noise; theta = q or [q, t]."""

    def __init__(self, a, b, with_translation=False):
        a = np.asarray(a, dtype=float).reshape(-1, 3)
        b = np.asarray(b, dtype=float).reshape(-1, 3)
        if a.shape != b.shape:
            raise DimensionError("point arrays differ in shape")
        self.a, self.b = a, b
        self.with_translation = bool(with_translation)
        self.n = a.shape[0]
        self.dim = 7 if self.with_translation else 4
        self.minimal_size = 3 if self.with_translation else 2
        if self.n < self.minimal_size:
            log.warning("%d pairs is too few for a well-posed fit", self.n)

    def split(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.dim:
            raise DimensionError(f"theta has length {theta.size}, expected {self.dim}")
        q = theta[:4] / np.linalg.norm(theta[:4])
        t = theta[4:] if self.with_translation else np.zeros(3)
        return q, t

    def loss(self, theta):
        q, t = self.split(theta)
        res = self.b - self.a @ quat_rotmat(q).T - t
        return np.sum(res * res, axis=1)

    def fit_weighted(self, weights, theta0=None):
        w = self._check_weights(weights)
        if not self.with_translation:
            return theta_rotation(self.a, self.b, w)
        q0, t0 = self.split(theta0) if theta0 is not None else (None, None)
        q, t = theta_euclidean(self.a, self.b, w, q0, t0)
        return np.concatenate([q, t])

    def fit_minimal(self, idx):
        idx = np.asarray(idx).reshape(-1)
        a, b = self.a[idx], self.b[idx]
        if self.with_translation:
            ca, cb = a.mean(axis=0), b.mean(axis=0)
            a0, b0 = a - ca, b - cb
            span = np.column_stack([a0[1] - a0[0], a0[2] - a0[0],
                                    np.cross(a0[1] - a0[0], a0[2] - a0[0])])
            if np.linalg.cond(span) > MIN_SAMPLE_COND:
                return None
            q = theta_rotation(a0, b0, np.ones(len(idx)))
            return np.concatenate([q, cb - quat_rotmat(q) @ ca])
        span = np.column_stack([a[0], a[1], np.cross(a[0], a[1])])
        if np.linalg.cond(span) > MIN_SAMPLE_COND:
            return None
        return theta_rotation(a, b, np.ones(len(idx)))
