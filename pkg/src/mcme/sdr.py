"""Relaxed selection update over the elliptope via a low-rank factor.

The selection matrix is S = U U^T where U holds the row-normalized factor
R (shape (N+1, p)). Only the first row/column and the diagonal of the cost
matrix are non-zero, so the trace objective reduces to a weighted sum of
cosines between row 0 and every other row and is evaluated in O(N p).
"""

import logging
from typing import NamedTuple, Optional

import numpy as np

from . import lbfgs
from .core import DegenerateError, FitConfig, LossVector
from .rng import SplitMix64

log = logging.getLogger(__name__)

MIN_ROW_NORM = 1e-12
RESTART_RATIO = 4.0  # rescale rows once any drifts this far past its target norm


class LambdaRow(NamedTuple):
    lam: np.ndarray  # off-diagonal first-row entries (beta - phi_i) / 2
    diag_const: float  # sum_i phi_i, the R-independent part of tr(Lambda S)


def build_lambda_row(phi: LossVector) -> LambdaRow:
    return LambdaRow((phi.beta - phi.phi) / 2.0, float(np.sum(phi.phi)))


def _check_rows(R):
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] < 2:
        raise DegenerateError("factor must have shape (N+1, p) with N >= 1")
    norms = np.linalg.norm(R, axis=1)
    if np.any(norms < MIN_ROW_NORM):
        bad = np.flatnonzero(norms < MIN_ROW_NORM).tolist()
        raise DegenerateError(f"factor rows {bad} are (near) zero")
    return R, norms


def cosines(R) -> np.ndarray:
    """cos(r_1, r_{i+1}) for i = 1..N, i.e. the entries S[0, 1:]."""
    R, norms = _check_rows(R)
    return (R[1:] @ R[0]) / (norms[1:] * norms[0])


def sdr_objective_grad(R, lamrow: LambdaRow):
    """J(r) = 2 sum_i lam_i cos(r_1, r_{i+1}) and its gradient w.r.t. R."""
    R, norms = _check_rows(R)
    lam = np.asarray(lamrow.lam, dtype=float)
    r1, n1 = R[0], norms[0]
    rest, nr = R[1:], norms[1:]
    dots = rest @ r1
    cos = dots / (nr * n1)
    J = 2.0 * float(lam @ cos)

    grad = np.empty_like(R)
    # d/dr_i: 2 lam_i (|r_i|^2 r_1 - (r_1.r_i) r_i) / (|r_1| |r_i|^3)
    coef = 2.0 * lam / (n1 * nr)
    grad[1:] = coef[:, None] * (r1[None, :] - (dots / nr ** 2)[:, None] * rest)
    # d/dr_1: 2 sum_i lam_i (|r_1|^2 r_i - (r_1.r_i) r_1) / (|r_1|^3 |r_i|)
    grad[0] = (coef @ rest) - (coef @ dots) / n1 ** 2 * r1
    return J, grad


def normalize_rows(R) -> np.ndarray:
    R, norms = _check_rows(R)
    return R / norms[:, None]


def init_factor(n: int, p: int, rng: SplitMix64, selection=None, noise: float = 0.1) -> np.ndarray:
    """Initial (N+1) x p factor with unit rows.

    Without a selection every row is uniform on the sphere. With a warm-start
    selection, row i+1 starts at -r_1 (inlier) or +r_1 (outlier) plus Gaussian
    noise of scale ``noise``, so the first S-update begins at the initializer's
    consensus set.
    """
    R = rng.unit_vectors(n + 1, p)
    if selection is not None:
        sel = np.asarray(selection).reshape(-1)
        if sel.size != n:
            raise ValueError(f"warm-start selection has length {sel.size}, expected {n}")
        sign = np.where(sel == 1, 1.0, -1.0)
        R[1:] = sign[:, None] * R[0][None, :] + noise * rng.normal((n, p))
        R = _rerandomize(R, rng)
        R = R / np.linalg.norm(R, axis=1, keepdims=True)
    return R


def _rerandomize(R, rng):
    norms = np.linalg.norm(R, axis=1)
    bad = np.flatnonzero(norms < MIN_ROW_NORM)
    if bad.size:
        log.warning("re-randomizing %d degenerate factor rows", bad.size)
        R = R.copy()
        R[bad] = rng.unit_vectors(bad.size, R.shape[1])
    return R


def s_update(phi: LossVector, R_init, cfg: FitConfig, rng: Optional[SplitMix64] = None) -> np.ndarray:
    """Minimize tr(Lambda S) over S = U U^T, U the row-normalized factor.

    Runs L-BFGS on the unconstrained cosine objective starting at ``R_init``
    and returns a factor with unit rows. The objective at the result never
    exceeds the objective at ``R_init``.
    """
    R0 = np.asarray(R_init, dtype=float)
    n = len(phi)
    if R0.shape[0] != n + 1:
        raise ValueError(f"factor has {R0.shape[0]} rows, expected {n + 1}")
    if rng is None:
        rng = SplitMix64(cfg.rng_seed)
    R0 = _rerandomize(R0, rng)
    R0 = R0 / np.linalg.norm(R0, axis=1, keepdims=True)
    lamrow = build_lambda_row(phi)
    shape = R0.shape

    def fg(x):
        R = x.reshape(shape)
        if np.any(np.einsum("ij,ij->i", R, R) < MIN_ROW_NORM ** 2):
            raise lbfgs.TrialRejected
        J, G = sdr_objective_grad(R, lamrow)
        return J, G.reshape(-1)

    def unit_row_grad(x, g):
        # J is scale-invariant per row, so the gradient at the row-normalized
        # point is the raw gradient scaled by each row norm
        norms = np.sqrt(np.einsum("ij,ij->i", x.reshape(shape), x.reshape(shape)))
        return float(np.max(np.abs(g.reshape(shape)) * norms[:, None]))

    # J only depends on row directions, so rows may carry any positive scale.
    # Norms proportional to sqrt|lam_i| equalize the per-row curvature
    # (|lam_i| / |r_i|^2), which acts as a diagonal preconditioner.
    mag = np.abs(lamrow.lam)
    top = mag.max() if mag.size else 0.0
    if top > 0:
        row_scale = np.sqrt(np.maximum(mag, 1e-3 * top) / top)
        scale = np.concatenate([[np.sqrt(mag.sum() / top)], row_scale])
    else:
        scale = np.ones(n + 1)

    def drifted(x):
        norms = np.sqrt(np.einsum("ij,ij->i", x.reshape(shape), x.reshape(shape)))
        return bool(np.any(norms > RESTART_RATIO * scale))

    J0, _ = fg(R0.reshape(-1))
    R = R0
    budget = cfg.qn_max_iters
    while budget > 0:
        res = lbfgs.minimize(fg, (R * scale[:, None]).reshape(-1), memory=cfg.qn_memory,
                             max_iters=budget, grad_tol=cfg.qn_grad_tol,
                             grad_measure=unit_row_grad, restart_when=drifted)
        budget -= max(res.iterations, 1)
        R = _rerandomize(res.x.reshape(shape), rng)
        R = R / np.linalg.norm(R, axis=1, keepdims=True)
        if res.status != "restart":
            break
    J, _ = sdr_objective_grad(R, lamrow)
    if not J <= J0:
        return R0
    return R


def weights_from_factor(R) -> np.ndarray:
    """theta-subproblem weights w_i = 1 - S[0, i+1], each in [0, 2]."""
    return 1.0 - cosines(R)


def round_selection(R) -> np.ndarray:
    """Outlier iff the row points along r_1 (positive cosine); zero goes to inlier."""
    return (cosines(R) > 0).astype(np.int8)


def relaxed_objective(phi: LossVector, R) -> float:
    """tr(Lambda S) mapped to the MCME scale: sum (1-c)/2 phi + (1+c)/2 beta.

    Equals the MCME objective when S is a binary rank-one matrix.
    """
    c = cosines(R)
    return float(np.sum(0.5 * (1.0 - c) * phi.phi + 0.5 * (1.0 + c) * phi.beta))
