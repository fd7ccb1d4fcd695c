"""Comparison methods: RANSAC with adaptive stopping and IRLS for L1 regression."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import DomainError
from .models import LinearModel, QuasiconvexModel, _weighted_lsq
from .rng import SplitMix64


@dataclass
class RansacResult:
    theta: np.ndarray
    selection: np.ndarray  # 0 = inlier (r_i <= tau)
    iterations: int
    success: bool

    @property
    def consensus(self):
        return int(np.sum(self.selection == 0))


def consensus_residuals(model, theta):
    """Residuals for the consensus test; infeasible ratio residuals count as inf."""
    if isinstance(model, QuasiconvexModel):
        den = model.denominators(theta)
        ok = den > 0
        r = np.full(model.n, np.inf)
        num = np.einsum("ijk,k->ij", model.U[ok], theta) + model.u[ok]
        r[ok] = np.linalg.norm(num, axis=1) / den[ok]
        return r
    return np.sqrt(model.loss(theta))


def required_iterations(inlier_frac, m, confidence):
    """k = ceil(log(1 - rho) / log(1 - w^m)), or 0 once w^m rounds to 1."""
    good = inlier_frac ** m
    if good >= 1.0:
        return 0
    if good <= 0.0:
        return math.inf
    return math.ceil(math.log(1.0 - confidence) / math.log1p(-good))


def ransac(model, tau, confidence=0.99, max_iters=10000, rng_seed=0):
    """Hypothesize-and-verify maximum consensus.

    Args:
        model: residual model with ``fit_minimal`` and ``minimal_size``.
        tau: inlier threshold on r_i (not squared).
        confidence: probability of drawing at least one all-inlier sample.
        max_iters: hard cap on the number of samples drawn.
        rng_seed: seed of the sampling generator.

    Returns:
        RansacResult with the largest-consensus hypothesis; ``success`` is
        False when no sample produced a consensus of at least ``minimal_size``.
    """
    if not tau > 0:
        raise DomainError("tau must be positive")
    if not 0.0 < confidence < 1.0:
        raise DomainError("confidence must lie in (0, 1)")
    rng = SplitMix64(rng_seed)
    n, m = model.n, model.minimal_size
    if n < m:
        return RansacResult(np.full(model.dim, np.nan), np.ones(n, np.int8), 0, False)
    best_theta, best_count, best_sel = None, -1, None
    budget = max_iters
    it = 0
    while it < min(budget, max_iters):
        it += 1
        theta = model.fit_minimal(rng.sample(n, m))
        if theta is None or not np.all(np.isfinite(theta)):
            continue
        inl = consensus_residuals(model, theta) <= tau
        count = int(inl.sum())
        if count > best_count:
            best_theta, best_count = theta, count
            best_sel = (~inl).astype(np.int8)
            budget = required_iterations(count / n, m, confidence)
    if best_theta is None or best_count < m:
        sel = np.ones(n, np.int8) if best_sel is None else best_sel
        theta = np.full(model.dim, np.nan) if best_theta is None else best_theta
        return RansacResult(theta, sel, it, False)
    return RansacResult(best_theta, best_sel, it, True)


def l1_objective(m: LinearModel, theta):
    return float(np.sum(np.abs(m.row_residuals(theta))))


def irls_l1(m: LinearModel, iters=50, floor=1e-6):
    """min sum_j |a_j^T theta - b_j| by reweighted least squares from the LS fit.

    The result is snapped to the best vertex through d of the 2d smallest
    residuals when that lowers the objective, since an L1 optimum always
    has d zero residuals.
    """
    theta = _weighted_lsq(m.A, m.b, np.ones(m.A.shape[0]))
    for _ in range(iters):
        r = np.abs(m.A @ theta - m.b)
        theta = _weighted_lsq(m.A, m.b, 1.0 / np.maximum(r, floor))
    return _snap_to_vertex(m.A, m.b, theta)


def _snap_to_vertex(A, b, theta):
    """Best vertex through any d of the 2d smallest residuals, if it improves."""
    d = A.shape[1]
    if A.shape[0] < d:
        return theta
    best, best_obj = theta, float(np.sum(np.abs(A @ theta - b)))
    near = np.argsort(np.abs(A @ theta - b), kind="stable")[:min(2 * d, A.shape[0])]
    for idx in itertools.combinations(near.tolist(), d):
        sub = A[list(idx)]
        if np.linalg.cond(sub) > 1e10:
            continue
        vertex = np.linalg.solve(sub, b[list(idx)])
        obj = float(np.sum(np.abs(A @ vertex - b)))
        if obj < best_obj:
            best, best_obj = vertex, obj
    return best
