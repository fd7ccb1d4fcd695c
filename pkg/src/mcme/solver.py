"""Alternating convex search over (theta, S) and the post-hoc inlier refit."""

import logging
import math
import time

import numpy as np

from . import sdr
from .core import (DegenerateError, DomainError, FitConfig, FitResult, LossVector,
                   mcme_objective, threshold_selection)
from .models import LinearModel, refine_on_inliers
from .rng import SplitMix64, derive_seed

log = logging.getLogger(__name__)

MAX_POLISH_ROUNDS = 50


def _losses(model, theta, beta):
    return LossVector(model.loss(theta), beta)


def polish_selection(model, theta, selection, beta):
    """Alternate hard refits on the inliers with threshold reselection.

    Each accepted step lowers the MCME objective, so the loop ends at a pair
    where the selection equals the threshold rule at the final theta.
    """
    sel = np.asarray(selection, dtype=np.int8)
    best = mcme_objective(_losses(model, theta, beta), sel)
    for _ in range(MAX_POLISH_ROUNDS):
        try:
            cand = model.refit(sel, theta)
            phi = _losses(model, cand, beta)
        except (DegenerateError, DomainError):
            break
        new_sel = threshold_selection(phi.phi, beta)
        val = mcme_objective(phi, new_sel)
        if val > best:
            break
        done = np.array_equal(new_sel, sel) and val >= best - 1e-15 * max(1.0, abs(best))
        theta, sel, best = cand, new_sel, val
        if done:
            break
    phi = _losses(model, theta, beta)
    # guarantee consistency with the threshold rule even if refits stalled
    sel = threshold_selection(phi.phi, beta)
    return theta, sel, mcme_objective(phi, sel)


def acs_fit(model, cfg: FitConfig, theta_init, init_selection=None) -> FitResult:
    """Run the (theta, S) alternation from ``theta_init``.

    Args:
        model: residual model exposing ``loss`` and ``fit_weighted``.
        cfg: solver settings; ``cfg.beta`` is the per-outlier cost.
        theta_init: starting parameters (strictly feasible for ratio models).
            With None the run starts from the factor instead: the first
            theta-update uses the weights of the initial (random) factor.
        init_selection: optional 0/1 outlier flags used to warm-start the
            factor; without it the factor starts uniformly on the sphere.

    Returns:
        FitResult whose ``objective_trace`` holds the relaxed objective after
        every outer iteration, in the units of the MCME objective.
    """
    t0 = time.perf_counter()
    rng = SplitMix64(cfg.rng_seed)
    n = model.n
    R = sdr.init_factor(n, cfg.rank_for(n), rng, selection=init_selection)
    if theta_init is None:
        theta = model.fit_weighted(sdr.weights_from_factor(R))
    else:
        theta = np.asarray(theta_init, dtype=float).copy()
    phi = _losses(model, theta, cfg.beta)
    trace = []
    degenerate = False
    converged = False
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        R = sdr.s_update(phi, R, cfg, rng)
        w = sdr.weights_from_factor(R)
        f_s = sdr.relaxed_objective(phi, R)
        try:
            cand = model.fit_weighted(np.clip(w, 0.0, 2.0), theta)
            phi_c = _losses(model, cand, cfg.beta)
            f_c = sdr.relaxed_objective(phi_c, R)
        except (DegenerateError, DomainError) as exc:
            log.warning("theta-update failed at outer iteration %d: %s", it, exc)
            degenerate = True
            trace.append(f_s)
            break
        if f_c <= f_s:
            theta, phi = cand, phi_c
            f_new = f_c
        else:
            f_new = f_s
        prev = trace[-1] if trace else None
        trace.append(f_new)
        if prev is not None and abs(prev - f_new) <= cfg.outer_tol * max(abs(prev), 1e-300):
            converged = True
            break

    weights = sdr.weights_from_factor(R)
    selection = sdr.round_selection(R)
    if int(np.sum(selection == 0)) >= model.minimal_size:
        theta, selection, obj = polish_selection(model, theta, selection, cfg.beta)
    else:
        degenerate = True
        obj = mcme_objective(phi, selection)
    return FitResult(theta=theta, selection=selection, weights=weights,
                     objective_trace=trace, iterations=it,
                     wall_time=time.perf_counter() - t0, objective=obj,
                     degenerate=degenerate, converged=converged)


def fit(model, beta, tau=None, init="ransac", cfg=None, seed=0, ransac_iters=10000):
    """MCME with one of the standard initializers.

    ``init`` is "ransac" (consensus of RANSAC at threshold ``tau``), "l1"
    (IRLS-L1 estimate, linear models only) or "random" (random factor,
    theta-update first).
    """
    from .baselines import irls_l1, ransac

    if cfg is None:
        cfg = FitConfig(beta=beta, rng_seed=seed)
    if tau is None:
        tau = math.sqrt(beta)
    t0 = time.perf_counter()
    if init == "ransac":
        rs = ransac(model, tau, max_iters=ransac_iters, rng_seed=derive_seed(seed, "ransac"))
        if not rs.success:
            raise DegenerateError("RANSAC found no valid hypothesis")
        theta0, sel0 = rs.theta, rs.selection
    elif init == "l1":
        if not isinstance(model, LinearModel):
            raise DomainError("l1 initialization needs a linear model")
        theta0 = irls_l1(model)
        sel0 = threshold_selection(model.loss(theta0), beta)
    elif init == "random":
        theta0, sel0 = None, None
    else:
        raise ValueError(f"unknown initializer {init!r}")
    res = acs_fit(model, cfg, theta0, init_selection=sel0)
    res.wall_time = time.perf_counter() - t0
    return res


__all__ = ["acs_fit", "fit", "polish_selection", "refine_on_inliers"]
