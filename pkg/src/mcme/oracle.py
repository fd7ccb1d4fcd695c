"""Exhaustive solvers for tiny instances, used to check the fast solvers."""

import itertools
from typing import NamedTuple

import numpy as np

from .core import DegenerateError, DomainError, LossVector, mcme_objective
from .models import LinearModel

MAX_BRUTE_N = 14


class BruteResult(NamedTuple):
    theta: np.ndarray
    selection: np.ndarray
    objective: float


def _subset_fit(model, inl):
    """Exact fit on the inlier subset ``inl`` (boolean mask), or None."""
    if isinstance(model, LinearModel):
        rows = model._rows(np.flatnonzero(inl))
        # minimum-norm solution interpolates when the subset is underdetermined
        return np.linalg.lstsq(model.A[rows], model.b[rows], rcond=None)[0]
    try:
        return model.fit_weighted(inl.astype(float))
    except (DegenerateError, DomainError):
        return None


def subset_residual(model, inl):
    """R(I): smallest total loss over the subset I with theta refit on I."""
    inl = np.asarray(inl, dtype=bool)
    if not inl.any():
        return 0.0, None
    theta = _subset_fit(model, inl)
    return float(np.sum(model.loss(theta)[inl])), theta


def brute_mcme(model, beta, max_n=MAX_BRUTE_N) -> BruteResult:
    """Global MCME optimum by enumerating all 2^N inlier sets.

    For each set the parameters are refit exactly on it (least squares for
    linear models, the model's own weighted fit otherwise) and the objective
    is evaluated with the selection held at that set.
    """
    n = model.n
    if n > max_n:
        raise DomainError(f"brute force limited to N <= {max_n}, got {n}")
    best = None
    for bits in itertools.product((0, 1), repeat=n):
        sel = np.array(bits, dtype=np.int8)
        inl = sel == 0
        if not inl.any():
            val, theta = n * beta, np.zeros(model.dim)
        else:
            theta = _subset_fit(model, inl)
            if theta is None:
                continue
            val = mcme_objective(LossVector(model.loss(theta), beta), sel)
        if best is None or val < best.objective:
            best = BruteResult(theta, sel, float(val))
    return best


class MCResult(NamedTuple):
    interval: tuple
    consensus: int
    inliers: np.ndarray  # indices of a maximum consensus set


def brute_mc_1d(a, b, tau) -> MCResult:
    """Exact maximum consensus for |a_i theta - b_i| <= tau by a sweep line."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DomainError("a and b differ in length")
    zero = a == 0
    if zero.all():
        raise DegenerateError("all a_i are zero")
    always = zero & (np.abs(b) <= tau)
    nz = np.flatnonzero(~zero)
    ends = np.sort(np.stack([(b[nz] - tau) / a[nz], (b[nz] + tau) / a[nz]], axis=1), axis=1)
    # closed intervals: at equal coordinates starts are processed before ends
    events = sorted([(lo, 0) for lo in ends[:, 0]] + [(hi, 1) for hi in ends[:, 1]])
    count, best, where = 0, -1, None
    for k, (x, kind) in enumerate(events):
        if kind == 0:
            count += 1
            if count > best:
                best = count
                nxt = events[k + 1][0] if k + 1 < len(events) else x
                where = (x, nxt)
        else:
            count -= 1
    theta = where[0]
    members = nz[(ends[:, 0] <= theta) & (theta <= ends[:, 1])]
    inliers = np.sort(np.concatenate([members, np.flatnonzero(always)]))
    return MCResult(where, int(best + always.sum()), inliers)


def mc_by_enumeration(a, b, tau):
    """Largest subset whose feasibility intervals share a point (2^N subsets)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    lo = np.where(a != 0, np.minimum((b - tau) / np.where(a != 0, a, 1), (b + tau) / np.where(a != 0, a, 1)), -np.inf)
    hi = np.where(a != 0, np.maximum((b - tau) / np.where(a != 0, a, 1), (b + tau) / np.where(a != 0, a, 1)), np.inf)
    usable = (a != 0) | (np.abs(b) <= tau)
    best = 0
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        if not usable[idx].all():
            continue
        if lo[idx].max() <= hi[idx].min() and len(idx) > best:
            best = len(idx)
    return best


def in_feasible_family(model, inl, beta):
    """Whether the refit on I keeps I inside and everything else outside beta."""
    inl = np.asarray(inl, dtype=bool)
    theta = _subset_fit(model, inl) if inl.any() else None
    if theta is None:
        return False
    phi = model.loss(theta)
    return bool(np.all(phi[inl] <= beta) and np.all(phi[~inl] > beta))


def all_selections(n):
    """Every 0/1 vector of length n as rows of a (2^n, n) int8 array."""
    return ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.int8)


def exhaustive_min(phi: LossVector):
    """Smallest MCME objective over all 2^N selections at fixed losses."""
    n = len(phi)
    if n > 20:
        raise DomainError("exhaustive enumeration limited to N <= 20")
    S = all_selections(n)
    vals = (S * phi.beta + (1 - S) * phi.phi[None, :]).sum(axis=1)
    k = int(np.argmin(vals))
    return float(vals[k]), S[k]


def verify_suite(instances=100, seed=0, n=10, sigma=0.1, outlier_ratio=0.3):
    """Counts of oracle checks passed on seeded d = 1 instances.

    Covers the truncated-loss identity on random losses, the consensus-size
    bound, the residual comparison (strict when the maximum consensus set is
    not MCME-feasible) and the ACS objective gap to the brute-force optimum.
    """
    from .core import tau_regression, truncated_objective
    from .rng import SplitMix64, derive_seed
    from .solver import fit
    from .synth import gen_linear

    rng = SplitMix64(derive_seed(seed, "truncated"))
    counts = {"instances": instances, "truncated_identity": 0, "consensus_bound": 0, "residual_bound": 0,
              "residual_strict": 0, "residual_strict_cases": 0, "acs_within_1pct": 0}
    for _ in range(instances):
        k = 1 + rng.integers(12)
        phi = LossVector(rng.uniform(k, 0.0, 2.0), rng.uniform(None, 0.05, 2.0))
        if abs(truncated_objective(phi)[0] - exhaustive_min(phi)[0]) <= 1e-12:
            counts["truncated_identity"] += 1
    tau = tau_regression(sigma)
    beta = tau * tau
    for i in range(instances):
        data = gen_linear(n, 1, sigma, outlier_ratio, rng_seed=derive_seed(seed, "oracle", i))
        m = data.model
        best = brute_mcme(m, beta)
        mc = brute_mc_1d(m.A[:, 0], m.b, tau)
        plus = best.selection == 0
        star = np.zeros(n, dtype=bool)
        star[mc.inliers] = True
        counts["consensus_bound"] += int(plus.sum() <= star.sum())
        r_plus, _ = subset_residual(m, plus)
        r_star, _ = subset_residual(m, star)
        counts["residual_bound"] += int(r_plus <= r_star + 1e-12)
        if not in_feasible_family(m, star, beta):
            counts["residual_strict_cases"] += 1
            counts["residual_strict"] += int(r_plus < r_star)
        res = fit(m, beta, tau, init="l1", seed=derive_seed(seed, "acs", i))
        counts["acs_within_1pct"] += int(res.objective <= best.objective * 1.01 + 1e-12)
    return counts
