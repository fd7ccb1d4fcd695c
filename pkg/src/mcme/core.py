"""Domain types and objective functions shared by every solver.

Selections use the outlier convention: ``s[i] == 1`` marks measurement ``i``
as an outlier, ``s[i] == 0`` as an inlier.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np


class MCMEError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(MCMEError, ValueError):
    pass


class DomainError(MCMEError, ValueError):
    pass


class DegenerateError(MCMEError):
    pass


class NumericError(MCMEError, ArithmeticError):
    pass


@dataclass(frozen=True)
class LossVector:
    """Per-measurement losses ``phi`` and the per-outlier cost ``beta``."""

    phi: np.ndarray
    beta: float

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).reshape(-1)
        if phi.size < 1:
            raise DimensionError("LossVector needs at least one measurement")
        if not np.all(np.isfinite(phi)) or np.any(phi < 0):
            raise DomainError("losses must be finite and non-negative")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be positive, got {self.beta}")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "beta", float(self.beta))

    def __len__(self):
        return self.phi.size


def as_selection(s, n: Optional[int] = None) -> np.ndarray:
    """Validate a 0/1 outlier-flag vector and return it as an int8 array."""
    arr = np.asarray(s)
    if arr.ndim != 1:
        raise DimensionError("selection must be one-dimensional")
    if not np.all((arr == 0) | (arr == 1)):
        raise DomainError("selection entries must be 0 (inlier) or 1 (outlier)")
    if n is not None and arr.size != n:
        raise DimensionError(f"selection has length {arr.size}, expected {n}")
    return arr.astype(np.int8)


def default_rank(n: int) -> int:
    """Factorization rank ceil(sqrt(2N)/3) used by default, floored at 2.

    At p = 1 every cosine is +-1 and the gradient vanishes identically. The
    no-spurious-local-minima guarantee needs p(p+1) >= 2(N+1), which is
    larger; see :func:`certified_rank`.
    """
    return max(2, math.ceil(math.sqrt(2 * n) / 3))


def certified_rank(n: int) -> int:
    """Smallest p with p(p+1) >= 2(N+1)."""
    p = 1
    while p * (p + 1) < 2 * (n + 1):
        p += 1
    return p


@dataclass
class FitConfig:
    beta: float
    rank_p: Optional[int] = None  # None -> default_rank(N) at fit time
    max_outer_iters: int = 50
    outer_tol: float = 1e-6
    qn_max_iters: int = 500
    qn_grad_tol: float = 1e-6
    qn_memory: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if self.rank_p is not None and self.rank_p < 1:
            raise DomainError("rank_p must be >= 1")
        if self.max_outer_iters < 1 or self.qn_max_iters < 1:
            raise DomainError("iteration limits must be positive")
        if not (self.outer_tol > 0 and self.qn_grad_tol > 0):
            raise DomainError("tolerances must be positive")

    def rank_for(self, n: int) -> int:
        return self.rank_p if self.rank_p is not None else default_rank(n)


@dataclass
class FitResult:
    theta: np.ndarray
    selection: np.ndarray
    weights: np.ndarray
    objective_trace: List[float] = field(default_factory=list)
    iterations: int = 0
    wall_time: float = 0.0
    objective: float = float("nan")  # MCME objective at (theta, selection)
    degenerate: bool = False
    converged: bool = False

    @property
    def inliers(self) -> np.ndarray:
        return np.flatnonzero(self.selection == 0)

    @property
    def consensus(self) -> int:
        return int(np.sum(self.selection == 0))


def mcme_objective(phi: LossVector, s) -> float:
    """sum_i (1 - s_i) phi_i + beta s_i."""
    sel = as_selection(s)
    if sel.size != len(phi):
        raise DimensionError(f"selection length {sel.size} != {len(phi)} losses")
    return float(np.sum(np.where(sel == 1, phi.beta, phi.phi)))


def threshold_selection(phi, beta: float) -> np.ndarray:
    """Outlier iff phi > beta; ties go to the inlier side."""
    return (np.asarray(phi, dtype=float) > beta).astype(np.int8)


def truncated_objective(phi: LossVector) -> Tuple[float, np.ndarray]:
    """Minimize the MCME objective over selections at fixed losses.

    The minimum is the truncated-loss sum ``sum_i min(phi_i, beta)``.
    """
    return float(np.sum(np.minimum(phi.phi, phi.beta))), threshold_selection(phi.phi, phi.beta)


def beta_from_tau(tau: float) -> float:
    """Balance parameter for the least-squares loss: beta = Phi(tau) = tau**2."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    return float(tau) ** 2


# --- chi-square quantile --------------------------------------------------

def _gamma_series(a, x):
    # lower regularized gamma P(a, x), valid for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x):
    # upper regularized gamma Q(a, x) via modified Lentz, valid for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_p_q(a: float, x: float) -> Tuple[float, float]:
    """Regularized incomplete gamma (P, Q) = (lower, upper)."""
    if x <= 0:
        return 0.0, 1.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
        return p, 1.0 - p
    q = _gamma_cf(a, x)
    return 1.0 - q, q


def chi2_cdf(x: float, dof: int) -> float:
    return gamma_p_q(0.5 * dof, 0.5 * x)[0]


def chi2_quantile(dof: int, p: float) -> float:
    """Inverse chi-square CDF by bisection on the incomplete gamma function.

    The upper tail is used for p > 0.5 so quantiles like 1 - 1e-6 keep their
    precision.
    """
    if int(dof) != dof or dof < 1:
        raise DomainError(f"dof must be a positive integer, got {dof}")
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    a = 0.5 * dof
    upper = p > 0.5
    target = 1.0 - p if upper else p

    def below(x):
        P, Q = gamma_p_q(a, 0.5 * x)
        return Q > target if upper else P < target

    lo, hi = 0.0, max(1.0, float(dof))
    while below(hi):
        lo, hi = hi, 2.0 * hi
    for _ in range(1100):
        mid = 0.5 * (lo + hi)
        if below(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def beta_rigid(sigma: float, prob: float = 1.0 - 1e-6) -> float:
    """Noise bound c^2 sigma^2 for 3-D point residuals with isotropic noise."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return chi2_quantile(3, prob) * sigma ** 2


def tau_regression(sigma: float, prob: float = 0.999) -> float:
    """Inlier threshold bounding a 1-D Gaussian residual with probability ``prob``."""
    return math.sqrt(chi2_quantile(1, prob)) * sigma
