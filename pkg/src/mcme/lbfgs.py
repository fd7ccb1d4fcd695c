"""Limited-memory BFGS with a strong-Wolfe line search.

Minimal and self-contained; operates on flat float vectors. The objective
callback returns ``(f, g)``. It may raise :class:`TrialRejected` to signal
that a trial point is unusable (the line search then backtracks).
"""

from dataclasses import dataclass
from collections import deque

import numpy as np

from .core import NumericError


class TrialRejected(Exception):
    pass


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    evaluations: int
    status: str  # "gradient", "max_iters", "stalled", "restart"


def _cubic_min(a, fa, ga, b, fb, gb):
    # minimizer of the cubic interpolating (a, fa, ga), (b, fb, gb); None if not usable
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - ga * gb
    if rad < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(rad)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def wolfe_search(fg, x, f0, g0, d, step=1.0, c1=1e-4, c2=0.9, max_evals=30):
    """Strong-Wolfe step along ``d``.

    Returns (alpha, f, g, evals); alpha is 0.0 when no acceptable point was
    found, in which case f and g are the starting values.
    """
    dg0 = float(g0 @ d)
    evals = 0

    def phi(alpha):
        nonlocal evals
        evals += 1
        try:
            f, g = fg(x + alpha * d)
        except TrialRejected:
            return np.inf, None, np.nan
        if not np.isfinite(f):
            return np.inf, None, np.nan
        return f, g, float(g @ d)

    def zoom(lo, flo, dlo, hi, fhi, dhi):
        best = (0.0, f0, g0)
        while evals < max_evals:
            trial = None
            if np.isfinite(fhi) and np.isfinite(dhi):
                trial = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
            span = hi - lo
            if trial is None or not np.isfinite(trial) or \
                    not (min(lo, hi) + 0.1 * abs(span) <= trial <= max(lo, hi) - 0.1 * abs(span)):
                trial = lo + 0.5 * span
            ft, gt, dt = phi(trial)
            if ft > f0 + c1 * trial * dg0 or ft >= flo:
                hi, fhi, dhi = trial, ft, dt
            else:
                if abs(dt) <= -c2 * dg0:
                    return trial, ft, gt
                best = (trial, ft, gt)
                if dt * (hi - lo) >= 0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo = trial, ft, dt
            if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
                break
        # sufficient decrease without curvature is still a valid descent step
        if best[0] > 0:
            return best
        return lo, flo, None

    prev, fprev, dprev = 0.0, f0, dg0
    alpha = step
    while evals < max_evals:
        fa, ga, da = phi(alpha)
        if fa > f0 + c1 * alpha * dg0 or (evals > 1 and fa >= fprev):
            a, fa_, g_ = zoom(prev, fprev, dprev, alpha, fa, da)
            if g_ is None:
                if a > 0:
                    fa2, ga2, _ = phi(a)
                    if ga2 is not None:
                        return a, fa2, ga2, evals
                return 0.0, f0, g0, evals
            return a, fa_, g_, evals
        if abs(da) <= -c2 * dg0:
            return alpha, fa, ga, evals
        if da >= 0:
            a, fa_, g_ = zoom(alpha, fa, da, prev, fprev, dprev)
            if g_ is None:
                return alpha, fa, ga, evals
            return a, fa_, g_, evals
        prev, fprev, dprev = alpha, fa, da
        alpha *= 2.0
    return 0.0, f0, g0, evals


def minimize(fg, x0, memory=10, max_iters=500, grad_tol=1e-6, c1=1e-4, c2=0.9,
             grad_measure=None, restart_when=None):
    """Minimize a smooth function with L-BFGS.

    Stops when ``grad_measure(x, g) < grad_tol`` (default: ``max|g|``), after
    ``max_iters`` iterations, or when the line search can make no progress.
    ``restart_when(x)`` returning True ends the run early with status
    "restart" so the caller can re-condition ``x`` and call again.
    The returned objective never exceeds the value at ``x0``.
    """
    if grad_measure is None:
        grad_measure = lambda x, g: float(np.max(np.abs(g)))
    x = np.array(x0, dtype=float)
    f, g = fg(x)
    evals = 1
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericError("non-finite objective or gradient at iteration 0")
    s_hist, y_hist, rho_hist = deque(maxlen=memory), deque(maxlen=memory), deque(maxlen=memory)
    status = "max_iters"
    it = 0
    while it < max_iters:
        if grad_measure(x, g) < grad_tol:
            status = "gradient"
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if s_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= gamma
        else:
            q *= 1.0 / max(np.linalg.norm(g), 1e-300)
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        d = -q
        if g @ d >= 0:
            # lost descent: reset memory and use steepest descent
            s_hist.clear()
            y_hist.clear()
            rho_hist.clear()
            d = -g / max(np.linalg.norm(g), 1e-300)
        alpha, f_new, g_new, n_ev = wolfe_search(fg, x, f, g, d, 1.0, c1, c2)
        evals += n_ev
        it += 1
        if alpha == 0.0:
            if s_hist:
                s_hist.clear()
                y_hist.clear()
                rho_hist.clear()
                continue
            status = "stalled"
            break
        if not (np.isfinite(f_new) and np.all(np.isfinite(g_new))):
            raise NumericError(f"non-finite objective or gradient at iteration {it}")
        s = alpha * d
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
        x = x + s
        f, g = f_new, g_new
        if restart_when is not None and restart_when(x):
            status = "restart"
            break
    return LbfgsResult(x=x, f=float(f), g=g, iterations=it, evaluations=evals, status=status)
