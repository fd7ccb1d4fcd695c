"""Outlier-ratio sweeps comparing MCME with the baselines.

Each (ratio, run) cell draws its data and solver seeds from
``derive_seed(seed, role, ratio, run)`` and cells are collected in
ratio-major order, so the CSV does not depend on the number of worker
threads. Wall-clock times are only written when requested.
"""

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import irls_l1, ransac
from .core import DegenerateError, FitConfig, beta_from_tau, beta_rigid, tau_regression
from .models import homography_geometric, linearize_projective, refine_on_inliers
from .rng import derive_seed
from .solver import acs_fit, fit
from .synth import dehom_apply, gen_homography, gen_linear, gen_rigid, metrics

COLUMNS = ["method", "outlier_ratio", "run", "err_theta", "err_rot_deg", "err_trans",
           "consensus", "wall_ms"]
THREADS_ENV = "MCME_THREADS"
PROBLEMS = ("regression", "rotation", "euclidean", "homography", "init-study")

DEFAULTS = {
    "regression": {"n": 250, "sigma": 0.1},
    "rotation": {"n": 100, "sigma": 0.01},
    "euclidean": {"n": 200, "sigma": 0.01},
    "homography": {"n": 200, "sigma": 1.0},
    "init-study": {"n": 100, "sigma": 0.01},
}


def parse_ratios(text):
    """``start:step:stop`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0:
            raise ValueError(f"bad ratio range {text!r}")
        lo, step, hi = parts
        k = int(math.floor((hi - lo) / step + 1e-9))
        vals = [round(lo + i * step, 10) for i in range(k + 1)]
    else:
        vals = [float(p) for p in text.split(",") if p.strip()]
    for v in vals:
        if not 0.0 <= v < 1.0:
            raise ValueError(f"outlier ratio {v} outside [0, 1)")
    return vals


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, 1000.0 * (time.perf_counter() - t)


def _row(method, ratio, run, rec, ms):
    return {"method": method, "outlier_ratio": ratio, "run": run,
            "err_theta": rec.get("err_theta", math.nan),
            "err_rot_deg": rec.get("err_rot_deg", math.nan),
            "err_trans": rec.get("err_trans", math.nan),
            "consensus": rec.get("consensus", -1), "wall_ms": ms}


def _failed(method, ratio, run):
    return _row(method, ratio, run, {}, math.nan)


def cell_regression(ratio, run, seed, n, sigma):
    data = gen_linear(n, 8, sigma, ratio, rng_seed=derive_seed(seed, "data", ratio, run))
    m = data.model
    tau = tau_regression(sigma)
    beta = beta_from_tau(tau)
    s = derive_seed(seed, "solve", ratio, run)
    rows = []
    res, ms = _timed(lambda: fit(m, beta, tau, init="l1", seed=s))
    rows.append(_row("MCME", ratio, run, metrics("linear", res.theta, data, m, tau), ms))
    rs, ms = _timed(lambda: ransac(m, tau, rng_seed=s))
    rows.append(_row("RANSAC", ratio, run, metrics("linear", rs.theta, data, m, tau), ms))
    th, ms2 = _timed(lambda: refine_on_inliers(m, rs.selection))
    rows.append(_row("RANSAC-r", ratio, run, metrics("linear", th, data, m, tau), ms + ms2))
    l1, ms = _timed(lambda: irls_l1(m))
    rows.append(_row("L1", ratio, run, metrics("linear", l1, data, m, tau), ms))
    sel = (np.sqrt(m.loss(l1)) > tau).astype(np.int8)
    try:
        th, ms2 = _timed(lambda: refine_on_inliers(m, sel))
        rows.append(_row("L1-r", ratio, run, metrics("linear", th, data, m, tau), ms + ms2))
    except DegenerateError:
        rows.append(_failed("L1-r", ratio, run))
    return rows


def _cell_rigid(ratio, run, seed, n, sigma, with_translation):
    kind = "euclidean" if with_translation else "rotation"
    data = gen_rigid(n, sigma, ratio, with_translation, rng_seed=derive_seed(seed, "data", ratio, run))
    m = data.model
    beta = beta_rigid(sigma)
    tau = math.sqrt(beta)
    s = derive_seed(seed, "solve", ratio, run)
    rows = []
    try:
        res, ms = _timed(lambda: fit(m, beta, tau, init="ransac", seed=s))
        rows.append(_row("MCME", ratio, run, metrics(kind, res.theta, data, m, tau), ms))
    except DegenerateError:
        rows.append(_failed("MCME", ratio, run))
    rs, ms = _timed(lambda: ransac(m, tau, rng_seed=derive_seed(s, "ransac")))
    if rs.success:
        rows.append(_row("RANSAC", ratio, run, metrics(kind, rs.theta, data, m, tau), ms))
        th, ms2 = _timed(lambda: refine_on_inliers(m, rs.selection, rs.theta))
        rows.append(_row("RANSAC-r", ratio, run, metrics(kind, th, data, m, tau), ms + ms2))
    else:
        rows += [_failed("RANSAC", ratio, run), _failed("RANSAC-r", ratio, run)]
    return rows


def cell_rotation(ratio, run, seed, n, sigma):
    return _cell_rigid(ratio, run, seed, n, sigma, False)


def cell_euclidean(ratio, run, seed, n, sigma):
    return _cell_rigid(ratio, run, seed, n, sigma, True)


def cell_init_study(ratio, run, seed, n, sigma):
    data = gen_rigid(n, sigma, ratio, False, rng_seed=derive_seed(seed, "data", ratio, run))
    m = data.model
    beta = beta_rigid(sigma)
    tau = math.sqrt(beta)
    s = derive_seed(seed, "solve", ratio, run)
    rows = []
    for init in ("random", "ransac"):
        try:
            res, ms = _timed(lambda: fit(m, beta, tau, init=init, seed=s))
            rows.append(_row(f"MCME-{init}", ratio, run, metrics("rotation", res.theta, data, m, tau), ms))
        except DegenerateError:
            rows.append(_failed(f"MCME-{init}", ratio, run))
    return rows


def cell_homography(ratio, run, seed, n, sigma):
    data = gen_homography(n, sigma, ratio, rng_seed=derive_seed(seed, "data", ratio, run))
    tau = 2.0 * sigma * math.sqrt(2.0) if sigma > 0 else 1.0
    beta = beta_from_tau(tau)
    s = derive_seed(seed, "solve", ratio, run)
    lin = linearize_projective("homography", data.x, data.xp)
    geo = homography_geometric(data.x, data.xp)
    rows = []

    def record(method, H, ms):
        rec = metrics("homography", H, data)
        rec["consensus"] = int(np.sum(_transfer(H, data) <= tau))
        rows.append(_row(method, ratio, run, rec, ms))

    rs, ms = _timed(lambda: ransac(geo, tau, rng_seed=s))
    if rs.success:
        record("RANSAC", geo.matrix(rs.theta), ms)
        th, ms2 = _timed(lambda: refine_on_inliers(geo, rs.selection, rs.theta))
        record("RANSAC-r", geo.matrix(th), ms + ms2)
        cfg = FitConfig(beta=beta, rng_seed=s)
        res, ms2 = _timed(lambda: acs_fit(geo, cfg, rs.theta, init_selection=rs.selection))
        record("MCME", geo.matrix(res.theta), ms + ms2)
    else:
        rows += [_failed(k, ratio, run) for k in ("RANSAC", "RANSAC-r", "MCME")]
    try:
        res, ms = _timed(lambda: fit(lin, beta, tau, init="ransac", seed=s))
        record("MCME-alg", lin.matrix(res.theta), ms)
    except DegenerateError:
        rows.append(_failed("MCME-alg", ratio, run))
    return rows


def _transfer(H, data):
    return np.linalg.norm(data.x - dehom_apply(H, data.xp), axis=1)


CELLS = {"regression": cell_regression, "rotation": cell_rotation,
         "euclidean": cell_euclidean, "homography": cell_homography,
         "init-study": cell_init_study}


def thread_count():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(problem, ratios, runs, seed=0, n=None, sigma=None, threads=None):
    """All rows of a sweep, ratio-major then run then method."""
    if problem not in CELLS:
        raise ValueError(f"unknown problem {problem!r}")
    n = DEFAULTS[problem]["n"] if n is None else n
    sigma = DEFAULTS[problem]["sigma"] if sigma is None else sigma
    jobs = [(r, k) for r in ratios for k in range(runs)]
    cell = CELLS[problem]
    threads = thread_count() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: cell(job[0], job[1], seed, n, sigma), jobs))
    else:
        parts = [cell(r, k, seed, n, sigma) for r, k in jobs]
    return [row for part in parts for row in part]


def _fmt(v):
    if isinstance(v, float):
        return "" if not math.isfinite(v) else repr(round(v, 12))
    return str(v)


def to_csv(rows, timing=False):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        vals = [row[c] for c in COLUMNS]
        if not timing:
            vals[-1] = math.nan
        w.writerow([_fmt(v) for v in vals])
    return buf.getvalue()


def summarize(rows, key):
    """{method: (ratios, means, stds)} of column ``key`` ignoring blanks."""
    acc = {}
    for row in rows:
        v = row[key]
        if isinstance(v, float) and not math.isfinite(v):
            continue
        acc.setdefault(row["method"], {}).setdefault(row["outlier_ratio"], []).append(float(v))
    out = {}
    for method, by_ratio in acc.items():
        rs = sorted(by_ratio)
        out[method] = (rs, [float(np.mean(by_ratio[r])) for r in rs],
                       [float(np.std(by_ratio[r])) for r in rs])
    return out


def primary_error(problem):
    return {"regression": "err_theta", "homography": "err_theta"}.get(problem, "err_rot_deg")
