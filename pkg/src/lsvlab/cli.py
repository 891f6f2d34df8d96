"""Experiment runner.

    python -m lsvlab run <config.json> [--out DIR] [--seed N] [--workers K]

The config is one JSON document with the sections ``experiment``,
``distribution``, ``seeds``, ``grids``, ``tolerances`` and ``output``.
Tolerances default to the shipped calibration file. Exit status: 0 when every
check passes, 2 on a tolerance violation, 1 on a usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import multiprocessing as mp
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import correlations as cor
from . import coupling as cpl
from . import tower as tw
from . import transfer as tr
from .lsv import FiberDensity, make_grid
from .noise import NoisePath, ParamDistribution, constant_path, laplace_signature, signature, task_seed
from .preimages import deterministic_limit, x_at
from .series import TailSeries, fit_decay

OUT_ENV = "LSVLAB_OUT"
CHUNK = 500  # samples per task; fixed so results never depend on the pool size


class ConfigError(ValueError):
    pass


def load_calibration() -> dict:
    return json.loads(resources.files("lsvlab").joinpath("data/calibration.json").read_text())


def load_schema() -> dict:
    return json.loads(resources.files("lsvlab").joinpath("data/csv_schema.json").read_text())


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    return v


def _pmap(fn, tasks, workers: int):
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers, mp_context=mp.get_context("fork")) as ex:
        return list(ex.map(fn, *zip(*tasks)))


def _chunks(n: int, size: int = CHUNK):
    return [(i, min(size, n - i)) for i in range(0, n, size)]


class Report:
    def __init__(self, experiment: str):
        self.experiment = experiment
        self.tables: dict[str, tuple[list[str], list[list]]] = {}
        self.summary: dict = {}
        self.checks: dict[str, dict] = {}

    def table(self, name: str, header, rows):
        self.tables[name] = (list(header), [list(r) for r in rows])

    def check(self, name: str, passed: bool, **info):
        self.checks[name] = {"pass": bool(passed), **info}

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.checks.values())


# ----------------------------------------------------------------- config


def _dist(cfg: dict) -> ParamDistribution:
    d = cfg.get("distribution")
    if d is None:
        raise ConfigError("missing 'distribution' section")
    if "constant" in d:
        return constant_path(d["constant"]).dist
    try:
        return ParamDistribution(d["kind"], float(d["alpha0"]), float(d["alpha1"]),
                                 float(d.get("p1", 0.5)))
    except KeyError as e:
        raise ConfigError(f"distribution needs {e}") from None


def _path(cfg: dict, seed: int) -> NoisePath:
    d = cfg["distribution"]
    if "constant" in d:
        return constant_path(d["constant"])
    return NoisePath(task_seed(seed, 0), _dist(cfg))


def _c_nu(dist: ParamDistribution, choice) -> float:
    if choice in (None, "published"):
        return signature(dist).c_nu
    if choice == "laplace":
        return laplace_signature(dist).c_nu
    return float(choice)


# ------------------------------------------------------------ experiments


def exp_preimages(cfg, g, tol, seed, workers, rep):
    path = _path(cfg, seed)
    ells = [int(v) for v in g.get("ells", [10, 100, 1000, 10000, 100000, 1000000])]
    a0 = path.dist.alpha0
    q = signature(path.dist).q
    rows = []
    for ell in ells:
        x = x_at(path, 0, ell)
        scaled = ell ** (1.0 / a0) * x
        rows.append([ell, x, scaled, scaled / (math.log(ell) ** (q / a0) if q else 1.0)])
    rep.table("preimages", ["ell", "x_ell", "scaled", "normalized"], rows)
    last = rows[-1][2]
    rep.summary.update(ell=ells[-1], scaled=last)
    if "constant" in cfg["distribution"]:
        lim = deterministic_limit(a0)
        rep.summary.update(limit=lim, ratio_to_limit=last / lim)
        if abs(lim - 2.0) < 1e-12:
            rep.summary["ratio_to_2"] = last / 2.0
        lo, hi = tol["scaled_band"]
        band = [lo * lim / 2.0, hi * lim / 2.0]
        rep.check("scaled_in_band", band[0] <= last <= band[1], value=last, band=band)


def _sharp_task(seed, index, dist_dict, ells, c_nu):
    dist = ParamDistribution.from_dict(dist_dict)
    path = NoisePath(task_seed(seed, index), dist)
    return [(index, ell, x_at(path, 0, ell), asy.sharp_ratio(path, ell, dist, 0, c_nu)) for ell in ells]


def exp_sharp(cfg, g, tol, seed, workers, rep):
    dist = _dist(cfg)
    ells = [int(v) for v in g.get("ells", tol["ells"])]
    n_paths = int(g.get("n_paths", tol["n_paths"]))
    c_nu = _c_nu(dist, g.get("c_nu"))
    res = _pmap(_sharp_task, [(seed, i, dist.to_dict(), ells, c_nu) for i in range(n_paths)], workers)
    rows = [r for block in res for r in block]
    rep.table("sharp-asymptotics", ["path", "ell", "x_ell", "ratio"], rows)
    med = [float(np.median([r[3] for r in rows if r[1] == ell])) for ell in ells]
    dev = [abs(m - 1.0) for m in med]
    rep.table("sharp-asymptotics-medians", ["ell", "median_ratio", "abs_dev"],
              [[e, m, d] for e, m, d in zip(ells, med, dev)])
    rep.summary.update(c_nu=c_nu, medians=dict(zip(map(str, ells), med)))
    if dist.kind == "discrete":
        lo, hi = tol["discrete_band"]
        rep.check("median_in_band", lo <= med[-1] <= hi, value=med[-1], band=[lo, hi])
    else:
        rep.check("median_trend_to_one", all(b < a for a, b in zip(dev, dev[1:])), deviations=dev)


def exp_a1a2(cfg, g, tol, seed, workers, rep):
    dist = _dist(cfg)
    ells = np.array([int(v) for v in g.get("ells", tol["ells"])])
    c_nu = _c_nu(dist, g.get("c_nu"))
    s1 = asy.a1_partial_sums(dist, ells)
    s2 = asy.a2_partial_sums(dist, ells, c_nu)
    e1 = np.abs(s1 / c_nu - 1.0)
    e2 = np.abs(s2 / c_nu - 1.0)
    rep.table("a1a2", ["ell", "S1", "S2", "rel_err1", "rel_err2", "c_nu"],
              [[int(l), a, b, c, d, c_nu] for l, a, b, c, d in zip(ells, s1, s2, e1, e2)])
    rep.summary.update(c_nu=c_nu, published_c_nu=signature(dist).c_nu,
                       laplace_c_nu=laplace_signature(dist).c_nu)
    if dist.kind == "quadratic":
        rep.summary["rel_err_vs_published"] = list(np.abs(s1 / signature(dist).c_nu - 1.0))
        rep.summary["rel_err_vs_laplace"] = list(np.abs(s1 / laplace_signature(dist).c_nu - 1.0))
    if dist.kind == "discrete":
        rep.check("S1_rel_err", e1[-1] <= tol["discrete_rel_tol"], value=e1[-1], tol=tol["discrete_rel_tol"])
    else:
        rep.check("S1_rel_err_decreasing", bool(np.all(np.diff(e1) < 0)), values=e1)
        rep.check("S1_rel_err_final", e1[-1] <= tol["continuous_rel_max"], value=e1[-1],
                  tol=tol["continuous_rel_max"])


def _hoeffding_task(seed, first, n, dist_dict, ell):
    return asy.hoeffding_deviations(ParamDistribution.from_dict(dist_dict), ell, n, seed, first)


def exp_hoeffding(cfg, g, tol, seed, workers, rep):
    dist = _dist(cfg)
    ells = [int(v) for v in g.get("ells", tol["ells"])]
    n_samples = int(g.get("n_samples", tol["n_samples"]))
    t_mult = g.get("t_multiples", [0.5, 1.0, 1.5, 2.0])
    rows = []
    for k, ell in enumerate(ells):
        parts = _pmap(_hoeffding_task,
                      [(task_seed(seed, k), a, n, dist.to_dict(), ell) for a, n in _chunks(n_samples)],
                      workers)
        dev = np.concatenate(parts)
        # t grid scaled to the natural deviation size sqrt(2 r0 / l) (log l)^q
        q = signature(dist).q
        r0 = dist.alpha0 * 2.0**dist.alpha0
        unit = math.sqrt(2.0 * r0 / ell) * math.log(ell) ** q
        ts = g.get("ts") or [m * unit for m in t_mult]
        for r in asy.hoeffding_check(dist, ell, ts, deviations=dev):
            rows.append([ell, r.t, r.empirical, r.bound, r.stderr, r.ok])
    rep.table("hoeffding", ["ell", "t", "empirical", "bound", "stderr", "ok"], rows)
    rep.check("bound_respected", all(r[5] for r in rows), n_se=tol["n_se"])


def exp_tower_tail(cfg, g, tol, seed, workers, rep):
    path = _path(cfg, seed)
    height = int(g.get("height", 2000))
    mh = int(g.get("markov_height", tol["markov_height"]))
    part = tw.build_partition(path, 0, height, check=False)
    errs = tw.markov_errors(path, part, min(mh, height))
    mass = tw.tower_mass(path, 0, height)
    tail = 0.5 * part.shifted[1:]
    rows = []
    for n in range(1, height + 1):
        rows.append([n, part.masses[n - 1], tail[n - 1], mass.partial[n - 1], mass.envelope[n - 1],
                     errs[n - 1] if n <= errs.size else float("nan")])
    rep.table("tower-tail", ["n", "column_mass", "tail_mass", "tower_mass", "envelope_mass", "markov_error"], rows)
    rep.summary.update(truncated_tail=part.tail_mass, tower_mass=float(mass.partial[-1]),
                       discarded_bound=mass.tail_bound)
    rep.check("markov", float(errs.max()) <= tol["markov_tol"], value=float(errs.max()))
    rep.check("aperiodicity", part.masses[0] == 0.25, value=float(part.masses[0]))
    rep.check("mass_increasing_bounded",
              bool(np.all(np.diff(mass.partial) > 0) and np.all(mass.partial <= mass.envelope + 1e-15)))


def _annealed_task(seed, first, n, dist_dict, ns, method):
    return n * tw.annealed_tail_mc(ParamDistribution.from_dict(dist_dict), ns, n, seed, method, first)


def exp_annealed_tail(cfg, g, tol, seed, workers, rep):
    dist = _dist(cfg)
    ns = np.array(g.get("ns", [int(v) for v in np.unique(np.logspace(1, 4, 16).round())]), dtype=np.int64)
    n_samples = int(g.get("n_samples", 4000))
    # the difference form subtracts two independent O(n^{-1/a0}) terms, so it
    # is only informative at small n
    small = ns[ns <= int(g.get("difference_max_n", 100))]
    out = {}
    for method, grid in (("closed", ns), ("difference", small)):
        parts = _pmap(_annealed_task, [(seed, a, n, dist.to_dict(), grid, method)
                                       for a, n in _chunks(n_samples)], workers)
        out[method] = np.sum(parts, axis=0) / n_samples
    diff = np.full(ns.size, np.nan)
    diff[: small.size] = out["difference"]
    env = tw.annealed_tail_envelope(dist, ns)
    rep.table("annealed-tail", ["n", "closed", "difference", "envelope"],
              zip(ns, out["closed"], diff, env))
    window = g.get("window", tol["annealed_window"])
    fit = fit_decay(TailSeries(ns, out["closed"]), window, noise_floor=0.0)
    bound = -(1.0 / dist.alpha0 + 1.0) + tol["annealed_slope_slack"]
    c_hat = float(np.max(out["closed"] / env))
    rep.summary.update(slope=fit.slope, r2=fit.r2, C_hat=c_hat, window=window)
    rep.check("slope", fit.slope <= bound, value=fit.slope, bound=bound)


def _coupling_task(seed, first, n, dist_dict, ell0, horizon):
    return cpl.sample_T(ParamDistribution.from_dict(dist_dict), n, seed, ell0, horizon, first)


def exp_coupling_tail(cfg, g, tol, seed, workers, rep):
    dist = _dist(cfg)
    n_samples = int(g.get("n_samples", tol["n_samples"]))
    ell0 = int(g.get("ell0", tol["ell0"]))
    horizon = int(g.get("horizon", tol["horizon"]))
    lo, hi = g.get("window", tol["window"])
    ns = np.array(g.get("ns", [int(v) for v in np.unique(np.logspace(math.log10(lo), math.log10(hi), 25).round())]))
    parts = _pmap(_coupling_task, [(seed, a, n, dist.to_dict(), ell0, horizon)
                                   for a, n in _chunks(n_samples, 5000)], workers)
    T = np.concatenate([p[0] for p in parts])
    surv = cpl.survival(T, ns, horizon)
    series = TailSeries(ns, surv, {"horizon": horizon})
    fit = cpl.tail_fit(series, (lo, hi))
    rep.table("coupling-tail", ["n", "survival", "fitted"], zip(ns, surv, fit(ns)))
    bound = -(1.0 / dist.alpha0 - 1.0) + tol["slope_slack"]
    beyond = int(np.sum(T > hi))
    rep.summary.update(slope=fit.slope, r2=fit.r2, censored=int(np.sum(T < 0)), beyond_window=beyond,
                       undersampled=beyond < tol["min_tail"])
    rep.check("slope", fit.slope <= bound, value=fit.slope, bound=bound)
    rep.check("monotone", bool(np.all(np.diff(surv) <= 0)))


def exp_density(cfg, g, tol, seed, workers, rep):
    path = _path(cfg, seed)
    grid = make_grid(int(g.get("n_cells", tol["n_cells"])))
    npb = int(g.get("n_pullback", tol["n_pullback"]))
    h = tr.equivariant_density(path, 0, npb, grid)
    ces = tr.cesaro_density(path, 0, int(g.get("cesaro_n", tol["cesaro_n"])), grid)
    res = [tr.equivariance_residual(path, 0, int(n), grid) for n in g.get("pullbacks", tol["pullbacks"])]
    rep.table("density", ["cell_left", "cell_right", "mass"],
              zip(grid.edges[:-1], grid.edges[1:], h.mass))
    rep.table("density-residuals", ["n_pullback", "residual"], zip(g.get("pullbacks", tol["pullbacks"]), res))
    est = h.l1(ces)
    rep.summary.update(sup_base=tr.density_sup(h, (0.5, 1.0)), cesaro_sup_base=tr.density_sup(ces, (0.5, 1.0)),
                       estimators_l1=est)
    rep.check("residual_decreasing", all(b < a for a, b in zip(res, res[1:])), values=res)
    rep.check("estimators_agree", est <= tol["estimators_l1"], value=est, tol=tol["estimators_l1"])
    if "constant" in cfg["distribution"] and g.get("histogram", True):
        hist = tr.orbit_histogram(path, grid, 0, int(g.get("hist_orbits", tol["hist_orbits"])),
                                  int(g.get("hist_burn", tol["hist_burn"])),
                                  int(g.get("hist_steps", tol["hist_steps"])), seed)
        d = float(np.abs(hist - h.mass).sum())
        rep.summary["histogram_l1"] = d
        rep.check("histogram_oracle", d <= tol["hist_l1"], value=d, tol=tol["hist_l1"])


def _corr_task(kind, seed, cfg_dist, phi, psi, ns, npb, n_cells):
    cfg = {"distribution": cfg_dist}
    path = _path(cfg, seed)
    grid = make_grid(n_cells)
    if kind == "future":
        return cor.future_corr_series(path, cor.BUILTINS[phi], cor.BUILTINS[psi], ns, 0, npb, grid).values
    if kind == "past":
        return cor.past_corr_series(path, cor.BUILTINS[phi], cor.BUILTINS[psi], ns, 0, npb, grid).values
    h = tr.equivariant_density(path, 0, npb, grid)
    return cor.pushforward_distance(path, FiberDensity.uniform(grid), h, ns).values


def exp_correlations(cfg, g, tol, seed, workers, rep):
    dist = _dist(cfg)
    const = "constant" in cfg["distribution"]
    lo, hi = g.get("window", tol["window"])
    ns = np.array(g.get("ns", [int(v) for v in np.unique(np.logspace(math.log10(lo), math.log10(hi), 20).round())]))
    npb = int(g.get("n_pullback", tol["n_pullback"]))
    n_cells = int(g.get("n_cells", 8192))
    phi, psi = g.get("observables", ["identity", "identity"])
    for name in (phi, psi):
        if name not in cor.BUILTINS:
            raise ConfigError(f"unknown observable {name!r}")
    kinds = ["future", "past", "pushforward"]
    res = _pmap(_corr_task, [(k, seed, cfg["distribution"], phi, psi, ns, npb, n_cells) for k in kinds], workers)
    rows = []
    floor = tol["noise_floor"]
    for kind, vals in zip(kinds, res):
        fit = fit_decay(TailSeries(ns, vals), (lo, hi), floor)
        rows += [[kind, n, v, abs(v), fit(n)] for n, v in zip(ns, vals)]
        if kind == "pushforward":
            bound = tol["pushforward_slope_max"]
            rep.check("pushforward_monotone", bool(np.all(np.diff(vals) <= 1e-15)))
        else:
            bound = tol["constant_slope_max"] if const else tol["random_slope_max"]
        rep.summary[f"{kind}_slope"] = fit.slope
        rep.summary[f"{kind}_r2"] = fit.r2
        rep.check(f"{kind}_slope", fit.slope <= bound, value=fit.slope, bound=bound)
    rep.summary["alpha0"] = dist.alpha0
    rep.table("correlations", ["series", "n", "corr", "abs_corr", "fitted"], rows)


def exp_appendix(cfg, g, tol, seed, workers, rep):
    rows = []
    for a, b, n in g.get("tail_sums", [[2, 0, 1000], [2, 1, 100000]]):
        exact, asym = asy.tail_sum(float(a), float(b), int(n))
        rows.append(["tail_sum", a, b, n, exact, asym, exact / asym])
        if [a, b, n] in g.get("tail_checks", [[2, 1, 100000]]):
            ok = abs(exact / asym - 1.0) <= tol["tail_ratio_tol"]
            rep.check(f"tail_sum_a{a}_b{b}_n{n}", ok, ratio=exact / asym, tol=tol["tail_ratio_tol"])
    for a, n in g.get("log_power_sums", [[1, 1000000]]):
        exact, asym = asy.log_power_sum(float(a), int(n))
        rows.append(["log_power_sum", a, "", n, exact, asym, exact / asym])
        if [a, n] not in g.get("log_power_checks", [[1, 1000000]]):
            continue
        lo, hi = tol["log_power_band"]
        rep.check(f"log_power_sum_a{a}_n{n}", lo <= exact / asym <= hi, ratio=exact / asym, band=[lo, hi])
    rep.table("appendix-sums", ["lemma", "a", "b", "n", "exact", "asymptotic", "ratio"], rows)


EXPERIMENTS = {
    "preimages": (exp_preimages, "preimages"),
    "sharp-asymptotics": (exp_sharp, "sharp"),
    "a1a2": (exp_a1a2, "a1a2"),
    "hoeffding": (exp_hoeffding, "hoeffding"),
    "tower-tail": (exp_tower_tail, "tower"),
    "annealed-tail": (exp_annealed_tail, "tower"),
    "coupling-tail": (exp_coupling_tail, "coupling"),
    "density": (exp_density, "density"),
    "correlations": (exp_correlations, "correlations"),
    "appendix-sums": (exp_appendix, "appendix"),
}


# ------------------------------------------------------------------- run


def write_report(rep: Report, out: Path, config: dict, seed: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in rep.tables.items():
        with (out / f"{name}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([fmt(v) for v in r])
    summary = {"experiment": rep.experiment, "seed": seed, "pass": rep.ok,
               "checks": rep.checks, "summary": rep.summary, "config": config}
    (out / f"{rep.experiment}_summary.json").write_text(
        json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    if not rep.ok:
        failed = {k: v for k, v in rep.checks.items() if not v["pass"]}
        (out / "failures.json").write_text(json.dumps(_jsonable(failed), indent=2, sort_keys=True) + "\n")


def run_config(config: dict, out: Path, seed: int | None = None, workers: int = 1) -> Report:
    name = config.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    fn, section = EXPERIMENTS[name]
    tol = dict(load_calibration()[section])
    tol.update(config.get("tolerances", {}))
    if seed is None:
        seed = int(config.get("seeds", {}).get("root", 0))
    if "distribution" in config or name != "appendix-sums":
        try:
            _dist(config)
        except ValueError as e:
            raise ConfigError(str(e)) from None
    rep = Report(name)
    fn(config, config.get("grids", {}), tol, seed, workers, rep)
    write_report(rep, out, config, seed)
    return rep


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lsvlab")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    try:
        config = json.loads(Path(args.config).read_text())
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        out = Path(args.out or config.get("output", {}).get("dir") or os.environ.get(OUT_ENV, "lsvlab-out"))
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        rep = run_config(config, out, args.seed, args.workers)
    except (OSError, json.JSONDecodeError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for k, v in rep.checks.items():
        print(f"{'PASS' if v['pass'] else 'FAIL'} {rep.experiment}:{k}")
    return 0 if rep.ok else 2


if __name__ == "__main__":
    sys.exit(main())
