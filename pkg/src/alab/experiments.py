"""Experiment drivers: each binds a RunConfig to the numerical modules and returns a report section.

Every stochastic step draws from ``sub_rng(seed, label)``. Monte Carlo work is cut
into fixed blocks, each with its own label, so results do not depend on how many
worker processes evaluate the blocks.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, region_of, sub_rng
from .degree import DegreeReport, DepthRow, DkRow, depth_samples, dkloc_hat, dkloc_values, pullback_mass_check, target_samples, verify_std
from .errors import CalibrationError, SearchFailedError
from .fibfam import PerturbedEndo, TrapRegion, assemble, calibrate_c
from .generic import check_conditions, search_generic_pair
from .lyap import hyperbolicity_report, lyapunov_exponents
from .potlab import hyperplane, l1_decay, modulus_scan, sup_decay
from .projsp import lift_record, normalize_lifts, sample_uniform_lifts

WORKERS_ENV = "ALAB_WORKERS"
SUITE = ("genericity", "verify-std", "dkloc", "potential-sup", "potential-l1", "modulus", "lyapunov")


def workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _run_blocks(fn, jobs: list):
    """Evaluate ``fn`` on each job, in order; parallel only when ALAB_WORKERS > 1."""
    n = workers()
    if n == 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _blocks(total: int, size: int) -> list[tuple[int, int]]:
    return [(i, min(size, total - i)) for i in range(0, total, size)]


def jsonable(x):
    """Plain JSON types only; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _csv_text(header: list, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


@dataclass
class ExperimentReport:
    config: dict
    results: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)  # name -> CSV text

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        # wall-clock lives in timing.json so that report.json is reproducible
        return jsonable(
            {
                "config": self.config,
                "results": self.results,
                "verdicts": self.verdicts,
                "passed": self.passed,
                "stats": self.stats,
                "files": sorted(self.files),
            }
        )

    def write(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        (out / "config.resolved.json").write_text(json.dumps(jsonable(self.config), indent=2, sort_keys=True) + "\n")
        (out / "timing.json").write_text(json.dumps(jsonable(self.timing), indent=2, sort_keys=True) + "\n")
        for name, text in self.files.items():
            (out / name).write_text(text)


class Run:
    """Shared state of one invocation: the pair, f_eps, the regions and cached intermediate results."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.pair = cfg.pair()
        self.endo: PerturbedEndo = assemble(self.pair, cfg.epsilon)
        self.report = ExperimentReport(config={})
        self._regions = None
        self._cache: dict = {}

    def rng(self, label: str) -> np.random.Generator:
        return sub_rng(self.cfg.seed, label)

    @property
    def degenerate(self) -> bool:
        return self.endo.epsilon == 0

    def regions(self) -> tuple[TrapRegion, TrapRegion]:
        if self._regions is None:
            given = region_of(self.cfg)
            if given is not None:
                self._regions = given
            elif self.degenerate:
                # the tube collapses onto the invariant hyperplane {z_k = 0}
                self._regions = TrapRegion(1.0, 0.0), TrapRegion(2.0, 0.0)
            else:
                c, c2 = calibrate_c(self.endo, rng=self.rng("calibrate"))
                self._regions = TrapRegion(c, abs(self.endo.epsilon)), TrapRegion(c2, abs(self.endo.epsilon))
        return self._regions

    def resolved_config(self) -> dict:
        d = self.cfg.to_dict()
        if self._regions is not None:
            U, Up = self._regions
            d["region"] = {"c": U.c, "c_outer": Up.c}
        return d

    def timed(self, name: str, fn):
        t0 = time.perf_counter()
        out = fn()
        self.report.timing[name] = time.perf_counter() - t0
        return out


# ---------------------------------------------------------------------------
# individual experiments


def _points_csv(groups: dict, k: int) -> str:
    rows = []
    for name, pts in groups.items():
        for i, rec in enumerate(pts):
            rows.append([name, i] + [float(c[0]) for c in rec] + [float(c[1]) for c in rec])
    n = k
    return _csv_text(["set", "index"] + [f"re{i}" for i in range(n)] + [f"im{i}" for i in range(n)], rows)


def run_genericity(run: Run) -> None:
    rep = check_conditions(run.pair, run.cfg.param("generic_n_max"))
    d = rep.to_dict()
    run.report.results["genericity"] = d
    for key, v in rep.verdicts.items():
        if v is not None:
            run.report.verdicts[f"genericity.{key}"] = bool(v)
    groups = {"x_minus1": [p["point"] for p in d["x_minus1"]], "x": d["x_set"]}
    if d["y_set"] is not None:
        groups["y"] = d["y_set"]
    run.report.files["exceptional_points.csv"] = _points_csv(groups, run.pair.k)


def run_search(run: Run) -> None:
    cfg = run.cfg
    eps = cfg.epsilon

    def calibratable(pair) -> bool:
        if eps == 0:
            return True
        try:
            calibrate_c(assemble(pair, eps), rng=run.rng("search/calibrate"))
            return True
        except CalibrationError:
            return False

    try:
        res = search_generic_pair(cfg.family["k"], cfg.family["d"], run.rng("search"), cfg.param("budget"), cfg.param("generic_n_max"), accept=calibratable)
    except SearchFailedError as exc:
        run.report.results["search"] = {"found": False, "message": str(exc), "best": exc.best}
        run.report.verdicts["search.found"] = False
        return
    family = {"k": cfg.family["k"], "d": cfg.family["d"], "alpha": [[a.real, a.imag] for a in res.alpha]}
    if res.shift is not None:
        family["power_shift"] = [[c.real, c.imag] for c in res.shift]
    run.report.results["search"] = {"found": True, "trials": res.trials, "family": family, "genericity": res.report.to_dict()}
    run.report.verdicts["search.found"] = True
    found = {**run.resolved_config(), "family": family, "experiment": "full-suite"}
    run.report.files["found_config.json"] = json.dumps(jsonable(found), indent=2, sort_keys=True) + "\n"


def _std_block(job):
    endo, U, n_max, X = job
    return verify_std(endo, U, n_max, X.shape[0], None, targets=X)


def _hyperplane_targets(k: int, n: int, rng) -> np.ndarray:
    X = np.zeros((n, k + 1), dtype=complex)
    X[:, :k] = sample_uniform_lifts(rng, k - 1, n)
    return X


def run_verify_std(run: Run) -> None:
    cfg, endo = run.cfg, run.endo
    U, _ = run.regions()
    n_max, N, bs = cfg.param("n_max"), cfg.param("samples"), cfg.param("block_size")
    jobs = []
    for b, (start, size) in enumerate(_blocks(N, bs)):
        rng = run.rng(f"verify-std/targets/{b}")
        if run.degenerate:
            X = _hyperplane_targets(endo.k, size, rng)
        else:
            X = target_samples(endo, U, size, rng, cfg.param("stratified_fraction"), n_max + 1)
        jobs.append((endo, U, n_max, X))
    parts = _run_blocks(_std_block, jobs)
    rep = DegreeReport()
    d, s = endo.d, endo.s
    for n in range(n_max + 1):
        rows = [p.per_depth[n] for p in parts]
        rep.per_depth.append(DepthRow(n, max(r.max_count for r in rows), max(r.max_count_set for r in rows), rows[0].diagram_bound, rows[0].std_bound))
    for (start, _), p in zip(_blocks(N, bs), parts):
        rep.samples += [(n, i + start, cm, cset, inu) for n, i, cm, cset, inu in p.samples]
    rep.verdict = bool(n_max == 0 or rep.per_depth[-1].max_count < d ** (n_max * s))
    rep.diagram_bound_ok = all(p.diagram_bound_ok for p in parts)
    res = rep.to_dict()
    res["c"] = U.c
    res["targets"] = "hyperplane z_k = 0" if run.degenerate else "uniform + pushed tube samples"
    run.report.results["verify_std"] = res
    run.report.verdicts["verify_std.small_degree"] = rep.verdict
    run.report.verdicts["verify_std.diagram_bound"] = bool(rep.diagram_bound_ok)
    run.report.stats["verify_std_nodes"] = int(sum(r[3] for r in rep.samples))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "sample_id", "count_mult", "count_set", "in_U_flag"])
    for row in sorted(rep.samples):
        w.writerow([int(v) for v in row])
    run.report.files["verify_std_counts.csv"] = buf.getvalue()


def _dk_block(job):
    endo, V, n, size, label, seed, method = job
    return dkloc_values(endo, V, n, size, sub_rng(seed, label), method)


def dkloc_rows(run: Run) -> list:
    if "dkloc" in run._cache:
        return run._cache["dkloc"]
    cfg = run.cfg
    _, V = run.regions()
    rows = []
    method = cfg.param("dk_method")
    e = run.endo
    for n in range(1, cfg.param("dk_n_max") + 1):
        N = cfg.param("dk_samples")
        if method == "fibered":
            N = depth_samples(N, e.d ** (e.s * n), cfg.param("dk_leaf_budget"))
        jobs = [
            (e, V, n, size, f"dkloc/{n}/{b}", cfg.seed, method)
            for b, (_, size) in enumerate(_blocks(N, max(cfg.param("block_size"), 100)))
        ]
        vals = np.concatenate(_run_blocks(_dk_block, jobs))
        se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        rows.append(DkRow(n, float(vals.mean()), se))
    run._cache["dkloc"] = rows
    return rows


def run_dkloc(run: Run) -> None:
    cfg, endo = run.cfg, run.endo
    rows = dkloc_rows(run)
    top = endo.d ** (endo.k - 1)
    d_hat = dkloc_hat(rows, 2)
    root5 = dkloc_hat([r for r in rows if r.n <= 5], 2)
    slope = dkloc_hat(rows, 2, how="slope")
    mass = pullback_mass_check(endo, 2, cfg.param("mass_samples"), run.rng("dkloc/mass"))
    _, V = run.regions()
    run.report.results["dkloc"] = {
        "V_c": V.c,
        "method": cfg.param("dk_method"),
        "rows": [dict(vars(r), nth_root=r.nth_root) for r in rows],
        "d_hat": d_hat,
        "max_nth_root_n2_5": root5,
        "d_hat_slope_diagnostic": slope,
        "top_degree": top,
        "mass_check": {"n": 2, "estimate": mass.estimate, "stderr": mass.stderr, "expected": mass.expected, "ok": mass.ok},
    }
    run.report.verdicts["dkloc.below_top_degree"] = bool(d_hat < top and root5 < top)
    run.report.verdicts["dkloc.mass_check"] = bool(mass.ok)
    run.report.files["dkloc.csv"] = _csv_text(["n", "estimate", "stderr", "nth_root"], [[r.n, r.estimate, r.stderr, r.nth_root] for r in rows])


def _currents(run: Run):
    k = run.endo.k
    return hyperplane(k, 1.0), hyperplane(k, 1.0, z0=-run.cfg.param("fiber_shift"))


def _fit_csv(fit, per_sample: np.ndarray) -> str:
    rows = [[n, i, float(per_sample[n, i])] for n in range(per_sample.shape[0]) for i in range(per_sample.shape[1])]
    return _csv_text(["n", "sample_id", "value"], rows)


def sup_fit(run: Run):
    if "sup" not in run._cache:
        cfg = run.cfg
        S, Sp = _currents(run)
        X = sample_uniform_lifts(run.rng("potential-sup/X"), run.endo.k, cfg.param("pot_samples"))
        run._cache["sup"] = sup_decay(run.endo, S, Sp, X, cfg.param("pot_n_max"), run.rng("potential-sup/boot"))
    return run._cache["sup"]


def _pot_result(fit, S, Sp) -> dict:
    return {"S": S.to_dict(), "S_prime": Sp.to_dict(), **fit.to_dict()}


def run_potential_sup(run: Run) -> None:
    fit = sup_fit(run)
    S, Sp = _currents(run)
    run.report.results["potential_sup"] = _pot_result(fit, S, Sp)
    run.report.verdicts["potential_sup.contracts"] = fit.verdict
    run.report.stats["potential_sup_leaves"] = int((run.cfg.param("pot_samples") + 1) * run.endo.d ** (run.endo.k * run.cfg.param("pot_n_max")))
    run.report.files["potential_sup.csv"] = _fit_csv(fit, fit.extra["per_sample"])


def run_potential_l1(run: Run) -> None:
    cfg = run.cfg
    S, Sp = _currents(run)
    fit = l1_decay(run.endo, S, Sp, cfg.param("pot_n_max"), cfg.param("pot_samples"), run.rng("potential-l1"))
    run.report.results["potential_l1"] = _pot_result(fit, S, Sp)
    run.report.verdicts["potential_l1.contracts"] = fit.verdict
    run.report.files["potential_l1.csv"] = _fit_csv(fit, fit.extra["per_sample"])


def run_modulus(run: Run) -> None:
    cfg = run.cfg
    lam = sup_fit(run).rate
    lo, hi = cfg.param("distance_exponents")
    dist = [10.0 ** -e for e in range(lo, hi + 1)]
    S, _ = _currents(run)
    fit = modulus_scan(run.endo, S, cfg.param("n_eval"), run.rng("modulus"), dist, cfg.param("pairs_per_distance"), lam_hat=lam)
    res = {"S": S.to_dict(), "lambda_hat": lam, **fit.to_dict()}
    res.setdefault("alpha_theory", None)
    run.report.results["modulus"] = res
    run.report.verdicts["modulus.holder"] = fit.verdict
    X, Y, ux, uy = fit.extra["pairs"]
    P = cfg.param("pairs_per_distance")
    rows = [[dist[i // P], i, float(ux[i]), float(uy[i]), float(abs(ux[i] - uy[i]))] for i in range(len(ux))]
    run.report.files["modulus.csv"] = _csv_text(["distance", "pair_id", "u_x", "u_y", "abs_diff"], rows)


def run_lyapunov(run: Run) -> None:
    cfg, endo = run.cfg, run.endo
    start = np.array([complex(*c) for c in cfg.param("start")])
    if start.size != endo.k + 1:
        raise ValueError(f"start point needs {endo.k + 1} coordinates")
    rep = lyapunov_exponents(endo, start, cfg.param("n_transient"), cfg.param("n_cocycle"), run.rng("lyapunov"), cfg.param("orbit_mode"))
    rows = dkloc_rows(run)
    hyp = hyperbolicity_report(rep, endo.d, endo.k, dkloc_hat(rows, 2))
    # prefactor-free rate of the same volume sequence; diagnostic only
    hyp_slope = hyperbolicity_report(rep, endo.d, endo.k, dkloc_hat(rows, 2, how="slope"))
    run.report.results["lyapunov"] = {
        **rep.to_dict(),
        "orbit_end": lift_record(normalize_lifts(rep.orbit_end[None])[0]),
        "hyperbolicity": hyp.to_dict(),
        "hyperbolicity_with_slope_estimate": hyp_slope.to_dict(),
    }
    run.report.verdicts["lyapunov.converged"] = rep.converged
    run.report.verdicts["lyapunov.hyperbolic"] = hyp.all_true
    rows = [[i + 1] + [float(v) for v in rep.running[i]] for i in range(0, rep.running.shape[0], 10)]
    run.report.files["lyapunov_running.csv"] = _csv_text(["step"] + [f"chi_{i + 1}" for i in range(rep.k)], rows)


DRIVERS = {
    "genericity": run_genericity,
    "search": run_search,
    "verify-std": run_verify_std,
    "dkloc": run_dkloc,
    "potential-sup": run_potential_sup,
    "potential-l1": run_potential_l1,
    "modulus": run_modulus,
    "lyapunov": run_lyapunov,
}


def run_experiment(cfg: RunConfig, out: Path | None = None) -> ExperimentReport:
    """Run the configured experiment; writes report.json, config.resolved.json, timing.json and CSVs when ``out`` is given."""
    run = Run(cfg)
    names = SUITE if cfg.experiment == "full-suite" else (cfg.experiment,)
    for name in names:
        run.timed(name, lambda: DRIVERS[name](run))
    run.report.config = run.resolved_config()
    run.report.timing["workers"] = workers()
    if out is not None:
        run.report.write(Path(out))
    return run.report
