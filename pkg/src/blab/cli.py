"""Command line entry point: ``blab <experiment> --config FILE [--seed N] [--out DIR]``.

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid configuration and 3 when the integration diverges.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config
from .diagnostics import (
    CheckReport, StationarityWindow, bring_down_check, cole_hopf_consistency,
    deterministic_snapshots, envelope_check, fit_riccati_envelope, forgetting_report, kruzhkov_trace,
    stationarity_check, variance_bound_check,
)
from .solvers import BurgersEnsemble, DivergenceError
from .weights import WeightSpec

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


class Run:
    """Collects artifacts and reports for one experiment and writes the manifest."""

    def __init__(self, cfg: ExperimentConfig, out: Path, config_path: Path):
        self.cfg, self.out, self.config_path = cfg, out, config_path
        self.artifacts: list[Path] = []
        self.reports: list[CheckReport] = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.out / name
        self.artifacts.append(p)
        return p

    def report(self, rep: CheckReport, name: str | None = None):
        self.reports.append(rep)
        p = self.path(name or f"report_{rep.check}.json")
        p.write_text(rep.to_json(deterministic=True) + "\n")
        print(rep.summary() + (f" ({rep.runtime_s:.1f}s)" if rep.runtime_s is not None else ""))

    def csv(self, name: str, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)

    def manifest(self, status: int, extra: dict | None = None):
        entries = []
        for p in self.artifacts:
            entries.append({"file": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})
        data = {
            "blab_version": __version__,
            "experiment": self.cfg.experiment,
            "config": self.config_path.name,
            "config_sha256": self.cfg.digest,
            "seed": self.cfg.seed,
            "status": status,
            "checks": [{"check": r.check, "pass": bool(r.passed)} for r in self.reports],
            "artifacts": entries,
        }
        if extra:
            data.update(extra)
        (self.out / "manifest.json").write_text(json.dumps(data, indent=2) + "\n")


# ---------------------------------------------------------------------------
# experiments


def _simulate(run: Run):
    cfg = run.cfg
    from .grid import save_snapshot

    ens = BurgersEnsemble(cfg.solver, realizations=range(cfg.realizations))
    every = cfg.params["snapshot_every"] or cfg.solver.steps or 1
    rows = []

    def record(e):
        u = e.u_values()
        mag2 = (u**2).sum(1)
        rows.append([f"{e.t:.10g}", repr(float(np.sqrt(mag2.max()))), repr(float(mag2.mean()))])
        for r in range(len(e.realizations)):
            st = e.state(r)
            save_snapshot(st.u, run.path(f"u_r{r:03d}_s{e.step_index:07d}.bin"))

    record(ens)
    ens.run(cfg.solver.steps, record, every)
    if ens.step_index % every:
        record(ens)
    run.csv("timeseries.csv", ["t", "max_abs_u", "mean_sq_u"], rows)
    return True


def _variance(run: Run):
    cfg = run.cfg
    p = cfg.params
    probes = None if p["probes"] is None else [tuple(map(float, q)) for q in p["probes"]]
    rep = variance_bound_check(cfg.solver, float(p["T"]), cfg.realizations, probes,
                               workers=cfg.workers)
    run.report(rep)
    return rep.passed


def _kruzhkov(run: Run):
    cfg, p = run.cfg, run.cfg.params
    weight = WeightSpec.power(p["weight_ell"], p["weight_K"])
    traces = {}
    rows = []
    for A in p["amplitudes"]:
        snaps = deterministic_snapshots(cfg.grid, float(A), p["times"], p["method"], cfg.solver.dt)
        traces[A] = kruzhkov_trace(snaps, weight)
        for s in traces[A]:
            rows.append([repr(float(A)), f"{s.t:.10g}", repr(s.Z), s.argmax_i,
                         " ".join(repr(x) for x in s.argmax_x)])
    run.csv("kruzhkov_trace.csv", ["amplitude", "t", "Z", "argmax_axis", "argmax_x"], rows)
    rep = forgetting_report(traces, float(p["forgetting_factor"]))
    run.report(rep)
    cal = p["amplitudes"][p["calibrate_on"]]
    env = fit_riccati_envelope(traces[cal], p["t_min"])
    ok = rep.passed
    for A, tr in traces.items():
        e = envelope_check(tr, env, p["t_min"], label=f"kruzhkov_envelope_A{A:g}")
        e.params["calibrated_on"] = cal
        run.report(e)
        ok = ok and e.passed
    return ok


def _bringdown(run: Run):
    cfg, p = run.cfg, run.cfg.params
    m = cfg.exponents.m if p["m"] is None else float(p["m"])
    rep = bring_down_check(cfg.solver, p["amplitudes"], m, float(p["t_max"]),
                           range(cfg.realizations), int(p["every"]), float(p["spread_limit"]))
    run.report(rep)
    return rep.passed


def _stationarity(run: Run):
    cfg, p = run.cfg, run.cfg.params
    win = StationarityWindow.adjacent(float(p["T"]), samples=int(p["samples"]),
                                      norm_T=tuple(map(float, p["norm_T"])),
                                      warmup=float(p["warmup"]), seed=cfg.seed)
    rep = stationarity_check(cfg.solver, win, float(p["omega"]), float(p["delta"]),
                             float(p["level"]), float(p["quantile_tol"]), workers=cfg.workers)
    run.report(rep)
    return rep.passed


def _colehopf(run: Run):
    cfg, p = run.cfg, run.cfg.params
    rep = cole_hopf_consistency(cfg.solver, cfg.solver.t_end, int(p["halvings"]), float(p["tol"]),
                                float(p["min_decrease"]))
    run.report(rep)
    return rep.passed


def _inequalities(run: Run):
    from .semiconvex import BOUNDS, run_suite, write_csv

    cfg, p = run.cfg, run.cfg.params
    bounds = tuple(p["bounds"]) if p["bounds"] else BOUNDS
    unknown = set(bounds) - set(BOUNDS)
    if unknown:
        raise ConfigError(f"unknown bounds {sorted(unknown)}", "params.bounds")
    t0 = time.perf_counter()
    results = run_suite(int(p["trials"]), np.random.default_rng(cfg.seed), bounds)
    write_csv(results, run.path("inequalities.csv"))
    bad = sum(not r.holds for r in results)
    worst = min(r.margin / max(r.scale, 1e-300) for r in results)
    rep = CheckReport(
        "inequalities", {"trials": int(p["trials"]), "bounds": list(bounds), "seed": cfg.seed},
        float(bad), 0.0, 0.0, -float(bad), bad == 0, time.perf_counter() - t0,
        {"violations": bad, "worst_relative_margin": worst},
    )
    run.report(rep)
    return rep.passed


def _riccati(run: Run):
    from .riccati import verify_comparison

    cfg, p = run.cfg, run.cfg.params
    t0 = time.perf_counter()
    cmp = verify_comparison(trials=int(p["trials"]), rng=np.random.default_rng(cfg.seed), tol=float(p["tol"]))
    rep = CheckReport(
        "riccati", {"trials": cmp.trials, "tol": cmp.tol, "seed": cfg.seed},
        cmp.worst_ratio, 0.0, 1.0 + cmp.tol, 1.0 + cmp.tol - cmp.worst_ratio, cmp.passed,
        time.perf_counter() - t0, {"checks": cmp.checks, "violations": cmp.violations[:20]},
    )
    run.report(rep)
    return rep.passed


RUNNERS = {
    "simulate": _simulate, "variance": _variance, "kruzhkov": _kruzhkov, "bringdown": _bringdown,
    "stationarity": _stationarity, "colehopf": _colehopf, "inequalities": _inequalities,
    "riccati": _riccati,
}


# ---------------------------------------------------------------------------
# entry points


def run_experiment(cfg: ExperimentConfig, config_path: Path, out: Path | None = None) -> int:
    run = Run(cfg, Path(out) if out is not None else cfg.output_dir, config_path)
    try:
        ok = RUNNERS[cfg.experiment](run)
    except DivergenceError as e:
        p = run.path("divergence.json")
        p.write_text(json.dumps({"error": str(e), "step": e.step, "t": e.t}, indent=2) + "\n")
        run.manifest(EXIT_DIVERGED, {"divergence": {"step": e.step, "t": e.t}})
        print(f"DIVERGED {cfg.experiment}: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except ConfigError as e:
        print(f"invalid config {config_path}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    status = EXIT_PASS if ok else EXIT_FAIL
    run.manifest(status)
    return status


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blab", description="Stochastic Burgers laboratory")
    ap.add_argument("--version", action="version", version=f"blab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("validate",):
        sp = sub.add_parser(name, help="check a config file" if name == "validate" else f"run the {name} experiment")
        sp.add_argument("--config", required=True, type=Path, help="TOML experiment config")
        if name != "validate":
            sp.add_argument("--seed", type=int, default=None, help="override the config seed")
            sp.add_argument("--out", type=Path, default=None, help="override the output directory")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, getattr(args, "seed", None))
        if args.command != "validate" and cfg.experiment != args.command:
            raise ConfigError(f"config is for experiment {cfg.experiment!r}, not {args.command!r}",
                              "experiment")
    except ConfigError as e:
        print(f"invalid config {args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"valid {cfg.experiment} config: d={cfg.grid.d} L={cfg.grid.L:g} n={cfg.grid.n} "
              f"(m, ell, eps)=({cfg.exponents.m:g}, {cfg.exponents.ell:g}, {cfg.exponents.eps:g})")
        return EXIT_PASS
    return run_experiment(cfg, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
