"""Experiment configuration: a versioned TOML file validated into typed objects.

Errors name the offending field by its dotted path and, when the key is
present in the file, the line it sits on.
"""
from __future__ import annotations

import hashlib
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .grid import Grid, GridError
from .noise import NoiseConfigError, NoiseModel
from .solvers import SolverConfig, SolverError
from .weights import ExponentTriple, WeightError

SCHEMA_VERSION = 1
EXPERIMENTS = ("simulate", "variance", "kruzhkov", "bringdown", "stationarity",
               "colehopf", "inequalities", "riccati")

# experiment-specific keys with their defaults
EXPERIMENT_DEFAULTS = {
    "simulate": {"snapshot_every": 0},
    "variance": {"T": 20.0, "probes": None},
    "kruzhkov": {"amplitudes": [10.0, 100.0, 1000.0], "times": [0.1, 0.2, 0.3, 0.5, 0.7, 1.0],
                 "method": "exact", "t_min": 0.1, "weight_ell": 0.55, "weight_K": 1.0,
                 "forgetting_factor": 2.0, "calibrate_on": 1},
    "bringdown": {"amplitudes": [1.0, 10.0, 100.0], "t_max": 2.0, "every": 10, "m": None,
                  "spread_limit": 3.0},
    "stationarity": {"T": 10.0, "samples": 200, "norm_T": [5.0, 10.0, 20.0], "warmup": 3.0,
                     "omega": 0.9, "delta": 0.1, "level": 0.01, "quantile_tol": 0.2},
    "colehopf": {"halvings": 1, "min_decrease": 1.5, "tol": 0.02},
    "inequalities": {"trials": 100, "bounds": None},
    "riccati": {"trials": 10000, "tol": 1e-6},
}

TOP_KEYS = {"version", "experiment", "seed", "realizations", "output_dir", "workers",
            "grid", "solver", "noise", "exponents", "params"}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted field path, ``line`` 1-based or None."""

    def __init__(self, msg: str, path: str | None = None, line: int | None = None):
        where = ""
        if path:
            where = f"field '{path}'"
            if line:
                where += f" (line {line})"
            where += ": "
        super().__init__(where + msg)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    solver: SolverConfig
    noise: NoiseModel
    exponents: ExponentTriple
    realizations: int = 1
    output_dir: Path = Path("out")
    seed: int = 0
    workers: int = 1
    params: dict = field(default_factory=dict)
    digest: str = ""

    @property
    def grid(self) -> Grid:
        return self.solver.grid


def _locate(text: str, path: str) -> int | None:
    """Line of ``key`` inside table ``[a.b]`` for path ``a.b.key`` (top level when no dot)."""
    *tables, key = path.split(".")
    want = ".".join(tables)
    current = ""
    key_re = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"^\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if current == path:
                return no
            continue
        if current == want and key_re.match(line):
            return no
    return None


class _Reader:
    def __init__(self, data: dict, text: str):
        self.data, self.text = data, text

    def error(self, msg: str, path: str):
        raise ConfigError(msg, path, _locate(self.text, path))

    def table(self, name: str, required: bool = True) -> dict:
        t = self.data.get(name)
        if t is None:
            if required:
                self.error("missing table", name)
            return {}
        if not isinstance(t, dict):
            self.error("must be a table", name)
        return t

    def get(self, table: dict, prefix: str, key: str, kind, default=..., check=None, why=""):
        path = f"{prefix}.{key}" if prefix else key
        if key not in table:
            if default is ...:
                self.error("missing required field", path)
            return default
        v = table[key]
        if kind is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if kind is not None and not isinstance(v, kind) or isinstance(v, bool) and kind is not bool:
            name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
            self.error(f"expected {name}, got {type(v).__name__} {v!r}", path)
        if check is not None and not check(v):
            self.error(f"invalid value {v!r}" + (f": {why}" if why else ""), path)
        return v

    def unknown(self, table: dict, allowed, prefix: str):
        for k in table:
            if k not in allowed:
                self.error("unknown field", f"{prefix}.{k}" if prefix else k)


def parse_config(text: str, name: str = "<config>") -> ExperimentConfig:
    """Validate TOML text into an :class:`ExperimentConfig`."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError(f"{name}: {e}", None, int(m.group(1)) if m else None) from None
    r = _Reader(data, text)
    r.unknown(data, TOP_KEYS, "")
    version = r.get(data, "", "version", int, SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        r.error(f"unsupported schema version {version} (expected {SCHEMA_VERSION})", "version")
    experiment = r.get(data, "", "experiment", str, check=lambda v: v in EXPERIMENTS,
                       why=f"one of {', '.join(EXPERIMENTS)}")
    seed = r.get(data, "", "seed", int, 0, lambda v: 0 <= v < 2**64, "0 <= seed < 2^64")
    realizations = r.get(data, "", "realizations", int, 1, lambda v: v >= 1, "must be >= 1")
    output_dir = Path(r.get(data, "", "output_dir", str, "out"))
    workers = r.get(data, "", "workers", int, 1, lambda v: v >= 1, "must be >= 1")

    gt = r.table("grid")
    r.unknown(gt, {"d", "L", "n"}, "grid")
    d = r.get(gt, "grid", "d", int, check=lambda v: v >= 1, why="must be >= 1")
    L = r.get(gt, "grid", "L", float, check=lambda v: v > 0, why="must be positive")
    n = r.get(gt, "grid", "n", int)
    # the exponent window decides which dimensions are admissible at all
    et = r.table("exponents")
    r.unknown(et, {"m", "ell", "eps"}, "exponents")
    try:
        exps = ExponentTriple(r.get(et, "exponents", "m", float), r.get(et, "exponents", "ell", float),
                              r.get(et, "exponents", "eps", float), d)
    except WeightError as e:
        msg = str(e)
        if msg.startswith("d="):
            r.error(msg, "grid.d")
        key = "ell" if msg.startswith("ell") else ("eps" if msg.startswith("eps") else "m")
        r.error(msg, f"exponents.{key}")
    if d > 3:
        r.error("d must be 1, 2 or 3", "grid.d")
    try:
        grid = Grid(d, L, n)
    except GridError as e:
        r.error(str(e), "grid.n")

    nt = r.table("noise")
    r.unknown(nt, {"kind", "width", "amplitude"}, "noise")
    try:
        noise = NoiseModel(
            r.get(nt, "noise", "kind", str, "gaussian"),
            r.get(nt, "noise", "width", float, 0.5),
            r.get(nt, "noise", "amplitude", float, 1.0),
            seed,
        )
        noise.check_grid(grid)
    except NoiseConfigError as e:
        key = next((k for k in ("width", "amplitude", "seed") if k in str(e)), "kind")
        r.error(str(e), f"noise.{key}" if key != "seed" else "seed")

    st = r.table("solver")
    r.unknown(st, {"dt", "t_end", "dealias", "scheme", "cfl", "max_halvings"}, "solver")
    try:
        solver = SolverConfig(
            grid,
            r.get(st, "solver", "dt", float),
            r.get(st, "solver", "t_end", float, 0.0),
            noise,
            r.get(st, "solver", "dealias", bool, True),
            r.get(st, "solver", "scheme", str, "exponential"),
            r.get(st, "solver", "cfl", float, 0.5, lambda v: 0 < v <= 1, "must be in (0, 1]"),
            r.get(st, "solver", "max_halvings", int, 10, lambda v: v >= 0, "must be >= 0"),
        )
    except SolverError as e:
        msg = str(e)
        key = "scheme" if "scheme" in msg else ("t_end" if "t_end" in msg else "dt")
        r.error(msg, f"solver.{key}")

    pt = r.table("params", required=False)
    defaults = EXPERIMENT_DEFAULTS[experiment]
    r.unknown(pt, defaults, "params")
    params = {k: pt.get(k, v) for k, v in defaults.items()}
    _check_params(r, experiment, params, grid, solver)
    digest = hashlib.sha256(text.encode()).hexdigest()
    return ExperimentConfig(experiment, solver, noise, exps, realizations, output_dir, seed,
                            workers, params, digest)


def _check_params(r: _Reader, experiment: str, p: dict, grid: Grid, solver: SolverConfig):
    def need(key, ok, why):
        if not ok(p[key]):
            r.error(f"invalid value {p[key]!r}: {why}", f"params.{key}")

    def positive_list(v):
        return isinstance(v, list) and len(v) > 0 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) and x > 0 for x in v)

    if experiment == "variance":
        need("T", lambda v: isinstance(v, (int, float)) and v > 0, "must be positive")
        need("probes", lambda v: v is None or (isinstance(v, list) and all(
            isinstance(q, list) and len(q) == grid.d for q in v)), f"list of {grid.d}-point coordinates")
    elif experiment == "kruzhkov":
        need("amplitudes", positive_list, "non-empty list of positive numbers")
        need("times", positive_list, "non-empty list of positive times")
        need("method", lambda v: v in ("exact", "spectral"), "exact or spectral")
        need("calibrate_on", lambda v: isinstance(v, int) and 0 <= v < len(p["amplitudes"]),
             "index into amplitudes")
    elif experiment == "bringdown":
        need("amplitudes", positive_list, "non-empty list of positive numbers")
        need("t_max", lambda v: isinstance(v, (int, float)) and v > 0, "must be positive")
        need("every", lambda v: isinstance(v, int) and v >= 1, "must be >= 1")
    elif experiment == "stationarity":
        need("T", lambda v: isinstance(v, (int, float)) and v > 0, "must be positive")
        need("samples", lambda v: isinstance(v, int) and v >= 2, "must be >= 2")
        need("norm_T", positive_list, "non-empty list of positive horizons")
        lo = 2 * grid.d / (grid.d + 4)
        need("omega", lambda v: isinstance(v, (int, float)) and lo < v < 1, f"must lie in ({lo:g}, 1)")
    elif experiment == "colehopf":
        need("halvings", lambda v: isinstance(v, int) and v >= 1, "must be >= 1")
        if solver.steps < 1:
            r.error("the Cole-Hopf comparison needs t_end > 0", "solver.t_end")
    elif experiment == "inequalities":
        need("trials", lambda v: isinstance(v, int) and v >= 1, "must be >= 1")
    elif experiment == "riccati":
        need("trials", lambda v: isinstance(v, int) and v >= 1, "must be >= 1")
    elif experiment == "simulate":
        need("snapshot_every", lambda v: isinstance(v, int) and v >= 0, "must be >= 0")


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    """Read and validate a config file; ``seed`` overrides the file's seed."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    cfg = parse_config(text, str(path))
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("seed override out of range", "seed")
        from dataclasses import replace

        noise = replace(cfg.noise, seed=seed)
        solver = replace(cfg.solver, noise=noise)
        cfg = replace(cfg, seed=seed, noise=noise, solver=solver)
    return cfg
