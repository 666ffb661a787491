"""Statistical checks on simulated runs: variance bound, Kruzhkov decay, bring-down and stationarity.

Every check returns a :class:`CheckReport` carrying the estimate, its
standard error, the bound it is compared with and the margin, so a verdict
is never reported without the numbers behind it.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .grid import Field, Grid, spectral_derivative
from .noise import NoiseModel, variance_constant
from .riccati import RiccatiBoundInput, riccati_linear_bound
from .solvers import BurgersEnsemble, SeparableColeHopf, Snapshot, SolverConfig
from .weights import WeightSpec


class DiagnosticsError(ValueError):
    """Invalid diagnostic request."""


class HypothesisError(DiagnosticsError):
    """The run does not satisfy the hypothesis the check is about."""


class WindowError(DiagnosticsError):
    """Sampling windows are inconsistent."""


@dataclass
class CheckReport:
    check: str
    params: dict
    estimate: float
    stderr: float
    bound: float
    margin: float
    passed: bool
    runtime_s: float | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self, deterministic: bool = False) -> dict:
        """JSON-ready dict; ``deterministic`` drops the wall-clock time."""
        return {
            "check": self.check,
            "params": _plain(self.params),
            "estimate": _plain(self.estimate),
            "stderr": _plain(self.stderr),
            "bound": _plain(self.bound),
            "margin": _plain(self.margin),
            "pass": bool(self.passed),
            "runtime_s": None if deterministic or self.runtime_s is None else round(self.runtime_s, 3),
            "details": _plain(self.details),
        }

    def to_json(self, deterministic: bool = False) -> str:
        return json.dumps(self.to_dict(deterministic), indent=2, sort_keys=False)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} {self.check}: estimate={self.estimate:.6g} se={self.stderr:.3g} "
                f"bound={self.bound:.6g} margin={self.margin:.3g}")


def _plain(x):
    """Convert numpy scalars and arrays (possibly nested) into JSON types."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _stderr(samples: np.ndarray) -> float:
    n = samples.shape[0]
    return float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf


def pool_size(workers: int) -> int:
    """Worker count after the BLAB_THREADS cap."""
    cap = os.environ.get("BLAB_THREADS")
    return max(1, min(int(workers), int(cap)) if cap else int(workers))


def _map(fn, jobs, workers: int = 1) -> list:
    """Ordered map over independent jobs, in a process pool when ``workers > 1``."""
    n = min(pool_size(workers), len(jobs))
    if n <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(n) as ex:
        return list(ex.map(fn, *zip(*jobs)))


# ---------------------------------------------------------------------------
# variance bound


def _parseval_weights(g: Grid) -> np.ndarray:
    """Weights turning |rfft|^2 into the spatial mean of the square."""
    w = np.full(g.n // 2 + 1, 2.0)
    w[0] = w[-1] = 1.0
    return w / float(g.n**g.d) ** 2


def _variance_batch(cfg: SolverConfig, idx: list, steps: int, probes: list) -> np.ndarray:
    """Time averages per realization: one column per probe, then the spatial mean."""
    ens = BurgersEnsemble(cfg, realizations=idx)
    pw = _parseval_weights(cfg.grid)
    part = np.zeros((len(idx), len(probes) + 1))
    axes = tuple(range(1, cfg.grid.d + 2))
    for _ in range(steps):
        ens.step()
        part[:, :-1] += (ens.u_at(probes) ** 2).sum(-1)
        part[:, -1] += (np.abs(ens.v_hat + ens.psi_hat) ** 2 * pw).sum(axis=axes)
    return part / steps


def variance_bound_check(cfg: SolverConfig, T: float, realizations: int = 32,
                         probe_points=None, v0: Field | None = None,
                         batch: int = 32, workers: int = 1) -> CheckReport:
    """Time-and-ensemble average of |u(t, x)|^2 over (0, T] at the points ``probe_points``.

    Probe coordinates are snapped to the nearest grid point; the default is
    the origin.  The estimate pools all probes; each realization contributes one time
    average, so the standard error is over realizations.  PASS iff the
    estimate is at most the bound plus three standard errors; the margin is
    bound minus estimate.
    """
    t0 = time.perf_counter()
    g = cfg.grid
    if v0 is not None and np.any(v0.values != 0):
        raise HypothesisError("the variance bound assumes u(0) = 0")
    points = [np.zeros(g.d)] if probe_points is None else [np.asarray(p, dtype=float) for p in probe_points]
    if not points or any(p.shape != (g.d,) for p in points):
        raise DiagnosticsError(f"probe points must be points of R^{g.d}")
    probes = [g.index_of(p) for p in points]
    steps = int(round(T / cfg.dt))
    if steps < 1 or abs(steps * cfg.dt - T) > 1e-9 * T:
        raise DiagnosticsError(f"T={T} is not a positive multiple of dt={cfg.dt}")
    jobs = [(cfg, list(range(s, min(s + batch, realizations))), steps, probes)
            for s in range(0, realizations, batch)]
    acc = np.concatenate(_map(_variance_batch, jobs, workers))
    acc, spatial = acc[:, :-1], acc[:, -1]
    bound = variance_constant(cfg.noise, g.L, g.d)
    pooled = acc.mean(1)
    est, se = float(pooled.mean()), _stderr(pooled)
    per_est = acc.mean(0)
    per_se = np.array([_stderr(acc[:, j]) for j in range(len(probes))])
    spread = 0.0
    for i in range(len(probes)):
        for j in range(i + 1, len(probes)):
            diff = acc[:, i] - acc[:, j]
            s = _stderr(diff)
            if s > 0:
                spread = max(spread, abs(float(diff.mean())) / s)
    margin = bound - est
    return CheckReport(
        "variance",
        {"d": g.d, "L": g.L, "n": g.n, "dt": cfg.dt, "T": T, "realizations": realizations,
         "noise": {"kind": cfg.noise.kind, "width": cfg.noise.width,
                   "amplitude": cfg.noise.amplitude, "seed": cfg.noise.seed},
         "probes": [[float(g.x1d[i]) for i in p] for p in probes]},
        est, se, bound, margin, est <= bound + 3 * se, time.perf_counter() - t0,
        {"per_probe_estimate": per_est, "per_probe_stderr": per_se,
         "margin_in_stderr": margin / se if se > 0 else math.inf,
         "max_probe_difference_z": spread,
         "spatial_mean_estimate": float(spatial.mean()), "spatial_mean_stderr": _stderr(spatial)},
    )


# ---------------------------------------------------------------------------
# Kruzhkov statistic


@dataclass(frozen=True)
class KruzhkovStat:
    t: float
    Z: float
    argmax_i: int
    argmax_x: tuple
    weight: WeightSpec


def _diagonal(snap) -> tuple[float, Grid, np.ndarray]:
    if isinstance(snap, Field):
        snap = Snapshot(snap.time, snap)
    v = snap.v
    g = v.grid
    if v.components != g.d:
        raise DiagnosticsError("the statistic needs a d-component velocity")
    if snap.diag is not None:
        return snap.t, g, np.asarray(snap.diag)
    diag = np.stack([spectral_derivative(Field(g, v.values[i]), i + 1).values[0] for i in range(g.d)])
    return snap.t, g, diag


def kruzhkov_stat(snap, weight: WeightSpec) -> KruzhkovStat:
    """Z = max_i sup_x (d_i v_i)^+ / p(x) with ties to the lowest axis, then the first grid point."""
    t, g, diag = _diagonal(snap)
    w = weight.on_grid(g)
    best, axis, flat = -1.0, 0, 0
    for i in range(g.d):
        q = np.maximum(diag[i], 0.0) / w
        j = int(np.argmax(q))  # first occurrence in C order is lexicographically smallest
        if q.flat[j] > best:
            best, axis, flat = float(q.flat[j]), i, j
    index = np.unravel_index(flat, g.shape)
    x = tuple(float(g.x1d[k]) for k in index)
    return KruzhkovStat(float(t), best, axis + 1, x, weight)


def kruzhkov_trace(snapshots, weight: WeightSpec) -> list[KruzhkovStat]:
    """Z(t) for each snapshot (a Field or a Snapshot), sorted by time."""
    out = [kruzhkov_stat(s, weight) for s in snapshots]
    return sorted(out, key=lambda s: s.t)


def rarefaction_profiles(L: float, amplitude: float, d: int):
    """f_1 = A sin(2 pi x / L), f_i = (A/2) sin(2 pi x / L) for i > 1."""
    k = 2 * math.pi / L
    return [lambda y, a=amplitude * (1.0 if i == 0 else 0.5): a * np.sin(k * y) for i in range(d)]


def deterministic_snapshots(grid: Grid, amplitude: float, times, method: str = "exact",
                            dt: float = 1e-3, quad: int = 8192) -> list[Snapshot]:
    """Noise-free Burgers from u(0) = grad f with the rarefaction profiles.

    ``method="exact"`` evaluates the separable Cole-Hopf solution;
    ``method="spectral"`` runs the pseudo-spectral integrator with zero noise.
    """
    times = sorted(float(t) for t in times)
    profiles = rarefaction_profiles(grid.L, amplitude, grid.d)
    exact = SeparableColeHopf(grid, profiles, quad)
    if method == "exact":
        return [exact.snapshot(t) for t in times]
    if method != "spectral":
        raise DiagnosticsError(f"unknown method {method!r}")
    from .grid import gradient

    cfg = SolverConfig(grid, dt, 0.0, NoiseModel(amplitude=0.0))
    ens = BurgersEnsemble(cfg, v0=gradient(exact.initial()))
    out = []
    for t in times:
        steps = int(round(t / dt))
        ens.run(steps - ens.step_index)
        out.append(Snapshot(ens.t, ens.state(0).v))
    return out


def forgetting_report(traces: dict, factor: float = 2.0) -> CheckReport:
    """Spread (largest over smallest) of Z at the last common time across initial amplitudes.

    ``traces`` maps each amplitude to its Kruzhkov trace.
    """
    t_end = min(tr[-1].t for tr in traces.values())
    finals = {A: next(s.Z for s in reversed(tr) if s.t <= t_end + 1e-12) for A, tr in traces.items()}
    vals = np.array(list(finals.values()))
    if vals.min() > 0:
        spread = float(vals.max() / vals.min())
    else:
        spread = 1.0 if vals.max() == 0 else math.inf
    return CheckReport(
        "kruzhkov_forgetting", {"t": t_end, "amplitudes": list(finals), "factor": factor},
        spread, 0.0, factor, factor - spread, spread < factor, None, {"Z_final": list(finals.values())},
    )


def fit_riccati_envelope(trace: list[KruzhkovStat], t_min: float = 0.1, safety: float = 0.5,
                         f=None) -> RiccatiBoundInput:
    """Calibrate (a, b, f) so that max{2b, 2/(a t)} exp(int |f|) covers Z for t >= t_min.

    ``a`` is ``safety`` times the largest rate the trace allows, ``b`` half
    the final level of Z and ``f`` zero unless given.
    """
    late = [s for s in trace if s.t >= t_min and s.Z > 0]
    if not late:
        raise DiagnosticsError("no positive Z after t_min to calibrate on")
    a = safety * min(2.0 / (s.t * s.Z) for s in late)
    b = max(0.5 * late[-1].Z, 1e-12)
    T = trace[-1].t
    return RiccatiBoundInput(a=a, b=b, h0=math.inf, f=np.zeros(1) if f is None else f, T=T)


def envelope_check(trace: list[KruzhkovStat], inp: RiccatiBoundInput, t_min: float = 0.1,
                   label: str = "kruzhkov_envelope") -> CheckReport:
    """Z(t) <= riccati_linear_bound(inp, t) for every t >= t_min in the trace."""
    ratios = [(s.t, s.Z / riccati_linear_bound(inp, s.t)) for s in trace if s.t >= t_min]
    if not ratios:
        raise DiagnosticsError("no snapshot after t_min")
    worst_t, worst = max(ratios, key=lambda r: r[1])
    return CheckReport(
        label, {"a": inp.a, "b": inp.b, "t_min": t_min, "snapshots": len(ratios)},
        worst, 0.0, 1.0, 1.0 - worst, worst <= 1.0, None, {"worst_t": worst_t},
    )


# ---------------------------------------------------------------------------
# bring-down


def bring_down_check(cfg: SolverConfig, amplitudes, m: float = 0.8, t_max: float = 2.0,
                     realizations=(0,), every: int = 10, spread_limit: float = 3.0,
                     K: float = 0.0) -> CheckReport:
    """Minimum over t in [0, t_max] of the p_m-weighted sup norm of u, per initial amplitude.

    Initial data are ``A grad f`` with f from :func:`rarefaction_profiles`
    at unit amplitude, all runs sharing one noise path.  The empirical level
    B is the largest of these minima; the estimate is their spread
    (largest over smallest), compared with ``spread_limit``.
    """
    t0 = time.perf_counter()
    g = cfg.grid
    w = WeightSpec.power(m, K)
    base = SeparableColeHopf(g, rarefaction_profiles(g.L, 1.0, g.d)).initial()
    from .grid import gradient

    unit = gradient(base)
    steps = int(round(t_max / cfg.dt))
    minima = np.empty((len(amplitudes), len(realizations)))
    for a, A in enumerate(amplitudes):
        ens = BurgersEnsemble(cfg, realizations=realizations, v0=unit.replace(A * unit.values))
        best = np.array([_weighted_sup(g, ens.u_values()[r], w) for r in range(len(realizations))])
        for s in range(steps):
            ens.step()
            if (s + 1) % every == 0 or s + 1 == steps:
                vals = ens.u_values()
                best = np.minimum(best, [_weighted_sup(g, vals[r], w) for r in range(len(realizations))])
        minima[a] = best
    level = minima.mean(1)
    B = float(level.max())
    spread = float(level.max() / level.min()) if level.min() > 0 else (1.0 if B == 0 else math.inf)
    se = float(minima.std(1, ddof=1).max() / math.sqrt(minima.shape[1])) if minima.shape[1] > 1 else 0.0
    return CheckReport(
        "bringdown",
        {"amplitudes": list(amplitudes), "m": m, "K": K, "t_max": t_max, "dt": cfg.dt,
         "n": g.n, "L": g.L, "d": g.d, "realizations": list(realizations),
         "noise_amplitude": cfg.noise.amplitude},
        spread, se, spread_limit, spread_limit - spread, spread < spread_limit,
        time.perf_counter() - t0, {"B": B, "min_norm_per_amplitude": level},
    )


def _weighted_sup(g: Grid, values: np.ndarray, w: WeightSpec) -> float:
    return float((np.sqrt((values**2).sum(0)) / w.on_grid(g)).max())


# ---------------------------------------------------------------------------
# stationarity


def ks_critical(n: int, m: int, level: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value c(level) sqrt((n + m) / (n m))."""
    c = math.sqrt(-0.5 * math.log(level / 2))
    return c * math.sqrt((n + m) / (n * m))


@dataclass(frozen=True)
class StationarityWindow:
    """Uniform sampling times for realizations, drawn from a stream separate from the noise.

    ``windows`` are closed intervals [T, 2T], [2T, 3T], ... for the KS
    comparison; ``norm_T`` are the horizons T for the samples at S_T + warmup.
    """

    T: float = 10.0
    samples: int = 200
    windows: tuple = ((10.0, 20.0), (20.0, 30.0))
    norm_T: tuple = (5.0, 10.0, 20.0)
    warmup: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.samples < 2:
            raise WindowError("need at least two samples per window")
        ws = sorted(tuple(map(float, w)) for w in self.windows)
        for lo, hi in ws:
            if not 0 <= lo < hi:
                raise WindowError(f"bad window [{lo}, {hi}]")
        for (a, b), (c, _) in zip(ws, ws[1:]):
            if c < b:
                raise WindowError(f"windows [{a}, {b}] and [{c}, ...] overlap")
        if any(t <= 0 for t in self.norm_T) or self.warmup < 0:
            raise WindowError("horizons must be positive and the warm-up non-negative")

    @classmethod
    def adjacent(cls, T: float, **kw) -> "StationarityWindow":
        return cls(T=T, windows=((T, 2 * T), (2 * T, 3 * T)), **kw)

    def sample_times(self) -> dict:
        """{"window i": times, "norm T": S_T + warmup}, one time per realization."""
        rng = np.random.default_rng([int(self.seed), 0x57A7])
        out = {}
        for i, (lo, hi) in enumerate(self.windows):
            out[f"window{i}"] = rng.uniform(lo, hi, self.samples)
        for T in self.norm_T:
            out[f"norm{T:g}"] = self.warmup + rng.uniform(0.0, T, self.samples)
        return out

    @property
    def horizon(self) -> float:
        return max(max(hi for _, hi in self.windows), self.warmup + max(self.norm_T))


def _sample_batch(cfg: SolverConfig, idx: list, steps: dict, observe) -> dict:
    last = max(int(v[idx].max()) for v in steps.values())
    out = {k: [None] * len(idx) for k in steps}
    ens = BurgersEnsemble(cfg, realizations=idx)
    for s in range(last + 1):
        if s > 0:
            ens.step()
        for k, at in steps.items():
            hit = np.nonzero(at[idx] == s)[0]
            if hit.size:
                vals = ens.grid.ifft(ens.v_hat[hit] + ens.psi_hat[hit])
                for h, v in zip(hit, vals):
                    out[k][h] = observe(v)
    return out


def sample_ensemble(cfg: SolverConfig, times: dict, observe, batch: int = 200, workers: int = 1):
    """Run realizations 0..N-1 and call ``observe(values)`` at each one's sampling times.

    ``times[key]`` holds one time per realization; each is snapped to the
    nearest step.  ``observe`` must be picklable when ``workers > 1``.
    Returns {key: array of observations}.
    """
    keys = list(times)
    N = len(times[keys[0]])
    steps = {k: np.clip(np.rint(np.asarray(times[k]) / cfg.dt).astype(int), 0, None) for k in keys}
    jobs = [(cfg, list(range(s, min(s + batch, N))), steps, observe) for s in range(0, N, batch)]
    parts = _map(_sample_batch, jobs, workers)
    return {k: np.array([o for part in parts for o in part[k]]) for k in keys}


class PointAndNorm:
    """Observable: u at one grid index followed by the weighted sup of |u|."""

    def __init__(self, index: tuple, weight_on_grid: np.ndarray):
        self.index, self.w = index, weight_on_grid

    def __call__(self, v: np.ndarray) -> np.ndarray:
        mag = np.sqrt((v**2).sum(0))
        return np.append(v[(slice(None),) + self.index], (mag / self.w).max())


def stationarity_check(cfg: SolverConfig, window: StationarityWindow, omega: float = 0.9,
                       delta: float = 0.1, level: float = 0.01, quantile_tol: float = 0.2,
                       K: float = 0.0, batch: int = 200, workers: int = 1) -> CheckReport:
    """KS distance of u(t, 0) components between windows and stability of weighted-norm quantiles.

    The estimate is the largest KS distance, compared with the critical value
    at ``level``.  The (1 - delta) quantiles of the p_omega-weighted sup norm
    at S_T + warmup must agree within ``quantile_tol`` relative spread.
    """
    t0 = time.perf_counter()
    g = cfg.grid
    if len(window.windows) != 2:
        raise WindowError("the KS comparison needs exactly two windows")
    w = WeightSpec.power(omega, K)
    observe = PointAndNorm(g.index_of(np.zeros(g.d)), w.on_grid(g))
    obs = sample_ensemble(cfg, window.sample_times(), observe, batch, workers)
    a, b = obs["window0"], obs["window1"]
    n = window.samples
    crit = ks_critical(n, n, level)
    ks = []
    for c in range(g.d):
        if np.all(a[:, c] == a[0, c]) and np.all(b[:, c] == a[0, c]):
            ks.append(0.0)
        else:
            ks.append(float(stats.ks_2samp(a[:, c], b[:, c]).statistic))
    quant = {T: float(np.quantile(obs[f"norm{T:g}"][:, -1], 1 - delta)) for T in window.norm_T}
    qv = np.array(list(quant.values()))
    qspread = float(qv.max() / qv.min() - 1) if qv.min() > 0 else (0.0 if qv.max() == 0 else math.inf)
    worst = max(ks)
    ok = worst <= crit and qspread <= quantile_tol
    return CheckReport(
        "stationarity",
        {"windows": [list(x) for x in window.windows], "samples": n, "norm_T": list(window.norm_T),
         "warmup": window.warmup, "omega": omega, "delta": delta, "level": level,
         "dt": cfg.dt, "n": g.n, "L": g.L, "d": g.d, "window_seed": window.seed},
        worst, 0.0, crit, crit - worst, ok, time.perf_counter() - t0,
        {"ks_per_component": ks, "quantiles": quant, "quantile_spread": qspread,
         "quantile_tol": quantile_tol},
    )


def spatial_stationarity_check(values: np.ndarray, shifts, lag=None, z_max: float = 3.0) -> CheckReport:
    """Compare one- and two-point statistics at the origin with those at shifted grid points.

    ``values`` has shape ``(R, d) + grid shape`` (one time, R realizations).
    For every shift the paired differences of u_c, u_c^2 and u(x) . u(x + lag)
    are tested against zero; PASS iff every z-score is within ``z_max``.
    """
    values = np.asarray(values, dtype=float)
    R, d = values.shape[:2]
    if R < 2:
        raise DiagnosticsError("need at least two realizations")
    lag = (1,) + (0,) * (d - 1) if lag is None else tuple(lag)
    axes = tuple(range(2, values.ndim))
    rolled = np.roll(values, tuple(-k for k in lag), axis=axes)

    def stats_at(idx):
        u = values[(slice(None), slice(None)) + idx]
        up = rolled[(slice(None), slice(None)) + idx]
        return np.column_stack([u, u**2, (u * up).sum(1)])

    origin = (0,) * d
    ref = stats_at(origin)
    worst, zs = 0.0, []
    for s in shifts:
        s = tuple(int(k) % values.shape[2] for k in s)
        diff = stats_at(s) - ref
        se = diff.std(0, ddof=1) / math.sqrt(R)
        z = np.where(se > 0, np.abs(diff.mean(0)) / np.where(se > 0, se, 1.0), 0.0)
        zs.append(z)
        worst = max(worst, float(z.max()))
    return CheckReport(
        "spatial_stationarity", {"shifts": [list(s) for s in shifts], "lag": list(lag), "realizations": R},
        worst, 0.0, z_max, z_max - worst, worst <= z_max, None, {"z_scores": np.array(zs)},
    )


# ---------------------------------------------------------------------------
# Cole-Hopf consistency


def cole_hopf_gap(cfg: SolverConfig, t: float, stride: int = 1, realization: int = 0) -> float:
    """sup |u_burgers - grad(-log phi)| / sup |u_burgers| at time ``t`` for one coupled run."""
    from .solvers import cole_hopf

    ens = BurgersEnsemble(cfg, realizations=[realization], she=True, stride=stride)
    ens.run(int(round(t / cfg.dt)))
    state = ens.state(0)
    _, u_ch = cole_hopf(state.phi)
    scale = np.abs(state.u.values).max()
    return float(np.abs(state.u.values - u_ch.values).max() / scale) if scale > 0 else 0.0


def cole_hopf_consistency(cfg: SolverConfig, t: float | None = None, halvings: int = 1,
                          tol: float = 0.02, min_decrease: float = 1.5,
                          realization: int = 0) -> CheckReport:
    """Gap between the Burgers and heat-equation routes at ``dt``, ``dt/2``, ...

    All levels share one Brownian path sampled at ``dt / 2^halvings``.  PASS
    iff the gap at ``dt`` is at most ``tol`` and each halving reduces the gap
    by at least ``min_decrease``.
    """
    t0 = time.perf_counter()
    t = cfg.t_end if t is None else t
    if not t > 0:
        raise DiagnosticsError("the comparison needs t > 0")
    from dataclasses import replace

    gaps = []
    for j in range(halvings + 1):
        level = replace(cfg, dt=cfg.dt / 2**j, t_end=0.0)
        gaps.append(cole_hopf_gap(level, t, 2 ** (halvings - j), realization))
    ratios = [a / b if b > 0 else math.inf for a, b in zip(gaps, gaps[1:])]
    ok = gaps[0] <= tol and all(r >= min_decrease for r in ratios)
    return CheckReport(
        "colehopf",
        {"d": cfg.grid.d, "n": cfg.grid.n, "L": cfg.grid.L, "dt": cfg.dt, "t": t,
         "halvings": halvings, "tol": tol, "min_decrease": min_decrease,
         "realization": realization, "seed": cfg.noise.seed},
        gaps[0], 0.0, tol, tol - gaps[0], ok, time.perf_counter() - t0,
        {"gaps": gaps, "decrease_ratios": ratios},
    )
