"""Closed-form Riccati comparison bounds and a reference integrator to test them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class BlowUpError(ArithmeticError):
    """The comparison solution has blown up at the requested time."""


@dataclass(frozen=True, eq=False)
class RiccatiBoundInput:
    """Data of the differential inequality h' <= -a h^2 + f h (imposed where h >= b).

    ``f`` is piecewise constant on equal cells of ``[0, T]``.  An infinite
    initial value is passed as ``h0 = inf`` and used through ``1/h0 = 0``.
    """

    a: float
    b: float
    h0: float
    f: np.ndarray = field(default_factory=lambda: np.zeros(1))
    T: float = 1.0

    def __post_init__(self):
        if not self.a > 0 or not self.b > 0 or not self.T > 0:
            raise ValueError("a, b and T must be positive")
        f = np.atleast_1d(np.asarray(self.f, dtype=float))
        if not np.all(np.isfinite(f)):
            raise ValueError("f must be finite on its sample grid")
        object.__setattr__(self, "f", f)

    @property
    def cell(self) -> float:
        return self.T / self.f.size

    def f_l1(self, t: float) -> float:
        """int_0^t |f| with exact summation over whole and partial cells."""
        t = min(max(t, 0.0), self.T)
        full = int(t // self.cell)
        full = min(full, self.f.size)
        total = float(np.abs(self.f[:full]).sum()) * self.cell
        if full < self.f.size:
            total += abs(float(self.f[full])) * (t - full * self.cell)
        return total


def riccati_linear_bound(inp: RiccatiBoundInput, t: float) -> float:
    """exp(||f||_{L1[0,t]}) * max{2b, [1/h0 + a t / 2]^-1}."""
    if not 0 <= t <= inp.T * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {inp.T}]")
    inv_h0 = 0.0 if math.isinf(inp.h0) else 1.0 / inp.h0
    denom = inv_h0 + inp.a * t / 2
    decay = math.inf if denom <= 0 else 1.0 / denom
    return math.exp(inp.f_l1(t)) * max(2 * inp.b, decay)


def growth_bound(u0_norm: float, K: float, ell: float, psi_norm: float, t: float) -> float:
    """[min{1/|u0|, 1} - K^-(1-ell) t]^-1 + |psi|: the weighted growth bound of u."""
    start = 1.0 if u0_norm <= 1 else 1.0 / u0_norm
    rate = K ** (-(1.0 - ell))
    gap = start - rate * t
    if gap <= 0:
        raise BlowUpError(f"t={t} is at or past the comparison blow-up time {start / rate}")
    return 1.0 / gap + psi_norm


def blow_up_time(u0_norm: float, K: float, ell: float) -> float:
    start = 1.0 if u0_norm <= 1 else 1.0 / u0_norm
    return start * K ** (1.0 - ell)


MODES = {"plain": 0, "clamped": 1, "pushed": 2}


def integrate(inp: RiccatiBoundInput, h0: float | None = None, mode: str = "plain",
              sub: int = 8, courant: float = 0.02) -> tuple[np.ndarray, np.ndarray]:
    """Numerical solution of h' = -a h^2 + f h; returns (times, h)."""
    h0 = inp.h0 if h0 is None else h0
    out = kernels.riccati_integrate(
        np.array([inp.a]), np.array([inp.b]), np.array([h0]), inp.f[None, :],
        np.array([inp.T]), sub, MODES[mode], courant,
    )[0]
    return np.linspace(0.0, inp.T, out.size), out


@dataclass
class ComparisonReport:
    trials: int
    checks: int
    violations: list = field(default_factory=list)
    worst_ratio: float = 0.0
    tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return not self.violations


def _bound_table(a, b, h0, fvals, T, times):
    """Vectorized riccati_linear_bound at the output times of each instance."""
    M = fvals.shape[1]
    cell = T / M
    cum = np.concatenate([np.zeros((len(a), 1)), np.cumsum(np.abs(fvals), axis=1) * cell[:, None]], axis=1)
    # times are multiples of cell/sub: locate cell and partial length
    pos = times / cell[:, None]
    full = np.minimum(np.floor(pos + 1e-9).astype(int), M)
    part = np.clip(times - full * cell[:, None], 0.0, None)
    rows = np.arange(len(a))[:, None]
    fpart = np.abs(fvals)[rows, np.minimum(full, M - 1)]
    l1 = cum[rows, full] + np.where(full < M, fpart * part, 0.0)
    with np.errstate(divide="ignore", over="ignore"):
        # h0 = 0 (or subnormal) gives 1/h0 = inf and a zero decay term, as intended
        inv_h0 = np.where(np.isinf(h0), 0.0, 1.0 / h0)
        decay = 1.0 / (inv_h0[:, None] + a[:, None] * times / 2)
    return np.exp(l1) * np.maximum(2 * b[:, None], decay)


def random_instances(rng: np.random.Generator, n: int, cells: int = 32,
                     f_scale: float = 5.0, h0_range=None):
    """Random (a, b, h0, f, T) with h0 in [b, 1e3] unless ``h0_range`` is given."""
    a = rng.uniform(0.1, 10.0, n)
    b = rng.uniform(0.1, 5.0, n)
    T = rng.uniform(0.1, 3.0, n)
    if h0_range is None:
        h0 = b + (1e3 - b) * rng.uniform(0.0, 1.0, n) ** 3
    else:
        h0 = rng.uniform(*h0_range, n)
    fvals = rng.normal(0.0, 1.0, (n, cells)) * rng.uniform(0.0, f_scale, (n, 1))
    return a, b, h0, fvals, T


def verify_comparison(inp: RiccatiBoundInput | None = None, trials: int = 1,
                      rng: np.random.Generator | None = None, modes=("plain", "clamped", "pushed"),
                      sub: int = 8, tol: float = 1e-6, instances=None) -> ComparisonReport:
    """Integrate random instances and check h(t) <= bound at every output time.

    With ``inp`` given, its (a, b, f, T) are kept and only h(0) is drawn from
    [b, 1e3] for each trial; otherwise whole instances are random (or taken
    from ``instances``).  Every mode of the right-hand side below ``b`` is run.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    if instances is not None:
        a, b, h0, fvals, T = (np.asarray(v, dtype=float) for v in instances)
    elif inp is not None:
        a = np.full(trials, inp.a)
        b = np.full(trials, inp.b)
        T = np.full(trials, inp.T)
        fvals = np.repeat(inp.f[None, :], trials, axis=0)
        h0 = rng.uniform(inp.b, 1e3, trials)
    else:
        a, b, h0, fvals, T = random_instances(rng, trials)
    M = fvals.shape[1]
    times = np.linspace(0.0, 1.0, M * sub + 1)[None, :] * T[:, None]
    bound = _bound_table(a, b, h0, fvals, T, times)
    report = ComparisonReport(trials=len(a), checks=0, tol=tol)
    for mode in modes:
        sol = kernels.riccati_integrate(a, b, h0, fvals, T, sub, MODES[mode], 0.02)
        ratio = sol / bound
        report.checks += ratio.size
        report.worst_ratio = max(report.worst_ratio, float(ratio.max()))
        bad = np.argwhere(sol > bound * (1 + tol))
        for i, j in bad[:20]:
            report.violations.append({
                "mode": mode, "instance": int(i), "t": float(times[i, j]),
                "h": float(sol[i, j]), "bound": float(bound[i, j]),
            })
    return report
