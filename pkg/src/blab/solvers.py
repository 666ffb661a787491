"""Time integrators for stochastic Burgers, its linear part, and the stochastic heat equation.

All integrators act on a batch of independent realizations at once; arrays
carry a leading realization axis ``R`` followed by a component axis.  Vector
states are stored as spectra so that heat factors and gradients are exact.

The Burgers field is split as ``u = v + psi`` with

* ``psi``: the Ornstein-Uhlenbeck field d psi = (1/2) Lap psi dt + d grad V,
  advanced exactly mode by mode;
* ``v``: dv/dt = (1/2) Lap v - (1/2) grad |v + psi|^2, advanced with an
  integrating factor for the heat part and an explicit midpoint stage for
  the nonlinearity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Field, Grid, gradient, verify_gradient
from .noise import (
    NoiseIncrement, NoiseModel, discrete_variance_constant, gradient_spectrum,
    increment_spectrum, variance_constant,
)

SCHEMES = ("exponential", "semi-implicit")


class SolverError(ValueError):
    """Inconsistent solver input."""


class DivergenceError(RuntimeError):
    """The step could not be completed (CFL exhausted or loss of positivity)."""

    def __init__(self, msg: str, step: int | None = None, t: float | None = None):
        super().__init__(msg if step is None else f"{msg} (step {step}, t={t:.6g})")
        self.step = step
        self.t = t


# ---------------------------------------------------------------------------
# gradient audit: every vector field handed out by this module is checked


@dataclass
class GradientAudit:
    tol: float = 1e-6
    checked: int = 0
    failures: list = field(default_factory=list)

    def record(self, u: Field, where: str) -> Field:
        self.checked += 1
        if not verify_gradient(u, self.tol):
            self.failures.append((where, u.time))
        return u

    def reset(self):
        self.checked = 0
        self.failures.clear()


AUDIT = GradientAudit()


# ---------------------------------------------------------------------------
# configuration and state


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    dt: float
    t_end: float = 0.0
    noise: NoiseModel = NoiseModel()
    dealias: bool = True
    scheme: str = "exponential"
    cfl: float = 0.5
    max_halvings: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise SolverError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise SolverError(f"t_end must be >= 0, got {self.t_end}")
        if self.scheme not in SCHEMES:
            raise SolverError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        ratio = self.t_end / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise SolverError(f"t_end={self.t_end} is not a whole number of steps dt={self.dt}")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True, eq=False)
class StateBundle:
    t: float
    psi: Field
    v: Field
    u: Field
    phi: Field | None = None
    h: Field | None = None


# ---------------------------------------------------------------------------
# array kernels


@lru_cache(maxsize=256)
def _heat(grid: Grid, tau: float) -> np.ndarray:
    """Spectral factor of exp(tau Lap / 2)."""
    return np.exp(-0.5 * grid.k2 * tau)


@lru_cache(maxsize=32)
def _grad_multiplier(grid: Grid, dealias: bool) -> np.ndarray:
    """-(i k), optionally times the 2/3 mask, shape (d,) + spectral_shape."""
    m = np.stack([np.broadcast_to(-1j * k, grid.spectral_shape) for k in grid.k_odd])
    return m * grid.dealias_mask if dealias else m


def _nonlinear(grid: Grid, w_hat: np.ndarray, dealias: bool):
    """Spectrum of -(1/2) grad |w|^2 and max |w|, for w given by its spectrum.

    ``w_hat`` has shape ``(R, d) + spectral_shape``.
    """
    w = grid.ifft(w_hat)
    w2 = np.einsum("rc...,rc...->r...", w, w)
    q_hat = grid.fft(w2)
    q_hat *= 0.5
    N = q_hat[:, None] * _grad_multiplier(grid, dealias)
    wmax = math.sqrt(float(w2.max())) if w2.size else 0.0
    return N, wmax, w


def _midpoint(grid: Grid, y_hat, N1, psi_mid_hat, tau, scheme, dealias):
    """One integrating-factor (or Crank-Nicolson) midpoint step given N at the start."""
    if scheme == "exponential":
        E2 = _heat(grid, tau / 2)
        y_half = E2 * (y_hat + 0.5 * tau * N1)
        N2, _, _ = _nonlinear(grid, y_half + psi_mid_hat, dealias)
        return E2 * E2 * y_hat + tau * E2 * N2
    lam = 0.5 * grid.k2
    y_half = (y_hat + 0.5 * tau * N1) / (1 + 0.25 * lam * tau)
    N2, _, _ = _nonlinear(grid, y_half + psi_mid_hat, dealias)
    return ((1 - 0.5 * lam * tau) * y_hat + tau * N2) / (1 + 0.5 * lam * tau)


def advance_nonlinear(cfg: SolverConfig, y_hat, psi0_hat=None, psi1_hat=None,
                      dt: float | None = None, step: int | None = None, t: float = 0.0):
    """Advance dy/dt = (1/2) Lap y - (1/2) grad |y + psi|^2 over ``dt``.

    ``psi`` is interpolated linearly between ``psi0_hat`` and ``psi1_hat``.
    The step is subdivided by halving until the advective CFL condition
    ``tau <= cfl * h / (1 + max|u|)`` holds, at most ``max_halvings`` times.
    Returns the new spectrum and the number of substeps taken.
    """
    g = cfg.grid
    dt = cfg.dt if dt is None else dt
    if psi0_hat is None:
        psi0_hat = np.zeros_like(y_hat)
    if psi1_hat is None:
        psi1_hat = psi0_hat
    level, done, substeps = 0, 0.0, 0
    while done < dt * (1 - 1e-12):
        tau = dt / 2**level
        theta0 = done / dt
        psi_a = (1 - theta0) * psi0_hat + theta0 * psi1_hat
        N1, umax, _ = _nonlinear(g, y_hat + psi_a, cfg.dealias)
        if not math.isfinite(umax):
            raise DivergenceError("non-finite velocity", step, t + done)
        if tau > cfg.cfl * g.h / (1 + umax):
            level += 1
            if level > cfg.max_halvings:
                raise DivergenceError(
                    f"CFL not met after {cfg.max_halvings} halvings (max|u|={umax:.3g})", step, t + done
                )
            continue
        theta_mid = (done + tau / 2) / dt
        psi_mid = (1 - theta_mid) * psi0_hat + theta_mid * psi1_hat
        y_hat = _midpoint(g, y_hat, N1, psi_mid, tau, cfg.scheme, cfg.dealias)
        done += tau
        substeps += 1
    return y_hat, substeps


@lru_cache(maxsize=64)
def probe_matrix(grid: Grid, indices) -> np.ndarray:
    """Weights turning an rfft spectrum into values at grid indices: shape (P,) + spectral_shape."""
    n, d = grid.n, grid.d
    full = np.arange(n)
    half = np.arange(n // 2 + 1)
    herm = np.full(half.size, 2.0)
    herm[0] = 1.0
    herm[-1] = 1.0
    out = []
    for p in indices:
        m = np.ones((), dtype=complex)
        for a in range(d):
            k = half if a == d - 1 else full
            e = np.exp(2j * np.pi * k * p[a] / n)
            if a == d - 1:
                e = e * herm
            m = np.multiply.outer(m, e)
        out.append(m / n**d)
    return np.stack(out)


def spectral_probe(spec: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Values at the probe points of ``P`` for spectra ``(R, C) + spectral``: shape (R, P, C)."""
    d = P.ndim - 1
    axes = tuple(range(-d, 0))
    return np.tensordot(spec, P, axes=(axes, tuple(range(1, d + 1)))).real.transpose(0, 2, 1)


@lru_cache(maxsize=64)
def ou_factor(grid: Grid, dt: float) -> np.ndarray:
    """Scale of a white increment of variance dt giving the exact OU innovation per mode."""
    k2dt = grid.k2 * dt
    safe = np.where(k2dt > 0, k2dt, 1.0)
    return np.sqrt(np.where(k2dt > 0, -np.expm1(-safe) / safe, 1.0))


def advance_psi(grid: Grid, psi_hat, dgrad_hat, dt: float):
    """Exact OU update of the linear field, mode by mode."""
    return _heat(grid, dt) * psi_hat + ou_factor(grid, dt) * dgrad_hat


def advance_she(grid: Grid, phi, dV, dt: float, c_disc: float):
    """Strang step: heat half step, exponential-martingale multiplication, heat half step.

    ``phi`` and ``dV`` are physical arrays with a leading realization axis.
    """
    H = _heat(grid, dt / 2)
    phi = grid.ifft(H * grid.fft(phi))
    phi = phi * np.exp(-dV - 0.5 * c_disc * dt)
    return grid.ifft(H * grid.fft(phi))


# ---------------------------------------------------------------------------
# single-field operations


def _check_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise SolverError(f"grid mismatch: {a.grid} vs {b.grid}")


def _spec(f: Field) -> np.ndarray:
    return f.grid.fft(f.values)[None]


def _vector_field(grid: Grid, spec: np.ndarray, t: float, where: str) -> Field:
    return AUDIT.record(Field(grid, grid.ifft(spec), t, is_gradient=True), where)


def step_psi(psi: Field, inc: NoiseIncrement) -> Field:
    """Advance the linear field by one step of the increment's ``dt``."""
    _check_grid(psi, inc.dgradV)
    g = psi.grid
    out = advance_psi(g, g.fft(psi.values), g.fft(inc.dgradV.values), inc.dt)
    return _vector_field(g, out, psi.time + inc.dt, "step_psi")


def step_v(v: Field, psi: Field | None, cfg: SolverConfig, psi_end: Field | None = None) -> Field:
    """Advance the nonlinear remainder over ``cfg.dt`` with psi held or interpolated."""
    g = v.grid
    p0 = None if psi is None else _spec(psi)
    p1 = None if psi_end is None else _spec(psi_end)
    if psi is not None:
        _check_grid(v, psi)
    out, _ = advance_nonlinear(cfg, _spec(v), p0, p1)
    return _vector_field(g, out[0], v.time + cfg.dt, "step_v")


def step_u_direct(u: Field, inc: NoiseIncrement, cfg: SolverConfig) -> Field:
    """Integrate Burgers directly: deterministic step, then the additive increment."""
    _check_grid(u, inc.dgradV)
    out, _ = advance_nonlinear(cfg, _spec(u), dt=inc.dt)
    out = out[0] + u.grid.fft(inc.dgradV.values)
    return _vector_field(u.grid, out, u.time + inc.dt, "step_u_direct")


def step_she(phi: Field, inc: NoiseIncrement, model: NoiseModel) -> Field:
    """One step of d phi = (1/2) Lap phi dt - phi dV that keeps E phi fixed for flat data."""
    _check_grid(phi, inc.dV)
    if phi.values.min() <= 0:
        raise SolverError("phi must be positive")
    c = discrete_variance_constant(model, phi.grid) if model.amplitude else 0.0
    out = advance_she(phi.grid, phi.values, inc.dV.values, inc.dt, c)
    if out.min() <= 0:
        raise DivergenceError("phi lost positivity; reduce dt")
    return phi.replace(out, time=phi.time + inc.dt)


def cole_hopf(phi: Field) -> tuple[Field, Field]:
    """h = -log phi and u = grad h."""
    if phi.components != 1:
        raise SolverError("cole_hopf expects a scalar field")
    if phi.values.min() <= 0:
        raise SolverError("phi must be strictly positive")
    h = phi.replace(-np.log(phi.values))
    return h, AUDIT.record(gradient(h), "cole_hopf")


def kpz_ito_constant(model: NoiseModel, L: float, d: int) -> float:
    """sum over k in Z^d of (rho * rho)(L k).

    The height h = -log phi drifts by half this constant per unit time, so
    E h(T, x) = T c / 2 - (1/2) int_0^T E|u(t, x)|^2 dt for flat initial data.
    """
    return variance_constant(model, L, d)


def weighted_product_identity_check(a: Field, v: Field, psi: Field, i: int, dt: float,
                                    dlog_a_dt: Field | None = None,
                                    scheme: str = "exponential") -> float:
    """Residual of the evolution identity for gamma = a v, component ``i`` (1-based).

    The left side is a forward difference of gamma over one deterministic step
    of the v equation with psi frozen; the right side is the closed-form
    expression in a, gamma and psi evaluated with spectral derivatives at the
    start of the step.  ``a`` is a positive scalar weight; ``dlog_a_dt`` the
    time derivative of log a (zero when omitted, and a is held fixed).
    """
    from .grid import laplacian, spectral_derivative

    g = v.grid
    if not 1 <= i <= g.d:
        raise SolverError(f"component must be in 1..{g.d}")
    if a.values.min() <= 0:
        raise SolverError("weight must be positive")
    cfg = SolverConfig(g, dt, dt, NoiseModel(amplitude=0.0), dealias=False, scheme=scheme)
    v1 = step_v(v, psi, cfg)
    ai = i - 1
    gam0 = a.values[0] * v.values[ai]
    lhs = (a.values[0] * v1.values[ai] - gam0) / dt

    la = a.replace(np.log(a.values))
    grad_la = np.stack([spectral_derivative(la, k).values[0] for k in range(1, g.d + 1)])
    gam_vec = a.values * v.values
    gi = Field(g, gam0)
    grad_gi = np.stack([spectral_derivative(gi, k).values[0] for k in range(1, g.d + 1)])
    lap_gi = laplacian(gi).values[0]
    lap_la = laplacian(la).values[0]
    dpsi_i = np.stack([spectral_derivative(Field(g, psi.values[k]), i).values[0] for k in range(g.d)])
    dt_la = 0.0 if dlog_a_dt is None else dlog_a_dt.values[0]

    rhs = (gam0 * dt_la + 0.5 * lap_gi - (grad_la * grad_gi).sum(0)
           + 0.5 * gam0 * ((grad_la**2).sum(0) - lap_la)
           - ((gam_vec / a.values + psi.values) * (grad_gi - gam0 * grad_la)).sum(0)
           - ((gam_vec + a.values * psi.values) * dpsi_i).sum(0))
    return float(np.abs(lhs - rhs).max())


# ---------------------------------------------------------------------------
# ensembles


class BurgersEnsemble:
    """A batch of realizations advanced together with shared step size.

    Parameters
    ----------
    cfg : SolverConfig
    realizations : sequence of int
        Realization indices; each keys an independent noise stream.
    v0 : Field, optional
        Initial data for ``v`` (and hence ``u``), shared by all realizations.
    she : bool
        Also evolve the stochastic heat equation from ``phi0`` (default 1).
    direct : bool
        Also evolve ``u`` with the direct integrator (for splitting checks).
    stride : int
        Each macro step consumes ``stride`` fine noise steps of size
        ``dt / stride``, so runs at different ``dt`` share one Brownian path.
    """

    def __init__(self, cfg: SolverConfig, realizations=(0,), v0: Field | None = None,
                 she: bool = False, phi0: Field | None = None, direct: bool = False,
                 stride: int = 1):
        self.cfg = cfg
        g = cfg.grid
        cfg.noise.check_grid(g)
        self.realizations = list(realizations)
        R = len(self.realizations)
        self.stride = int(stride)
        spec_shape = (R, g.d) + g.spectral_shape
        self.psi_hat = np.zeros(spec_shape, dtype=complex)
        if v0 is None:
            self.v_hat = np.zeros(spec_shape, dtype=complex)
        else:
            if v0.grid != g:
                raise SolverError(f"grid mismatch: {v0.grid} vs {g}")
            if v0.components != g.d:
                raise SolverError("v0 must have d components")
            self.v_hat = np.repeat(_spec(v0), R, axis=0)
        self.u_hat = self.v_hat.copy() if direct else None
        if she:
            base = np.ones(g.shape) if phi0 is None else phi0.values[0]
            if base.min() <= 0:
                raise SolverError("phi0 must be positive")
            self.phi = np.repeat(base[None], R, axis=0)
            self._c_disc = discrete_variance_constant(cfg.noise, g) if cfg.noise.amplitude else 0.0
        else:
            self.phi = None
        self.step_index = 0
        self.t = 0.0
        self.substeps = 0

    @property
    def grid(self) -> Grid:
        return self.cfg.grid

    def _noise(self):
        g, cfg = self.grid, self.cfg
        fine = cfg.dt / self.stride
        dV_hat = increment_spectrum(cfg.noise, g, fine, self.step_index, self.realizations, self.stride)
        return dV_hat, gradient_spectrum(g, dV_hat)

    def step(self):
        g, cfg = self.grid, self.cfg
        dV_hat, dgrad_hat = self._noise()
        psi_new = advance_psi(g, self.psi_hat, dgrad_hat, cfg.dt)
        self.v_hat, sub = advance_nonlinear(cfg, self.v_hat, self.psi_hat, psi_new,
                                            step=self.step_index, t=self.t)
        self.substeps += sub
        self.psi_hat = psi_new
        if self.u_hat is not None:
            u_det, _ = advance_nonlinear(cfg, self.u_hat, step=self.step_index, t=self.t)
            self.u_hat = u_det + dgrad_hat
        if self.phi is not None:
            self.phi = advance_she(g, self.phi, g.ifft(dV_hat), cfg.dt, self._c_disc)
            if self.phi.min() <= 0 or not np.all(np.isfinite(self.phi)):
                raise DivergenceError("phi lost positivity; reduce dt", self.step_index, self.t)
        self.step_index += 1
        self.t = self.step_index * cfg.dt

    def run(self, steps: int, callback=None, every: int = 1):
        """Advance ``steps`` macro steps, calling ``callback(self)`` every ``every`` steps."""
        for _ in range(steps):
            self.step()
            if callback is not None and self.step_index % every == 0:
                callback(self)
        return self

    # -- physical views (raw arrays; no audit) ----------------------------

    def u_values(self) -> np.ndarray:
        return self.grid.ifft(self.v_hat + self.psi_hat)

    def v_values(self) -> np.ndarray:
        return self.grid.ifft(self.v_hat)

    def psi_values(self) -> np.ndarray:
        return self.grid.ifft(self.psi_hat)

    def u_direct_values(self) -> np.ndarray:
        if self.u_hat is None:
            raise SolverError("ensemble was built without the direct integrator")
        return self.grid.ifft(self.u_hat)

    def u_at(self, points) -> np.ndarray:
        """u at grid indices ``points`` (list of index tuples): shape (R, P, d)."""
        key = tuple(tuple(int(v) for v in p) for p in points)
        if getattr(self, "_probe_key", None) != key:
            self._probe_key, self._probe = key, probe_matrix(self.grid, key)
        return spectral_probe(self.v_hat + self.psi_hat, self._probe)

    # -- audited Field views ----------------------------------------------

    def state(self, r: int = 0) -> StateBundle:
        """Fields of realization ``r`` (position in the batch)."""
        g, t = self.grid, self.t
        psi = _vector_field(g, self.psi_hat[r], t, "ensemble.psi")
        v = _vector_field(g, self.v_hat[r], t, "ensemble.v")
        u = _vector_field(g, self.v_hat[r] + self.psi_hat[r], t, "ensemble.u")
        phi = h = None
        if self.phi is not None:
            phi = Field(g, self.phi[r], t)
            h = phi.replace(-np.log(self.phi[r]))
        return StateBundle(t, psi, v, u, phi, h)

    def audit_all(self) -> int:
        """Check every realization's u, v, psi (and direct u); returns the failure count."""
        before = len(AUDIT.failures)
        for r in range(len(self.realizations)):
            self.state(r)
            if self.u_hat is not None:
                _vector_field(self.grid, self.u_hat[r], self.t, "ensemble.u_direct")
        return len(AUDIT.failures) - before


# ---------------------------------------------------------------------------
# exact deterministic solutions


@dataclass(frozen=True, eq=False)
class Snapshot:
    """A velocity field at time ``t`` with optional exact diagonal derivatives ``d_i v_i``."""

    t: float
    v: Field
    diag: np.ndarray | None = None


class SeparableColeHopf:
    """Exact deterministic Burgers solution for potentials f(x) = sum_i f_i(x_i).

    With u(0) = grad f, the heat solution phi = G_t * exp(-f) factorizes into
    one-dimensional convolutions, evaluated here in log space by periodic
    quadrature.  Then u_i = E[x_i - y]/t and d_i u_i = 1/t - Var[y]/t^2 under
    the posterior density proportional to exp(-f_i(y) - (x_i - y)^2 / 2t).
    This stays exact where the shocks are far thinner than the grid.

    Parameters
    ----------
    grid : Grid
    profiles : sequence of callables or None
        ``profiles[i]`` maps coordinates on [-L/2, L/2) to f_i; None means f_i = 0.
    quad : int
        Quadrature points per period.
    """

    def __init__(self, grid: Grid, profiles, quad: int = 8192):
        if len(profiles) != grid.d:
            raise SolverError(f"need {grid.d} profiles, got {len(profiles)}")
        self.grid = grid
        self.y = -grid.L / 2 + grid.L * np.arange(quad) / quad
        self.f = [None if p is None else np.asarray(p(self.y), dtype=float) for p in profiles]
        for f in self.f:
            if f is not None and not np.all(np.isfinite(f)):
                raise SolverError("profiles must be finite")

    def initial(self) -> Field:
        from .grid import field_from_function

        prof = [np.zeros(self.grid.n) if f is None else np.interp(
            self.grid.x1d, self.y, f, period=self.grid.L) for f in self.f]
        return field_from_function(self.grid, lambda *x: sum(
            np.interp(xi, self.grid.x1d, p, period=self.grid.L) for xi, p in zip(x, prof)))

    def _axis(self, f: np.ndarray, t: float, chunk: int = 64):
        L, x = self.grid.L, self.grid.x1d
        images = int(math.ceil(math.sqrt(80.0 * t) / L)) + 1
        shifts = L * np.arange(-images, images + 1)
        y = (self.y[None, :] + shifts[:, None]).ravel()
        fy = np.tile(f, shifts.size)
        mean = np.empty(x.size)
        var = np.empty(x.size)
        for s in range(0, x.size, chunk):
            dx = x[s:s + chunk, None] - y[None, :]
            e = -fy[None, :] - dx**2 / (2 * t)
            w = np.exp(e - e.max(1, keepdims=True))
            w /= w.sum(1, keepdims=True)
            m = (w * dx).sum(1)
            mean[s:s + chunk] = m
            var[s:s + chunk] = np.maximum((w * (dx - m[:, None]) ** 2).sum(1), 0.0)
        return mean / t, 1.0 / t - var / t**2

    def snapshot(self, t: float) -> Snapshot:
        if not t > 0:
            raise SolverError("the exact solution is evaluated at t > 0")
        g = self.grid
        vals = np.zeros((g.d,) + g.shape)
        diag = np.zeros((g.d,) + g.shape)
        for i, f in enumerate(self.f):
            if f is None:
                continue
            u1, du1 = self._axis(f, t)
            shape = [1] * g.d
            shape[i] = g.n
            vals[i] = np.broadcast_to(u1.reshape(shape), g.shape)
            diag[i] = np.broadcast_to(du1.reshape(shape), g.shape)
        v = AUDIT.record(Field(g, vals, t, is_gradient=True), "separable_cole_hopf")
        return Snapshot(t, v, diag)
