"""Mollified, L-periodic, white-in-time noise and its gradient increments.

The noise is ``V = rho * W`` with ``W`` space-time white noise on the torus.
Increments are drawn cell-wise (iid Gaussians of variance ``dt / h**d``) and
smoothed by the grid-sampled periodization of ``rho`` through the FFT.
Random numbers come from a counter-based generator keyed on
``(seed, realization)`` with the step index in the counter, so any increment
can be regenerated in isolation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .grid import Field, Grid

KINDS = ("gaussian", "bump")
# bump support radius in units of the width
BUMP_RADIUS = 3.0

_STREAM_NOISE = 0
_STREAM_CHI = 1


class NoiseConfigError(ValueError):
    """Invalid noise model or noise/grid combination."""


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "gaussian"
    width: float = 0.5
    amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NoiseConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.width > 0:
            raise NoiseConfigError(f"width must be positive, got {self.width}")
        if not self.amplitude >= 0:
            raise NoiseConfigError(f"amplitude must be >= 0, got {self.amplitude}")
        if not 0 <= int(self.seed) < 2**64:
            raise NoiseConfigError("seed must fit in 64 bits")

    def check_grid(self, grid: Grid) -> None:
        if not self.width < grid.L / 8:
            raise NoiseConfigError(
                f"mollifier width {self.width} must be < L/8 = {grid.L / 8}"
            )


@dataclass(frozen=True, eq=False)
class NoiseIncrement:
    dV: Field
    dgradV: Field
    dt: float


def _sphere_area(d: int) -> float:
    # surface measure of the unit sphere in R^d
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def _bump_profile(r, R):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < R
    q = 1.0 - (r[inside] / R) ** 2
    out[inside] = np.exp(-1.0 / q)
    return out


@lru_cache(maxsize=None)
def _bump_mass(d: int, R: float) -> float:
    val, _ = integrate.quad(
        lambda r: r ** (d - 1) * _bump_profile(r, R), 0.0, R, epsabs=0, epsrel=1e-13, limit=200
    )
    return _sphere_area(d) * val


def rho_radial(model: NoiseModel, r, d: int) -> np.ndarray:
    """rho as a function of |x| in dimension ``d``."""
    r = np.asarray(r, dtype=float)
    s, sig = model.width, model.amplitude
    if model.kind == "gaussian":
        return sig * (2 * math.pi * s * s) ** (-d / 2) * np.exp(-(r**2) / (2 * s * s))
    R = BUMP_RADIUS * s
    return sig * _bump_profile(r, R) / _bump_mass(d, R)


def rho_eval(model: NoiseModel, x) -> float | np.ndarray:
    """Evaluate the mollifier at a point (last axis holds the coordinates)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.shape[-1]
    out = rho_radial(model, np.linalg.norm(x, axis=-1), d)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=4096)
def _bump_star2(width: float, d: int, r: float) -> float:
    """(rho * rho)(|x| = r) for the unit-amplitude bump, by adaptive quadrature."""
    model = NoiseModel("bump", width, 1.0)
    R = BUMP_RADIUS * width
    if r >= 2 * R:
        return 0.0

    def rho(q):
        return float(rho_radial(model, q, d))

    lo, hi = max(-R, r - R), min(R, r + R)
    if d == 1:
        val, _ = integrate.quad(lambda y: rho(abs(y)) * rho(abs(r - y)), lo, hi,
                                epsabs=1e-14, epsrel=1e-11, limit=200)
        return val
    # coordinates along x and radial distance in the orthogonal complement
    weight = 2.0 if d == 2 else 2 * math.pi

    def inner(q, y):
        jac = 1.0 if d == 2 else q
        return jac * rho(math.hypot(y, q)) * rho(math.hypot(r - y, q))

    val, _ = integrate.dblquad(inner, lo, hi, 0.0, R, epsabs=1e-13, epsrel=1e-10)
    return weight * val


def rho_star2(model: NoiseModel, x) -> float:
    """Self-convolution (rho * rho)(x); ``x`` is a point in R^d."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size
    r = float(np.linalg.norm(x))
    s, sig = model.width, model.amplitude
    if model.kind == "gaussian":
        return sig**2 * (4 * math.pi * s * s) ** (-d / 2) * math.exp(-r * r / (4 * s * s))
    return sig**2 * _bump_star2(float(s), d, round(r, 14))


def periodized_covariance(model: NoiseModel, offset, L: float) -> float:
    """sum over k in Z^d of (rho * rho)(offset + L k), truncated by shells."""
    offset = np.atleast_1d(np.asarray(offset, dtype=float))
    d = offset.size
    total = 0.0
    for shell in itertools.count():
        part = 0.0
        for k in itertools.product(range(-shell, shell + 1), repeat=d):
            if max((abs(v) for v in k), default=0) != shell:
                continue
            part += rho_star2(model, offset + L * np.asarray(k, dtype=float))
        total += part
        if shell >= 1 and part <= 1e-16 * total:
            return total
        if shell > 1000:  # pragma: no cover - only for pathological widths
            return total


def variance_constant(model: NoiseModel, L: float, d: int) -> float:
    """sum over k in Z^d of (rho * rho)(L k): the pointwise variance rate of V."""
    if L < 1:
        raise NoiseConfigError(f"period must be >= 1, got {L}")
    return periodized_covariance(model, np.zeros(d), L)


def _image_count(model: NoiseModel, L: float) -> int:
    reach = 12.0 * model.width if model.kind == "gaussian" else BUMP_RADIUS * model.width
    return int(math.ceil(reach / L + 0.5)) + 1


def periodized_kernel(model: NoiseModel, grid: Grid) -> np.ndarray:
    """rho_L sampled at the lattice offsets ``j h`` (wrapped), in FFT order."""
    off = np.where(np.arange(grid.n) < grid.n // 2, np.arange(grid.n), np.arange(grid.n) - grid.n)
    off = off * grid.h
    axes = np.meshgrid(*([off] * grid.d), indexing="ij")
    J = _image_count(model, grid.L)
    ker = np.zeros(grid.shape)
    for k in itertools.product(range(-J, J + 1), repeat=grid.d):
        r2 = sum((a + grid.L * kk) ** 2 for a, kk in zip(axes, k))
        ker += rho_radial(model, np.sqrt(r2), grid.d)
    return ker


@lru_cache(maxsize=64)
def _kernel_spectrum(model: NoiseModel, grid: Grid) -> np.ndarray:
    return grid.cell_volume * grid.fft(periodized_kernel(model, grid))


def discrete_variance_constant(model: NoiseModel, grid: Grid) -> float:
    """Exact per-unit-time variance of the discretized dV at a grid point."""
    ker = periodized_kernel(model, grid)
    return float(grid.cell_volume * (ker**2).sum())


def _generator(seed: int, realization: int, step: int, stream: int) -> np.random.Generator:
    key = np.array([int(seed) % 2**64, int(realization) % 2**64], dtype=np.uint64)
    counter = np.array([0, 0, int(step) % 2**64, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def cell_noise(model: NoiseModel, grid: Grid, dt: float, step: int, realization: int = 0) -> np.ndarray:
    """iid N(0, dt/h^d) cell values for one step of one realization."""
    rng = _generator(model.seed, realization, step, _STREAM_NOISE)
    return rng.standard_normal(grid.shape) * math.sqrt(dt / grid.cell_volume)


def increment_spectrum(model: NoiseModel, grid: Grid, dt: float, step: int,
                       realizations=(0,), stride: int = 1) -> np.ndarray:
    """rfft of dV for each realization, shape ``(R,) + grid.spectral_shape``.

    With ``stride > 1`` the increment over ``stride`` consecutive fine steps of
    size ``dt`` is returned (fine steps ``step*stride .. step*stride+stride-1``),
    which couples runs at different time steps to one Brownian path.
    """
    if dt <= 0:
        raise NoiseConfigError(f"dt must be positive, got {dt}")
    model.check_grid(grid)
    realizations = list(realizations)
    out = np.zeros((len(realizations),) + grid.spectral_shape, dtype=complex)
    if model.amplitude == 0:
        return out
    cells = np.zeros((len(realizations),) + grid.shape)
    for i, r in enumerate(realizations):
        for sub in range(stride):
            cells[i] += cell_noise(model, grid, dt, step * stride + sub, r)
    return _kernel_spectrum(model, grid) * grid.fft(cells)


def gradient_spectrum(grid: Grid, spec: np.ndarray) -> np.ndarray:
    """Stack of ``i k_a * spec`` along a new component axis before the spatial axes."""
    return np.stack([1j * k * spec for k in grid.k_odd], axis=-grid.d - 1)


def sample_increment(model: NoiseModel, grid: Grid, dt: float, step: int,
                     realization: int = 0) -> NoiseIncrement:
    """Increment of V and of its gradient over one step, deterministic in (seed, step)."""
    spec = increment_spectrum(model, grid, dt, step, (realization,))[0]
    dV = Field(grid, grid.ifft(spec), time=step * dt)
    dgrad = Field(grid, grid.ifft(gradient_spectrum(grid, spec)), time=step * dt, is_gradient=True)
    return NoiseIncrement(dV, dgrad, dt)


def chi_cutoff(x: np.ndarray, L: float) -> np.ndarray:
    """Per-axis cutoff on [-L, L] with sum over images of its square equal to one."""
    return np.where(np.abs(x) <= L, np.cos(np.pi * x / (2 * L)), 0.0)


def sample_increment_chi(model: NoiseModel, grid: Grid, dt: float, step: int,
                         realization: int = 0) -> NoiseIncrement:
    """Independent route to the same law: cut off a white noise on [-L, L)^d
    with the partition of unity, fold it onto the torus, then smooth.

    Used as a cross-check of :func:`sample_increment` at small ``n``.
    """
    model.check_grid(grid)
    rng = _generator(model.seed, realization, step, _STREAM_CHI)
    big = (2 * grid.n,) * grid.d
    w = rng.standard_normal(big) * math.sqrt(dt / grid.cell_volume)
    x = np.arange(2 * grid.n) * grid.h - grid.L
    cut = np.ones(big)
    for a in range(grid.d):
        shape = [1] * grid.d
        shape[a] = -1
        cut = cut * chi_cutoff(x, grid.L).reshape(shape)
    w = w * cut
    # fold the doubled window: index j and j + n land on the same torus cell
    folded = w
    for a in range(grid.d):
        folded = np.take(folded, range(grid.n), axis=a) + np.take(folded, range(grid.n, 2 * grid.n), axis=a)
    # doubled window starts at -L, torus grid at -L/2: shift by n/2 cells
    folded = np.roll(folded, shift=[-(grid.n // 2)] * grid.d, axis=tuple(range(grid.d)))
    spec = _kernel_spectrum(model, grid) * grid.fft(folded)
    dV = Field(grid, grid.ifft(spec), time=step * dt)
    dgrad = Field(grid, grid.ifft(gradient_spectrum(grid, spec)), time=step * dt, is_gradient=True)
    return NoiseIncrement(dV, dgrad, dt)
