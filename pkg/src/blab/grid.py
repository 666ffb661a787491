"""Periodic grids, sampled fields and pseudo-spectral calculus.

Fields live on the torus ``[-L/2, L/2)^d`` sampled at ``n`` points per axis.
Values are stored with a leading component axis, so a scalar field has shape
``(1, n, ..., n)`` and a vector field ``(d, n, ..., n)``.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

MAGIC = b"BLAB"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIddI")


class GridError(ValueError):
    """Raised for malformed grids, fields or snapshot files."""


def _workers() -> int:
    """FFT worker threads, capped by ``BLAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("BLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Periodic lattice with ``n`` points per axis on a torus of period ``L``."""

    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1):
            raise GridError(f"n must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise GridError(f"period must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def axes(self) -> tuple[int, ...]:
        """Trailing array axes holding space (valid for any leading batch dims)."""
        return tuple(range(-self.d, 0))

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @cached_property
    def x1d(self) -> np.ndarray:
        return np.arange(self.n) * self.h - self.L / 2

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays, one per axis, each of shape ``grid.shape``."""
        return np.meshgrid(*([self.x1d] * self.d), indexing="ij")

    def points(self) -> np.ndarray:
        """All grid points as an ``(n**d, d)`` array in row-major order."""
        return np.stack([c.ravel() for c in self.coords()], axis=-1)

    def index_of(self, x) -> tuple[int, ...]:
        """Nearest grid index of a point (periodic)."""
        x = np.broadcast_to(np.asarray(x, dtype=float), (self.d,))
        j = np.rint((x + self.L / 2) / self.h).astype(int) % self.n
        return tuple(int(v) for v in j)

    @cached_property
    def _wavenumbers(self):
        full = 2 * np.pi / self.L * np.fft.fftfreq(self.n, 1.0 / self.n)
        half = 2 * np.pi / self.L * np.fft.rfftfreq(self.n, 1.0 / self.n)
        ks = []
        for a in range(self.d):
            k = half if a == self.d - 1 else full
            shape = [1] * self.d
            shape[a] = k.size
            ks.append(k.reshape(shape))
        return ks

    def k(self, axis: int) -> np.ndarray:
        """Wavenumbers along ``axis`` (0-based), broadcastable to the rfft shape."""
        return self._wavenumbers[axis]

    @cached_property
    def k_odd(self) -> list[np.ndarray]:
        """Wavenumbers with the Nyquist mode zeroed, for odd derivatives."""
        out = []
        for a in range(self.d):
            k = self._wavenumbers[a].copy()
            k[np.isclose(np.abs(k), np.pi / self.h)] = 0.0
            out.append(k)
        return out

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k**2 for k in self._wavenumbers)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask on the rfft spectrum."""
        kmax = (2.0 / 3.0) * np.pi / self.h
        mask = np.ones(self.spectral_shape, dtype=bool)
        for k in self._wavenumbers:
            mask &= np.abs(k) < kmax
        return mask

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.d - 1) + (self.n // 2 + 1,)

    def fft(self, a: np.ndarray) -> np.ndarray:
        return sfft.rfftn(a, axes=self.axes, workers=_workers())

    def ifft(self, a: np.ndarray) -> np.ndarray:
        return sfft.irfftn(a, s=self.shape, axes=self.axes, workers=_workers())


@dataclass(frozen=True, eq=False)
class Field:
    """Immutable snapshot of a scalar or vector field on a grid."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    is_gradient: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape == self.grid.shape:
            v = v[None]
        if v.ndim != self.grid.d + 1 or v.shape[1:] != self.grid.shape:
            raise GridError(f"values of shape {v.shape} do not fit {self.grid}")
        if v.shape[0] not in (1, self.grid.d):
            raise GridError(f"components must be 1 or d={self.grid.d}, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        if self.is_gradient and v.shape[0] != self.grid.d:
            raise GridError("only d-component fields can be gradients")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.components == 1 and not self.is_gradient

    @property
    def scalar(self) -> np.ndarray:
        if self.components != 1:
            raise GridError("field is not scalar")
        return self.values[0]

    def sup(self) -> float:
        """Max over the grid of the Euclidean norm of the field."""
        return float(np.sqrt((self.values**2).sum(axis=0)).max())

    def replace(self, values, **kw) -> "Field":
        kw.setdefault("time", self.time)
        kw.setdefault("is_gradient", False)
        return Field(self.grid, values, **kw)


def field_from_function(grid: Grid, fn, time: float = 0.0, is_gradient: bool = False) -> Field:
    """Sample ``fn(*coords)`` on the grid. ``fn`` may return a scalar or a list."""
    out = fn(*grid.coords())
    if isinstance(out, (list, tuple)):
        out = np.stack([np.broadcast_to(o, grid.shape) for o in out])
    return Field(grid, np.broadcast_to(out, np.shape(out)).copy(), time, is_gradient)


def _check_axis(grid: Grid, axis: int) -> int:
    if not 1 <= axis <= grid.d:
        raise GridError(f"axis must be in 1..{grid.d}, got {axis}")
    return axis - 1


def spectral_derivative(f: Field, axis: int) -> Field:
    """Partial derivative along ``axis`` (1-based), componentwise."""
    g = f.grid
    a = _check_axis(g, axis)
    out = g.ifft(1j * g.k_odd[a] * g.fft(f.values))
    return f.replace(out)


def second_derivative(f: Field, axis_i: int, axis_j: int) -> Field:
    """Mixed or pure second partial. Pure partials keep the Nyquist mode."""
    g = f.grid
    i, j = _check_axis(g, axis_i), _check_axis(g, axis_j)
    if i == j:
        mult = -g.k(i) ** 2
    else:
        mult = -g.k_odd[i] * g.k_odd[j]
    return f.replace(g.ifft(mult * g.fft(f.values)))


def laplacian(f: Field) -> Field:
    g = f.grid
    return f.replace(g.ifft(-g.k2 * g.fft(f.values)))


def gradient(f: Field) -> Field:
    """Spectral gradient of a scalar field."""
    if f.components != 1:
        raise GridError("gradient expects a scalar field")
    g = f.grid
    fh = g.fft(f.values[0])
    vals = np.stack([g.ifft(1j * k * fh) for k in g.k_odd])
    return Field(g, vals, f.time, is_gradient=True)


def curl_defect(u: Field) -> float:
    """max over i<j of the sup norm of the antisymmetric Jacobian part."""
    g = u.grid
    if u.components != g.d:
        raise GridError("curl_defect expects a d-component field")
    if g.d == 1:
        return 0.0
    uh = g.fft(u.values)
    worst = 0.0
    for i in range(g.d):
        for j in range(i + 1, g.d):
            r = g.ifft(1j * (g.k_odd[i] * uh[j] - g.k_odd[j] * uh[i]))
            worst = max(worst, float(np.abs(r).max()))
    return worst


def verify_gradient(u: Field, tol: float = 1e-8) -> bool:
    """True iff the discrete curl is below ``tol * (1 + ||u||_inf)``."""
    if u.components != u.grid.d:
        return False
    scale = 1.0 + float(np.abs(u.values).max())
    return curl_defect(u) <= tol * scale


def fd_derivative(f: Field, axis: int) -> Field:
    """Second-order centred difference; used only to cross-check the spectral route."""
    g = f.grid
    a = _check_axis(g, axis)
    ax = a - g.d
    out = (np.roll(f.values, -1, axis=ax) - np.roll(f.values, 1, axis=ax)) / (2 * g.h)
    return f.replace(out)


def fd_laplacian(f: Field) -> Field:
    g = f.grid
    out = np.zeros_like(f.values)
    for a in range(-g.d, 0):
        out += np.roll(f.values, -1, axis=a) - 2 * f.values + np.roll(f.values, 1, axis=a)
    return f.replace(out / g.h**2)


def parseval_mean_square(f: Field) -> float:
    """Mean of |f|^2 computed from the full FFT spectrum."""
    g = f.grid
    fh = np.fft.fftn(f.values, axes=g.axes)
    return float((np.abs(fh) ** 2).sum() / g.n ** (2 * g.d))


def interpolate(f: Field, points) -> np.ndarray:
    """Trigonometric interpolation of every component at arbitrary points.

    Returns an array of shape ``(components, npoints)``. Exact for band-limited
    fields whose spectrum has no Nyquist content.
    """
    g = f.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != g.d:
        raise GridError(f"points must have {g.d} coordinates")
    coef = np.fft.fftn(f.values, axes=g.axes) / g.n**g.d
    k = 2 * np.pi / g.L * np.fft.fftfreq(g.n, 1.0 / g.n)
    nyq = np.isclose(np.abs(k), np.pi / g.h)
    y = pts + g.L / 2
    factors = []
    for a in range(g.d):
        e = np.exp(1j * np.outer(y[:, a], k))
        # Nyquist mode: use its real (cosine) interpolant
        e[:, nyq] = np.cos(np.outer(y[:, a], k[nyq]))
        factors.append(e)
    letters = "xyz"[: g.d]
    spec = "c" + letters + "," + ",".join("p" + c for c in letters) + "->cp"
    return np.einsum(spec, coef, *factors, optimize=True).real


def save_snapshot(f: Field, path) -> Path:
    """Write the binary snapshot format (little-endian, row-major)."""
    path = Path(path)
    g = f.grid
    header = _HEADER.pack(MAGIC, SNAPSHOT_VERSION, g.d, g.n, g.L, float(f.time), f.components)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    return path


def load_snapshot(path, is_gradient: bool = False) -> Field:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise GridError(f"{path}: truncated header")
    magic, version, d, n, L, t, comps = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise GridError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise GridError(f"{path}: unsupported version {version}")
    grid = Grid(d, L, n)
    count = comps * n**d
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise GridError(f"{path}: expected {count} values, found {len(body) // 8}")
    vals = np.frombuffer(body, dtype="<f8").reshape((comps,) + grid.shape)
    return Field(grid, vals.astype(float), t, is_gradient)
