"""Growth weights, weighted sup and Holder norms, and the oscillation functional.

The weights are not periodic. On the torus they are evaluated at each point's
representative in ``[-L/2, L/2)^d``, which is meaningful as long as the
features of interest stay near the centre of the box.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid, interpolate, second_derivative, spectral_derivative
from . import kernels


class WeightError(ValueError):
    pass


def bracket(x) -> np.ndarray:
    """<x> = sqrt(1 + |x|^2), last axis holding coordinates."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + (x**2).sum(axis=-1))


@dataclass(frozen=True)
class WeightSpec:
    """``power``: (<x> + K)^ell.  ``log``: log(<x> + 1)^(3/4)."""

    kind: str = "power"
    ell: float = 0.0
    K: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "log"):
            raise WeightError(f"unknown weight kind {self.kind!r}")
        if self.kind == "power" and not self.K >= 0:
            raise WeightError(f"K must be >= 0, got {self.K}")

    @classmethod
    def power(cls, ell: float, K: float = 1.0) -> "WeightSpec":
        return cls("power", float(ell), float(K))

    @classmethod
    def log(cls) -> "WeightSpec":
        return cls("log")

    def __call__(self, x) -> np.ndarray:
        b = bracket(x)
        if self.kind == "power":
            return (b + self.K) ** self.ell
        return np.log(b + 1.0) ** 0.75

    def on_grid(self, grid: Grid) -> np.ndarray:
        return self(np.stack(grid.coords(), axis=-1))


def weight_eval(w: WeightSpec, x) -> float:
    return float(w(np.atleast_1d(np.asarray(x, dtype=float))))


@dataclass(frozen=True)
class ExponentTriple:
    """Admissible (m, ell, eps) for dimension d; the window is empty for d >= 4."""

    m: float
    ell: float
    eps: float
    d: int

    def __post_init__(self):
        lo = 2 * self.d / (self.d + 4)
        if self.d < 1:
            raise WeightError(f"dimension must be positive, got {self.d}")
        if lo >= 1:
            raise WeightError(
                f"d={self.d}: the interval (2d/(d+4), 1) = ({lo:g}, 1) for m is empty"
            )
        if not lo < self.m < 1:
            raise WeightError(f"m={self.m} must lie in ({lo:g}, 1)")
        hi = (1 + 2 / self.d) * self.m - 1
        if not self.m / 2 < self.ell < hi:
            raise WeightError(f"ell={self.ell} must lie in ({self.m / 2:g}, {hi:g})")
        if not 0 < self.eps < self.ell - self.m / 2:
            raise WeightError(f"eps={self.eps} must lie in (0, {self.ell - self.m / 2:g})")

    @property
    def alpha(self) -> float:
        """Annulus growth exponent used by the covering measure."""
        return 1.0 / (1.0 + self.ell - self.m)


def _derivative_stack(f: Field, order: int) -> list[np.ndarray]:
    """|value|, max |first partials|, max |second partials| over components."""
    g = f.grid
    out = [np.abs(f.values).max(axis=0)]
    if order >= 1:
        firsts = [spectral_derivative(f, a).values for a in range(1, g.d + 1)]
        out.append(np.max([np.abs(v).max(axis=0) for v in firsts], axis=0))
    if order >= 2:
        seconds = [
            second_derivative(f, i, j).values
            for i in range(1, g.d + 1)
            for j in range(i, g.d + 1)
        ]
        out.append(np.max([np.abs(v).max(axis=0) for v in seconds], axis=0))
    return out


def weighted_sup_norm(f: Field, w: WeightSpec, order: int = 0) -> float:
    """sup over the grid of max_j |d^j f| / w, for derivative orders j <= order."""
    if order not in (0, 1, 2):
        raise WeightError(f"order must be 0, 1 or 2, got {order}")
    wg = w.on_grid(f.grid)
    return float(max((s / wg).max() for s in _derivative_stack(f, order)))


def holder_offsets(grid: Grid, radius: float = 1.0) -> list[tuple[int, ...]]:
    """Integer lattice offsets along axes and diagonals with |offset| h <= radius."""
    dirs = set()
    for v in itertools.product((-1, 0, 1), repeat=grid.d):
        if any(v):
            dirs.add(v)
    offs = []
    for v in sorted(dirs):
        step = grid.h * math.sqrt(sum(abs(c) for c in v))
        for m in range(1, int(radius / step + 1e-9) + 1):
            offs.append(tuple(m * c for c in v))
    return offs


def weighted_holder_seminorm(f: Field, w: WeightSpec, alpha: float,
                             wrap: bool = True, radius: float = 1.0) -> float:
    """max |f(x) - f(y)| / (w(x) |x - y|^alpha) over sampled pairs with |x - y| <= radius.

    With ``wrap=False`` pairs that cross the periodic boundary are skipped, so
    non-periodic data sampled on the box can be measured.
    """
    if not 0 < alpha < 1:
        raise WeightError(f"alpha must lie in (0, 1), got {alpha}")
    g = f.grid
    offs = holder_offsets(g, radius)
    if not offs:
        return 0.0
    wg = w.on_grid(g)
    return float(kernels.holder_shell_max(
        np.ascontiguousarray(f.values.reshape(f.components, -1)),
        np.ascontiguousarray(wg.ravel()),
        np.asarray(offs, dtype=np.int64), g.d, g.n, g.h, alpha, wrap,
    ))


def weighted_holder_norm(f: Field, w: WeightSpec, alpha: float, **kw) -> float:
    return max(weighted_sup_norm(f, w), weighted_holder_seminorm(f, w, alpha, **kw))


def oscillation(f, S=None, method: str = "snap") -> float:
    """sup_S f - inf_S f.

    ``f`` may be a scalar :class:`Field` (points ``S`` are snapped to the grid,
    or evaluated by trigonometric interpolation with ``method="interp"``;
    ``S=None`` means the whole grid) or an array of sampled values.
    """
    if isinstance(f, Field):
        if f.components != 1:
            raise WeightError("oscillation needs a scalar field")
        if S is None:
            vals = f.values.ravel()
        else:
            pts = np.atleast_2d(np.asarray(S, dtype=float))
            if pts.size == 0:
                raise WeightError("empty point set")
            if method == "snap":
                idx = [f.grid.index_of(p) for p in pts]
                vals = np.array([f.values[(0,) + i] for i in idx])
            elif method == "interp":
                vals = interpolate(f, pts)[0]
            else:
                raise WeightError(f"unknown method {method!r}")
    else:
        vals = np.asarray(f, dtype=float).ravel()
    if vals.size == 0:
        raise WeightError("empty point set")
    return float(vals.max() - vals.min())
