"""One-sided second-derivative control of oscillations and gradients.

Every bound is returned as its right-hand side together with a checker that
measures the left-hand side by dense sampling.  Test functions expose exact
values, gradients and pure second partials so that no finite differencing
enters either side.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .grid import Field, gradient, interpolate, second_derivative
from .weights import WeightSpec

TOL = 1e-6


class DomainError(ValueError):
    """A required cube or atom falls outside the evaluation window."""


# ---------------------------------------------------------------------------
# test functions


class SmoothFunction:
    """Interface: ``value``, ``grad`` and ``hess_diag`` at points of shape (N, d)."""

    d: int
    window: float = math.inf  # half-width of the box on which evaluation is meaningful

    def value(self, pts):
        raise NotImplementedError

    def grad(self, pts):
        raise NotImplementedError

    def hess_diag(self, pts):
        raise NotImplementedError

    def scale(self) -> float:
        """Rough magnitude of f and its first two derivatives, for tolerances."""
        return 1.0

    def box(self, lo, hi, m: int):
        """Values, gradients and pure second partials on an m**d tensor grid."""
        axes = [np.linspace(lo[a], hi[a], m) for a in range(self.d)]
        pts = np.stack([c.ravel() for c in np.meshgrid(*axes, indexing="ij")], axis=-1)
        shape = (m,) * self.d
        return (
            axes,
            self.value(pts).reshape(shape),
            self.grad(pts).T.reshape((self.d,) + shape),
            self.hess_diag(pts).T.reshape((self.d,) + shape),
        )

    def __add__(self, other):
        return SumFunction([self, other])


class SumFunction(SmoothFunction):
    def __init__(self, parts):
        self.parts = list(parts)
        self.d = parts[0].d
        self.window = min(p.window for p in parts)

    def value(self, pts):
        return sum(p.value(pts) for p in self.parts)

    def grad(self, pts):
        return sum(p.grad(pts) for p in self.parts)

    def hess_diag(self, pts):
        return sum(p.hess_diag(pts) for p in self.parts)

    def scale(self):
        return sum(p.scale() for p in self.parts)

    def box(self, lo, hi, m):
        outs = [p.box(lo, hi, m) for p in self.parts]
        return outs[0][0], *(sum(o[i] for o in outs) for i in (1, 2, 3))


class Quadratic(SmoothFunction):
    """f(x) = sum_i A_i x_i^2 / 2 + c . x + e."""

    def __init__(self, A, c=None, e: float = 0.0):
        self.A = np.atleast_1d(np.asarray(A, dtype=float))
        self.d = self.A.size
        self.c = np.zeros(self.d) if c is None else np.atleast_1d(np.asarray(c, dtype=float))
        self.e = float(e)

    @classmethod
    def linear(cls, c, e: float = 0.0):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(np.zeros(c.size), c, e)

    def value(self, pts):
        pts = np.atleast_2d(pts)
        return 0.5 * (self.A * pts**2).sum(-1) + pts @ self.c + self.e

    def grad(self, pts):
        return self.A * np.atleast_2d(pts) + self.c

    def hess_diag(self, pts):
        return np.broadcast_to(self.A, np.atleast_2d(pts).shape).copy()

    def scale(self):
        return 1.0 + float(np.abs(self.A).sum() * 10 + np.abs(self.c).sum() * 3 + abs(self.e))


class Poly1D(SmoothFunction):
    """Polynomial of one variable."""

    d = 1

    def __init__(self, coef):
        self.p = np.polynomial.Polynomial(coef)
        self.dp = self.p.deriv()
        self.ddp = self.dp.deriv()

    def value(self, pts):
        return self.p(np.atleast_2d(pts)[:, 0])

    def grad(self, pts):
        return self.dp(np.atleast_2d(pts)[:, 0])[:, None]

    def hess_diag(self, pts):
        return self.ddp(np.atleast_2d(pts)[:, 0])[:, None]

    def scale(self):
        x = np.linspace(-1, 2, 301)
        return 1.0 + float(np.abs(self.p(x)).max() + np.abs(self.dp(x)).max() + np.abs(self.ddp(x)).max())


class TrigPoly(SmoothFunction):
    """f(x) = Re sum_k c_k exp(i w_k . x), w_k = 2 pi k / P, |k|_inf <= J."""

    def __init__(self, coef, period: float, origin=None):
        self.coef = np.asarray(coef, dtype=complex)
        self.d = self.coef.ndim
        self.P = float(period)
        J = (self.coef.shape[0] - 1) // 2
        self.w = 2 * np.pi / self.P * np.arange(-J, J + 1)
        self.origin = np.zeros(self.d) if origin is None else np.asarray(origin, dtype=float)
        self.window = self.P / 2
        self._cache = None

    @classmethod
    def random(cls, rng, d: int, J: int, period: float, amplitude: float = 1.0):
        """Random coefficients with |c_k| ~ |k|^{-(d+2)/2} N(0, 1)."""
        shape = (2 * J + 1,) * d
        kk = np.stack(np.meshgrid(*([np.arange(-J, J + 1)] * d), indexing="ij"))
        knorm = np.sqrt((kk**2).sum(0))
        decay = np.where(knorm > 0, np.maximum(knorm, 1.0) ** (-(d + 2) / 2), 1.0)
        coef = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * decay
        return cls(amplitude * coef / np.sqrt(2), period)

    @classmethod
    def from_field(cls, f: Field):
        """Trigonometric interpolant of a scalar grid field.

        The Nyquist mode is split evenly between +n/2 and -n/2, so the
        interpolant matches the grid values and its first derivatives vanish
        on that mode at grid points, as with the spectral derivatives.
        """
        if f.components != 1:
            raise ValueError("from_field expects a scalar field")
        g = f.grid
        coef = np.fft.fftn(f.values[0]) / g.n**g.d
        J = g.n // 2
        idx = np.arange(-J, J + 1) % g.n
        c = coef[np.ix_(*([idx] * g.d))]
        half = np.ones(2 * J + 1)
        half[[0, -1]] = 0.5
        for a in range(g.d):
            c = c * half.reshape([-1 if b == a else 1 for b in range(g.d)])
        return cls(c, g.L, origin=np.full(g.d, -g.L / 2))

    def value(self, pts):
        return self._eval_points(pts, [0] * self.d)

    def grad(self, pts):
        return np.stack([self._eval_points(pts, [1 if b == a else 0 for b in range(self.d)])
                         for a in range(self.d)], axis=-1)

    def hess_diag(self, pts):
        return np.stack([self._eval_points(pts, [2 if b == a else 0 for b in range(self.d)])
                         for a in range(self.d)], axis=-1)

    def _phases(self, x, a):
        """exp(i w_k (x - origin_a)) for all k, by powers of the unit step."""
        J = (self.w.size - 1) // 2
        z = np.exp(2j * np.pi / self.P * (x - self.origin[a]))[:, None]
        E = np.empty((x.size, self.w.size), dtype=complex)
        E[:, J] = 1.0
        E[:, J + 1:] = np.cumprod(np.repeat(z, J, axis=1), axis=1)
        E[:, :J] = E[:, J + 1:][:, ::-1].conj()
        return E

    def _eval_points(self, pts, orders):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self._cache is None or self._cache[0] is not pts:
            self._cache = (pts, [self._phases(pts[:, a], a) for a in range(self.d)])
        E = [e * (1j * self.w) ** o if o else e for e, o in zip(self._cache[1], orders)]
        letters = "xyz"[: self.d]
        spec = letters + "," + ",".join("p" + c for c in letters) + "->p"
        return np.einsum(spec, self.coef, *E, optimize=self.d > 1).real

    def _eval_box(self, axes, orders):
        c = self.coef
        for a in range(self.d):
            E = self._phases(axes[a], a) * (1j * self.w) ** orders[a]
            # contract the leading mode axis, append the sample axis at the end
            c = np.tensordot(c, E, axes=([0], [1]))
        return c.real

    def box(self, lo, hi, m):
        axes = [np.linspace(lo[a], hi[a], m) for a in range(self.d)]
        val = self._eval_box(axes, [0] * self.d)
        grad = np.stack([self._eval_box(axes, [1 if b == a else 0 for b in range(self.d)])
                         for a in range(self.d)])
        hess = np.stack([self._eval_box(axes, [2 if b == a else 0 for b in range(self.d)])
                         for a in range(self.d)])
        return axes, val, grad, hess

    def scale(self):
        wmax = float(np.abs(self.w).max())
        return float(np.abs(self.coef).sum()) * (1 + wmax) ** 2


class LineRestriction(SmoothFunction):
    """s -> f(x0 + s e_i) as a function of one variable."""

    d = 1

    def __init__(self, fn: SmoothFunction, x0, axis: int):
        self.fn, self.x0, self.axis = fn, np.asarray(x0, dtype=float), axis

    def _pts(self, s):
        s = np.atleast_2d(s)[:, 0]
        pts = np.repeat(self.x0[None, :], s.size, axis=0)
        pts[:, self.axis] += s
        return pts

    def value(self, s):
        return self.fn.value(self._pts(s))

    def grad(self, s):
        return self.fn.grad(self._pts(s))[:, [self.axis]]

    def hess_diag(self, s):
        return self.fn.hess_diag(self._pts(s))[:, [self.axis]]

    def scale(self):
        return self.fn.scale()


def random_test_function(rng, d: int, period: float = 8.0, J: int | None = None,
                         quadratic: bool = True) -> SmoothFunction:
    """Band-limited random field, optionally plus a random quadratic, at a random scale."""
    J = {1: 8, 2: 6, 3: 4}[d] if J is None else J
    amp = 10 ** rng.uniform(-2, 2)
    f = TrigPoly.random(rng, d, J, period, amplitude=amp)
    if quadratic and rng.uniform() < 0.5:
        q = Quadratic(rng.normal(0, 1, d) * amp * 0.3, rng.normal(0, 1, d) * amp * 0.3)
        q.window = f.window
        return SumFunction([f, q])
    return f


# ---------------------------------------------------------------------------
# sampling helpers


def _dense_1d(fn: SmoothFunction, lo: float, hi: float, m: int = 4001):
    s = np.linspace(lo, hi, m)[:, None]
    return s[:, 0], fn.value(s), fn.grad(s)[:, 0], fn.hess_diag(s)[:, 0]


def _refined_max(y: np.ndarray) -> float:
    """Max of samples, refined by a parabola through the discrete maximizer."""
    j = int(np.argmax(y))
    best = float(y[j])
    if 0 < j < y.size - 1:
        curv = y[j - 1] - 2 * y[j] + y[j + 1]
        if curv < 0:
            best = max(best, float(y[j] - (y[j + 1] - y[j - 1]) ** 2 / (8 * curv)))
    return best


def _box_samples(d: int) -> int:
    return {1: 4001, 2: 121, 3: 41}[d]


def cube_grid(x, r: float) -> np.ndarray:
    """The 4**d lattice Q(x, r) intersected with x + (r/3 + (2r/3) Z)^d."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    offs = np.array([-r, -r / 3, r / 3, r])
    return np.array([x + np.array(p) for p in itertools.product(offs, repeat=x.size)])


@dataclass(frozen=True)
class CubeSpec:
    center: tuple
    half_width: float

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.abs(pts - np.asarray(self.center)).max(-1) <= self.half_width * (1 + 1e-12)

    def lattice(self) -> np.ndarray:
        return cube_grid(self.center, self.half_width)


# ---------------------------------------------------------------------------
# results


@dataclass
class TrialResult:
    bound: str
    lhs: float
    rhs: float
    scale: float
    params: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + TOL * self.scale


def write_csv(results, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bound", "lhs", "rhs", "margin", "holds", "params"])
        for r in results:
            params = ";".join(f"{k}={v}" for k, v in sorted(r.params.items()))
            w.writerow([r.bound, repr(r.lhs), repr(r.rhs), repr(r.margin), int(r.holds), params])
    return path


# ---------------------------------------------------------------------------
# Delta^+


def delta_plus(f: Field) -> Field:
    """Pointwise sum over i of the positive part of d_ii f."""
    if f.components != 1:
        raise ValueError("delta_plus expects a scalar field")
    total = sum(np.maximum(second_derivative(f, i, i).values, 0.0) for i in range(1, f.grid.d + 1))
    return f.replace(total)


def delta_plus_points(fn: SmoothFunction, pts) -> np.ndarray:
    return np.maximum(fn.hess_diag(pts), 0.0).sum(-1)


# ---------------------------------------------------------------------------
# one-dimensional inequalities


def bound_sup_via_endpoints(f: SmoothFunction) -> float:
    """max{|f(0)|, |f(1)|} + sup_[0,1] (f')^+."""
    s, _, df, _ = _dense_1d(f, 0.0, 1.0)
    ends = f.value(np.array([[0.0], [1.0]]))
    return float(max(abs(ends[0]), abs(ends[1])) + max(_refined_max(df), 0.0))


def _osc_integers(f: SmoothFunction) -> float:
    v = f.value(np.array([[-1.0], [0.0], [1.0], [2.0]]))
    return float(v.max() - v.min())


def bound_deriv_1d(f: SmoothFunction) -> float:
    """osc(f; {-1, 0, 1, 2}) + sup_[-1,2] (f'')^+ / 2."""
    _, _, _, d2 = _dense_1d(f, -1.0, 2.0, 6001)
    return _osc_integers(f) + 0.5 * max(_refined_max(d2), 0.0)


def bound_osc_1d(f: SmoothFunction) -> float:
    """Same right-hand side as :func:`bound_deriv_1d`, controlling osc(f; [0, 1])."""
    return bound_deriv_1d(f)


def check_sup_via_endpoints(f: SmoothFunction, **params) -> TrialResult:
    _, v, _, _ = _dense_1d(f, 0.0, 1.0)
    return TrialResult("sup_via_endpoints", float(np.abs(v).max()), bound_sup_via_endpoints(f),
                       f.scale(), params)


def check_deriv_1d(f: SmoothFunction, **params) -> TrialResult:
    _, _, df, _ = _dense_1d(f, 0.0, 1.0)
    lhs = max(_refined_max(df), _refined_max(-df))
    return TrialResult("deriv_1d", lhs, bound_deriv_1d(f), f.scale(), params)


def check_osc_1d(f: SmoothFunction, **params) -> TrialResult:
    _, v, _, _ = _dense_1d(f, 0.0, 1.0)
    lhs = _refined_max(v) + _refined_max(-v)
    return TrialResult("osc_1d", lhs, bound_osc_1d(f), f.scale(), params)


# ---------------------------------------------------------------------------
# extrusion, cube oscillation and the local gradient bound


def _segments(fn: SmoothFunction, S: np.ndarray, axis: int, lo: float, hi: float, m: int):
    s = np.linspace(lo, hi, m)
    pts = np.repeat(S[:, None, :], m, axis=1)
    pts[:, :, axis] += s[None, :]
    return pts.reshape(-1, fn.d)


def bound_osc_extrusion(f: SmoothFunction, S, axis: int, anchor=None, m: int = 401) -> float:
    """28 sup_{S+[-1,2]e_i} (d_ii f)^+ + 3 max_l [3 |d_i f(x + l e_i)| + 2 osc(f; S + l e_i)].

    ``axis`` is 1-based; ``anchor`` must be a point of ``S`` (default: its first point).
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    i = axis - 1
    x = S[0] if anchor is None else np.asarray(anchor, dtype=float)
    if not np.any(np.all(np.isclose(S, x), axis=1)):
        raise ValueError("anchor must belong to S")
    seg = _segments(f, S, i, -1.0, 2.0, m)
    curv = max(float(f.hess_diag(seg)[:, i].max()), 0.0)
    terms = []
    for l in (-1, 0, 1, 2):
        shift = np.zeros(f.d)
        shift[i] = l
        g = abs(float(f.grad((x + shift)[None, :])[0, i]))
        v = f.value(S + shift)
        terms.append(3 * g + 2 * float(v.max() - v.min()))
    return 28 * curv + 3 * max(terms)


def check_osc_extrusion(f: SmoothFunction, S, axis: int, anchor=None, **params) -> TrialResult:
    S = np.atleast_2d(np.asarray(S, dtype=float))
    v = f.value(_segments(f, S, axis - 1, 0.0, 1.0, 601))
    return TrialResult("osc_extrusion", float(v.max() - v.min()),
                       bound_osc_extrusion(f, S, axis, anchor), f.scale(), params)


def _as_function(f) -> SmoothFunction:
    if isinstance(f, Field):
        return TrigPoly.from_field(f)
    return f


def _check_window(fn: SmoothFunction, lo, hi):
    if max(np.abs(lo).max(), np.abs(hi).max()) > fn.window:
        raise DomainError(f"box [{lo}, {hi}] leaves the evaluation window of half-width {fn.window}")


def bound_osc_cube(f, origin=None) -> float:
    """28 d (sup_{[-1,2]^d} Delta^+ f + max over {-1,0,1,2}^d of |grad f|), cube shifted by ``origin``."""
    fn = _as_function(f)
    d = fn.d
    o = np.zeros(d) if origin is None else np.asarray(origin, dtype=float)
    _check_window(fn, o - 1, o + 2)
    _, _, _, hess = fn.box(o - 1, o + 2, _box_samples(d) if d > 1 else 3001)
    dplus = float(np.maximum(hess, 0).sum(0).max())
    ints = np.array(list(itertools.product((-1.0, 0.0, 1.0, 2.0), repeat=d))) + o
    gmax = float(np.linalg.norm(fn.grad(ints), axis=-1).max())
    return 28 * d * (dplus + gmax)


def check_osc_cube(f, origin=None, **params) -> TrialResult:
    fn = _as_function(f)
    o = np.zeros(fn.d) if origin is None else np.asarray(origin, dtype=float)
    _, v, _, _ = fn.box(o, o + 1, _box_samples(fn.d))
    return TrialResult("osc_cube", float(v.max() - v.min()), bound_osc_cube(fn, o), fn.scale(), params)


def bound_grad_local(f, x, r: float) -> float:
    """84 d (6 r sup_{Q(x,9r)} Delta^+ f + max over the 4^d lattice of Q(x, 9r) of |grad f|)."""
    fn = _as_function(f)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not r > 0:
        raise ValueError("r must be positive")
    _check_window(fn, x - 9 * r, x + 9 * r)
    _, _, _, hess = fn.box(x - 9 * r, x + 9 * r, _box_samples(fn.d))
    dplus = float(np.maximum(hess, 0).sum(0).max())
    gmax = float(np.linalg.norm(fn.grad(cube_grid(x, 9 * r)), axis=-1).max())
    return 84 * fn.d * (6 * r * dplus + gmax)


def check_grad_local(f, x, r: float, **params) -> TrialResult:
    fn = _as_function(f)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _, _, grad, _ = fn.box(x - r, x + r, _box_samples(fn.d))
    lhs = float(np.sqrt((grad**2).sum(0)).max())
    return TrialResult("grad_local", lhs, bound_grad_local(fn, x, r), fn.scale(), params)


# ---------------------------------------------------------------------------
# the covering measure and the global weighted bound


@dataclass(eq=False)
class NuMeasure:
    """Atoms of the covering measure built from annuli |x| in [k^a, (k+1)^a]."""

    m: float
    alpha: float
    d: int
    k_max: int
    points: np.ndarray
    masses: np.ndarray
    cubes_per_annulus: list
    centers: list
    tail_estimate: float

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def ell(self) -> float:
        return self.m - 1 + 1 / self.alpha

    def radius(self) -> float:
        """Largest sup-norm reach of any enlarged cube Q(x_kj, 9 k^(alpha-1))."""
        reach = 0.0
        for k, cs in enumerate(self.centers):
            r = 9.0 if k == 0 else 9 * k ** (self.alpha - 1)
            if len(cs):
                reach = max(reach, float(np.abs(cs).max()) + r)
        return reach

    def l2_norm(self, vectors) -> float:
        """sqrt(sum over atoms of mass * |v|^2) for values ``vectors`` at the atoms."""
        v = np.asarray(vectors, dtype=float).reshape(len(self.masses), -1)
        return float(np.sqrt((self.masses * (v**2).sum(-1)).sum()))


def annulus_cover(k: int, alpha: float, d: int) -> tuple[np.ndarray, float]:
    """Centres of the axis-aligned cubes of half-width k^(alpha-1) meeting annulus k."""
    if k == 0:
        return np.zeros((1, d)), 1.0
    r = k ** (alpha - 1)
    inner, outer = k**alpha, (k + 1) ** alpha
    jmax = int(math.ceil((outer + r) / (2 * r)))
    js = np.arange(-jmax, jmax + 1) * 2 * r
    c = np.stack([g.ravel() for g in np.meshgrid(*([js] * d), indexing="ij")], axis=-1)
    near = np.linalg.norm(np.maximum(np.abs(c) - r, 0.0), axis=-1)
    far = np.linalg.norm(np.abs(c) + r, axis=-1)
    keep = (near <= outer) & (far >= inner)
    return c[keep], r


def build_nu(m: float, alpha: float, d: int, k_max: int) -> NuMeasure:
    if not alpha > 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if not m > d / (2 * alpha):
        raise ValueError(f"need m > d/(2 alpha) = {d / (2 * alpha):g}, got m={m}")
    pm = WeightSpec.power(m, 1.0)
    pts, masses, counts, centers = [], [], [], []
    for k in range(k_max + 1):
        cs, r = annulus_cover(k, alpha, d)
        mass = 1.0 / float(pm(np.array([k**alpha] + [0.0] * (d - 1)))) ** 2
        counts.append(len(cs))
        centers.append(cs)
        for c in cs:
            lat = cube_grid(c, 9 * r)
            pts.append(lat)
            masses.append(np.full(len(lat), mass))
    expo = -2 * alpha * m + d - 1
    # fitted covering constant: mass of annulus k over <k>^expo
    ks = np.arange(1, k_max + 1)
    per_k = np.array([counts[k] * 4**d / float(pm(np.array([k**alpha] + [0.0] * (d - 1)))) ** 2
                      for k in ks]) if k_max >= 1 else np.zeros(0)
    C = float((per_k / (1 + ks**2.0) ** (expo / 2)).max()) if k_max >= 1 else 0.0
    tail = C * float(special.zeta(-expo, k_max + 1))
    return NuMeasure(m, alpha, d, k_max, np.concatenate(pts), np.concatenate(masses),
                     counts, centers, tail)


@dataclass
class GlobalBound:
    lhs: float
    rhs: float
    sup_delta_plus: float
    nu_norm: float
    C: float


def bound_grad_global(f: Field, m: float, K: float, nu: NuMeasure, C: float) -> GlobalBound:
    """lhs = ||grad f||_{C_p(m,K)}, rhs = C (||Delta^+ f||_{C_p(ell,K)} + ||grad f||_{L2(nu)}).

    Suprema run over the grid points inside the region covered by the annuli;
    the covering cubes must fit inside the periodic box.
    """
    g = f.grid
    if nu.d != g.d:
        raise ValueError("measure and field dimensions differ")
    if nu.radius() >= g.L / 2:
        raise DomainError(
            f"covering cubes reach {nu.radius():.3g}, outside the box half-width {g.L / 2:g}"
        )
    X = np.stack(g.coords(), axis=-1)
    covered = np.linalg.norm(X, axis=-1) <= (nu.k_max + 1) ** nu.alpha
    pmK = WeightSpec.power(m, K)(X)
    plK = WeightSpec.power(nu.ell, K)(X)
    grad = gradient(f).values
    gnorm = np.sqrt((grad**2).sum(0))
    lhs = float((gnorm / pmK)[covered].max())
    dplus = delta_plus(f).values[0]
    sup_dp = float((dplus / plK)[covered].max())
    at_atoms = interpolate(Field(g, grad), nu.points).T
    nu_norm = nu.l2_norm(at_atoms)
    return GlobalBound(lhs, C * (sup_dp + nu_norm), sup_dp, nu_norm, C)


def random_field(rng, grid, J: int, amplitude: float | None = None) -> Field:
    """Periodic band-limited scalar field on ``grid`` with the test-function spectral decay."""
    k = np.fft.fftfreq(grid.n, 1.0 / grid.n)
    kk = np.stack(np.meshgrid(*([k] * grid.d), indexing="ij"))
    kn = np.sqrt((kk**2).sum(0))
    mask = (np.abs(kk).max(0) <= J) & (kn > 0)
    spec = np.zeros(grid.shape, dtype=complex)
    spec[mask] = (rng.standard_normal(mask.sum()) + 1j * rng.standard_normal(mask.sum())) \
        * kn[mask] ** (-(grid.d + 2) / 2)
    v = np.fft.ifftn(spec).real
    amp = 10 ** rng.uniform(-2, 2) if amplitude is None else amplitude
    return Field(grid, v / np.abs(v).max() * amp)


@dataclass
class Calibration:
    ratios: np.ndarray
    calibrated: float
    used: float


def calibrate_global_constant(fields, m: float, K: float, nu: NuMeasure,
                              safety: float = 2.0) -> Calibration:
    """Largest lhs/rhs at C = 1 over ``fields``; the constant used is at least 84 d."""
    ratios = []
    for f in fields:
        b = bound_grad_global(f, m, K, nu, 1.0)
        if b.rhs > 0:
            ratios.append(b.lhs / b.rhs)
    ratios = np.asarray(ratios)
    cal = float(ratios.max()) if ratios.size else 0.0
    return Calibration(ratios, cal, max(84.0 * nu.d, safety * cal))


# ---------------------------------------------------------------------------
# randomized suite


BOUNDS = ("sup_via_endpoints", "deriv_1d", "osc_1d", "osc_extrusion", "osc_cube", "grad_local")


def random_poly1d(rng, degree: int = 8) -> Poly1D:
    deg = int(rng.integers(1, degree + 1))
    return Poly1D(rng.normal(0, 1, deg + 1) * 10 ** rng.uniform(-2, 2))


def run_trial(bound: str, rng) -> TrialResult:
    """One randomized instance of ``bound``."""
    if bound in ("sup_via_endpoints", "deriv_1d", "osc_1d"):
        if rng.uniform() < 0.5:
            fn, kind = random_poly1d(rng), "poly"
        else:
            fn, kind = random_test_function(rng, 1), "trig"
        check = {"sup_via_endpoints": check_sup_via_endpoints,
                 "deriv_1d": check_deriv_1d, "osc_1d": check_osc_1d}[bound]
        return check(fn, kind=kind)
    d = int(rng.integers(1, 4))
    if bound == "osc_extrusion":
        fn = random_test_function(rng, d)
        S = rng.uniform(-1.0, 1.0, (int(rng.integers(1, 9)), d))
        axis = int(rng.integers(1, d + 1))
        return check_osc_extrusion(fn, S, axis, S[int(rng.integers(len(S)))], d=d, points=len(S), direction=axis)
    if bound == "osc_cube":
        return check_osc_cube(random_test_function(rng, d), d=d)
    if bound == "grad_local":
        fn = random_test_function(rng, d, period=16.0)
        r = float(rng.uniform(0.05, 0.4))
        x = rng.uniform(-3.0, 3.0, d)
        return check_grad_local(fn, x, r, d=d, radius=round(r, 6))
    raise ValueError(f"unknown bound {bound!r}")


def run_suite(trials: int, rng=None, bounds=BOUNDS) -> list[TrialResult]:
    rng = np.random.default_rng(0) if rng is None else rng
    return [run_trial(b, rng) for b in bounds for _ in range(trials)]
