"""Pure numpy implementations of the hot kernels (fallback backend)."""
from __future__ import annotations

import numpy as np


def holder_shell_max(values, w, offsets, d, n, h, alpha, wrap):
    """Max of |f(x) - f(x + o h)| / (w(x) |o h|^alpha) over offsets ``o``.

    ``values`` is ``(components, n**d)`` in row-major order and ``w`` is ``(n**d,)``.
    """
    shape = (values.shape[0],) + (n,) * d
    f = values.reshape(shape)
    wg = w.reshape((n,) * d)
    idx = np.indices((n,) * d)
    best = 0.0
    for off in offsets:
        shifted = f
        valid = np.ones((n,) * d, dtype=bool)
        for a in range(d):
            o = int(off[a])
            if o:
                shifted = np.roll(shifted, -o, axis=a + 1)
                if not wrap:
                    j = idx[a] + o
                    valid &= (j >= 0) & (j < n)
        diff = np.sqrt(((shifted - f) ** 2).sum(axis=0))
        dist = h * np.sqrt(float(np.dot(off, off)))
        ratio = diff / (wg * dist**alpha)
        if valid.any():
            best = max(best, float(ratio[valid].max()))
    return best


def _rhs(h, a, b, f, mode):
    base = -a * h * h + f * h
    if mode == 0:
        return base
    below = h < b
    if mode == 1:
        return np.where(below, np.minimum(base, 0.0), base)
    return np.where(below, np.abs(base) + 1.0, base)


def riccati_integrate(a, b, h0, fvals, T, sub, mode, courant):
    """Adaptive RK4 for h' = -a h^2 + f h with piecewise-constant f.

    ``fvals`` is ``(N, M)``: instance ``i`` has ``f = fvals[i, c]`` on the
    ``c``-th of ``M`` equal cells of ``[0, T[i]]``.  Returns ``(N, M*sub + 1)``
    values of ``h`` at equally spaced output times (``sub`` per cell).
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    h = np.asarray(h0, float).copy()
    fvals = np.asarray(fvals, float)
    T = np.asarray(T, float)
    N, M = fvals.shape
    nout = M * sub
    out = np.empty((N, nout + 1))
    out[:, 0] = h
    rows = np.arange(N)
    for j in range(nout):
        f = fvals[rows, j // sub]
        remaining = T / nout
        while True:
            active = remaining > 0
            if not active.any():
                break
            dt = np.minimum(remaining, courant / (a * np.abs(h) + np.abs(f) + 1.0))
            dt = np.where(active, dt, 0.0)
            k1 = _rhs(h, a, b, f, mode)
            k2 = _rhs(h + 0.5 * dt * k1, a, b, f, mode)
            k3 = _rhs(h + 0.5 * dt * k2, a, b, f, mode)
            k4 = _rhs(h + dt * k3, a, b, f, mode)
            h = h + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            remaining = np.where(active, remaining - dt, 0.0)
            # guard against round-off leaving a sliver
            remaining[remaining < 1e-15 * T] = 0.0
        out[:, j + 1] = h
    return out
