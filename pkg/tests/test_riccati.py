import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from blab.riccati import (
    BlowUpError, RiccatiBoundInput, blow_up_time, growth_bound, integrate, random_instances,
    riccati_linear_bound, verify_comparison,
)


class TestLinearBound:
    @pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 5.0])
    def test_flat_at_2b(self, t):
        inp = RiccatiBoundInput(a=2.0, b=1.0, h0=2.0, f=np.zeros(4), T=5.0)
        assert riccati_linear_bound(inp, t) == 2.0

    def test_infinite_initial_value(self):
        inp = RiccatiBoundInput(a=1.0, b=1.0, h0=math.inf, f=np.zeros(1), T=1.0)
        assert riccati_linear_bound(inp, 0.5) == pytest.approx(4.0)

    def test_infinite_initial_value_at_zero(self):
        inp = RiccatiBoundInput(a=1.0, b=1.0, h0=math.inf, f=np.zeros(1), T=1.0)
        assert riccati_linear_bound(inp, 0.0) == math.inf

    def test_exponential_factor(self):
        base = RiccatiBoundInput(a=1.5, b=0.7, h0=10.0, f=np.zeros(4), T=2.0)
        withf = RiccatiBoundInput(a=1.5, b=0.7, h0=10.0, f=np.full(4, math.log(2) / 2), T=2.0)
        assert riccati_linear_bound(withf, 2.0) == pytest.approx(2 * riccati_linear_bound(base, 2.0), rel=1e-14)

    def test_l1_exact_over_partial_cells(self):
        inp = RiccatiBoundInput(a=1.0, b=1.0, h0=1.0, f=np.array([1.0, -2.0, 3.0]), T=3.0)
        assert inp.f_l1(1.5) == pytest.approx(1.0 + 1.0)
        assert inp.f_l1(3.0) == pytest.approx(6.0)

    @pytest.mark.parametrize("kw", [dict(a=0.0), dict(b=-1.0), dict(T=0.0)])
    def test_invalid(self, kw):
        args = dict(a=1.0, b=1.0, h0=1.0, f=np.zeros(1), T=1.0) | kw
        with pytest.raises(ValueError):
            RiccatiBoundInput(**args)

    def test_non_finite_f(self):
        with pytest.raises(ValueError):
            RiccatiBoundInput(1.0, 1.0, 1.0, np.array([1.0, np.inf]))

    def test_time_outside(self):
        with pytest.raises(ValueError):
            riccati_linear_bound(RiccatiBoundInput(1.0, 1.0, 1.0), 2.0)

    @settings(max_examples=60, deadline=None)
    @given(a=st.floats(0.1, 10), da=st.floats(0, 5), b=st.floats(0.1, 5), db=st.floats(0, 5),
           h0=st.floats(0.1, 1e3), dh=st.floats(0, 1e3), s=st.floats(0, 3), ds=st.floats(0, 3),
           t=st.floats(0, 1))
    def test_monotonicity(self, a, da, b, db, h0, dh, s, ds, t):
        def B(a, b, h0, s):
            return riccati_linear_bound(RiccatiBoundInput(a, b, h0, np.array([s]), 1.0), t)

        ref = B(a, b, h0, s)
        assert B(a + da, b, h0, s) <= ref * (1 + 1e-14)
        assert B(a, b + db, h0, s) >= ref * (1 - 1e-14)
        assert B(a, b, h0 + dh, s) >= ref * (1 - 1e-14)
        assert B(a, b, h0, s + ds) >= ref * (1 - 1e-14)


class TestGrowthBound:
    def test_arithmetic(self):
        assert growth_bound(2.0, 16.0, 0.5, 0.0, 1.0) == pytest.approx(4.0)

    @pytest.mark.parametrize("u0, psi", [(0.5, 0.0), (3.0, 0.2), (1.0, 1.0)])
    def test_at_time_zero(self, u0, psi):
        assert growth_bound(u0, 9.0, 0.3, psi, 0.0) == pytest.approx(max(u0, 1.0) + psi)

    def test_small_time_limit(self):
        assert growth_bound(2.5, 4.0, 0.5, 0.0, 1e-12) == pytest.approx(2.5, rel=1e-10)

    def test_blow_up(self):
        T = blow_up_time(2.0, 16.0, 0.5)
        assert T == pytest.approx(2.0)
        with pytest.raises(BlowUpError):
            growth_bound(2.0, 16.0, 0.5, 0.0, T)
        with pytest.raises(BlowUpError):
            growth_bound(2.0, 16.0, 0.5, 0.0, 3.0)

    def test_monotone_towards_blow_up(self):
        T = blow_up_time(1.5, 4.0, 0.25)
        ts = T * (1 - np.logspace(-1, -8, 30))
        vals = [growth_bound(1.5, 4.0, 0.25, 0.1, t) for t in ts]
        assert np.all(np.diff(vals) > 0)
        assert vals[-1] > 1e7


class TestComparison:
    def test_exact_solution_below_bound(self):
        inp = RiccatiBoundInput(a=1.0, b=0.5, h0=40.0, f=np.zeros(8), T=2.0)
        t, h = integrate(inp)
        exact = 40.0 / (1 + 40.0 * t)
        assert np.abs(h - exact).max() < 1e-6
        assert all(e <= riccati_linear_bound(inp, s) for s, e in zip(t, exact))

    def test_large_constant_f(self):
        inp = RiccatiBoundInput(a=0.5, b=1.0, h0=3.0, f=np.full(16, 20.0), T=0.2)
        rep = verify_comparison(inp, trials=200, rng=np.random.default_rng(1))
        assert rep.passed and rep.checks > 0
        t, h = integrate(inp)
        assert h[-1] > h[0]  # the linear term dominates for small t

    def test_start_below_threshold_stays_in_envelope(self):
        rng = np.random.default_rng(2)
        a, b, _, f, T = random_instances(rng, 500)
        h0 = rng.uniform(0.0, 1.0, 500) * b
        rep = verify_comparison(instances=(a, b, h0, f, T))
        assert rep.passed
        env = 2 * b * np.exp(np.abs(f).sum(1) * T / f.shape[1])
        from blab import kernels

        for mode in (0, 1):
            sol = kernels.riccati_integrate(a, b, h0, f, T, 8, mode, 0.02)
            assert np.all(sol.max(1) <= env * (1 + 1e-6))

    def test_random_instances(self):
        rep = verify_comparison(trials=2000, rng=np.random.default_rng(3))
        assert rep.passed, rep.violations[:3]
        assert rep.trials == 2000 and rep.checks == 3 * 2000 * 257

    def test_trials_must_be_positive(self):
        with pytest.raises(ValueError):
            verify_comparison(trials=0)

    @settings(max_examples=30, deadline=None)
    @given(a=st.floats(0.1, 10), b=st.floats(0.1, 5), h0=st.floats(0.0, 1e3),
           fs=st.lists(st.floats(-10, 10), min_size=1, max_size=6), T=st.floats(0.05, 3))
    def test_property(self, a, b, h0, fs, T):
        assume(h0 >= 0)
        rep = verify_comparison(instances=([a], [b], [h0], [fs], [T]))
        assert rep.passed, rep.violations
