import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ive

from blab.grid import Field, Grid, field_from_function, gradient, verify_gradient
from blab.noise import (
    NoiseModel, discrete_variance_constant, gradient_spectrum, increment_spectrum,
    periodized_kernel, sample_increment, variance_constant,
)
from blab.solvers import (
    AUDIT, BurgersEnsemble, DivergenceError, SeparableColeHopf, SolverConfig, SolverError,
    advance_psi, cole_hopf, kpz_ito_constant, step_psi, step_she, step_u_direct, step_v,
    weighted_product_identity_check,
)

QUIET = NoiseModel(amplitude=0.0)


def smooth_potential(grid, rng, modes=3, scale=0.3):
    x = grid.coords()
    f = np.zeros(grid.shape)
    for _ in range(modes):
        k = rng.integers(-2, 3, grid.d)
        phase = rng.uniform(0, 2 * np.pi)
        f += scale * rng.normal() * np.cos(sum(2 * np.pi * ki * xi / grid.L for ki, xi in zip(k, x)) + phase)
    return Field(grid, f)


def burgers_1d_exact(x, t, eps, k):
    """u = -d/dx log phi with phi = G_t * exp((eps/k) cos(k x)), by the modified Bessel series."""
    z = eps / k
    m = np.arange(1, 60)
    coef = ive(m, z) / ive(0, z)
    decay = np.exp(-0.5 * (m * k) ** 2 * t)
    phi = 1 + 2 * (coef[:, None] * decay[:, None] * np.cos(np.outer(m, k * x))).sum(0)
    dphi = -2 * (coef[:, None] * decay[:, None] * m[:, None] * k * np.sin(np.outer(m, k * x))).sum(0)
    return -dphi / phi


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(dt=0.0), dict(dt=-1e-3), dict(t_end=-1.0),
                                    dict(scheme="rk4"), dict(t_end=0.0105)])
    def test_invalid(self, kw):
        args = dict(grid=Grid(1, 8.0, 16), dt=1e-3) | kw
        with pytest.raises(SolverError):
            SolverConfig(**args)

    def test_steps(self):
        assert SolverConfig(Grid(1, 8.0, 16), 2e-3, 1.0).steps == 500

    def test_noise_width_checked(self):
        cfg = SolverConfig(Grid(1, 2.0, 16), 1e-3, noise=NoiseModel(width=0.5))
        with pytest.raises(ValueError):
            BurgersEnsemble(cfg)


class TestPsi:
    def test_single_mode_heat_decay(self):
        g = Grid(2, 8.0, 32)
        k = 2 * np.pi * 3 / 8
        psi = gradient(field_from_function(g, lambda x, y: np.sin(k * x) * np.cos(k * y)))
        inc = sample_increment(QUIET, g, 0.01, 0)
        for _ in range(50):
            psi = step_psi(psi, inc)
        exact = gradient(field_from_function(g, lambda x, y: np.sin(k * x) * np.cos(k * y))).values
        assert np.abs(psi.values - math.exp(-k * k * 0.5) * exact).max() < 1e-12

    def test_zero_stays_zero(self):
        g = Grid(2, 8.0, 16)
        ens = BurgersEnsemble(SolverConfig(g, 1e-2, noise=QUIET), realizations=range(2))
        ens.run(20)
        assert not ens.psi_values().any() and not ens.v_values().any()

    def test_stationary_variance_mode_sum(self):
        # oracle: Var psi_i(x) = sum_k k_i^2 / |k|^2 * s(k) with s the per-mode rate of dV,
        # from a full complex FFT of the periodized kernel
        g = Grid(2, 4.0, 16)
        model = NoiseModel(width=0.25)
        ker = periodized_kernel(model, g)
        Kf = g.cell_volume * np.fft.fftn(ker)
        N = g.n**2
        rate = np.abs(Kf) ** 2 / (g.cell_volume * N)
        k1 = 2 * np.pi * np.fft.fftfreq(g.n, g.h)
        k1_odd = np.where(np.arange(g.n) == g.n // 2, 0.0, k1)
        KX, KY = np.meshgrid(k1, k1, indexing="ij")
        OX, _ = np.meshgrid(k1_odd, k1_odd, indexing="ij")
        k2 = KX**2 + KY**2
        with np.errstate(divide="ignore", invalid="ignore"):
            oracle = float(np.where(k2 > 0, OX**2 / k2 * rate, 0.0).sum())
        assert 0.1 * discrete_variance_constant(model, g) < oracle < discrete_variance_constant(model, g)

        R, dt, steps = 400, 0.5, 40
        psi = np.zeros((R, 2) + g.spectral_shape, dtype=complex)
        for s in range(steps):
            dV = increment_spectrum(model, g, dt, s, range(R))
            psi = advance_psi(g, psi, gradient_spectrum(g, dV), dt)
        vals = g.ifft(psi)[:, 0]
        per = (vals**2).mean(axis=(1, 2))
        est, se = per.mean(), per.std(ddof=1) / math.sqrt(R)
        assert abs(est - oracle) < 3 * se + 1e-12 * oracle
        assert se < 0.05 * oracle


class TestV:
    def test_fixed_point(self):
        g = Grid(2, 8.0, 16)
        cfg = SolverConfig(g, 1e-2, noise=QUIET)
        v = step_v(Field(g, np.zeros((2,) + g.shape), is_gradient=True), None, cfg)
        assert not v.values.any()

    @pytest.mark.parametrize("scheme, tol", [("exponential", 1e-6), ("semi-implicit", 1e-6)])
    def test_cole_hopf_closed_form(self, scheme, tol):
        g = Grid(1, 8.0, 256)
        eps, k = 0.1, 2 * np.pi / 8
        cfg = SolverConfig(g, 1e-3, 0.5, QUIET, scheme=scheme)
        ens = BurgersEnsemble(cfg, v0=Field(g, eps * np.sin(k * g.x1d)[None], is_gradient=True))
        ens.run(cfg.steps)
        exact = burgers_1d_exact(g.x1d, 0.5, eps, k)
        assert np.abs(ens.v_values()[0, 0] - exact).max() <= tol

    def test_second_order_in_time(self):
        g = Grid(1, 8.0, 64)
        eps, k = 1.0, 2 * np.pi / 8
        exact = burgers_1d_exact(g.x1d, 0.5, eps, k)
        errs = []
        for dt in (0.02, 0.01):
            cfg = SolverConfig(g, dt, 0.5, QUIET)
            ens = BurgersEnsemble(cfg, v0=Field(g, eps * np.sin(k * g.x1d)[None], is_gradient=True))
            ens.run(cfg.steps)
            errs.append(np.abs(ens.v_values()[0, 0] - exact).max())
        assert errs[0] / errs[1] > 3.0

    def test_gradient_preserved(self):
        rng = np.random.default_rng(0)
        g = Grid(2, 8.0, 32)
        cfg = SolverConfig(g, 1e-2, noise=NoiseModel(seed=5))
        ens = BurgersEnsemble(cfg, realizations=range(2), v0=gradient(smooth_potential(g, rng)))
        for _ in range(10):
            ens.step()
            for r in range(2):
                st_ = ens.state(r)
                assert verify_gradient(st_.u, 1e-6) and verify_gradient(st_.v, 1e-6)
                assert np.abs(st_.u.values - st_.v.values - st_.psi.values).max() <= 1e-12

    def test_mean_conserved(self):
        rng = np.random.default_rng(1)
        g = Grid(2, 8.0, 32)
        base = gradient(smooth_potential(g, rng, scale=1.0))
        v0 = base.replace(base.values + np.array([0.3, -0.2])[:, None, None])
        cfg = SolverConfig(g, 1e-2, noise=QUIET)
        ens = BurgersEnsemble(cfg, v0=v0)
        prev = ens.v_values()[0].mean(axis=(1, 2))
        for _ in range(20):
            ens.step()
            now = ens.v_values()[0].mean(axis=(1, 2))
            assert np.abs(now - prev).max() <= 1e-10
            prev = now

    def test_cfl_exhaustion(self):
        g = Grid(1, 8.0, 32)
        cfg = SolverConfig(g, 1.0, noise=QUIET, max_halvings=2)
        v0 = Field(g, 50 * np.sin(2 * np.pi * g.x1d / 8)[None], is_gradient=True)
        with pytest.raises(DivergenceError) as err:
            step_v(v0, None, cfg)
        assert "halvings" in str(err.value)

    def test_cfl_halving_succeeds(self):
        g = Grid(1, 8.0, 32)
        cfg = SolverConfig(g, 0.2, noise=QUIET)
        ens = BurgersEnsemble(cfg, v0=Field(g, 2 * np.sin(2 * np.pi * g.x1d / 8)[None], is_gradient=True))
        ens.step()
        assert ens.substeps > 1 and np.isfinite(ens.v_values()).all()


class TestDirect:
    def test_quiet_matches_step_v(self):
        rng = np.random.default_rng(2)
        g = Grid(2, 8.0, 16)
        cfg = SolverConfig(g, 1e-2, noise=QUIET)
        u0 = gradient(smooth_potential(g, rng))
        a = step_u_direct(u0, sample_increment(QUIET, g, 1e-2, 0), cfg)
        b = step_v(u0, None, cfg)
        assert np.array_equal(a.values, b.values)

    def test_one_step_from_zero(self):
        g = Grid(2, 8.0, 32)
        model = NoiseModel(seed=3)
        dt = 1e-3
        inc = sample_increment(model, g, dt, 0)
        cfg = SolverConfig(g, dt, noise=model)
        u = step_u_direct(Field(g, np.zeros((2,) + g.shape), is_gradient=True), inc, cfg)
        assert np.abs(u.values - inc.dgradV.values).max() < 1e-15
        ens = BurgersEnsemble(cfg, direct=True)
        ens.step()
        scale = np.abs(inc.dgradV.values).max()
        assert np.abs(ens.u_values()[0] - inc.dgradV.values).max() <= 0.05 * scale

    def test_splitting_first_order(self):
        rng = np.random.default_rng(4)
        g = Grid(2, 8.0, 32)
        model = NoiseModel(seed=7)
        v0 = gradient(smooth_potential(g, rng))
        gaps = []
        fine = 2.5e-3
        for stride in (8, 4):
            cfg = SolverConfig(g, fine * stride, noise=model)
            ens = BurgersEnsemble(cfg, v0=v0, direct=True, stride=stride)
            ens.run(int(round(0.4 / cfg.dt)))
            gaps.append(np.abs(ens.u_values() - ens.u_direct_values()).max())
        assert gaps[1] < gaps[0] / 1.5
        assert gaps[0] < 0.1


class TestSHE:
    def test_quiet_flat(self):
        g = Grid(2, 8.0, 16)
        phi = Field(g, np.ones(g.shape))
        out = step_she(phi, sample_increment(QUIET, g, 1e-2, 0), QUIET)
        assert np.abs(out.values - 1).max() < 1e-14

    def test_mean_and_jensen(self):
        g = Grid(1, 8.0, 32)
        model = NoiseModel(seed=11)
        cfg = SolverConfig(g, 1e-2, noise=model)
        ens = BurgersEnsemble(cfg, realizations=range(1000), she=True)
        ens.run(50)
        phi = ens.phi[:, g.n // 2]
        mean, se = phi.mean(), phi.std(ddof=1) / math.sqrt(phi.size)
        assert abs(mean - 1) <= 3 * se
        h = -np.log(phi)
        assert h.mean() >= 0

    def test_rejects_non_positive(self):
        g = Grid(1, 8.0, 16)
        phi = Field(g, np.r_[np.ones(15), 0.0])
        with pytest.raises(SolverError):
            step_she(phi, sample_increment(QUIET, g, 1e-2, 0), QUIET)


class TestColeHopf:
    def test_flat(self):
        g = Grid(2, 8.0, 16)
        h, u = cole_hopf(Field(g, np.ones(g.shape)))
        assert not h.values.any() and not u.values.any()

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_exp_minus_g(self, seed):
        g = Grid(2, 8.0, 16)
        pot = smooth_potential(g, np.random.default_rng(seed))
        h, u = cole_hopf(pot.replace(np.exp(-pot.values)))
        assert np.abs(h.values - pot.values).max() < 1e-13
        assert np.abs(u.values - gradient(pot).values).max() < 1e-11

    def test_rejects(self):
        g = Grid(1, 8.0, 16)
        with pytest.raises(SolverError):
            cole_hopf(Field(g, -np.ones(16)))
        with pytest.raises(SolverError):
            g2 = Grid(2, 8.0, 8)
            cole_hopf(Field(g2, np.ones((2, 8, 8)), is_gradient=True))

    def test_ito_constant(self):
        assert kpz_ito_constant(NoiseModel(), 8.0, 2) == variance_constant(NoiseModel(), 8.0, 2)

    def test_height_drift(self):
        # E h(T) = T c / 2 - (1/2) int_0^T E|u|^2 dt for flat data
        g = Grid(1, 8.0, 64)
        model = NoiseModel(seed=13)
        dt, steps, R = 5e-3, 400, 200
        ens = BurgersEnsemble(SolverConfig(g, dt, noise=model), realizations=range(R), she=True)
        c = discrete_variance_constant(model, g)
        integral = np.zeros(R)
        for _ in range(steps):
            u0 = ens.grid.ifft(ens.v_hat + ens.psi_hat)[:, 0, g.n // 2] ** 2
            ens.step()
            u1 = ens.grid.ifft(ens.v_hat + ens.psi_hat)[:, 0, g.n // 2] ** 2
            integral += 0.5 * dt * (u0 + u1)
        T = steps * dt
        lhs = -np.log(ens.phi[:, g.n // 2])
        resid = lhs - (0.5 * T * c - 0.5 * integral)
        assert abs(resid.mean()) <= 3 * resid.std(ddof=1) / math.sqrt(R) + 0.05 * T * c


class TestProductIdentity:
    def setup_fields(self, seed, d=2, n=32):
        rng = np.random.default_rng(seed)
        g = Grid(d, 8.0, n)
        v = gradient(smooth_potential(g, rng))
        psi = gradient(smooth_potential(g, rng))
        return g, v, psi, rng

    def test_unit_weight(self):
        g, v, psi, _ = self.setup_fields(0)
        a = Field(g, np.ones(g.shape))
        for i in (1, 2):
            assert weighted_product_identity_check(a, v, psi, i, 1e-5) <= 1e-4

    def test_zero_fields(self):
        g = Grid(2, 8.0, 16)
        zero = Field(g, np.zeros((2,) + g.shape), is_gradient=True)
        a = Field(g, 1 + 0.3 * np.cos(2 * np.pi * g.coords()[0] / 8))
        assert weighted_product_identity_check(a, zero, zero, 1, 1e-3) == 0.0

    def test_first_order_convergence(self):
        g, v, psi, rng = self.setup_fields(1)
        a = Field(g, np.exp(smooth_potential(g, rng, scale=0.2).values))
        res = [weighted_product_identity_check(a, v, psi, 2, dt) for dt in (4e-3, 2e-3, 1e-3)]
        assert res[0] / res[1] > 1.7 and res[1] / res[2] > 1.7

    def test_bad_component(self):
        g, v, psi, _ = self.setup_fields(2, n=16)
        with pytest.raises(SolverError):
            weighted_product_identity_check(Field(g, np.ones(g.shape)), v, psi, 3, 1e-3)


class TestEnsemble:
    def test_probe_matches_grid(self):
        g = Grid(2, 8.0, 16)
        ens = BurgersEnsemble(SolverConfig(g, 1e-2, noise=NoiseModel(seed=1)), realizations=range(3))
        ens.run(5)
        pts = [(0, 0), (3, 7), (15, 8)]
        vals = ens.u_values()
        got = ens.u_at(pts)
        for j, p in enumerate(pts):
            assert np.abs(got[:, j] - vals[(slice(None), slice(None)) + p]).max() < 1e-13

    def test_realizations_independent_of_batching(self):
        g = Grid(1, 8.0, 32)
        cfg = SolverConfig(g, 1e-2, noise=NoiseModel(seed=2))
        a = BurgersEnsemble(cfg, realizations=[0, 1, 2]).run(10)
        b = BurgersEnsemble(cfg, realizations=[2]).run(10)
        assert np.array_equal(a.u_values()[2], b.u_values()[0])

    def test_stride_couples_paths(self):
        g = Grid(1, 8.0, 32)
        model = NoiseModel(seed=3)
        coarse = BurgersEnsemble(SolverConfig(g, 2e-2, noise=model), stride=2).run(10)
        fine = BurgersEnsemble(SolverConfig(g, 1e-2, noise=model)).run(20)
        assert np.abs(coarse.psi_values() - fine.psi_values()).max() < 0.05 * np.abs(fine.psi_values()).max()

    def test_audit_records(self):
        g = Grid(2, 8.0, 16)
        before = AUDIT.checked
        ens = BurgersEnsemble(SolverConfig(g, 1e-2, noise=NoiseModel()), realizations=range(2), direct=True)
        ens.run(3)
        assert ens.audit_all() == 0
        assert AUDIT.checked == before + 8


class TestSeparableColeHopf:
    def test_matches_spectral_solver(self):
        g = Grid(2, 8.0, 64)
        prof = [lambda y: 2 * np.sin(2 * np.pi * y / 8), lambda y: np.cos(2 * np.pi * y / 8)]
        ex = SeparableColeHopf(g, prof)
        cfg = SolverConfig(g, 1e-3, noise=QUIET)
        ens = BurgersEnsemble(cfg, v0=gradient(ex.initial()))
        ens.run(300)
        snap = ex.snapshot(0.3)
        assert np.abs(ens.v_values()[0] - snap.v.values).max() < 1e-5
        from blab.grid import spectral_derivative

        d1 = spectral_derivative(Field(g, snap.v.values[0]), 1).values[0]
        assert np.abs(d1 - snap.diag[0]).max() < 1e-6

    def test_rarefaction_slope_bounded_by_inverse_time(self):
        g = Grid(1, 8.0, 64)
        ex = SeparableColeHopf(g, [lambda y: 500 * np.sin(2 * np.pi * y / 8)])
        for t in (0.01, 0.1, 1.0):
            assert ex.snapshot(t).diag.max() <= 1 / t

    def test_zero_profile(self):
        g = Grid(2, 8.0, 16)
        snap = SeparableColeHopf(g, [None, None]).snapshot(0.5)
        assert not snap.v.values.any() and not snap.diag.any()

    def test_invalid(self):
        g = Grid(2, 8.0, 16)
        with pytest.raises(SolverError):
            SeparableColeHopf(g, [None])
        with pytest.raises(SolverError):
            SeparableColeHopf(g, [None, None]).snapshot(0.0)
