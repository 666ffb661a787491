import json
import math

import numpy as np
import pytest

from blab.grid import Field, Grid, gradient
from blab.noise import NoiseModel, variance_constant
from blab.solvers import BurgersEnsemble, SeparableColeHopf, Snapshot, SolverConfig
from blab.diagnostics import (
    CheckReport, HypothesisError, StationarityWindow, WindowError, bring_down_check,
    cole_hopf_consistency, deterministic_snapshots, envelope_check, fit_riccati_envelope,
    forgetting_report, ks_critical, kruzhkov_stat, kruzhkov_trace, spatial_stationarity_check,
    stationarity_check, variance_bound_check,
)
from blab.weights import WeightSpec

QUIET = NoiseModel(amplitude=0.0)
W = WeightSpec.power(0.55, 1.0)


class TestReport:
    def test_schema(self):
        rep = CheckReport("x", {"a": np.float64(1.0)}, 0.5, 0.1, 1.0, 0.5, True, 12.3456,
                          {"arr": np.arange(3)})
        d = json.loads(rep.to_json())
        assert list(d)[:8] == ["check", "params", "estimate", "stderr", "bound", "margin", "pass", "runtime_s"]
        assert d["runtime_s"] == 12.346 and d["details"]["arr"] == [0, 1, 2]
        assert json.loads(rep.to_json(deterministic=True))["runtime_s"] is None

    def test_non_finite(self):
        d = CheckReport("x", {}, math.inf, math.nan, 1.0, -math.inf, False).to_dict()
        assert d["estimate"] == "inf" and d["stderr"] is None and d["margin"] == "-inf"

    def test_summary(self):
        rep = CheckReport("variance", {}, 0.25, 0.01, 0.3, 0.05, True)
        assert rep.summary().startswith("PASS variance: estimate=0.25")


class TestVariance:
    def test_quiet_is_zero(self):
        g = Grid(2, 8.0, 16)
        rep = variance_bound_check(SolverConfig(g, 1e-2, noise=QUIET), 0.5, 3)
        assert rep.estimate == 0.0 and rep.passed
        assert rep.bound == 0.0  # the bound scales with the squared amplitude

    def test_nonzero_initial_data(self):
        g = Grid(1, 8.0, 16)
        v0 = Field(g, np.sin(2 * np.pi * g.x1d / 8)[None], is_gradient=True)
        with pytest.raises(HypothesisError):
            variance_bound_check(SolverConfig(g, 1e-2), 1.0, 2, v0=v0)

    def test_zero_initial_data_accepted(self):
        g = Grid(1, 8.0, 16)
        rep = variance_bound_check(SolverConfig(g, 1e-2), 0.1, 2, v0=Field(g, np.zeros((1, 16)), is_gradient=True))
        assert rep.estimate > 0

    @pytest.mark.parametrize("T", [0.0, 0.015])
    def test_bad_horizon(self, T):
        with pytest.raises(ValueError):
            variance_bound_check(SolverConfig(Grid(1, 8.0, 16), 1e-2), T, 2)

    def test_one_dimensional_below_bound(self):
        g = Grid(1, 8.0, 64)
        cfg = SolverConfig(g, 5e-3, noise=NoiseModel(seed=1))
        rep = variance_bound_check(cfg, 10.0, 16, probe_points=[(0.0,), (2.0,), (-3.0,)])
        assert rep.passed
        assert rep.margin >= 3 * rep.stderr
        # shift invariance of the law: probes agree within error bars
        assert rep.details["max_probe_difference_z"] < 3
        assert abs(rep.details["spatial_mean_estimate"] - rep.estimate) < 3 * rep.stderr

    def test_pool_is_deterministic(self):
        g = Grid(1, 8.0, 16)
        cfg = SolverConfig(g, 1e-2)
        a = variance_bound_check(cfg, 0.5, 4, batch=2)
        b = variance_bound_check(cfg, 0.5, 4, batch=2, workers=2)
        assert a.estimate == b.estimate and a.stderr == b.stderr
        # a different batch layout changes only FFT round-off
        c = variance_bound_check(cfg, 0.5, 4, batch=1)
        assert c.estimate == pytest.approx(a.estimate, rel=1e-12)


class TestKruzhkov:
    def test_zero_run(self):
        g = Grid(2, 8.0, 16)
        ens = BurgersEnsemble(SolverConfig(g, 1e-2, noise=QUIET))
        snaps = []
        for _ in range(3):
            ens.step()
            snaps.append(ens.state(0).v)
        assert all(s.Z == 0 and s.argmax_i == 1 for s in kruzhkov_trace(snaps, W))

    def test_constant_shift_invariance(self):
        g = Grid(2, 8.0, 32)
        snap = deterministic_snapshots(g, 5.0, [0.2], "spectral", dt=1e-2)[0]
        shifted = snap.v.replace(snap.v.values + np.array([2.0, -1.0])[:, None, None])
        assert kruzhkov_stat(shifted, W).Z == pytest.approx(kruzhkov_stat(snap, W).Z, rel=1e-10)

    def test_ties(self):
        g = Grid(2, 4.0, 8)
        v = Field(g, np.zeros((2,) + g.shape), time=1.0, is_gradient=True)
        diag = np.zeros((2,) + g.shape)
        c = g.n // 2
        diag[0][c, c + 1] = diag[0][c + 1, c] = 1.0
        diag[1][c + 1, c] = 1.0  # same weight, same value on axis 2
        stat = kruzhkov_stat(Snapshot(1.0, v, diag), WeightSpec.power(0.0))
        assert stat.Z == 1.0 and stat.argmax_i == 1
        assert stat.argmax_x == (float(g.x1d[c]), float(g.x1d[c + 1]))

    def test_attains_on_grid(self):
        g = Grid(2, 8.0, 32)
        snap = deterministic_snapshots(g, 20.0, [0.3])[0]
        stat = kruzhkov_stat(snap, W)
        idx = tuple(int(np.argmin(np.abs(g.x1d - x))) for x in stat.argmax_x)
        w = W.on_grid(g)
        assert snap.diag[stat.argmax_i - 1][idx] / w[idx] == stat.Z

    def test_order_independent(self):
        g = Grid(2, 8.0, 32)
        snaps = deterministic_snapshots(g, 50.0, [0.1, 0.5, 0.3, 1.0])
        a = kruzhkov_trace(snaps, W)
        b = kruzhkov_trace(snaps[::-1], W)
        assert [s.Z for s in a] == [s.Z for s in b]
        assert [s.t for s in a] == sorted(s.t for s in a)
        assert all(s.Z >= 0 for s in a)

    def test_exact_and_spectral_agree(self):
        g = Grid(2, 8.0, 64)
        times = [0.2, 0.5]
        # amplitude small enough for the front to be resolved on this grid
        ex = kruzhkov_trace(deterministic_snapshots(g, 2.0, times), W)
        sp = kruzhkov_trace(deterministic_snapshots(g, 2.0, times, "spectral", dt=1e-3), W)
        for a, b in zip(ex, sp):
            assert a.Z == pytest.approx(b.Z, rel=1e-6)

    def test_inverse_time_bound(self):
        # deterministic Burgers: d_i u_i <= 1/t, so Z(t) <= 1 / (t min p)
        g = Grid(2, 8.0, 64)
        pmin = W.on_grid(g).min()
        for A in (10.0, 1e3):
            for s in kruzhkov_trace(deterministic_snapshots(g, A, [0.05, 0.1, 0.5, 1.0]), W):
                assert s.Z <= 1 / (s.t * pmin) * (1 + 1e-9)

    def test_forgetting_and_envelope(self):
        g = Grid(2, 8.0, 64)
        times = [0.1, 0.2, 0.4, 0.7, 1.0]
        traces = {A: kruzhkov_trace(deterministic_snapshots(g, A, times), W) for A in (10.0, 100.0, 1000.0)}
        rep = forgetting_report(traces)
        assert rep.passed and rep.estimate < 2
        env = fit_riccati_envelope(traces[100.0])
        for tr in traces.values():
            assert envelope_check(tr, env).passed

    def test_envelope_detects_violation(self):
        g = Grid(2, 8.0, 32)
        tr = kruzhkov_trace(deterministic_snapshots(g, 100.0, [0.1, 0.5, 1.0]), W)
        env = fit_riccati_envelope(tr, safety=1.0)
        big = [type(s)(s.t, 3 * s.Z, s.argmax_i, s.argmax_x, s.weight) for s in tr]
        assert not envelope_check(big, env).passed


class TestBringDown:
    def test_zero_data(self):
        g = Grid(2, 8.0, 16)
        rep = bring_down_check(SolverConfig(g, 1e-2), [0.0], t_max=0.5)
        assert rep.details["B"] == 0.0 and math.isfinite(rep.estimate)

    @pytest.mark.slow
    def test_amplitude_family_and_noise_monotonicity(self):
        g = Grid(2, 8.0, 128)
        reps = [bring_down_check(SolverConfig(g, 1e-3, noise=NoiseModel(amplitude=M)),
                                 [1.0, 10.0, 100.0], realizations=(0, 1), every=20)
                for M in (1.0, 2.0)]
        assert reps[0].passed and reps[0].estimate < 3
        assert reps[1].details["B"] > reps[0].details["B"]


class TestStationarity:
    def test_critical_value(self):
        assert ks_critical(200, 200, 0.01) == pytest.approx(0.163, abs=1e-3)

    def test_quiet_run(self):
        g = Grid(2, 8.0, 16)
        win = StationarityWindow(T=1.0, samples=20, windows=((1.0, 2.0), (2.0, 3.0)), norm_T=(0.5, 1.0),
                                 warmup=0.5)
        rep = stationarity_check(SolverConfig(g, 1e-2, noise=QUIET), win)
        assert rep.estimate == 0.0 and rep.passed
        assert rep.details["quantile_spread"] == 0.0

    def test_overlapping_windows(self):
        with pytest.raises(WindowError):
            StationarityWindow(windows=((0.0, 2.0), (1.5, 3.0)))

    def test_sample_times(self):
        win = StationarityWindow.adjacent(10.0, seed=4)
        a, b = win.sample_times(), StationarityWindow.adjacent(10.0, seed=4).sample_times()
        assert all(np.array_equal(a[k], b[k]) for k in a)
        assert a["window0"].min() >= 10 and a["window1"].max() <= 30
        assert a["norm5"].min() >= 3 and a["norm5"].max() <= 8
        assert win.horizon == 30.0

    def test_small_run_statistics(self):
        g = Grid(1, 8.0, 32)
        win = StationarityWindow(T=2.0, samples=60, windows=((2.0, 4.0), (4.0, 6.0)), norm_T=(2.0, 4.0),
                                 warmup=1.0)
        rep = stationarity_check(SolverConfig(g, 2e-2), win, omega=0.9)
        assert len(rep.details["ks_per_component"]) == 1
        assert rep.bound == pytest.approx(ks_critical(60, 60))
        assert 0 < rep.estimate < 1


class TestSpatial:
    def test_quiet(self):
        rep = spatial_stationarity_check(np.zeros((5, 2, 8, 8)), [(1, 2), (3, 3)])
        assert rep.passed and rep.estimate == 0.0

    def test_stationary_run(self):
        g = Grid(2, 8.0, 16)
        ens = BurgersEnsemble(SolverConfig(g, 2e-2), realizations=range(300))
        ens.run(100)
        shifts = np.random.default_rng(0).integers(0, 16, (4, 2))
        rep = spatial_stationarity_check(ens.u_values(), shifts)
        assert rep.passed

    def test_detects_inhomogeneity(self):
        rng = np.random.default_rng(1)
        vals = rng.normal(size=(400, 1, 16))
        vals[:, :, 5] += 1.0
        assert not spatial_stationarity_check(vals, [(5,)]).passed


class TestColeHopfConsistency:
    def test_small_grid(self):
        g = Grid(1, 8.0, 128)
        rep = cole_hopf_consistency(SolverConfig(g, 4e-3, 0.4), halvings=1)
        assert rep.passed
        assert rep.details["decrease_ratios"][0] >= 1.5

    def test_needs_time(self):
        with pytest.raises(ValueError):
            cole_hopf_consistency(SolverConfig(Grid(1, 8.0, 16), 1e-2))


def test_exact_profiles_initial_field():
    g = Grid(2, 8.0, 32)
    ex = SeparableColeHopf(g, [lambda y: np.sin(2 * np.pi * y / 8), None])
    f = ex.initial()
    assert np.abs(f.values[0] - np.sin(2 * np.pi * g.coords()[0] / 8)).max() < 1e-6
    assert np.abs(gradient(f).values[1]).max() < 1e-12
