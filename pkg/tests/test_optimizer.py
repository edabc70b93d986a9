import numpy as np
import pytest

from adiabatic_oct.core import ControlSchedule, xz_model
from adiabatic_oct.errors import ConfigurationError, NumericalFailure, ValidationError
from adiabatic_oct.objectives import aqc_spec
from adiabatic_oct.optimizer import OptimizerConfig, optimize, perturb, sweep
from adiabatic_oct.schedules import initial_set

MODEL = xz_model()


def seed_schedule(problem="I", family="linear", T=1.0, L=50):
    return initial_set(problem, family, T, L)[0]


class TestConfig:
    def test_defaults(self):
        c = OptimizerConfig()
        assert (c.max_iterations, c.step_size, c.step_growth, c.step_shrink) == (50000, 0.1, 1.5, 0.5)
        assert (c.grad_tol, c.objective_tol) == (1e-9, 1e-14)

    @pytest.mark.parametrize("kwargs", [
        dict(step_size=0.0), dict(step_growth=1.0), dict(step_shrink=1.0), dict(step_shrink=0.0),
        dict(grad_tol=0.0), dict(objective_tol=-1.0), dict(max_iterations=-1), dict(record_every=0),
        dict(max_iterations=2.5),
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValidationError):
            OptimizerConfig(**kwargs)


class TestOptimize:
    def test_history_is_monotone(self):
        rec = optimize(MODEL, "I", seed_schedule(), aqc_spec("I", 0.1), OptimizerConfig(max_iterations=200))
        J = np.array([h[1] for h in rec.history])
        assert np.all(np.diff(J) >= -1e-12)
        assert rec.final_report.composite >= rec.initial_report.composite
        assert rec.termination in ("grad_tol", "objective_tol", "max_iterations")

    def test_history_rows(self):
        rec = optimize(MODEL, "I", seed_schedule(), aqc_spec("I", 0.1),
                       OptimizerConfig(max_iterations=30, record_every=7))
        its = [h[0] for h in rec.history]
        assert its[:5] == [0, 7, 14, 21, 28] and its[-1] == rec.iterations
        assert all(len(h) == 5 for h in rec.history)
        assert all(np.isfinite(h[4]) for h in rec.history)

    def test_max_iterations_zero_returns_seed(self):
        s0 = seed_schedule()
        rec = optimize(MODEL, "I", s0, aqc_spec("I", 0.1), OptimizerConfig(max_iterations=0))
        assert rec.iterations == 0 and rec.termination == "max_iterations"
        np.testing.assert_array_equal(rec.final_schedule.samples, s0.samples)

    def test_alpha_zero_reaches_stationarity(self):
        # objective_tol below the rounding floor so the gradient criterion decides
        s0 = perturb(seed_schedule("II", T=2.0, L=100), 0.05, 4)
        rec = optimize(MODEL, "II", s0, aqc_spec("II", 0.0), OptimizerConfig(objective_tol=1e-30))
        assert rec.termination == "grad_tol"
        assert rec.history[-1][4] < 1e-9
        assert rec.final_report.fidelity >= 1 - 1e-8

    def test_alpha_zero_default_config_converges(self):
        rec = optimize(MODEL, "I", seed_schedule(T=2.0, L=100), aqc_spec("I", 0.0))
        assert rec.final_report.infidelity < 1e-12

    def test_samples_are_all_free(self):
        # the first and last samples move too: no endpoint pinning
        s0 = seed_schedule(T=2.0, L=100)
        rec = optimize(MODEL, "I", s0, aqc_spec("I", 0.1), OptimizerConfig(max_iterations=100))
        moved = np.abs(rec.final_schedule.samples - s0.samples)
        assert moved[:, 0].max() > 1e-6 and moved[:, -1].max() > 1e-6

    def test_energy_tracking_runs(self):
        rec = optimize(MODEL, "I", seed_schedule(), aqc_spec("I", 0.1, "energy"), OptimizerConfig(max_iterations=50))
        assert rec.final_report.composite > rec.initial_report.composite

    def test_rejects_control_derivative(self):
        with pytest.raises(ConfigurationError, match="no gradient"):
            optimize(MODEL, "I", seed_schedule(), aqc_spec("I", 0.1, "control-derivative"))

    def test_rejects_mismatched_schedule(self):
        with pytest.raises(ValidationError):
            optimize(MODEL, "I", ControlSchedule(1.0, np.ones((1, 5))), aqc_spec("I"))

    def test_non_finite_objective_raises_with_iterate(self, monkeypatch):
        import adiabatic_oct.optimizer as opt

        real = opt.gradient

        def broken(traj, spec):
            g = real(traj, spec)
            return type(g)(g.values * np.nan, g.fidelity_part, g.tracking_part)

        monkeypatch.setattr(opt, "gradient", broken)
        s0 = seed_schedule()
        with pytest.raises(NumericalFailure) as info:
            optimize(MODEL, "I", s0, aqc_spec("I", 0.1), OptimizerConfig(max_iterations=5))
        np.testing.assert_array_equal(info.value.iterate, s0.samples)

    def test_deterministic(self):
        cfg = OptimizerConfig(max_iterations=60)
        a = optimize(MODEL, "II", seed_schedule("II"), aqc_spec("II", 0.01), cfg)
        b = optimize(MODEL, "II", seed_schedule("II"), aqc_spec("II", 0.01), cfg)
        assert a.history == b.history
        np.testing.assert_array_equal(a.final_schedule.samples, b.final_schedule.samples)


class TestPerturb:
    def test_zero_amplitude_is_identity(self):
        s = seed_schedule()
        np.testing.assert_array_equal(perturb(s, 0.0, 1).samples, s.samples)

    def test_same_seed_same_output(self):
        s = seed_schedule()
        np.testing.assert_array_equal(perturb(s, 0.1, 9).samples, perturb(s, 0.1, 9).samples)
        assert not np.array_equal(perturb(s, 0.1, 9).samples, perturb(s, 0.1, 10).samples)

    def test_bounded(self):
        s = seed_schedule()
        d = perturb(s, 0.05, 2).samples - s.samples
        assert np.max(np.abs(d)) <= 0.05 and np.max(np.abs(d)) > 0.01

    def test_negative_amplitude(self):
        with pytest.raises(ValidationError):
            perturb(seed_schedule(), -0.1, 0)

    def test_perturbed_seeds_find_different_optima(self):
        # with population tracking the landscape has several local optima
        cfg = OptimizerConfig(max_iterations=400)
        spec = aqc_spec("I", 0.1)
        Js = [optimize(MODEL, "I", perturb(seed_schedule(T=2.0, L=100), 0.05, k), spec, cfg).final_report.composite
              for k in range(3)]
        assert np.ptp(Js) > 0


class TestSweep:
    def test_empty_alpha_list(self):
        assert sweep(None, "I", "linear", [1.0], []) == []

    def test_cells_in_order(self):
        cfg = OptimizerConfig(max_iterations=5)
        recs = sweep(None, "I", ["linear", "const-x"], [1.0, 2.0], [0.1, 0.01], cfg)
        keys = [(r.meta["family"], r.meta["T"], r.meta["alpha"]) for r in recs]
        assert keys == [(f, T, a) for f in ("linear", "const-x") for T in (1.0, 2.0) for a in (0.1, 0.01)]

    def test_cell_failure_is_recorded(self):
        recs = sweep(None, "I", ["linear", "trig"], [1.0], [0.1], OptimizerConfig(max_iterations=3))
        assert recs[0].error is None
        assert recs[1].termination == "error" and "ConfigurationError" in recs[1].error

    def test_matches_single_optimize(self):
        cfg = OptimizerConfig(max_iterations=20)
        rec = sweep(None, "II", "trig", [1.0], [0.1], cfg)[0]
        direct = optimize(MODEL, "II", initial_set("II", "trig", 1.0, 100)[0], aqc_spec("II", 0.1), cfg)
        np.testing.assert_array_equal(rec.final_schedule.samples, direct.final_schedule.samples)

    def test_bitwise_identical_summaries(self):
        cfg = OptimizerConfig(max_iterations=15)
        a = [r.summary() for r in sweep(None, "I", "sine-x", [1.0], [1.0, 1e-3], cfg)]
        b = [r.summary() for r in sweep(None, "I", "sine-x", [1.0], [1.0, 1e-3], cfg)]
        assert a == b

    def test_parallel_matches_serial(self):
        cfg = OptimizerConfig(max_iterations=10)
        a = [r.summary() for r in sweep(None, "I", "linear", [0.5], [0.1, 1e-2], cfg, jobs=1)]
        b = [r.summary() for r in sweep(None, "I", "linear", [0.5], [0.1, 1e-2], cfg, jobs=2)]
        assert a == b
