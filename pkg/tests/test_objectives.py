import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiabatic_oct.core import SIGMA_X, SIGMA_Y, SIGMA_Z, ControlledHamiltonian, ControlSchedule, propagate, xz_model
from adiabatic_oct.errors import (
    DegenerateSpectrumError,
    NotAtOptimumError,
    UnsupportedModelError,
    ValidationError,
)
from adiabatic_oct.gradcheck import central_difference, check_gradients, relative_error
from adiabatic_oct.objectives import (
    ObjectiveSpec,
    adiabatic_ratio_series,
    aqc_spec,
    control_derivative_cost,
    energy_series,
    evaluate,
    fidelity,
    grad_energy_tracking,
    grad_fidelity,
    gradient,
    ground_state_derivative_xz,
    ground_state_data,
    hessian_at_optimum,
    hessian_fidelity,
    infidelity,
    population_series,
)
from adiabatic_oct.schedules import get_profile, initial_set
from conftest import smooth_random_schedule

MODEL = xz_model()


def random_schedule(seed, problem="I", T=0.5, L=30):
    return smooth_random_schedule(np.random.default_rng(seed), problem, T, L)(L)


class TestSpec:
    def test_aqc_spec_states(self):
        spec = aqc_spec("II")
        # ground of sx is (-1, 1)/sqrt 2 in the gauge; ground of sz is (0, 1)
        np.testing.assert_allclose(spec.initial_state, np.array([-1, 1]) / np.sqrt(2), atol=1e-15)
        np.testing.assert_allclose(spec.target_state, [0, 1], atol=1e-15)

    def test_rejects_bad_tracking(self):
        with pytest.raises(ValidationError):
            ObjectiveSpec(0.1, "speed", [1, 0], [1, 0])

    def test_rejects_negative_alpha(self):
        with pytest.raises(ValidationError):
            ObjectiveSpec(-1.0, "none", [1, 0], [1, 0])

    def test_rejects_unnormalized(self):
        with pytest.raises(ValidationError):
            ObjectiveSpec(0.0, "none", [1, 1], [1, 0])


class TestValues:
    def test_infidelity_agrees_with_fidelity(self):
        s = random_schedule(0)
        spec = aqc_spec("I")
        traj = propagate(MODEL, s, spec.initial_state)
        assert abs(fidelity(traj, spec) + infidelity(traj, spec) - 1.0) < 1e-14

    def test_identity_schedule_population_is_one_when_static(self):
        # H constant and psi0 its ground state: P0 = 1 throughout
        spec = aqc_spec("I")
        s = ControlSchedule(1.0, [[1.0] * 10, [0.0] * 10])
        rep = evaluate(MODEL, s, spec)
        np.testing.assert_allclose(rep.pop_series, 1.0, atol=1e-14)
        assert abs(rep.avg_population - 1.0) < 1e-14
        np.testing.assert_allclose(rep.energy_series, -1.0, atol=1e-14)

    def test_trapezoid_average(self):
        # average of the grid series with half weight at both ends
        s = random_schedule(2)
        spec = aqc_spec("I")
        traj = propagate(MODEL, s, spec.initial_state)
        pops, avg = population_series(traj, MODEL, s)
        assert abs(avg - np.trapezoid(pops, dx=1.0 / s.intervals)) < 1e-14
        en, avg_e = energy_series(traj, MODEL, s)
        assert abs(avg_e - np.trapezoid(en, dx=1.0 / s.intervals)) < 1e-14

    def test_composite(self):
        s = random_schedule(3)
        rep = evaluate(MODEL, s, aqc_spec("I", 0.25, "population"))
        assert abs(rep.composite - (rep.fidelity + 0.25 * rep.avg_population)) < 1e-15
        rep = evaluate(MODEL, s, aqc_spec("I", 0.25, "energy"))
        assert abs(rep.composite - (rep.fidelity - 0.25 * rep.avg_energy)) < 1e-15

    def test_series_lengths(self):
        s = random_schedule(4, L=17)
        rep = evaluate(MODEL, s, aqc_spec("I", 0.1))
        for arr in (rep.pop_series, rep.gap_series, rep.ratio_series, rep.energy_series):
            assert arr.shape == (18,)

    def test_population_needs_a_gap(self):
        s = ControlSchedule(1.0, [[0.0, 1.0], [0.0, 1.0]])
        traj = propagate(MODEL, s, [1.0, 0.0])
        with pytest.raises(DegenerateSpectrumError) as info:
            population_series(traj, MODEL, s)
        assert info.value.index == 0

    def test_evaluate_tolerates_crossing_without_population_tracking(self):
        s = ControlSchedule(1.0, [[0.0, 1.0], [0.0, 1.0]])
        rep = evaluate(MODEL, s, aqc_spec("I", 0.1, "energy"))
        assert np.isnan(rep.avg_population)


class TestRatio:
    @pytest.mark.parametrize("key", [("I", "const-x"), ("I", "sine-x"), ("II", "linear-constraint"), ("II", "trig")])
    def test_sampled_ratio_is_near_epsilon_inside(self, key):
        prof = get_profile(*key)
        T, L = 2.0, 400
        sched = prof.sample(T, L)
        R = adiabatic_ratio_series(sched)
        eps = prof.epsilon_T / T
        # central differences of midpoint samples: second-order accurate inside
        assert np.max(np.abs(R[2:-2] - eps)) < 1e-3 * eps

    def test_general_model_matches_closed_form(self):
        # an identity drift leaves gaps and eigenvectors alone but forces the general path
        sched = get_profile("II", "trig").sample(3.0, 100)
        general = ControlledHamiltonian(0.3 * np.eye(2), (SIGMA_X, SIGMA_Z))
        np.testing.assert_allclose(
            adiabatic_ratio_series(sched, general), adiabatic_ratio_series(sched), rtol=1e-10
        )

    def test_control_derivative_cost(self):
        s = ControlSchedule(2.0, [[0.0, 1.0, 2.0], [0.0, 0.0, 0.0]])
        # rates (1/dt) on two forward differences of control 1
        dt = 2.0 / 3.0
        expected = -0.5 * (2 * (1 / dt) ** 2 * dt) / (2 * 2.0)
        assert abs(control_derivative_cost(s, 0.5) - expected) < 1e-15


class TestGroundDerivative:
    @pytest.mark.parametrize("x,z", [(1.0, 0.3), (0.4, -0.9), (-0.5, 0.7), (2.0, 2.0)])
    def test_matches_difference_of_gauged_eigenvectors(self, x, z):
        from adiabatic_oct.core import eigensystem

        h = 1e-6
        d = ground_state_derivative_xz(x, z)
        gx = (eigensystem((x + h) * SIGMA_X + z * SIGMA_Z).ground
              - eigensystem((x - h) * SIGMA_X + z * SIGMA_Z).ground) / (2 * h)
        gz = (eigensystem(x * SIGMA_X + (z + h) * SIGMA_Z).ground
              - eigensystem(x * SIGMA_X + (z - h) * SIGMA_Z).ground) / (2 * h)
        np.testing.assert_allclose(d.chi[0], gx, atol=1e-8)
        np.testing.assert_allclose(d.chi[1], gz, atol=1e-8)

    def test_matches_closed_form_for_positive_x(self):
        x, z = 0.8, -0.3
        h = np.hypot(x, z)
        d = ground_state_derivative_xz(x, z)
        v = np.array([np.sqrt(h + z), np.sqrt(h - z)])
        np.testing.assert_allclose(d.chi[0], -z / np.sqrt(8 * h**5) * v, atol=1e-14)
        np.testing.assert_allclose(d.chi[1], x / np.sqrt(8 * h**5) * v, atol=1e-14)

    def test_rejects_origin(self):
        with pytest.raises(DegenerateSpectrumError):
            ground_state_derivative_xz(0.0, 0.0)

    def test_unsupported_model(self):
        m = ControlledHamiltonian(np.zeros((2, 2)), (SIGMA_X, SIGMA_Y))
        with pytest.raises(UnsupportedModelError):
            ground_state_data(m, ControlSchedule(1.0, np.ones((2, 3))))


class TestGradients:
    @pytest.mark.parametrize("problem", ["I", "II"])
    @pytest.mark.parametrize("tracking", ["population", "energy"])
    def test_check_gradients_passes(self, problem, tracking):
        res = check_gradients(MODEL, random_schedule(11, problem, L=40), aqc_spec(problem, 0.5, tracking))
        assert res.passed()
        assert res.fidelity_error < 5e-4 and res.tracking_error < 5e-4

    def test_error_shrinks_with_refinement(self):
        rng = np.random.default_rng(12)
        make = smooth_random_schedule(rng, "I", 0.5, 25)
        spec = aqc_spec("I", 1.0)
        coarse = check_gradients(MODEL, make(25), spec)
        fine = check_gradients(MODEL, make(50), spec)
        assert fine.fidelity_error < 0.6 * coarse.fidelity_error
        assert fine.tracking_error < 0.6 * coarse.tracking_error

    def test_energy_gradient_general_model(self):
        m = ControlledHamiltonian(0.3 * SIGMA_Z, (SIGMA_X, SIGMA_Y))
        sched = ControlSchedule(0.4, np.random.default_rng(13).normal(size=(2, 40)))
        spec = ObjectiveSpec(1.0, "energy", np.array([0, 1.0]), np.array([1.0, 0]))
        traj = propagate(m, sched, spec.initial_state)

        def value(u):
            s = sched.with_samples(u)
            return -energy_series(propagate(m, s, spec.initial_state), m, s)[1]

        err = relative_error(grad_energy_tracking(traj, m, sched, spec), central_difference(value, sched.samples))
        assert err < 5e-3
        err_F = relative_error(grad_fidelity(traj, m, spec), central_difference(
            lambda u: fidelity(propagate(m, sched.with_samples(u), spec.initial_state), spec), sched.samples))
        assert err_F < 5e-3

    def test_zero_alpha_tracking_part_is_zero(self):
        g = gradient(propagate(MODEL, random_schedule(14), aqc_spec("I").initial_state), aqc_spec("I", 0.0))
        assert np.all(g.tracking_part == 0.0)
        res = check_gradients(MODEL, random_schedule(14), aqc_spec("I", 0.0))
        assert res.tracking_error == 0.0

    def test_control_derivative_has_no_gradient(self):
        from adiabatic_oct.errors import ConfigurationError

        with pytest.raises(ConfigurationError):
            check_gradients(MODEL, random_schedule(15), aqc_spec("I", 0.1, "control-derivative"))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.integers(0, 1000))
    def test_gradients_are_phase_invariant(self, a, b, seed):
        s = random_schedule(seed, L=12)
        spec = aqc_spec("I", 0.2)
        rot = ObjectiveSpec(0.2, "population", np.exp(1j * a) * spec.target_state, np.exp(1j * b) * spec.initial_state)
        g1 = gradient(propagate(MODEL, s, spec.initial_state), spec).values
        g2 = gradient(propagate(MODEL, s, rot.initial_state), rot).values
        np.testing.assert_allclose(g1, g2, atol=1e-13)


class TestHessian:
    def test_matches_gradient_differences(self):
        spec = aqc_spec("II")
        sched = random_schedule(21, "II", T=0.3, L=8)
        H = hessian_fidelity(propagate(MODEL, sched, spec.initial_state), MODEL, spec)
        flat = sched.samples.ravel()

        def g(v):
            s = sched.with_samples(v.reshape(2, -1))
            return grad_fidelity(propagate(MODEL, s, spec.initial_state), MODEL, spec).ravel()

        step = 1e-5
        jac = np.array([(g(flat + step * e) - g(flat - step * e)) / (2 * step) for e in np.eye(flat.size)])
        assert relative_error(H.values, jac) < 1e-2
        assert H.asymmetry < 1e-12

    def test_at_optimum_requires_optimum(self):
        spec = aqc_spec("I")
        traj = propagate(MODEL, random_schedule(22), spec.initial_state)
        with pytest.raises(NotAtOptimumError):
            hessian_at_optimum(traj, MODEL, spec)

    def test_at_optimum_is_negative_semidefinite(self):
        # taking the evolved state as the target puts any schedule at an optimum
        sched = random_schedule(23, L=10)
        psi0 = aqc_spec("I").initial_state
        traj = propagate(MODEL, sched, psi0)
        spec = ObjectiveSpec(0.0, "none", traj.final_state, psi0)
        H_opt = hessian_at_optimum(traj, MODEL, spec)
        H_gen = hessian_fidelity(traj, MODEL, spec)
        assert np.max(np.linalg.eigvalsh(H_opt.values)) < 1e-12
        assert relative_error(H_gen.values, H_opt.values) < 1e-10


def test_init_set_evaluation_matches_table_digits():
    sched, _, _ = initial_set("I", "sine-x", 2.0, 200)
    rep = evaluate(MODEL, sched, aqc_spec("I"))
    assert abs(rep.infidelity - 2.8e-3) < 1e-4
    assert abs(rep.avg_population - 0.995) < 1e-3
