import math

import numpy as np
import pytest

from randhmc.dynamics import (
    LeapfrogSchedule,
    PhaseState,
    energy_gap,
    exact_evolve,
    hamiltonian,
    leapfrog_angle,
    leapfrog_closed_form,
    leapfrog_evolve,
    modified_hamiltonian,
    modified_spectrum,
)
from randhmc.model import FirstOrderOracle, Spectrum, make_spectrum, make_target


def unit_spectrum(omega_sq=1.0):
    return Spectrum(np.array([omega_sq]), omega_sq, omega_sq)


def oracle_for(spectrum):
    return FirstOrderOracle(make_target(spectrum))


def phase_amplitude_error(a: PhaseState, b: PhaseState, what: np.ndarray) -> float:
    """Deviation between phase points relative to each coordinate's orbit radius."""
    r = np.sqrt(what**2 * b.x**2 + b.v**2)
    return float(np.max(np.maximum(what * np.abs(a.x - b.x), np.abs(a.v - b.v)) / r))


class TestExactEvolve:
    def test_quarter_period(self):
        out = exact_evolve(PhaseState([1.0], [0.0]), unit_spectrum(), math.pi / 2)
        assert np.allclose(out.x, [0.0], atol=1e-15)
        assert np.allclose(out.v, [-1.0])

    def test_full_period_identity(self):
        state = PhaseState([0.3, -1.2], [0.7, 0.4])
        spec = Spectrum(np.array([1.0, 1.0]), 1.0, 1.0)
        out = exact_evolve(state, spec, 2 * math.pi)
        assert np.allclose(out.x, state.x, atol=1e-12)
        assert np.allclose(out.v, state.v, atol=1e-12)

    def test_omega_two(self):
        out = exact_evolve(PhaseState([1.0], [0.0]), unit_spectrum(4.0), math.pi / 4)
        assert np.allclose(out.x, [0.0], atol=1e-15)
        assert np.allclose(out.v, [-2.0])

    def test_conserves_energy(self):
        rng = np.random.default_rng(0)
        spec = make_spectrum(6, "log_uniform", 0.5, 25.0, seed=1)
        for _ in range(50):
            state = PhaseState(rng.standard_normal(6), rng.standard_normal(6))
            h0 = hamiltonian(state, spec)
            out = exact_evolve(state, spec, float(rng.uniform(0, 30)))
            assert abs(hamiltonian(out, spec) - h0) <= 1e-12 * (1 + h0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            exact_evolve(PhaseState([1.0, 2.0], [0.0, 0.0]), unit_spectrum(), 1.0)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            exact_evolve(PhaseState([1.0], [0.0]), unit_spectrum(), -0.5)


class TestModifiedSpectrum:
    def test_zero_step(self):
        spec = make_spectrum(4, "geometric", 1.0, 9.0, seed=0)
        assert np.array_equal(modified_spectrum(spec, 0.0), spec.omega_sq)

    def test_unit_case(self):
        assert modified_spectrum(unit_spectrum(), 1.0)[0] == pytest.approx(0.75)

    def test_boundary_vanishes(self):
        assert modified_spectrum(unit_spectrum(4.0), 1.0)[0] == pytest.approx(0.0)

    def test_beyond_boundary_rejected(self):
        with pytest.raises(ValueError):
            modified_spectrum(unit_spectrum(4.0), 1.1)


class TestEnergies:
    def test_origin(self):
        spec = unit_spectrum()
        assert hamiltonian(PhaseState([0.0], [0.0]), spec) == 0.0
        assert modified_hamiltonian(PhaseState([0.0], [0.0]), spec, 0.5) == 0.0

    def test_unit_point(self):
        assert hamiltonian(PhaseState([1.0], [1.0]), unit_spectrum()) == pytest.approx(1.0)

    def test_modified_unit(self):
        h = modified_hamiltonian(PhaseState([1.0], [0.0]), unit_spectrum(), 1.0)
        assert h == pytest.approx(3.0 / 8.0)

    def test_gap_examples(self):
        spec = unit_spectrum()
        assert energy_gap(PhaseState([0.0], [5.0]), spec, 1.0) == 0.0
        assert energy_gap(PhaseState([1.0], [2.0]), spec, 1.0) == pytest.approx(1.0 / 8.0)

    def test_gap_identity_on_random_states(self):
        rng = np.random.default_rng(3)
        spec = make_spectrum(5, "log_uniform", 0.5, 16.0, seed=2)
        delta = 0.2
        for _ in range(1000):
            s = PhaseState(rng.standard_normal(5), rng.standard_normal(5))
            h = hamiltonian(s, spec)
            gap = h - modified_hamiltonian(s, spec, delta)
            assert abs(gap - energy_gap(s, spec, delta)) <= 1e-12 * (1.0 + h)


class TestLeapfrog:
    def test_single_step_closed_form(self):
        # One kick-drift-kick step from (1, 0) at omega=1, delta=0.1.
        spec = unit_spectrum()
        res = leapfrog_evolve(
            PhaseState([1.0], [0.0]), LeapfrogSchedule(0.1, 1), oracle_for(spec)
        )
        assert res.state.x[0] == pytest.approx(1.0 - 0.1**2 / 2, abs=1e-15)
        assert res.state.v[0] == pytest.approx(-0.1 * (1.0 - 0.1**2 / 4), abs=1e-15)

    def test_gradient_accounting(self):
        spec = make_spectrum(3, "geometric", 1.0, 4.0, seed=0)
        oracle = oracle_for(spec)
        res = leapfrog_evolve(
            PhaseState(np.ones(3), np.zeros(3)), LeapfrogSchedule(0.05, 17), oracle
        )
        assert res.grad_evals == 34
        assert oracle.query_count == 34

    def test_endpoint_potentials_reported(self):
        spec = make_spectrum(2, "two_point", 1.0, 4.0, seed=0)
        target = make_target(spec)
        oracle = FirstOrderOracle(target)
        x0 = np.array([0.5, -1.0])
        res = leapfrog_evolve(PhaseState(x0, np.zeros(2)), LeapfrogSchedule(0.05, 9), oracle)
        f0, _ = target.f_and_grad(x0)
        f1, _ = target.f_and_grad(res.state.x)
        assert res.f_initial == pytest.approx(f0, rel=1e-14)
        assert res.f_final == pytest.approx(f1, rel=1e-14)

    def test_step_size_guard(self):
        spec = unit_spectrum(4.0)  # 1/sqrt(beta) = 0.5
        with pytest.raises(ValueError, match="stability"):
            leapfrog_evolve(PhaseState([1.0], [0.0]), LeapfrogSchedule(0.51, 1), oracle_for(spec))

    def test_matches_rotation_form_over_many_steps(self):
        # Random frequencies and admissible stepsizes; the leapfrog endpoint
        # must match the per-coordinate rotation at the modified frequency.
        rng = np.random.default_rng(7)
        for _ in range(8):
            alpha, beta = 1.0, float(rng.uniform(1.0, 100.0))
            spec = make_spectrum(4, "log_uniform", alpha, beta, seed=int(rng.integers(1000)))
            delta = float(rng.uniform(0.2, 1.0)) * math.pi / (20 * math.sqrt(beta))
            n = int(rng.integers(1, 10_000))
            state = PhaseState(rng.standard_normal(4), rng.standard_normal(4))
            res = leapfrog_evolve(state, LeapfrogSchedule(delta, n), oracle_for(spec))
            want = leapfrog_closed_form(state, spec, delta, n)
            what = np.sqrt(modified_spectrum(spec, delta))
            assert phase_amplitude_error(res.state, want, what) <= 1e-8

    def test_conserves_modified_energy(self):
        spec = make_spectrum(8, "two_point", 1.0, 100.0, seed=0)
        delta = math.pi / (20 * math.sqrt(100.0))
        rng = np.random.default_rng(5)
        state = PhaseState(rng.standard_normal(8), rng.standard_normal(8))
        oracle = oracle_for(spec)
        h0 = modified_hamiltonian(state, spec, delta)
        x, v = state.x, state.v
        worst = 0.0
        for _ in range(200):
            res = leapfrog_evolve(PhaseState(x, v), LeapfrogSchedule(delta, 50), oracle)
            x, v = res.state.x, res.state.v
            worst = max(worst, abs(modified_hamiltonian(res.state, spec, delta) - h0))
        assert worst <= 1e-9 * h0

    def test_reversible(self):
        rng = np.random.default_rng(11)
        spec = make_spectrum(5, "log_uniform", 1.0, 50.0, seed=3)
        delta = math.pi / (20 * math.sqrt(50.0))
        oracle = oracle_for(spec)
        for _ in range(10):
            state = PhaseState(rng.standard_normal(5), rng.standard_normal(5))
            n = int(rng.integers(1, 500))
            fwd = leapfrog_evolve(state, LeapfrogSchedule(delta, n), oracle)
            back = leapfrog_evolve(
                PhaseState(fwd.state.x, -fwd.state.v), LeapfrogSchedule(delta, n), oracle
            )
            assert np.max(np.abs(back.state.x - state.x)) <= 1e-10
            assert np.max(np.abs(back.state.v + state.v)) <= 1e-10

    def test_one_step_propagator_determinant_is_one(self):
        for w2 in (0.5, 1.0, 7.0, 100.0):
            for delta in (1e-3, 0.05, 1.0 / math.sqrt(w2)):
                m = np.array(
                    [
                        [1 - delta**2 * w2 / 2, delta],
                        [-delta * w2 * (1 - delta**2 * w2 / 4), 1 - delta**2 * w2 / 2],
                    ]
                )
                assert abs(np.linalg.det(m) - 1.0) <= 1e-12

    def test_angle_branch_near_pi(self):
        # delta^2 w^2 close to 4 puts the step angle near pi; atan2 keeps it in (0, pi].
        spec = unit_spectrum(4.0)
        phi = leapfrog_angle(spec, 0.999)[0]
        assert 0.0 < phi <= math.pi
        assert phi == pytest.approx(math.acos(1 - 0.999**2 * 4.0 / 2), rel=1e-12)


class TestSchedule:
    def test_validation(self):
        with pytest.raises(ValueError):
            LeapfrogSchedule(0.0, 5)
        with pytest.raises(ValueError):
            LeapfrogSchedule(0.1, 0)

    def test_phase_state_validation(self):
        with pytest.raises(ValueError):
            PhaseState([1.0, 2.0], [1.0])
