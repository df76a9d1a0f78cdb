"""Harmonic-oscillator evolution: the exact phase-space rotation, the
leapfrog integrator, and the energy functions.

In the eigenbasis of B the dynamics decouple into d oscillators.  The
exact flow rotates each (x_i, v_i) by angle omega_i * t in scaled phase
space.  A leapfrog step with stepsize delta is, per coordinate, a rotation
by the angle phi with cos(phi) = 1 - delta^2 omega^2 / 2, carried out at
the modified frequency omega_hat = omega * sqrt(1 - delta^2 omega^2 / 4);
it conserves the modified energy
H_hat = sum(omega_hat^2 x^2)/2 + |v|^2/2 exactly, and
H - H_hat = delta^2/8 * sum(omega^4 x^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FirstOrderOracle, Spectrum

_STEP_TOL = 1.0 + 1e-12


@dataclass
class PhaseState:
    """A (position, velocity) pair; x and v share one dimension d."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if self.x.shape != self.v.shape or self.x.ndim != 1:
            raise ValueError(
                f"x and v must be vectors of equal dimension, got {self.x.shape} and {self.v.shape}"
            )

    @property
    def d(self) -> int:
        return self.x.size

    def copy(self) -> "PhaseState":
        return PhaseState(self.x.copy(), self.v.copy())


@dataclass(frozen=True)
class LeapfrogSchedule:
    """Stepsize and step count; total integration time is n_steps * delta."""

    delta: float
    n_steps: int

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")


@dataclass
class LeapfrogResult:
    """Endpoint of a leapfrog trajectory plus its query accounting.

    f_initial and f_final are the potential values at the two endpoints;
    they come from the first and last gradient queries, so the
    Metropolis filter needs no extra oracle calls.
    """

    state: PhaseState
    grad_evals: int
    f_initial: float
    f_final: float


def _check_dims(state: PhaseState, spectrum: Spectrum):
    if state.d != spectrum.d:
        raise ValueError(f"state dimension {state.d} != spectrum dimension {spectrum.d}")


def exact_evolve(state: PhaseState, spectrum: Spectrum, t: float) -> PhaseState:
    """Exact flow for time t >= 0 in the diagonal basis.

    Per coordinate: (x, v) -> (cos(wt) x + sin(wt) v / w,
                               -w sin(wt) x + cos(wt) v).
    Conserves the energy exactly; costs no gradient queries.
    """
    _check_dims(state, spectrum)
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    w = spectrum.omega
    c, s = np.cos(w * t), np.sin(w * t)
    x = c * state.x + (s / w) * state.v
    v = -w * s * state.x + c * state.v
    return PhaseState(x, v)


def hamiltonian(state: PhaseState, spectrum: Spectrum) -> float:
    """H(x, v) = sum(omega^2 x^2)/2 + |v|^2/2."""
    _check_dims(state, spectrum)
    return 0.5 * float(np.dot(spectrum.omega_sq, state.x**2) + np.dot(state.v, state.v))


def modified_spectrum(spectrum: Spectrum, delta: float) -> np.ndarray:
    """Squared leapfrog frequencies omega_hat^2 = omega^2 (1 - delta^2 omega^2 / 4)."""
    z = delta * delta * spectrum.omega_sq
    if np.any(z > 4.0):
        raise ValueError("delta^2 * omega^2 exceeds 4; leapfrog frequencies are not real")
    return spectrum.omega_sq * (1.0 - 0.25 * z)


def modified_hamiltonian(state: PhaseState, spectrum: Spectrum, delta: float) -> float:
    """The energy the leapfrog conserves exactly: H with omega_hat in place of omega."""
    _check_dims(state, spectrum)
    what_sq = modified_spectrum(spectrum, delta)
    return 0.5 * float(np.dot(what_sq, state.x**2) + np.dot(state.v, state.v))


def energy_gap(state: PhaseState, spectrum: Spectrum, delta: float) -> float:
    """H - H_hat = delta^2/8 * sum(omega^4 x^2)."""
    _check_dims(state, spectrum)
    return 0.125 * delta * delta * float(np.dot(spectrum.omega_sq**2, state.x**2))


def leapfrog_angle(spectrum: Spectrum, delta: float) -> np.ndarray:
    """Per-coordinate rotation angle phi of one leapfrog step.

    cos(phi) = 1 - delta^2 w^2 / 2 and sin(phi) = delta w sqrt(1 - delta^2 w^2 / 4);
    atan2 keeps the branch correct as phi approaches pi.
    """
    z = delta * delta * spectrum.omega_sq
    if np.any(z > 4.0):
        raise ValueError("delta^2 * omega^2 exceeds 4")
    sin_phi = delta * spectrum.omega * np.sqrt(1.0 - 0.25 * z)
    cos_phi = 1.0 - 0.5 * z
    return np.arctan2(sin_phi, cos_phi)


def leapfrog_closed_form(state: PhaseState, spectrum: Spectrum, delta: float, n_steps: int) -> PhaseState:
    """Endpoint of n leapfrog steps via the per-coordinate rotation form.

    Rotates coordinate i by n * phi_i at frequency omega_hat_i.  White-box
    diagnostic twin of leapfrog_evolve; the two must agree to rounding.
    """
    _check_dims(state, spectrum)
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    phi = leapfrog_angle(spectrum, delta)
    what = np.sqrt(modified_spectrum(spectrum, delta))
    ang = n_steps * phi
    c, s = np.cos(ang), np.sin(ang)
    x = c * state.x + (s / what) * state.v
    v = -what * s * state.x + c * state.v
    return PhaseState(x, v)


def leapfrog_evolve(state: PhaseState, schedule: LeapfrogSchedule, oracle: FirstOrderOracle) -> LeapfrogResult:
    """Kick-drift-kick leapfrog driven purely by oracle gradients.

    Every step makes two counted queries (one at the step's start, one at
    its end); nothing is cached across steps, so grad_evals = 2 * n_steps.
    """
    if state.d != oracle.d:
        raise ValueError(f"state dimension {state.d} != oracle dimension {oracle.d}")
    if schedule.delta > _STEP_TOL / np.sqrt(oracle.beta):
        raise ValueError(
            f"delta={schedule.delta} exceeds the leapfrog stability bound 1/sqrt(beta)={1.0 / np.sqrt(oracle.beta)}"
        )
    delta = schedule.delta
    half = 0.5 * delta
    x, v = state.x.copy(), state.v.copy()
    f_initial = f_final = 0.0
    for step in range(schedule.n_steps):
        f, g = oracle.query(x)
        if step == 0:
            f_initial = f
        v = v - half * g
        x = x + delta * v
        f_final, g = oracle.query(x)
        v = v - half * g
    return LeapfrogResult(
        state=PhaseState(x, v),
        grad_evals=2 * schedule.n_steps,
        f_initial=f_initial,
        f_final=f_final,
    )
