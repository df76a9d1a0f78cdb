"""The three Markov kernels with randomized integration times, the lazy
wrapper, and chain execution with full gradient accounting.

All kernels share the same move: draw a fresh velocity v ~ N(0, I), draw
t uniformly from the finite time set, follow the dynamics for time t.
The idealized kernel uses the exact flow (white box, zero queries); the
unadjusted kernel runs the leapfrog through the oracle and always
accepts; the adjusted kernel adds a Metropolis filter with acceptance
min{1, exp(-H(x', -v') + H(x, v))}, which for this quadratic target is
the closed form min{1, exp(delta^2/8 * sum(omega^4 (x_i^2 - x_i'^2)))}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import LeapfrogSchedule, PhaseState, exact_evolve, leapfrog_evolve
from .model import FirstOrderOracle, GaussianTarget, Spectrum
from .seeding import hash64

VARIANTS = ("idealized", "unadjusted", "adjusted")

_BOUNDARY_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class TimeSet:
    """The randomized integration times {k * delta : 1 <= k <= k_max}.

    k_max is the largest k with k * delta strictly below the cutoff
    10*pi/sqrt(alpha).  Times are always integer multiples of delta, so a
    draw is an integer k and the leapfrog step count is exactly k.
    """

    delta: float
    k_max: int

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")

    @property
    def size(self) -> int:
        return self.k_max

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.k_max + 1) * self.delta

    def draw_k(self, rng: np.random.Generator) -> int:
        return int(rng.integers(1, self.k_max + 1))


def build_time_set(alpha: float, beta: float, delta: float) -> TimeSet:
    """Validated constructor for the time set.

    Requires 0 < delta <= pi/(20 sqrt(beta)), which guarantees both the
    leapfrog stability bound and the 1/2 lower bound on
    P[|cos(omega t)| <= 0.9] over the set.  k ranges from 1 (t = 0 would
    be a null move) up to the last multiple strictly below
    10*pi/sqrt(alpha); a multiple within relative 1e-12 of the cutoff is
    treated as on it, so resonant boundaries are handled identically on
    every platform.  alpha and beta enter independently (cutoff and
    stepsize bound); their ordering is the spectrum's invariant, not
    this one's.
    """
    if alpha <= 0.0 or beta <= 0.0:
        raise ValueError(f"alpha and beta must be positive, got alpha={alpha}, beta={beta}")
    delta_max = math.pi / (20.0 * math.sqrt(beta))
    if not (0.0 < delta <= delta_max * (1.0 + _BOUNDARY_SLACK)):
        raise ValueError(
            f"delta must be in (0, pi/(20 sqrt(beta))] = (0, {delta_max:.6g}], got {delta}"
        )
    cutoff = 10.0 * math.pi / math.sqrt(alpha)
    q = cutoff / delta
    k_max = int(math.ceil(q * (1.0 - _BOUNDARY_SLACK))) - 1
    if k_max < 10:
        raise ValueError(f"time set has only {k_max} elements; need at least 10")
    return TimeSet(delta=delta, k_max=k_max)


@dataclass(frozen=True, eq=False)
class KernelConfig:
    """Which kernel to run and how.

    The adjusted + lazy combination is the one the composed pipeline
    uses; the idealized kernel ignores delta except through the time
    set.  Trajectory recording can be thinned or disabled to bound
    memory on long runs.
    """

    variant: str
    delta: float
    lazy: bool
    time_set: TimeSet
    seed: int
    store_trajectory: bool = True
    store_per_step: bool = True
    thin: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.delta != self.time_set.delta:
            raise ValueError(
                f"config delta {self.delta} differs from the time set's delta {self.time_set.delta}"
            )
        if self.thin < 1:
            raise ValueError(f"thin must be >= 1, got {self.thin}")


@dataclass
class StepOutcome:
    """One kernel step: where it went and what it cost."""

    new_x: np.ndarray
    accepted: bool
    proposed_t: float
    grad_evals: int
    lazy_skip: bool


@dataclass
class RunStats:
    """Statistics of one chain run.

    acceptance_rate counts accepted non-lazy steps over non-lazy steps
    (0.0 when there were none).  grad_evals_cached is the auxiliary
    n+1-per-trajectory count a gradient-caching implementation would pay;
    it is reported for transparency, never used in scaling claims.
    """

    total_grad_evals: int
    acceptance_rate: float
    final_x: np.ndarray
    trajectory: list | None = None
    per_step: list | None = None
    grad_evals_cached: int = 0
    oracle_queries: int = 0
    proposal_steps: int = 0
    accepted_steps: int = 0
    adjusted_acceptance_rate: float | None = None


def closed_form_acceptance(x: np.ndarray, x_prime: np.ndarray, spectrum: Spectrum, delta: float) -> float:
    """min{1, exp(delta^2/8 * sum(omega^4 (x_i^2 - x_i'^2)))}.

    Equals the Metropolis acceptance computed from Hamiltonian values,
    because the leapfrog conserves the modified energy exactly and
    H - H_hat depends on position only.
    """
    w4 = spectrum.omega_sq**2
    z = 0.125 * delta * delta * float(np.dot(w4, np.asarray(x) ** 2) - np.dot(w4, np.asarray(x_prime) ** 2))
    return 1.0 if z >= 0.0 else math.exp(z)


def _acceptance_from_energies(f_x: float, v: np.ndarray, f_xp: float, v_prime: np.ndarray) -> float:
    """min{1, exp(H(x, v) - H(x', -v'))} from oracle potential values."""
    z = (f_x + 0.5 * float(np.dot(v, v))) - (f_xp + 0.5 * float(np.dot(v_prime, v_prime)))
    return 1.0 if z >= 0.0 else math.exp(z)


def step_idealized(x: np.ndarray, spectrum: Spectrum, time_set: TimeSet, rng: np.random.Generator) -> StepOutcome:
    """One exact-flow step: always accepted, zero gradient queries."""
    v = rng.standard_normal(spectrum.d)
    k = time_set.draw_k(rng)
    t = k * time_set.delta
    out = exact_evolve(PhaseState(x, v), spectrum, t)
    return StepOutcome(new_x=out.x, accepted=True, proposed_t=t, grad_evals=0, lazy_skip=False)


def step_unadjusted(x: np.ndarray, oracle: FirstOrderOracle, time_set: TimeSet, rng: np.random.Generator) -> StepOutcome:
    """One leapfrog step of time t = k*delta, always accepted; costs 2k queries."""
    v = rng.standard_normal(oracle.d)
    k = time_set.draw_k(rng)
    res = leapfrog_evolve(PhaseState(x, v), LeapfrogSchedule(time_set.delta, k), oracle)
    return StepOutcome(
        new_x=res.state.x,
        accepted=True,
        proposed_t=k * time_set.delta,
        grad_evals=res.grad_evals,
        lazy_skip=False,
    )


def step_adjusted(x: np.ndarray, oracle: FirstOrderOracle, time_set: TimeSet, rng: np.random.Generator) -> StepOutcome:
    """One Metropolis-adjusted leapfrog step.

    The energies come from the trajectory's endpoint queries, so the
    filter adds no oracle cost; a rejected proposal keeps the old
    position and still pays for its 2k gradient evaluations.
    """
    v = rng.standard_normal(oracle.d)
    k = time_set.draw_k(rng)
    res = leapfrog_evolve(PhaseState(x, v), LeapfrogSchedule(time_set.delta, k), oracle)
    accept_p = _acceptance_from_energies(res.f_initial, v, res.f_final, res.state.v)
    accepted = rng.random() < accept_p
    new_x = res.state.x if accepted else np.asarray(x, dtype=float).copy()
    return StepOutcome(
        new_x=new_x,
        accepted=accepted,
        proposed_t=k * time_set.delta,
        grad_evals=res.grad_evals,
        lazy_skip=False,
    )


def lazy_wrap(step_fn):
    """Make a step function lazy: with probability 1/2 stay put at no cost.

    step_fn takes (x, rng) and returns a StepOutcome; the coin is drawn
    before any of the step's own randomness.
    """

    def lazy_step(x, rng):
        if rng.random() < 0.5:
            return StepOutcome(
                new_x=np.asarray(x, dtype=float).copy(),
                accepted=False,
                proposed_t=0.0,
                grad_evals=0,
                lazy_skip=True,
            )
        return step_fn(x, rng)

    return lazy_step


def run_chain(config: KernelConfig, target: GaussianTarget, x0: np.ndarray, K: int) -> RunStats:
    """Run K kernel steps from x0; deterministic given config.seed."""
    x0 = np.asarray(x0, dtype=float)
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    if x0.shape != (target.d,):
        raise ValueError(f"x0 must have shape ({target.d},), got {x0.shape}")

    oracle: FirstOrderOracle | None = None
    if config.variant == "idealized":
        if target.rotation is not None:
            raise ValueError("the idealized kernel needs the diagonal basis; rotated targets are black-box only")
        spectrum = target.spectrum
        base = lambda x, rng: step_idealized(x, spectrum, config.time_set, rng)
    else:
        oracle = FirstOrderOracle(target)
        if config.variant == "unadjusted":
            base = lambda x, rng: step_unadjusted(x, oracle, config.time_set, rng)
        else:
            base = lambda x, rng: step_adjusted(x, oracle, config.time_set, rng)
    step = lazy_wrap(base) if config.lazy else base

    rng = np.random.default_rng(config.seed)
    x = x0.copy()
    trajectory = [x0.copy()] if config.store_trajectory else None
    per_step = [] if config.store_per_step else None
    total = cached = proposals = accepted = 0
    for i in range(K):
        out = step(x, rng)
        x = out.new_x
        total += out.grad_evals
        if not out.lazy_skip:
            proposals += 1
            accepted += int(out.accepted)
            if out.grad_evals > 0:
                cached += out.grad_evals // 2 + 1
        if per_step is not None:
            per_step.append(out)
        if trajectory is not None and (i + 1) % config.thin == 0:
            trajectory.append(x.copy())

    rate = accepted / proposals if proposals > 0 else 0.0
    return RunStats(
        total_grad_evals=total,
        acceptance_rate=rate,
        final_x=x,
        trajectory=trajectory,
        per_step=per_step,
        grad_evals_cached=cached,
        oracle_queries=oracle.query_count if oracle is not None else 0,
        proposal_steps=proposals,
        accepted_steps=accepted,
    )


def gamma_for_accuracy(epsilon: float) -> float:
    """Concentration parameter gamma = max{1, ln(1/s)} at s = epsilon/12."""
    if not (0.0 < epsilon < 0.5):
        raise ValueError(f"epsilon must be in (0, 1/2), got {epsilon}")
    return max(1.0, math.log(12.0 / epsilon))


def choose_step_size(alpha: float, beta: float, d: int, epsilon: float, gamma: float | None = None) -> float:
    """Default stepsize for the adjusted pipeline.

    min{pi/(20 sqrt(beta)), 1/(10 sqrt(gamma beta) d^(1/4))}: the first
    term keeps the time-set guarantee, the second keeps both the
    acceptance and the density-ratio bounds on the concentration shell.
    """
    if gamma is None:
        gamma = gamma_for_accuracy(epsilon)
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    return min(math.pi / (20.0 * math.sqrt(beta)), 1.0 / (10.0 * math.sqrt(gamma * beta) * d**0.25))


def default_k0(d: int, kappa: float, alpha: float, x0_inf: float, epsilon: float, constant: float = 40.0) -> int:
    """Warm-up length ceil(C0 * log(d kappa (sqrt(alpha) |x0|_inf + 1) / epsilon))."""
    arg = d * kappa * (math.sqrt(alpha) * x0_inf + 1.0) / epsilon
    return max(1, math.ceil(constant * math.log(max(arg, math.e))))


def default_k(d: int, kappa: float, epsilon: float, constant: float = 40.0) -> int:
    """Adjusted-phase length ceil(C * log(d kappa log(1/eps)) * log(1/eps))."""
    log_eps = max(1.0, math.log(1.0 / epsilon))
    return max(1, math.ceil(constant * math.log(max(d * kappa * log_eps, math.e)) * log_eps))


def run_pipeline(
    target: GaussianTarget,
    x0: np.ndarray,
    K0: int,
    K: int,
    delta: float,
    seed: int,
    store_trajectory: bool = True,
    store_per_step: bool = True,
    thin: int = 1,
) -> RunStats:
    """Composed run: K0 unadjusted warm-up steps, then K lazy adjusted steps,
    with the same stepsize and time set and unified gradient accounting."""
    if K0 < 0 or K < 0:
        raise ValueError(f"K0 and K must be >= 0, got K0={K0}, K={K}")
    spec = target.spectrum
    time_set = build_time_set(spec.alpha, spec.beta, delta)
    cfg_warm = KernelConfig(
        variant="unadjusted", delta=delta, lazy=False, time_set=time_set,
        seed=hash64(seed, 1), store_trajectory=store_trajectory,
        store_per_step=store_per_step, thin=thin,
    )
    cfg_adj = KernelConfig(
        variant="adjusted", delta=delta, lazy=True, time_set=time_set,
        seed=hash64(seed, 2), store_trajectory=store_trajectory,
        store_per_step=store_per_step, thin=thin,
    )
    warm = run_chain(cfg_warm, target, x0, K0)
    adj = run_chain(cfg_adj, target, warm.final_x, K)

    proposals = warm.proposal_steps + adj.proposal_steps
    accepted = warm.accepted_steps + adj.accepted_steps
    trajectory = None
    if store_trajectory:
        trajectory = list(warm.trajectory) + list(adj.trajectory[1:])
    per_step = None
    if store_per_step:
        per_step = list(warm.per_step) + list(adj.per_step)
    return RunStats(
        total_grad_evals=warm.total_grad_evals + adj.total_grad_evals,
        acceptance_rate=accepted / proposals if proposals > 0 else 0.0,
        final_x=adj.final_x,
        trajectory=trajectory,
        per_step=per_step,
        grad_evals_cached=warm.grad_evals_cached + adj.grad_evals_cached,
        oracle_queries=warm.oracle_queries + adj.oracle_queries,
        proposal_steps=proposals,
        accepted_steps=accepted,
        adjusted_acceptance_rate=adj.acceptance_rate if adj.proposal_steps > 0 else None,
    )
