"""The lemma-check suite behind `randhmc check-lemmas`.

Each check verifies one closed form or bound end to end at runtime sizes:
exact-integrator agreement, conservation, reversibility, the acceptance
closed form, the cosine probability and product decay over the time set,
the per-coordinate K-step law, the concentration shell, the density
ratio, the TV bound, and one-step stationarity.  Checks are pure given
the config seed and report machine-readable pass/fail details.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from . import diagnostics as dg
from .dynamics import (
    LeapfrogSchedule,
    PhaseState,
    energy_gap,
    hamiltonian,
    leapfrog_closed_form,
    leapfrog_evolve,
    modified_hamiltonian,
    modified_spectrum,
)
from .ensemble import EnsembleChain
from .kernels import build_time_set, choose_step_size, closed_form_acceptance
from .model import FirstOrderOracle, Spectrum, make_spectrum, make_target, sample_exact
from .seeding import hash64

PASS, FAIL, NOT_APPLICABLE = "pass", "fail", "not-applicable"


@dataclass
class CheckConfig:
    """Problem sizes for the lemma suite; defaults run in seconds."""

    alpha: float = 1.0
    beta: float = 100.0
    d: int = 8
    delta: float | None = None  # defaults to pi/(20 sqrt(beta))
    seed: int = 0
    spectrum_kind: str = "two_point"
    n_mc: int = 20_000
    n_states: int = 1_000
    n_steps: int = 10_000
    n_omega_grid: int = 200

    def __post_init__(self):
        if not (0.0 < self.alpha <= self.beta):
            raise ValueError(f"need 0 < alpha <= beta, got {self.alpha}, {self.beta}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")

    @property
    def delta_value(self) -> float:
        if self.delta is not None:
            return self.delta
        return math.pi / (20.0 * math.sqrt(self.beta))

    @classmethod
    def from_dict(cls, raw: dict) -> "CheckConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass
class CheckResult:
    name: str
    status: str
    detail: str
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == PASS


def _spectrum(cfg: CheckConfig) -> Spectrum:
    return make_spectrum(cfg.d, cfg.spectrum_kind, cfg.alpha, cfg.beta, seed=cfg.seed)


def check_time_set_size(cfg: CheckConfig) -> CheckResult:
    ts = build_time_set(cfg.alpha, cfg.beta, cfg.delta_value)
    ok = ts.size >= 10 and ts.times[-1] < 10 * math.pi / math.sqrt(cfg.alpha)
    ok = ok and np.array_equal(ts.times, np.arange(1, ts.k_max + 1) * ts.delta)
    return CheckResult(
        "time-set-size",
        PASS if ok else FAIL,
        f"|T| = {ts.size}, all times integer multiples of delta below the cutoff",
    )


def check_cos_probability(cfg: CheckConfig) -> CheckResult:
    ts = build_time_set(cfg.alpha, cfg.beta, cfg.delta_value)
    grid = np.geomspace(math.sqrt(cfg.alpha), math.sqrt(cfg.beta), cfg.n_omega_grid)
    worst = min(dg.cos_time_probability(float(w), ts) for w in grid)
    return CheckResult(
        "cos-probability",
        PASS if worst >= 0.5 else FAIL,
        f"min over {cfg.n_omega_grid} frequencies of P[|cos(wt)| <= 0.9] = {worst:.4f} (need >= 0.5)",
    )


def check_cos_product_decay(cfg: CheckConfig) -> CheckResult:
    ts = build_time_set(cfg.alpha, cfg.beta, cfg.delta_value)
    omegas = np.geomspace(math.sqrt(cfg.alpha), math.sqrt(cfg.beta), 3)
    worst_margin = math.inf
    for K in (8, 16, 32):
        for w in omegas:
            est = dg.cos_product_tail(float(w), ts, K=K, n_mc=max(cfg.n_mc, 10_000), seed=hash64(cfg.seed, K))
            se = math.sqrt(max(est * (1 - est), 1e-9) / max(cfg.n_mc, 10_000))
            worst_margin = min(worst_margin, math.exp(-K / 8) + 3 * se - est)
    return CheckResult(
        "cos-product-decay",
        PASS if worst_margin >= 0.0 else FAIL,
        f"tail estimate below exp(-K/8) + 3 SE with worst margin {worst_margin:.2e}",
    )


def check_kstep_law(cfg: CheckConfig) -> CheckResult:
    rng = np.random.default_rng(hash64(cfg.seed, 3))
    ts = build_time_set(cfg.alpha, cfg.beta, cfg.delta_value)
    n = max(cfg.n_mc, 10_000)
    worst = 0.0
    for _ in range(5):
        x0 = float(rng.uniform(0.5, 2.0))
        w = float(rng.uniform(math.sqrt(cfg.alpha), math.sqrt(cfg.beta)))
        times = ts.times[rng.integers(0, ts.k_max, size=int(rng.integers(1, 6)))]
        z = np.full(n, x0)
        for t in times:
            z = math.cos(w * t) * z + math.sin(w * t) / w * rng.standard_normal(n)
        law = dg.kstep_coordinate_law(x0, w, times)
        zm = abs(z.mean() - law.mean) / (4 * z.std() / math.sqrt(n))
        zv = abs(np.var(z) - law.variance) / (4 * np.var(z) * math.sqrt(2.0 / (n - 1)))
        worst = max(worst, zm, zv)
    return CheckResult(
        "kstep-law",
        PASS if worst <= 1.0 else FAIL,
        f"moment deviations at most {worst:.2f} of the 4-sigma allowance",
    )


def check_leapfrog_exactness(cfg: CheckConfig) -> CheckResult:
    spec = _spectrum(cfg)
    delta = cfg.delta_value
    rng = np.random.default_rng(hash64(cfg.seed, 4))
    state = PhaseState(rng.standard_normal(cfg.d), rng.standard_normal(cfg.d))
    oracle = FirstOrderOracle(make_target(spec))
    what = np.sqrt(modified_spectrum(spec, delta))
    x, v = state.x.copy(), state.v.copy()
    worst = 0.0
    n_done = 0
    block = 100
    while n_done < cfg.n_steps:
        res = leapfrog_evolve(PhaseState(x, v), LeapfrogSchedule(delta, block), oracle)
        x, v = res.state.x, res.state.v
        n_done += block
        want = leapfrog_closed_form(state, spec, delta, n_done)
        r = np.sqrt(what**2 * want.x**2 + want.v**2)
        err = np.max(np.maximum(what * np.abs(x - want.x), np.abs(v - want.v)) / r)
        worst = max(worst, float(err))
    return CheckResult(
        "leapfrog-exactness",
        PASS if worst <= 1e-8 else FAIL,
        f"max relative deviation from the rotation form over {cfg.n_steps} steps = {worst:.2e} (need <= 1e-8)",
    )


def check_energy_conservation(cfg: CheckConfig) -> CheckResult:
    spec = _spectrum(cfg)
    delta = cfg.delta_value
    rng = np.random.default_rng(hash64(cfg.seed, 5))
    state = PhaseState(rng.standard_normal(cfg.d), rng.standard_normal(cfg.d))
    oracle = FirstOrderOracle(make_target(spec))
    h0 = modified_hamiltonian(state, spec, delta)
    x, v = state.x, state.v
    worst = 0.0
    for _ in range(cfg.n_steps // 100):
        res = leapfrog_evolve(PhaseState(x, v), LeapfrogSchedule(delta, 100), oracle)
        x, v = res.state.x, res.state.v
        worst = max(worst, abs(modified_hamiltonian(res.state, spec, delta) - h0) / h0)
    return CheckResult(
        "energy-conservation",
        PASS if worst <= 1e-9 else FAIL,
        f"max relative drift of the conserved energy over {cfg.n_steps} steps = {worst:.2e} (need <= 1e-9)",
    )


def check_energy_gap(cfg: CheckConfig) -> CheckResult:
    spec = _spectrum(cfg)
    delta = cfg.delta_value
    rng = np.random.default_rng(hash64(cfg.seed, 6))
    worst = 0.0
    for _ in range(cfg.n_states):
        s = PhaseState(rng.standard_normal(cfg.d), rng.standard_normal(cfg.d))
        h = hamiltonian(s, spec)
        lhs = h - modified_hamiltonian(s, spec, delta)
        worst = max(worst, abs(lhs - energy_gap(s, spec, delta)) / (1.0 + h))
    return CheckResult(
        "energy-gap",
        PASS if worst <= 1e-12 else FAIL,
        f"max |(H - H_hat) - delta^2/8 sum(w^4 x^2)| / (1 + H) = {worst:.2e} over {cfg.n_states} states",
    )


def check_reversibility(cfg: CheckConfig) -> CheckResult:
    spec = _spectrum(cfg)
    delta = cfg.delta_value
    ts = build_time_set(cfg.alpha, cfg.beta, delta)
    rng = np.random.default_rng(hash64(cfg.seed, 7))
    oracle = FirstOrderOracle(make_target(spec))
    worst = 0.0
    for _ in range(20):
        state = PhaseState(rng.standard_normal(cfg.d), rng.standard_normal(cfg.d))
        k = min(ts.draw_k(rng), 500)
        fwd = leapfrog_evolve(state, LeapfrogSchedule(delta, k), oracle)
        back = leapfrog_evolve(PhaseState(fwd.state.x, -fwd.state.v), LeapfrogSchedule(delta, k), oracle)
        worst = max(
            worst,
            float(np.max(np.abs(back.state.x - state.x))),
            float(np.max(np.abs(back.state.v + state.v))),
        )
    return CheckResult(
        "reversibility",
        PASS if worst <= 1e-10 else FAIL,
        f"max |leapfrog(x', -v') - (x, -v)| = {worst:.2e} (need <= 1e-10)",
    )


def check_acceptance_closed_form(cfg: CheckConfig) -> CheckResult:
    spec = _spectrum(cfg)
    target = make_target(spec)
    delta = cfg.delta_value
    ts = build_time_set(cfg.alpha, cfg.beta, delta)
    rng = np.random.default_rng(hash64(cfg.seed, 8))
    oracle = FirstOrderOracle(target)
    worst = 0.0
    for _ in range(200):
        x = rng.standard_normal(cfg.d)
        v = rng.standard_normal(cfg.d)
        k = min(ts.draw_k(rng), 300)
        res = leapfrog_evolve(PhaseState(x, v), LeapfrogSchedule(delta, k), oracle)
        h_in = res.f_initial + 0.5 * float(v @ v)
        h_out = res.f_final + 0.5 * float(res.state.v @ res.state.v)
        a_energy = min(1.0, math.exp(h_in - h_out))
        worst = max(worst, abs(a_energy - closed_form_acceptance(x, res.state.x, spec, delta)))
    return CheckResult(
        "acceptance-closed-form",
        PASS if worst <= 1e-10 else FAIL,
        f"max |A(energies) - A(x, x')| = {worst:.2e} over 200 proposals (need <= 1e-10)",
    )


def check_proposal_density(cfg: CheckConfig) -> CheckResult:
    w = math.sqrt(cfg.beta)
    t = 0.37 / w
    val, _ = integrate.quad(lambda z: dg.proposal_density(1.3, z, w, t), -40 / w, 40 / w)
    ok = abs(val - 1.0) <= 1e-6
    try:
        dg.proposal_density(1.0, 0.0, 1.0, math.pi)
        degenerate_ok = False
    except dg.DegenerateProposalError:
        degenerate_ok = True
    return CheckResult(
        "proposal-density",
        PASS if ok and degenerate_ok else FAIL,
        f"density integrates to {val:.8f}; degenerate time raises = {degenerate_ok}",
    )


def check_concentration_shell(cfg: CheckConfig) -> CheckResult:
    spec = _spectrum(cfg)
    tails = []
    for i, gamma in enumerate((1.0, 2.0, 4.0)):
        cset = dg.ConcentrationSet(gamma=gamma, spectrum=spec)
        m = dg.concentration_measure(cset, "pi", 0.0, n_mc=max(cfg.n_mc, 10_000), seed=hash64(cfg.seed, 9, i))
        tails.append(1.0 - m)
    decreasing = all(b < a for a, b in zip(tails, tails[1:]) if a > 0)
    big = dg.concentration_measure(
        dg.ConcentrationSet(gamma=20.0, spectrum=spec), "pi", 0.0, n_mc=max(cfg.n_mc, 10_000), seed=hash64(cfg.seed, 9, 9)
    )
    ok = decreasing and big >= 0.999
    return CheckResult(
        "concentration-shell",
        PASS if ok else FAIL,
        f"tail mass decreasing over gamma in (1, 2, 4): {[f'{t:.3g}' for t in tails]}; gamma=20 measure {big:.4f}",
    )


def check_density_ratio_shell(cfg: CheckConfig) -> CheckResult:
    spec = _spectrum(cfg)
    gamma = 2.0
    delta = 1.0 / (10.0 * math.sqrt(gamma * cfg.beta) * cfg.d**0.25)
    xs = sample_exact(make_target(spec), max(cfg.n_mc, 10_000), seed=hash64(cfg.seed, 10))
    cset = dg.ConcentrationSet(gamma=gamma, spectrum=spec)
    on_shell = xs[cset.contains(xs)]
    ratios = dg.density_ratio(on_shell, spec, delta)
    ok = on_shell.shape[0] > 0 and bool(np.all((ratios >= 0.9) & (ratios <= 1.1)))
    return CheckResult(
        "density-ratio-shell",
        PASS if ok else FAIL,
        f"{on_shell.shape[0]} shell samples, ratio range [{ratios.min():.4f}, {ratios.max():.4f}] within [0.9, 1.1]",
    )


def check_tv_bound(cfg: CheckConfig) -> CheckResult:
    rng = np.random.default_rng(hash64(cfg.seed, 11))
    worst = -math.inf
    for d in (1, 2):
        for _ in range(5):
            beta = float(rng.uniform(1.0, 16.0))
            spec = make_spectrum(d, "log_uniform", 0.5, beta, seed=int(rng.integers(100_000)))
            delta = float(rng.uniform(0.1, 1.0)) / math.sqrt(beta)
            tv = dg.numerical_tv(spec, delta)
            worst = max(worst, tv - dg.tv_bound_modified(spec, delta))
    return CheckResult(
        "tv-bound",
        PASS if worst <= 1e-9 else FAIL,
        f"max (numerical TV - bound) = {worst:.2e} over 10 random pairs (need <= 0)",
    )


def check_acceptance_bound(cfg: CheckConfig) -> CheckResult:
    spec = _spectrum(cfg)
    target = make_target(spec)
    gamma = 2.0
    delta = 1.0 / (10.0 * math.sqrt(gamma * cfg.beta) * cfg.d**0.25)
    ts = build_time_set(cfg.alpha, cfg.beta, delta)
    cset = dg.ConcentrationSet(gamma=gamma, spectrum=spec)
    bound = dg.acceptance_lower_bound(gamma, delta, cfg.beta, cfg.d)
    rng = np.random.default_rng(hash64(cfg.seed, 12))
    xs = sample_exact(target, 2_000, seed=hash64(cfg.seed, 13))
    xs = xs[cset.contains(xs)][:100]
    oracle = FirstOrderOracle(target)
    n_checked = 0
    worst = 1.0
    for x in xs:
        v = rng.standard_normal(cfg.d)
        k = min(ts.draw_k(rng), 400)
        res = leapfrog_evolve(PhaseState(x, v), LeapfrogSchedule(delta, k), oracle)
        if bool(cset.contains(res.state.x[None, :])[0]):
            worst = min(worst, closed_form_acceptance(x, res.state.x, spec, delta))
            n_checked += 1
    ok = n_checked > 0 and worst >= bound
    return CheckResult(
        "acceptance-bound",
        PASS if ok else FAIL,
        f"min acceptance {worst:.6f} >= bound {bound:.6f} on {n_checked} shell-to-shell proposals",
    )


def check_warm_start_gap(cfg: CheckConfig) -> CheckResult:
    spec = _spectrum(cfg)
    s = 0.01
    gamma = max(1.0, math.log(1.0 / s))
    delta = 0.9 / (10.0 * math.sqrt(gamma * cfg.beta) * cfg.d**0.25)
    try:
        val = dg.warmness_gap_bound(s, delta, spec)
    except dg.NotApplicableError as exc:
        return CheckResult("warm-start-gap", NOT_APPLICABLE, str(exc))
    ok = val == 3.0 * s
    return CheckResult(
        "warm-start-gap", PASS if ok else FAIL, f"gap bound {val} = 3s at s = {s}"
    )


def check_stationarity_one_step(cfg: CheckConfig) -> CheckResult:
    d = min(cfg.d, 8)
    spec = make_spectrum(d, cfg.spectrum_kind, cfg.alpha, cfg.beta, seed=cfg.seed)
    target = make_target(spec)
    delta = choose_step_size(cfg.alpha, cfg.beta, d, epsilon=0.05)
    ts = build_time_set(cfg.alpha, cfg.beta, delta)
    n = max(cfg.n_mc, 10_000)
    start = sample_exact(target, n, seed=hash64(cfg.seed, 14))
    chain = EnsembleChain(spec, start, "adjusted", ts, lazy=False,
                          seeds=[hash64(cfg.seed, 15, r) for r in range(n)])
    chain.step()
    rate = chain.accepted.sum() / chain.proposals.sum()
    crit = dg.ks_critical_value(0.01 / d, n)
    ks_max = 0.0
    for j in range(d):
        stat = dg.ks_statistic(chain.positions[:, j], stats.norm(scale=1.0 / spec.omega[j]).cdf)
        ks_max = max(ks_max, stat)
    energy = dg.energy_statistic(chain.positions, spec)
    ok = ks_max <= crit and energy <= dg.ks_critical_value(0.01, n) and rate >= 0.95
    return CheckResult(
        "stationarity-one-step",
        PASS if ok else FAIL,
        f"one adjusted step from exact samples: ks_max {ks_max:.4f} (crit {crit:.4f}), "
        f"energy KS {energy:.4f}, acceptance {rate:.4f}",
    )


CHECKS = {
    "time-set-size": check_time_set_size,
    "cos-probability": check_cos_probability,
    "cos-product-decay": check_cos_product_decay,
    "kstep-law": check_kstep_law,
    "leapfrog-exactness": check_leapfrog_exactness,
    "energy-conservation": check_energy_conservation,
    "energy-gap": check_energy_gap,
    "reversibility": check_reversibility,
    "acceptance-closed-form": check_acceptance_closed_form,
    "proposal-density": check_proposal_density,
    "concentration-shell": check_concentration_shell,
    "density-ratio-shell": check_density_ratio_shell,
    "tv-bound": check_tv_bound,
    "acceptance-bound": check_acceptance_bound,
    "warm-start-gap": check_warm_start_gap,
    "stationarity-one-step": check_stationarity_one_step,
}


def run_checks(cfg: CheckConfig, only: str | None = None) -> list[CheckResult]:
    """Run the suite (or a single named check); config errors surface as
    ValueError before any check executes."""
    if only is not None:
        if only not in CHECKS:
            raise ValueError(f"unknown check {only!r}; available: {', '.join(sorted(CHECKS))}")
        names = [only]
    else:
        names = list(CHECKS)
    build_time_set(cfg.alpha, cfg.beta, cfg.delta_value)  # config sanity up front
    results = []
    for name in names:
        t0 = time.perf_counter()
        res = CHECKS[name](cfg)
        res.elapsed = time.perf_counter() - t0
        results.append(res)
    return results
