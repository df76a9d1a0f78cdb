"""Experiment runner: chain runs, condition-number and dimension sweeps
with doubling-until-converged schedules, slope fitting, and CSV emission.

Convergence is a proxy for distributional accuracy, since total-variation
distance is not estimable from samples in high dimension: a run counts as
converged when pooled replica endpoints pass a per-coordinate KS test
against the exact marginals (Bonferroni-corrected at the configured
level) and an energy-statistic KS test.  Gradient evaluations are the
cost model; wall time is recorded but never judged.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .diagnostics import energy_statistic, ks_critical_value
from .ensemble import EnsembleChain
from .kernels import (
    KernelConfig,
    build_time_set,
    choose_step_size,
    default_k0,
    gamma_for_accuracy,
    run_chain,
    run_pipeline,
)
from .model import Spectrum, make_spectrum, make_target
from .seeding import hash64

CSV_FIELDS = [
    "experiment_id",
    "d",
    "kappa",
    "alpha",
    "beta",
    "delta",
    "K0",
    "K",
    "seed",
    "grad_evals",
    "acceptance_rate",
    "ks_max",
    "energy_ks",
    "converged",
    "wall_time_seconds",
]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


@dataclass
class SweepConfig:
    """Grid definition and thresholds for a scaling sweep.

    beta = kappa * alpha at every grid point.  Overrides pin delta, the
    warm-up length K0, a fixed adjusted length K (instead of doubling),
    or the shell parameter gamma; the documented defaults instantiate
    the theorem schedules and are far longer than the empirical mixing
    point, so sweep configs usually set k0.
    """

    dims: list
    kappas: list
    alpha: float = 1.0
    epsilon: float = 0.05
    replicas: int = 1000
    seed: int = 0
    spectrum_kind: str = "two_point"
    ks_level: float = 0.01
    bonferroni: bool = True
    k_cap: int = 64
    delta: float | None = None
    k0: int | None = None
    k: int | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.replicas < 1:
            raise ConfigError(f"replicas must be >= 1, got {self.replicas}")
        if not (0.0 < self.epsilon < 0.5):
            raise ConfigError(f"epsilon must be in (0, 1/2), got {self.epsilon}")
        if self.alpha <= 0.0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not all(int(d) == d and d >= 1 for d in self.dims):
            raise ConfigError(f"dims must be positive integers, got {self.dims}")
        if not all(k >= 1.0 for k in self.kappas):
            raise ConfigError(f"kappas must be >= 1, got {self.kappas}")
        if not (0.0 < self.ks_level < 1.0):
            raise ConfigError(f"ks_level must be in (0, 1), got {self.ks_level}")
        if self.k_cap < 1:
            raise ConfigError(f"k_cap must be >= 1, got {self.k_cap}")

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        raw = dict(raw)
        overrides = raw.pop("overrides", {}) or {}
        unknown = set(overrides) - {"delta", "k0", "k", "gamma"}
        if unknown:
            raise ConfigError(f"unknown override keys: {sorted(unknown)}")
        known = set(cls.__dataclass_fields__)
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        try:
            return cls(**raw, **overrides)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class SweepRecord:
    """One row per (grid point, replica)."""

    experiment_id: str
    d: int
    kappa: float
    alpha: float
    beta: float
    delta: float
    K0: int
    K: int
    seed: int
    grad_evals: int
    acceptance_rate: float
    ks_max: float
    energy_ks: float
    converged: bool
    wall_time_seconds: float

    def to_row(self) -> list[str]:
        return [_format_value(getattr(self, f)) for f in CSV_FIELDS]


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_records(path, records):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_FIELDS)
            for rec in records:
                writer.writerow(rec.to_row())
    except OSError as exc:
        raise IOError(f"cannot write CSV to {path}: {exc}") from exc


def read_records(path) -> list[SweepRecord]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
    except OSError as exc:
        raise IOError(f"cannot read CSV from {path}: {exc}") from exc
    out = []
    for row in rows:
        out.append(
            SweepRecord(
                experiment_id=row["experiment_id"],
                d=int(row["d"]),
                kappa=float(row["kappa"]),
                alpha=float(row["alpha"]),
                beta=float(row["beta"]),
                delta=float(row["delta"]),
                K0=int(row["K0"]),
                K=int(row["K"]),
                seed=int(row["seed"]),
                grad_evals=int(row["grad_evals"]),
                acceptance_rate=float(row["acceptance_rate"]),
                ks_max=float(row["ks_max"]),
                energy_ks=float(row["energy_ks"]),
                converged=row["converged"] == "true",
                wall_time_seconds=float(row["wall_time_seconds"]),
            )
        )
    return out


def pooled_ks_stats(positions: np.ndarray, spectrum: Spectrum):
    """(max per-coordinate KS vs the exact marginals, energy KS) for pooled
    diagonal-basis samples."""
    n, d = positions.shape
    xs = np.sort(positions, axis=0)
    f = stats.norm.cdf(xs * spectrum.omega[None, :])
    i = np.arange(1, n + 1)[:, None] / n
    ks_all = np.maximum((i - f).max(axis=0), (f - (i - 1.0 / n)).max(axis=0))
    return float(ks_all.max()), energy_statistic(positions, spectrum)


def _point_parameters(config: SweepConfig, d: int, kappa: float):
    beta = kappa * config.alpha
    gamma = config.gamma if config.gamma is not None else gamma_for_accuracy(config.epsilon)
    delta = config.delta if config.delta is not None else choose_step_size(
        config.alpha, beta, d, config.epsilon, gamma=gamma
    )
    x0 = np.full(d, 1.0 / math.sqrt(config.alpha))  # |x0| = sqrt(d/alpha)
    k0 = config.k0 if config.k0 is not None else default_k0(
        d, kappa, config.alpha, float(np.max(np.abs(x0))), config.epsilon
    )
    return beta, gamma, delta, x0, k0


def run_grid_point(config: SweepConfig, grid_index: int, d: int, kappa: float) -> list[SweepRecord]:
    """Warm-started pipeline for one grid point: K0 unadjusted steps, then
    lazy adjusted steps with K doubling until the pooled endpoints pass
    the convergence thresholds (or k_cap is hit)."""
    t_start = time.perf_counter()
    beta, gamma, delta, x0, k0 = _point_parameters(config, d, kappa)
    spectrum = make_spectrum(d, config.spectrum_kind, config.alpha, beta, seed=hash64(config.seed, grid_index, 0xA))
    time_set = build_time_set(config.alpha, beta, delta)
    n = config.replicas
    rep_seeds = [hash64(config.seed, grid_index, r) for r in range(n)]

    warm = EnsembleChain(
        spectrum, np.tile(x0, (n, 1)), "unadjusted", time_set, lazy=False,
        seeds=[hash64(s, 1) for s in rep_seeds],
    )
    warm.run(k0)
    adj = EnsembleChain(
        spectrum, warm.positions, "adjusted", time_set, lazy=True,
        seeds=[hash64(s, 2) for s in rep_seeds],
    )

    per_level = config.ks_level / d if config.bonferroni else config.ks_level
    crit_coord = ks_critical_value(per_level, n)
    crit_energy = ks_critical_value(config.ks_level, n)

    if config.k is not None:
        test_points = [config.k]
    else:
        test_points = []
        k = 1
        while k < config.k_cap:
            test_points.append(k)
            k *= 2
        test_points.append(config.k_cap)

    converged = False
    ks_max = energy_ks = float("nan")
    k_used = 0
    for k_target in test_points:
        adj.run(k_target - adj.steps_taken)
        k_used = k_target
        if n < 100:  # not enough pooled endpoints for the KS thresholds
            continue
        ks_max, energy_ks = pooled_ks_stats(adj.positions, spectrum)
        if ks_max <= crit_coord and energy_ks <= crit_energy:
            converged = True
            break

    grad = warm.grad_evals + adj.grad_evals
    rate = float(adj.accepted.sum() / max(adj.proposals.sum(), 1))
    wall = time.perf_counter() - t_start
    return [
        SweepRecord(
            experiment_id=f"g{grid_index:03d}r{r:05d}",
            d=d,
            kappa=kappa,
            alpha=config.alpha,
            beta=beta,
            delta=delta,
            K0=k0,
            K=k_used,
            seed=rep_seeds[r],
            grad_evals=int(grad[r]),
            acceptance_rate=rate,
            ks_max=ks_max,
            energy_ks=energy_ks,
            converged=converged,
            wall_time_seconds=wall,
        )
        for r in range(n)
    ]


def run_sweep(config: SweepConfig, threads: int = 1) -> list[SweepRecord]:
    """All grid points (dims x kappas), replicas vectorized within a point,
    points optionally spread over threads; output order is grid order, so
    results are byte-reproducible regardless of thread count."""
    grid = [(d, kappa) for d in config.dims for kappa in config.kappas]
    if not grid:
        return []
    if threads <= 1:
        results = [run_grid_point(config, gi, d, kappa) for gi, (d, kappa) in enumerate(grid)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run_grid_point, config, gi, d, kappa)
                for gi, (d, kappa) in enumerate(grid)
            ]
            results = [f.result() for f in futures]
    return [rec for point in results for rec in point]


def _grouped_medians(records, axis: str):
    converged = [r for r in records if r.converged]
    groups: dict[float, list[int]] = {}
    for r in converged:
        groups.setdefault(getattr(r, axis), []).append(r.grad_evals)
    return {k: np.asarray(v) for k, v in sorted(groups.items())}


def fit_scaling(records, axis: str):
    """OLS slope of log(median grad_evals) against log(axis value) over
    converged records; returns (slope, stderr)."""
    if axis not in ("kappa", "d"):
        raise ValueError(f"axis must be 'kappa' or 'd', got {axis!r}")
    groups = _grouped_medians(records, axis)
    if len(groups) < 3:
        raise ValueError(
            f"need >= 3 grid points with converged records along {axis}, got {len(groups)}"
        )
    x = np.log([k for k in groups])
    y = np.log([float(np.median(v)) for v in groups.values()])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(len(x) - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / float(((x - x.mean()) ** 2).sum()))
    return float(slope), se


def emit_plot_data(records, axis: str, out_path):
    """Tab-separated (log x, log median grad_evals, err_lo, err_hi) per grid
    value, error bars from the replica quartiles in log space (zero width
    for a single replica)."""
    if axis not in ("kappa", "d"):
        raise ValueError(f"axis must be 'kappa' or 'd', got {axis!r}")
    groups = _grouped_medians(records, axis)
    try:
        with open(out_path, "w") as fh:
            fh.write(f"log_{axis}\tlog_median_grad_evals\terr_lo\terr_hi\n")
            for k, v in groups.items():
                med = float(np.median(v))
                q1, q3 = float(np.percentile(v, 25)), float(np.percentile(v, 75))
                lo = math.log(med) - math.log(q1) if q1 > 0 else 0.0
                hi = math.log(q3) - math.log(med) if med > 0 else 0.0
                fh.write(
                    f"{math.log(k):.17g}\t{math.log(med):.17g}\t{lo:.17g}\t{hi:.17g}\n"
                )
    except OSError as exc:
        raise IOError(f"cannot write plot data to {out_path}: {exc}") from exc


@dataclass
class ChainRunConfig:
    """Configuration for `randhmc run-chain`."""

    variant: str  # pipeline | adjusted | unadjusted | idealized
    d: int
    kappa: float
    K: int
    alpha: float = 1.0
    K0: int = 0
    epsilon: float = 0.05
    replicas: int = 1
    seed: int = 0
    spectrum_kind: str = "two_point"
    delta: float | None = None
    gamma: float | None = None
    lazy: bool = False
    rotate: bool = False
    thin: int = 1
    ks_level: float = 0.01
    bonferroni: bool = True
    trajectory_out: str | None = None

    def __post_init__(self):
        if self.variant not in ("pipeline", "adjusted", "unadjusted", "idealized"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.K < 0 or self.K0 < 0:
            raise ConfigError("K and K0 must be >= 0")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.d < 1 or self.kappa < 1.0 or self.alpha <= 0.0:
            raise ConfigError("need d >= 1, kappa >= 1, alpha > 0")

    @classmethod
    def from_dict(cls, raw: dict) -> "ChainRunConfig":
        known = set(cls.__dataclass_fields__)
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _write_trajectory(path, trajectory, thin: int):
    try:
        with open(path, "w") as fh:
            fh.write("step\t" + "\t".join(f"x{j}" for j in range(len(trajectory[0]))) + "\n")
            for i, x in enumerate(trajectory):
                vals = "\t".join(f"{v:.17g}" for v in x)
                fh.write(f"{i * thin}\t{vals}\n")
    except OSError as exc:
        raise IOError(f"cannot write trajectory to {path}: {exc}") from exc


def run_chain_command(config: ChainRunConfig) -> list[SweepRecord]:
    """Run one chain (or a replica ensemble) and build SweepRecord rows."""
    t_start = time.perf_counter()
    beta = config.kappa * config.alpha
    gamma = config.gamma if config.gamma is not None else gamma_for_accuracy(config.epsilon)
    delta = config.delta if config.delta is not None else choose_step_size(
        config.alpha, beta, config.d, config.epsilon, gamma=gamma
    )
    spectrum = make_spectrum(config.d, config.spectrum_kind, config.alpha, beta, seed=hash64(config.seed, 0xA))
    target = make_target(spectrum, rotate=config.rotate, seed=hash64(config.seed, 0xB))
    time_set = build_time_set(config.alpha, beta, delta)
    x0 = np.full(config.d, 1.0 / math.sqrt(config.alpha))

    per_level = config.ks_level / config.d if config.bonferroni else config.ks_level
    records: list[SweepRecord] = []

    if config.replicas == 1:
        if config.variant == "pipeline":
            st = run_pipeline(target, x0, config.K0, config.K, delta, config.seed, thin=config.thin)
            rate = st.adjusted_acceptance_rate if st.adjusted_acceptance_rate is not None else st.acceptance_rate
        else:
            cfg = KernelConfig(
                variant=config.variant, delta=delta, lazy=config.lazy,
                time_set=time_set, seed=config.seed, thin=config.thin,
            )
            st = run_chain(cfg, target, x0, config.K)
            rate = st.acceptance_rate
        if config.trajectory_out:
            _write_trajectory(config.trajectory_out, st.trajectory, config.thin)
        # single-chain KS needs enough pooled late-trajectory points
        ks_max = energy_ks = float("nan")
        converged = False
        tail = np.asarray(st.trajectory[len(st.trajectory) // 2:])
        if tail.shape[0] >= 100 and not config.rotate:
            ks_max, energy_ks = pooled_ks_stats(tail, spectrum)
            converged = bool(
                ks_max <= ks_critical_value(per_level, tail.shape[0])
                and energy_ks <= ks_critical_value(config.ks_level, tail.shape[0])
            )
        records.append(
            SweepRecord(
                experiment_id="chain-r00000",
                d=config.d,
                kappa=config.kappa,
                alpha=config.alpha,
                beta=beta,
                delta=delta,
                K0=config.K0 if config.variant == "pipeline" else 0,
                K=config.K,
                seed=config.seed,
                grad_evals=st.total_grad_evals,
                acceptance_rate=rate,
                ks_max=ks_max,
                energy_ks=energy_ks,
                converged=converged,
                wall_time_seconds=time.perf_counter() - t_start,
            )
        )
        return records

    # replica ensemble: pool endpoints, one record per replica
    if config.rotate:
        raise ConfigError("replica ensembles run in the diagonal basis; rotate must be false")
    n = config.replicas
    rep_seeds = [hash64(config.seed, r) for r in range(n)]
    x0_rows = np.tile(x0, (n, 1))
    if config.variant == "pipeline":
        warm = EnsembleChain(spectrum, x0_rows, "unadjusted", time_set, lazy=False,
                             seeds=[hash64(s, 1) for s in rep_seeds])
        warm.run(config.K0)
        adj = EnsembleChain(spectrum, warm.positions, "adjusted", time_set, lazy=True,
                            seeds=[hash64(s, 2) for s in rep_seeds])
        adj.run(config.K)
        grad = warm.grad_evals + adj.grad_evals
        final = adj.positions
        rate = float(adj.accepted.sum() / max(adj.proposals.sum(), 1))
        k0_out = config.K0
    else:
        chain = EnsembleChain(spectrum, x0_rows, config.variant, time_set,
                              lazy=config.lazy, seeds=rep_seeds)
        chain.run(config.K)
        grad = chain.grad_evals
        final = chain.positions
        rate = float(chain.accepted.sum() / max(chain.proposals.sum(), 1))
        k0_out = 0
    ks_max = energy_ks = float("nan")
    converged = False
    if n >= 100:
        ks_max, energy_ks = pooled_ks_stats(final, spectrum)
        converged = bool(
            ks_max <= ks_critical_value(per_level, n)
            and energy_ks <= ks_critical_value(config.ks_level, n)
        )
    wall = time.perf_counter() - t_start
    for r in range(n):
        records.append(
            SweepRecord(
                experiment_id=f"chain-r{r:05d}",
                d=config.d,
                kappa=config.kappa,
                alpha=config.alpha,
                beta=beta,
                delta=delta,
                K0=k0_out,
                K=config.K,
                seed=rep_seeds[r],
                grad_evals=int(grad[r]),
                acceptance_rate=rate,
                ks_max=ks_max,
                energy_ks=energy_ks,
                converged=converged,
                wall_time_seconds=wall,
            )
        )
    return records


def load_json_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
