"""Closed-form laws and checkable bounds for the randomized-time kernels.

Everything here is a pure function of its inputs plus an explicit seed:
the exact cosine probability over the time set, the cosine-product tail,
the per-coordinate K-step Gaussian law and proposal density, the
concentration shell of the quartic form x^T diag(omega^4) x, the
density ratio between the leapfrog's stationary law and the target, the
total-variation bound between them, and the KS-based test statistics the
harness uses as convergence proxies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .kernels import TimeSet
from .model import Spectrum

_SIN_EPS = 1e-12


class DegenerateProposalError(ValueError):
    """The one-step proposal is a point mass (sin(omega t) ~ 0); no density exists."""


class NotApplicableError(ValueError):
    """A bound's hypothesis fails, so the bound says nothing; never a silent pass."""


@dataclass(frozen=True)
class CoordinateLaw:
    """Gaussian law of one coordinate after a fixed tuple of integration times."""

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")


@dataclass(frozen=True, eq=False)
class ConcentrationSet:
    """The shell where x^T diag(omega^4) x concentrates under the target.

    Membership: |sum(omega^4 x^2) - sum(omega^2)| <= gamma * sqrt(sum(omega^4)).
    On this set the Metropolis acceptance is near 1 and the leapfrog's
    stationary density is within a constant factor of the target's.
    """

    gamma: float
    spectrum: Spectrum

    def __post_init__(self):
        if self.gamma < 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")

    @property
    def center(self) -> float:
        return float(np.sum(self.spectrum.omega_sq))

    @property
    def radius(self) -> float:
        return self.gamma * math.sqrt(float(np.sum(self.spectrum.omega_sq**2)))

    def quartic_form(self, x: np.ndarray) -> np.ndarray:
        """sum_i omega_i^4 x_i^2, row-wise for 2-d input."""
        x = np.asarray(x, dtype=float)
        return (x * x) @ (self.spectrum.omega_sq**2)

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Boolean membership, row-wise for 2-d input."""
        return np.abs(self.quartic_form(x) - self.center) <= self.radius


def cos_time_probability(omega: float, time_set: TimeSet, threshold: float = 0.9) -> float:
    """Exact P[|cos(omega t)| <= threshold] for t uniform on the time set.

    Pure enumeration over the k grid; bit-for-bit reproducible.
    """
    if omega <= 0.0:
        raise ValueError(f"omega must be positive, got {omega}")
    ks = np.arange(1, time_set.k_max + 1)
    return float(np.mean(np.abs(np.cos(omega * ks * time_set.delta)) <= threshold))


def cos_product_tail(omega: float, time_set: TimeSet, K: int, n_mc: int, seed: int = 0) -> float:
    """Monte Carlo estimate of P[prod_k |cos(omega t_k)| >= 0.9^(K/4)]
    over i.i.d. uniform tuples (t_1, ..., t_K) from the time set."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if n_mc < 10_000:
        raise ValueError(f"n_mc must be >= 10^4, got {n_mc}")
    rng = np.random.default_rng(seed)
    table = np.abs(np.cos(omega * np.arange(1, time_set.k_max + 1) * time_set.delta))
    thresh = 0.9 ** (K / 4.0)
    hits = 0
    chunk = max(1, min(n_mc, 2_000_000 // K))
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        draws = rng.integers(0, time_set.k_max, size=(m, K))
        prod = np.prod(table[draws], axis=1)
        hits += int(np.sum(prod >= thresh))
        done += m
    return hits / n_mc


def kstep_coordinate_law(x0: float, omega: float, times) -> CoordinateLaw:
    """Law of one coordinate after K steps with fixed times and fresh
    N(0,1) velocities: N(x0 * prod cos, (1 - prod cos^2) / omega^2)."""
    t = np.asarray(times, dtype=float)
    if t.size == 0:
        raise ValueError("times must be nonempty")
    p = float(np.prod(np.cos(omega * t)))
    return CoordinateLaw(mean=x0 * p, variance=(1.0 - p * p) / (omega * omega))


def proposal_density(x: float, z: float, omega: float, t: float) -> float:
    """Density at z of one exact-flow step from x conditioned on time t:
    the coordinate lands N(cos(wt) x, (sin(wt)/w)^2)."""
    s = math.sin(omega * t)
    if abs(s) <= _SIN_EPS:
        raise DegenerateProposalError(
            f"|sin(omega t)| = {abs(s):.3e} <= {_SIN_EPS}; the proposal is a point mass"
        )
    sigma = abs(s) / omega
    u = (z - math.cos(omega * t) * x) / sigma
    return math.exp(-0.5 * u * u) / (sigma * math.sqrt(2.0 * math.pi))


def concentration_measure(
    cset: ConcentrationSet,
    law: str,
    delta: float,
    n_mc: int,
    seed: int = 0,
) -> float:
    """Monte Carlo measure of the shell under the target ("pi") or under
    the leapfrog's stationary Gaussian ("pi_hat", needs
    delta <= beta^(-1/2) d^(-1/4))."""
    spec = cset.spectrum
    if law == "pi":
        scale = 1.0 / spec.omega
    elif law == "pi_hat":
        if delta > (1.0 + 1e-12) / (math.sqrt(spec.beta) * spec.d**0.25):
            raise ValueError(
                f"pi_hat measure needs delta <= beta^(-1/2) d^(-1/4) = "
                f"{1.0 / (math.sqrt(spec.beta) * spec.d ** 0.25):.6g}, got {delta}"
            )
        what_sq = spec.omega_sq * (1.0 - 0.25 * delta * delta * spec.omega_sq)
        scale = 1.0 / np.sqrt(what_sq)
    else:
        raise ValueError(f"law must be 'pi' or 'pi_hat', got {law!r}")
    if n_mc < 1:
        raise ValueError(f"n_mc must be >= 1, got {n_mc}")
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = max(1, 5_000_000 // spec.d)
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        xs = rng.standard_normal((m, spec.d)) * scale
        hits += int(np.sum(cset.contains(xs)))
        done += m
    return hits / n_mc


def density_ratio(x: np.ndarray, spectrum: Spectrum, delta: float):
    """Normalized-density ratio pi_hat(x)/pi(x)
    = prod(1 - delta^2 w^2/4)^(1/2) * exp(delta^2/8 * sum(w^4 x^2)).

    Accepts a single vector or rows of vectors.
    """
    z = delta * delta * spectrum.omega_sq
    if np.any(z >= 4.0):
        raise ValueError("need delta^2 * omega^2 < 4")
    x = np.asarray(x, dtype=float)
    log_norm = 0.5 * float(np.sum(np.log1p(-0.25 * z)))
    quart = (x * x) @ (spectrum.omega_sq**2)
    out = np.exp(log_norm + 0.125 * delta * delta * quart)
    return float(out) if np.ndim(out) == 0 else out


def tv_bound_modified(spectrum: Spectrum, delta: float) -> float:
    """Total-variation bound between the target and the leapfrog's
    stationary Gaussian: min{1, 3/8 * delta^2 * sqrt(sum(omega^4))}."""
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if delta > (1.0 + 1e-12) / math.sqrt(spectrum.beta):
        raise ValueError(f"need delta <= 1/sqrt(beta) = {1.0 / math.sqrt(spectrum.beta):.6g}")
    return min(1.0, 0.375 * delta * delta * math.sqrt(float(np.sum(spectrum.omega_sq**2))))


def numerical_tv(spectrum: Spectrum, delta: float, n_grid: int = 4001, span: float = 12.0) -> float:
    """Quadrature TV distance between the target and the leapfrog's
    stationary Gaussian, for d <= 2 (trapezoid on a dense grid)."""
    d = spectrum.d
    if d > 2:
        raise ValueError(f"numerical TV is implemented for d <= 2, got d = {d}")
    w2 = spectrum.omega_sq
    what2 = w2 * (1.0 - 0.25 * delta * delta * w2)
    if np.any(what2 <= 0.0):
        raise ValueError("need delta^2 * omega^2 < 4")
    sig = 1.0 / np.sqrt(w2)
    sig_hat = 1.0 / np.sqrt(what2)
    hi = span * float(np.max(np.maximum(sig, sig_hat)))
    grid = np.linspace(-hi, hi, n_grid)
    if d == 1:
        p = stats.norm.pdf(grid, scale=sig[0])
        q = stats.norm.pdf(grid, scale=sig_hat[0])
        return 0.5 * float(np.trapezoid(np.abs(p - q), grid))
    px = stats.norm.pdf(grid, scale=sig[0])
    py = stats.norm.pdf(grid, scale=sig[1])
    qx = stats.norm.pdf(grid, scale=sig_hat[0])
    qy = stats.norm.pdf(grid, scale=sig_hat[1])
    diff = np.abs(np.outer(px, py) - np.outer(qx, qy))
    inner = np.trapezoid(diff, grid, axis=1)
    return 0.5 * float(np.trapezoid(inner, grid))


def gaussian_tv_same_variance(mu1: float, mu2: float, sigma: float) -> float:
    """Exact TV between N(mu1, sigma^2) and N(mu2, sigma^2):
    erf(|mu1 - mu2| / (2 sqrt(2) sigma)).  Always below |mu1 - mu2|/sigma."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return math.erf(abs(mu1 - mu2) / (2.0 * math.sqrt(2.0) * sigma))


def acceptance_lower_bound(gamma: float, delta: float, beta: float, d: int) -> float:
    """Acceptance lower bound exp(-delta^2 gamma sqrt(d) beta / 4) for
    proposals whose endpoints both lie on the gamma shell."""
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    return math.exp(-0.25 * delta * delta * gamma * math.sqrt(d) * beta)


def warmness_gap_bound(s: float, delta: float, spectrum: Spectrum) -> float:
    """Warm-start gap bound 3s for the leapfrog's stationary law against
    the target, valid when delta is below the shell threshold for
    gamma(s) = max{1, ln(1/s)}; otherwise the bound is not applicable."""
    if not (0.0 < s < 0.5):
        raise ValueError(f"s must be in (0, 1/2), got {s}")
    gamma = max(1.0, math.log(1.0 / s))
    delta_max = 1.0 / (10.0 * math.sqrt(gamma * spectrum.beta) * spectrum.d**0.25)
    if delta > delta_max * (1.0 + 1e-12):
        raise NotApplicableError(
            f"delta = {delta} exceeds the warm-start threshold {delta_max:.6g} for s = {s}"
        )
    return 3.0 * s


def ks_statistic(samples, cdf) -> float:
    """Sup distance between the empirical CDF of samples and cdf."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.size
    if n < 100:
        raise ValueError(f"need at least 100 samples, got {n}")
    f = np.asarray(cdf(xs), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_critical_value(level: float, n: int) -> float:
    """Asymptotic one-sample KS critical value sqrt(-ln(level/2) / (2n))."""
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must be in (0, 1), got {level}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.sqrt(-math.log(level / 2.0) / (2.0 * n))


def energy_statistic(samples: np.ndarray, spectrum: Spectrum) -> float:
    """KS distance between {sum(omega^2 x^2)} over the sample rows and the
    chi-squared law with d degrees of freedom (exact under the target)."""
    xs = np.asarray(samples, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != spectrum.d:
        raise ValueError(f"samples must be (n, {spectrum.d}), got {xs.shape}")
    q = (xs * xs) @ spectrum.omega_sq
    return ks_statistic(q, stats.chi2(df=spectrum.d).cdf)
