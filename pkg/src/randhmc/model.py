"""Gaussian targets, their spectra, exact reference sampling, and the
counting first-order oracle consumed by every sampler.

The target density is pi(x) proportional to exp(-f(x)) with
f(x) = x^T B x / 2 for a positive definite precision matrix B.  B is held
as a diagonal spectrum omega_sq plus an optional orthogonal rotation U,
so B = U diag(omega_sq) U^T.  The mean is fixed at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPECTRUM_KINDS = ("two_point", "log_uniform", "geometric")

_ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues of the precision matrix together with the known bounds.

    Attributes:
        omega_sq: the d positive eigenvalues (squared frequencies).
        alpha: lower bound, 0 < alpha <= omega_sq[i].
        beta: upper bound, omega_sq[i] <= beta.
    """

    omega_sq: np.ndarray
    alpha: float
    beta: float

    def __post_init__(self):
        om = np.atleast_1d(np.asarray(self.omega_sq, dtype=float))
        object.__setattr__(self, "omega_sq", om)
        if om.ndim != 1 or om.size == 0:
            raise ValueError("omega_sq must be a nonempty 1-d array")
        if not (0.0 < self.alpha <= self.beta):
            raise ValueError(
                f"need 0 < alpha <= beta, got alpha={self.alpha}, beta={self.beta}"
            )
        lo, hi = self.alpha * (1.0 - 1e-12), self.beta * (1.0 + 1e-12)
        if np.any(om < lo) or np.any(om > hi):
            raise ValueError("omega_sq entries must lie in [alpha, beta]")

    @property
    def d(self) -> int:
        return self.omega_sq.size

    @property
    def omega(self) -> np.ndarray:
        """Frequencies omega_i = sqrt(omega_sq[i])."""
        return np.sqrt(self.omega_sq)

    def kappa(self) -> float:
        """Condition-number bound beta/alpha."""
        return self.beta / self.alpha

    @classmethod
    def from_values(cls, omega_sq) -> "Spectrum":
        """Build a spectrum whose bounds are the extreme entries."""
        om = np.atleast_1d(np.asarray(omega_sq, dtype=float))
        if om.size == 0 or np.any(om <= 0.0):
            raise ValueError("omega_sq must be nonempty and positive")
        return cls(omega_sq=om, alpha=float(om.min()), beta=float(om.max()))


def make_spectrum(d: int, kind: str, alpha: float, beta: float, seed: int = 0) -> Spectrum:
    """Generate a named spectrum with eigenvalues in [alpha, beta].

    kinds:
        two_point:   half the eigenvalues at alpha, half at beta.
        log_uniform: log(omega_sq) i.i.d. uniform on [log alpha, log beta].
        geometric:   log-evenly spaced from alpha to beta inclusive.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not (0.0 < alpha <= beta):
        raise ValueError(f"need 0 < alpha <= beta, got alpha={alpha}, beta={beta}")
    if kind == "two_point":
        n_low = d - d // 2
        om = np.concatenate([np.full(n_low, alpha), np.full(d - n_low, beta)])
    elif kind == "log_uniform":
        rng = np.random.default_rng(seed)
        om = np.exp(rng.uniform(np.log(alpha), np.log(beta), size=d))
        om = np.clip(om, alpha, beta)
    elif kind == "geometric":
        om = np.geomspace(alpha, beta, d)
    else:
        raise ValueError(f"unknown spectrum kind {kind!r}; expected one of {SPECTRUM_KINDS}")
    return Spectrum(omega_sq=om, alpha=float(alpha), beta=float(beta))


@dataclass(frozen=True, eq=False)
class GaussianTarget:
    """Gaussian pi(x) ~ exp(-x^T B x / 2) with B = U diag(omega_sq) U^T.

    rotation=None means B is diagonal (the working basis is already the
    eigenbasis).  When a rotation is given it must be orthogonal.
    """

    spectrum: Spectrum
    rotation: np.ndarray | None = None

    def __post_init__(self):
        if self.rotation is not None:
            u = np.asarray(self.rotation, dtype=float)
            object.__setattr__(self, "rotation", u)
            d = self.spectrum.d
            if u.shape != (d, d):
                raise ValueError(f"rotation must be {d}x{d}, got {u.shape}")
            err = np.max(np.abs(u.T @ u - np.eye(d)))
            if err > _ORTHOGONALITY_TOL:
                raise ValueError(f"rotation is not orthogonal (max |U^T U - I| = {err:.3e})")

    @property
    def d(self) -> int:
        return self.spectrum.d

    def to_diagonal_basis(self, x: np.ndarray) -> np.ndarray:
        """Coordinates of x in the eigenbasis of B (y = U^T x)."""
        if self.rotation is None:
            return x
        return x @ self.rotation  # rows: y = U^T x

    def precision_matrix(self) -> np.ndarray:
        """The assembled matrix B (diagnostic use)."""
        b = np.diag(self.spectrum.omega_sq)
        if self.rotation is None:
            return b
        return self.rotation @ b @ self.rotation.T

    def log_density_unnormalized(self, x: np.ndarray) -> float:
        """-x^T B x / 2."""
        f, _ = self.f_and_grad(x)
        return -f

    def f_and_grad(self, x: np.ndarray):
        """f(x) = x^T B x / 2 and grad f(x) = B x, without counting."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"x has dimension {x.shape[-1]}, target has d={self.d}")
        y = self.to_diagonal_basis(x)
        wy = self.spectrum.omega_sq * y
        f = 0.5 * np.sum(y * wy, axis=-1)
        g = wy if self.rotation is None else wy @ self.rotation.T
        return f, g


def haar_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Random orthogonal matrix: QR of a Gaussian matrix with sign-corrected
    diagonal, which distributes the factor Haar-uniformly."""
    a = rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def make_target(spectrum: Spectrum, rotate: bool = False, seed: int = 0) -> GaussianTarget:
    """Assemble a target from a spectrum, optionally applying a random rotation."""
    if not rotate:
        return GaussianTarget(spectrum=spectrum)
    rng = np.random.default_rng(seed)
    return GaussianTarget(spectrum=spectrum, rotation=haar_orthogonal(spectrum.d, rng))


class FirstOrderOracle:
    """Counting first-order access to f: one query yields (f(x), grad f(x)).

    Samplers may read only the bounds alpha/beta and query answers through
    this object; the spectrum itself stays private to the target.  Each
    oracle instance belongs to a single chain, so the counter needs no
    locking.
    """

    def __init__(self, target: GaussianTarget):
        self._target = target
        self.query_count = 0

    @property
    def d(self) -> int:
        return self._target.d

    @property
    def alpha(self) -> float:
        return self._target.spectrum.alpha

    @property
    def beta(self) -> float:
        return self._target.spectrum.beta

    def query(self, x: np.ndarray):
        """Return (f(x), grad f(x)) for a single point; costs one query."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected a vector of dimension {self.d}, got shape {x.shape}")
        self.query_count += 1
        f, g = self._target.f_and_grad(x)
        return float(f), g

    def query_batch(self, xs: np.ndarray):
        """Row-wise queries; costs one query per row."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.d:
            raise ValueError(f"expected an (n, {self.d}) array, got shape {xs.shape}")
        self.query_count += xs.shape[0]
        return self._target.f_and_grad(xs)


def sample_exact(target: GaussianTarget, n: int, seed: int = 0) -> np.ndarray:
    """n i.i.d. samples from the target: coordinate i of the diagonal basis is
    N(0, 1/omega_sq[i]), rotated back when a rotation is present."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((n, target.d)) / target.spectrum.omega
    if target.rotation is None:
        return y
    return y @ target.rotation.T
