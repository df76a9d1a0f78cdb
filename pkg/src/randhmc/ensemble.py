"""Vectorized execution of many independent chains on diagonal targets.

The sequential kernels in :mod:`randhmc.kernels` are the contract; this
module is an execution engine for replica ensembles (stationarity tests
and the scaling sweeps), where thousands of chains advance in lockstep.
Each replica owns its generator and draws in the same canonical order as
the sequential kernels (lazy coin, then velocity, then integration time,
then the Metropolis uniform), and the leapfrog is the identical
kick-drift-kick recursion run row-wise in a compiled loop, so gradient
accounting matches the sequential path exactly (2k per step of time
k * delta).  Agreement with run_chain is covered by tests.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .kernels import TimeSet
from .model import Spectrum


@njit(parallel=True, cache=True)
def _leapfrog_rows(X, V, omega_sq, delta, ks):  # pragma: no cover - compiled
    n, d = X.shape
    half = 0.5 * delta
    for r in prange(n):
        k = ks[r]
        for _ in range(k):
            for j in range(d):
                # grouped as half * (gradient) to match the sequential kernel bitwise
                v = V[r, j] - half * (omega_sq[j] * X[r, j])
                x = X[r, j] + delta * v
                V[r, j] = v - half * (omega_sq[j] * x)
                X[r, j] = x


def leapfrog_rows(X: np.ndarray, V: np.ndarray, omega_sq: np.ndarray, delta: float, ks: np.ndarray):
    """Run ks[r] leapfrog steps on row r of (X, V), in place.

    Returns the potential values f = x^T B x / 2 at the rows' start and
    end points (the values the endpoint gradient queries would report).
    """
    f_start = 0.5 * (X * X) @ omega_sq
    _leapfrog_rows(X, V, omega_sq, delta, np.asarray(ks, dtype=np.int64))
    f_end = 0.5 * (X * X) @ omega_sq
    return f_start, f_end


class EnsembleChain:
    """n replicas of one kernel advancing one step at a time.

    Positions live in the diagonal basis.  grad_evals, proposals and
    accepted are per-replica tallies; steps_taken counts kernel steps
    (lazy skips included).
    """

    def __init__(
        self,
        spectrum: Spectrum,
        x0_rows: np.ndarray,
        variant: str,
        time_set: TimeSet,
        lazy: bool,
        seeds,
    ):
        if variant not in ("idealized", "unadjusted", "adjusted"):
            raise ValueError(f"unknown variant {variant!r}")
        x0_rows = np.asarray(x0_rows, dtype=float)
        if x0_rows.ndim != 2 or x0_rows.shape[1] != spectrum.d:
            raise ValueError(f"x0_rows must be (n, {spectrum.d}), got {x0_rows.shape}")
        seeds = list(seeds)
        if len(seeds) != x0_rows.shape[0]:
            raise ValueError("need one seed per replica")
        self.spectrum = spectrum
        self.variant = variant
        self.time_set = time_set
        self.lazy = lazy
        self.X = x0_rows.copy()
        self.n = x0_rows.shape[0]
        self._rngs = [np.random.default_rng(s) for s in seeds]
        self.grad_evals = np.zeros(self.n, dtype=np.int64)
        self.proposals = np.zeros(self.n, dtype=np.int64)
        self.accepted = np.zeros(self.n, dtype=np.int64)
        self.steps_taken = 0

    @property
    def positions(self) -> np.ndarray:
        return self.X

    def _draw(self):
        """Per-replica draws for one step, in the sequential kernels' order."""
        d = self.spectrum.d
        k_hi = self.time_set.k_max + 1
        active = []
        vs = []
        ks = []
        us = []
        for r, rng in enumerate(self._rngs):
            if self.lazy and rng.random() < 0.5:
                continue
            active.append(r)
            vs.append(rng.standard_normal(d))
            ks.append(int(rng.integers(1, k_hi)))
            if self.variant == "adjusted":
                us.append(rng.random())
        idx = np.asarray(active, dtype=np.int64)
        V = np.asarray(vs, dtype=float).reshape(len(active), d)
        return idx, V, np.asarray(ks, dtype=np.int64), np.asarray(us, dtype=float)

    def step(self):
        """Advance every replica by one kernel step."""
        idx, V, ks, us = self._draw()
        self.steps_taken += 1
        if idx.size == 0:
            return
        self.proposals[idx] += 1
        delta = self.time_set.delta
        w2 = self.spectrum.omega_sq
        if self.variant == "idealized":
            t = ks * delta
            w = self.spectrum.omega
            ang = np.outer(t, w)
            c, s = np.cos(ang), np.sin(ang)
            self.X[idx] = c * self.X[idx] + (s / w) * V
            self.accepted[idx] += 1
            return

        Xa = self.X[idx].copy()
        v_sq_in = np.einsum("ij,ij->i", V, V)
        f_start, f_end = leapfrog_rows(Xa, V, w2, delta, ks)
        self.grad_evals[idx] += 2 * ks
        if self.variant == "unadjusted":
            self.X[idx] = Xa
            self.accepted[idx] += 1
            return

        v_sq_out = np.einsum("ij,ij->i", V, V)
        log_a = (f_start + 0.5 * v_sq_in) - (f_end + 0.5 * v_sq_out)
        acc = us < np.minimum(1.0, np.exp(np.minimum(log_a, 0.0)))
        take = idx[acc]
        self.X[take] = Xa[acc]
        self.accepted[take] += 1

    def run(self, n_steps: int):
        for _ in range(n_steps):
            self.step()
        return self
