"""Finite-statistics versions of an exact probability surface.

Each phase column draws from its own child of ``numpy.random.SeedSequence(seed)``
(PCG64 bit generator), so columns are independent and can be generated in any
order without changing the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlreadyNoisy, NegativeProbability
from .forward import ProbabilitySurface

RNG_NAME = "numpy.PCG64/SeedSequence.spawn-per-column"
NOISE_MODELS = ("exact", "gaussian", "multinomial")


@dataclass(frozen=True)
class NoiseSpec:
    model: str = "gaussian"
    trials_per_phase: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.model not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.model!r}; expected one of {NOISE_MODELS}")
        if self.model != "exact" and self.trials_per_phase < 1:
            raise ValueError("trials_per_phase must be >= 1 for a noisy model")

    def apply(self, surface: ProbabilitySurface) -> ProbabilitySurface:
        if self.model == "gaussian":
            return perturb_gaussian(surface, self.trials_per_phase, self.seed)
        if self.model == "multinomial":
            return sample_multinomial(surface, self.trials_per_phase, self.seed)
        return surface


def column_generators(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(count)]


def _require_exact(surface: ProbabilitySurface):
    if not surface.exact:
        raise AlreadyNoisy(f"surface already carries tau={surface.trials_per_phase} noise")


def _with_values(surface, values, tau, seed, model) -> ProbabilitySurface:
    return ProbabilitySurface(
        surface.geometry, surface.grid, surface.theta, values,
        trials_per_phase=int(tau), seed=int(seed), noise_model=model, rng=RNG_NAME,
    )


def perturb_gaussian(surface: ProbabilitySurface, tau: int, seed: int) -> ProbabilitySurface:
    """Add ``sqrt(P / tau) * g`` with ``g ~ N(0, 1)`` to every entry.

    Entries are neither clipped nor renormalized, so small negative values
    can appear.
    """
    _require_exact(surface)
    if tau < 1:
        raise ValueError("tau must be >= 1")
    p = surface.values
    dim = surface.geometry.dimension
    g = np.column_stack([rng.standard_normal(dim) for rng in column_generators(seed, surface.grid.count)])
    noisy = p + np.sqrt(np.clip(p, 0.0, None) / tau) * g
    return _with_values(surface, noisy, tau, seed, "gaussian")


def sample_multinomial(surface: ProbabilitySurface, tau: int, seed: int) -> ProbabilitySurface:
    """Replace each column by the empirical frequencies of ``tau`` counting runs."""
    _require_exact(surface)
    if tau < 1:
        raise ValueError("tau must be >= 1")
    p = surface.values
    low = float(p.min())
    if low < -1e-12:
        raise NegativeProbability(f"probability {low:.3g} < 0")
    cols = []
    for k, rng in enumerate(column_generators(seed, surface.grid.count)):
        pk = np.clip(p[:, k], 0.0, None)
        counts = rng.multinomial(tau, pk / pk.sum())
        freq = counts / tau
        # absorb the division rounding in the largest entry so the column sums to 1
        top = int(np.argmax(counts))
        freq[top] = 1.0 - math.fsum(np.delete(freq, top))
        cols.append(freq)
    return _with_values(surface, np.column_stack(cols), tau, seed, "multinomial")


def noise_norm_estimate(K: int, tau: float) -> float:
    """Expected norm of the Fourier-coefficient noise, ``1/sqrt(K tau)``.

    ``tau = inf`` is accepted and gives 0 (noiseless data).
    """
    if K < 1 or tau < 1:
        raise ValueError("need K >= 1 and tau >= 1")
    if math.isinf(tau):
        return 0.0
    return 1.0 / math.sqrt(K * tau)
