"""Forward model: density matrix -> count probabilities -> per-diagonal Fourier data.

``P_m(phi) = <m| U^dag rho U |m>`` is a trigonometric polynomial of degree
``N`` in ``phi``.  Its r-th harmonic only sees the diagonal ``rho_{l, l-r}``,
through the matrix ``T[m, i] = conj(D_{l,m}) D_{l-r,m}`` evaluated at phase 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GeometryMismatch, NonHermitianInput, OrderOutOfRange
from .states import TwoModeDensityMatrix
from .su2 import AngularMomentumGeometry, BeamSplitterSetting, phase_zero_rotation, rotation_matrix

IMAG_RESIDUE_TOL = 1e-12
HERMITIAN_INPUT_TOL = 1e-10
EXACT_NEGATIVE_TOL = 1e-14
EXACT_COLUMN_TOL = 1e-12


@dataclass(frozen=True)
class PhaseGrid:
    """``count`` phases ``2 pi k / count`` equally spaced on the circle."""

    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"phase count must be a positive integer, got {self.count!r}")
        object.__setattr__(self, "count", int(self.count))

    @property
    def values(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.count) / self.count

    def aliased_for(self, geometry: AngularMomentumGeometry) -> bool:
        """True when the grid is too coarse to resolve harmonics up to order N."""
        return self.count < 2 * geometry.total_number + 2


@dataclass(frozen=True, eq=False)
class ProbabilitySurface:
    """``values[m_index, k] = P_m(phi_k)``; ``trials_per_phase == 0`` marks exact data."""

    geometry: AngularMomentumGeometry
    grid: PhaseGrid
    theta: float
    values: np.ndarray
    trials_per_phase: int = 0
    seed: Optional[int] = None
    noise_model: str = "exact"
    rng: str = ""

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        shape = (self.geometry.dimension, self.grid.count)
        if vals.shape != shape:
            raise GeometryMismatch(f"surface shape {vals.shape}, expected {shape}")
        if self.trials_per_phase < 0:
            raise ValueError("trials_per_phase must be >= 0")
        for problem in self.invariant_violations(vals, self.trials_per_phase):
            raise ValueError(problem)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @staticmethod
    def invariant_violations(values: np.ndarray, trials_per_phase: int) -> list[str]:
        problems = []
        if not np.isfinite(values).all():
            return ["non-finite probability"]
        low = float(values.min()) if values.size else 0.0
        if trials_per_phase == 0:
            if low < -EXACT_NEGATIVE_TOL:
                problems.append(f"exact surface has negative entry {low:.3g}")
            col = float(np.abs(values.sum(axis=0) - 1.0).max())
            if col > EXACT_COLUMN_TOL:
                problems.append(f"exact surface column sums off by {col:.3g}")
        else:
            eps = 5.0 * math.sqrt(max(float(values.max()), 0.0) / trials_per_phase)
            if low < -eps:
                problems.append(f"noisy surface entry {low:.3g} below -{eps:.3g}")
        return problems

    @property
    def exact(self) -> bool:
        return self.trials_per_phase == 0

    @property
    def aliased(self) -> bool:
        return self.grid.aliased_for(self.geometry)


@dataclass(frozen=True, eq=False)
class FourierDiagonalData:
    geometry: AngularMomentumGeometry
    order: int
    coefficients: np.ndarray


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    """Linear map from the diagonal ``rho_{l, l-r}`` to ``F(r)``, with its SVD."""

    geometry: AngularMomentumGeometry
    theta: float
    order: int
    matrix: np.ndarray
    singular_values: np.ndarray = field(init=False)
    left: np.ndarray = field(init=False, repr=False)
    right_h: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        u, s, vh = np.linalg.svd(self.matrix, full_matrices=False)
        for name, arr in (("singular_values", s), ("left", u), ("right_h", vh)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.matrix.setflags(write=False)

    @property
    def min_singular_value(self) -> float:
        return float(self.singular_values[-1])

    @property
    def max_singular_value(self) -> float:
        return float(self.singular_values[0])

    @property
    def condition_number(self) -> float:
        smin = self.min_singular_value
        return math.inf if smin == 0.0 else self.max_singular_value / smin

    def apply(self, diagonal: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(diagonal)


def _density_array(rho) -> tuple[AngularMomentumGeometry, np.ndarray]:
    if isinstance(rho, TwoModeDensityMatrix):
        return rho.geometry, rho.entries
    arr = np.asarray(rho, dtype=complex)
    herm = float(np.abs(arr - arr.conj().T).max())
    if herm > HERMITIAN_INPUT_TOL:
        raise NonHermitianInput(f"hermiticity residue {herm:.3g}")
    return AngularMomentumGeometry(arr.shape[0] - 1), arr


def _real_part(p: np.ndarray) -> np.ndarray:
    resid = float(np.abs(p.imag).max()) if p.size else 0.0
    # a large imaginary part means an upstream bug, not something to drop
    assert resid <= IMAG_RESIDUE_TOL, f"imaginary probability residue {resid:.3g}"
    return p.real.copy()


def exact_probabilities(rho, setting: BeamSplitterSetting) -> np.ndarray:
    """``P_m = (D^dag rho D)_{mm}`` for one beamsplitter/phase setting."""
    geometry, arr = _density_array(rho)
    d = rotation_matrix(geometry, setting).entries
    return _real_part(np.einsum("am,ab,bm->m", d.conj(), arr, d))


def probability_surface(rho, theta: float, grid: PhaseGrid) -> ProbabilitySurface:
    """Exact ``P_m(phi_k)`` on every grid phase.

    Uses ``D(theta, phi) = diag(e^{i l phi}) D(theta, 0) diag(e^{-i m phi})`` so
    the rotation sum is evaluated once per surface.
    """
    geometry, arr = _density_array(rho)
    setting = BeamSplitterSetting(theta)
    d0 = phase_zero_rotation(geometry, setting.theta)
    n = np.arange(geometry.dimension)
    phases = np.exp(-1j * np.outer(grid.values, n))  # (K, N+1): e^{-i l phi_k}
    # rho_phi[k] = diag(e^{-i l phi}) rho diag(e^{+i l' phi})
    rho_phi = phases[:, :, None] * arr[None, :, :] * phases.conj()[:, None, :]
    p = np.einsum("am,kab,bm->mk", d0.conj(), rho_phi, d0, optimize=True)
    return ProbabilitySurface(geometry, grid, setting.theta, _real_part(p))


def harmonic(surface: ProbabilitySurface, r: int) -> np.ndarray:
    """``(1/K) sum_k P_m(phi_k) e^{i r phi_k}`` for any integer ``r``."""
    weights = np.exp(1j * r * surface.grid.values) / surface.grid.count
    return surface.values @ weights


def fourier_transform(surface: ProbabilitySurface, r: int) -> FourierDiagonalData:
    N = surface.geometry.total_number
    if int(r) != r or not 0 <= r <= N:
        raise OrderOutOfRange(f"order r={r} outside 0..{N}")
    coeffs = harmonic(surface, int(r))
    coeffs.setflags(write=False)
    return FourierDiagonalData(surface.geometry, int(r), coeffs)


def diagonal_operator(geometry: AngularMomentumGeometry, theta: float, r: int) -> DiagonalOperator:
    """Column ``i`` holds ``conj(D_{l,m}) D_{l-r,m}`` over ``m`` at phase 0, ``l = i + r - j``."""
    N = geometry.total_number
    if int(r) != r or not 0 <= r <= N:
        raise OrderOutOfRange(f"order r={r} outside 0..{N}")
    r = int(r)
    d0 = phase_zero_rotation(geometry, BeamSplitterSetting(theta).theta)
    matrix = (d0[r:, :].conj() * d0[: N + 1 - r, :]).T
    return DiagonalOperator(geometry, float(theta), r, np.ascontiguousarray(matrix))
