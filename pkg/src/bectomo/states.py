"""Fixed-N two-mode states in the number basis.

Convention: amplitude ``c[n]`` multiplies ``|n>_1 (x) |N-n>_2``, i.e. it is
indexed by the mode-1 count and sits at spin projection ``m = n - N/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryMismatch, IndexOutOfRange, WeightError
from .su2 import AngularMomentumGeometry, log_factorial_table

NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PureState:
    geometry: AngularMomentumGeometry
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.geometry.dimension,):
            raise GeometryMismatch(
                f"expected {self.geometry.dimension} amplitudes, got shape {amps.shape}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"amplitudes not normalized (sum |c|^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def density(self) -> "TwoModeDensityMatrix":
        return density_from_mixture([(1.0, self)])


@dataclass(frozen=True, eq=False)
class TwoModeDensityMatrix:
    """Density matrix ``entries[a, b] = rho_{l, l'}`` with ``l = a - j``, ``l' = b - j``.

    Hermiticity and unit trace are always enforced.  Purity <= 1 and
    positivity are only checked when ``physical`` is set: linear-inversion
    estimates of a pure state routinely violate both.
    """

    geometry: AngularMomentumGeometry
    entries: np.ndarray
    physical: bool = False
    tol: float = 1e-12

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        dim = self.geometry.dimension
        if rho.shape != (dim, dim):
            raise GeometryMismatch(f"expected {dim}x{dim} matrix, got {rho.shape}")
        for problem in self.invariant_violations(rho, self.tol, self.physical):
            raise ValueError(problem)
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @staticmethod
    def invariant_violations(rho: np.ndarray, tol: float = 1e-12, physical: bool = False) -> list[str]:
        problems = []
        herm = float(np.abs(rho - rho.conj().T).max()) if rho.size else 0.0
        if herm > tol:
            problems.append(f"not Hermitian (max |rho - rho^H| = {herm:.3g})")
        trace = complex(np.trace(rho))
        if abs(trace - 1.0) > tol:
            problems.append(f"trace {trace:.15g} != 1")
        if physical:
            purity = float(np.real(np.trace(rho @ rho)))
            if purity > 1.0 + tol:
                problems.append(f"purity tr(rho^2) = {purity:.15g} > 1")
            low = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())
            if low < -tol:
                problems.append(f"negative eigenvalue {low:.3g}")
        return problems

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def diagonal(self, r: int) -> np.ndarray:
        """Elements ``rho_{l, l-r}`` for ``l = r-j..j`` (numpy offset ``-r``)."""
        return np.diagonal(self.entries, offset=-r).copy()


@dataclass(frozen=True)
class CoherentSpinParams:
    polar: float
    azimuth: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.polar <= math.pi / 2:
            raise ValueError(f"polar angle {self.polar} outside [0, pi/2]")
        object.__setattr__(self, "azimuth", float(self.azimuth) % (2 * math.pi))


def coherent_projected_state(
    geometry: AngularMomentumGeometry, params: CoherentSpinParams, relative_phase: bool = False
) -> PureState:
    """Two coherent states projected onto fixed total number N.

    ``c_n ~ sqrt(C(N, n)) sin^(N-n)(polar) cos^n(polar) e^{i azimuth}``, then
    renormalized.  With ``relative_phase`` the phase becomes ``e^{i n azimuth}``
    (a spin-coherent state) instead of a global factor.
    """
    N = geometry.total_number
    n = np.arange(N + 1)
    lf = log_factorial_table(N)
    c, s = math.cos(params.polar), math.sin(params.polar)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_c = np.where(n == 0, 0.0, n * (math.log(c) if c > 0 else -np.inf))
        log_s = np.where(N - n == 0, 0.0, (N - n) * (math.log(s) if s > 0 else -np.inf))
    mag = np.exp(0.5 * (lf[N] - lf[N - n] - lf[n]) + log_c + log_s)
    phase = np.exp(1j * params.azimuth * (n if relative_phase else 1))
    amps = mag * phase
    return PureState(geometry, amps / np.linalg.norm(amps))


def fock_product_state(geometry: AngularMomentumGeometry, n1: int) -> PureState:
    """``|n1>_1 (x) |N - n1>_2``."""
    if not 0 <= n1 <= geometry.total_number:
        raise IndexOutOfRange(f"n1={n1} outside 0..{geometry.total_number}")
    amps = np.zeros(geometry.dimension, dtype=complex)
    amps[n1] = 1.0
    return PureState(geometry, amps)


def density_from_mixture(components: Iterable[tuple[float, PureState]]) -> TwoModeDensityMatrix:
    components = list(components)
    if not components:
        raise WeightError("empty mixture")
    geometry = components[0][1].geometry
    weights = np.array([float(w) for w, _ in components])
    if (weights < 0).any() or abs(weights.sum() - 1.0) > NORM_TOL:
        raise WeightError(f"weights must be nonnegative and sum to 1, got {weights.tolist()}")
    rho = np.zeros((geometry.dimension, geometry.dimension), dtype=complex)
    for w, state in components:
        if state.geometry != geometry:
            raise GeometryMismatch("mixture components have different N")
        c = state.amplitudes
        rho += w * np.outer(c, c.conj())
    return TwoModeDensityMatrix(geometry, rho, physical=True)


def _same_geometry(a: TwoModeDensityMatrix, b: TwoModeDensityMatrix):
    if a.geometry != b.geometry:
        raise GeometryMismatch(f"N={a.geometry.total_number} vs N={b.geometry.total_number}")


def state_distance(a: TwoModeDensityMatrix, b: TwoModeDensityMatrix) -> float:
    """Frobenius norm of ``a - b``."""
    _same_geometry(a, b)
    return float(np.linalg.norm(a.entries - b.entries))


def per_diagonal_distance(
    a: TwoModeDensityMatrix, b: TwoModeDensityMatrix, r: int, per_element: bool = False
) -> float:
    """Norm of the difference on the elements ``rho_{i, i+r}``.

    With ``per_element`` the norm is divided by ``sqrt(N - r + 1)``, the number
    of elements on that diagonal.
    """
    _same_geometry(a, b)
    N = a.geometry.total_number
    if not 0 <= r <= N:
        raise IndexOutOfRange(f"diagonal r={r} outside 0..{N}")
    dist = float(np.linalg.norm(np.diagonal(a.entries - b.entries, offset=r)))
    return dist / math.sqrt(N - r + 1) if per_element else dist


def random_pure_state(geometry: AngularMomentumGeometry, rng: np.random.Generator) -> PureState:
    """Haar-random pure state (test helper)."""
    v = rng.normal(size=geometry.dimension) + 1j * rng.normal(size=geometry.dimension)
    return PureState(geometry, v / np.linalg.norm(v))


def random_mixed_state(
    geometry: AngularMomentumGeometry, rng: np.random.Generator, rank: int | None = None
) -> TwoModeDensityMatrix:
    """Mixture of ``rank`` random pure states with Dirichlet weights."""
    rank = rank or geometry.dimension
    weights = rng.dirichlet(np.ones(rank))
    weights /= weights.sum()
    weights[-1] = 1.0 - weights[:-1].sum()
    return density_from_mixture(
        [(w, random_pure_state(geometry, rng)) for w in np.clip(weights, 0.0, None)]
    )


def density_from_matrix(geometry: AngularMomentumGeometry, entries: Sequence) -> TwoModeDensityMatrix:
    return TwoModeDensityMatrix(geometry, np.asarray(entries, dtype=complex))
