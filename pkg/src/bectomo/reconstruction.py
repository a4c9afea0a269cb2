"""Density-matrix reconstruction from probability surfaces.

Each diagonal ``rho_{l, l-r}`` is solved independently from the r-th Fourier
harmonic of the data via the SVD of its :class:`~bectomo.forward.DiagonalOperator`,
optionally with Tikhonov damping.  Subdiagonals are filled by conjugation.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import BalancedBeamsplitter, GeometryMismatch, ScaleExceeded, SingularModel, ThetaMismatch
from .forward import (
    DiagonalOperator,
    FourierDiagonalData,
    ProbabilitySurface,
    diagonal_operator,
    fourier_transform,
)
from .noise import noise_norm_estimate
from .states import TwoModeDensityMatrix, per_diagonal_distance
from .su2 import DEFAULT_BALANCED_GUARD, AngularMomentumGeometry, BeamSplitterSetting, rotation_matrix

log = logging.getLogger(__name__)

DEFAULT_THETA = math.pi / 8
RANK_TOL = 1e-6
ILL_CONDITIONED = 1e4
JOINT_MAX_N = 12
THETA_MATCH_TOL = 1e-12


@dataclass(frozen=True)
class ReconstructionConfig:
    """``tikhonov_lambda`` is a number >= 0 or ``"auto"`` (= 1/sqrt(K tau))."""

    theta: Optional[float] = None
    tikhonov_lambda: Union[float, str] = 0.0
    max_diagonal: Optional[int] = None
    balanced_guard: float = DEFAULT_BALANCED_GUARD
    rank_tol: float = RANK_TOL
    workers: int = 1

    def __post_init__(self):
        lam = self.tikhonov_lambda
        if isinstance(lam, str):
            if lam != "auto":
                raise ValueError(f"tikhonov_lambda must be a number or 'auto', got {lam!r}")
        elif not lam >= 0:
            raise ValueError("tikhonov_lambda must be >= 0")
        if self.max_diagonal is not None and self.max_diagonal < 0:
            raise ValueError("max_diagonal must be >= 0")

    def resolve_lambda(self, K: int, tau: int) -> float:
        if self.tikhonov_lambda == "auto":
            return noise_norm_estimate(K, tau) if tau else 0.0
        return float(self.tikhonov_lambda)


@dataclass
class DiagonalRecord:
    r: int
    min_sigma: float
    max_sigma: float
    condition_number: float
    bound: float
    bound_per_element: float
    lam: float
    residual: Optional[float] = None
    measured_error: Optional[float] = None
    measured_error_per_element: Optional[float] = None


@dataclass
class ReconstructionReport:
    n: int
    theta: float
    phases: int
    trials_per_phase: float
    noise_norm: float
    lambda_rule: str
    diagonals: list[DiagonalRecord] = field(default_factory=list)
    balanced: bool = False
    aliased: bool = False
    imag_residue_r0: Optional[float] = None
    trace_factor: Optional[float] = None
    seed: Optional[int] = None
    noise_model: Optional[str] = None
    clip_psd: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def transmission(self) -> float:
        return math.cos(self.theta) ** 2

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.diagonals], dtype=float)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["transmission"] = self.transmission
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ReconstructionReport":
        data = dict(data)
        data.pop("transmission", None)
        data["diagonals"] = [DiagonalRecord(**d) for d in data.get("diagonals", [])]
        return cls(**data)

    def attach_truth(self, reconstructed: TwoModeDensityMatrix, truth: TwoModeDensityMatrix):
        """Fill the measured per-diagonal error columns from a known state."""
        for rec in self.diagonals:
            rec.measured_error = per_diagonal_distance(reconstructed, truth, rec.r)
            rec.measured_error_per_element = per_diagonal_distance(
                reconstructed, truth, rec.r, per_element=True
            )


def _check_theta(theta: float, guard: float):
    if abs(theta - math.pi / 4) < guard:
        raise BalancedBeamsplitter(
            f"theta={theta!r} is within {guard:g} of pi/4; a balanced beamsplitter cannot "
            "distinguish |m> from |-m>"
        )


def solve_diagonal(
    operator: DiagonalOperator, f: FourierDiagonalData, lam: float = 0.0, rank_tol: float = RANK_TOL
) -> np.ndarray:
    """``argmin ||T x - F||^2 + lam^2 ||x||^2`` through the SVD of ``T``.

    ``lam = 0`` is the minimum-norm least-squares solution and is refused for
    numerically rank-deficient ``T``.
    """
    if operator.geometry != f.geometry or operator.order != f.order:
        raise GeometryMismatch("operator and Fourier data disagree on N or r")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    s = operator.singular_values
    if lam == 0 and s[-1] < rank_tol * s[0]:
        raise SingularModel(
            f"diagonal r={operator.order}: min sigma {s[-1]:.3g} < {rank_tol:g} * max sigma {s[0]:.3g}"
        )
    filt = s / (s * s + lam * lam)
    return operator.right_h.conj().T @ (filt * (operator.left.conj().T @ f.coefficients))


def a_priori_record(op: DiagonalOperator, noise_norm: float, lam: float) -> DiagonalRecord:
    N = op.geometry.total_number
    smin = op.min_singular_value
    bound = noise_norm / smin if smin > 0 else (0.0 if noise_norm == 0 else math.inf)
    return DiagonalRecord(
        r=op.order,
        min_sigma=smin,
        max_sigma=op.max_singular_value,
        condition_number=op.condition_number,
        bound=bound,
        bound_per_element=bound / math.sqrt(N - op.order + 1),
        lam=lam,
    )


def error_report(
    geometry: AngularMomentumGeometry,
    theta: float,
    K: int,
    tau: float,
    lam: float = 0.0,
    guard: float = DEFAULT_BALANCED_GUARD,
) -> ReconstructionReport:
    """Data-independent error bounds ``(1/sqrt(K tau)) / min sigma`` for every diagonal."""
    _check_theta(theta, guard)
    noise = noise_norm_estimate(K, tau)
    report = ReconstructionReport(
        n=geometry.total_number, theta=float(theta), phases=int(K), trials_per_phase=float(tau),
        noise_norm=noise, lambda_rule=repr(float(lam)),
        aliased=K < 2 * geometry.total_number + 2,
    )
    for r in range(geometry.dimension):
        report.diagonals.append(a_priori_record(diagonal_operator(geometry, theta, r), noise, lam))
    return report


def _solve_order(surface, theta, r, lam, rank_tol):
    op = diagonal_operator(surface.geometry, theta, r)
    f = fourier_transform(surface, r)
    x = solve_diagonal(op, f, lam, rank_tol)
    return op, f, x


def reconstruct(
    surface: ProbabilitySurface, config: ReconstructionConfig = ReconstructionConfig()
) -> tuple[TwoModeDensityMatrix, ReconstructionReport]:
    theta = surface.theta if config.theta is None else float(config.theta)
    _check_theta(theta, config.balanced_guard)
    if abs(theta - surface.theta) > THETA_MATCH_TOL:
        raise ThetaMismatch(f"config theta {theta!r} != surface theta {surface.theta!r}")
    geometry = surface.geometry
    N = geometry.total_number
    K, tau = surface.grid.count, surface.trials_per_phase
    max_r = N if config.max_diagonal is None else min(config.max_diagonal, N)
    lam = config.resolve_lambda(K, tau)
    noise = noise_norm_estimate(K, tau if tau else math.inf)

    report = ReconstructionReport(
        n=N, theta=theta, phases=K, trials_per_phase=float(tau), noise_norm=noise,
        lambda_rule=("auto=1/sqrt(K*tau)" if config.tikhonov_lambda == "auto" else repr(lam)),
        aliased=surface.aliased, seed=surface.seed, noise_model=surface.noise_model,
    )
    if surface.aliased:
        report.warnings.append(f"phase grid K={K} < 2N+2={2 * N + 2}: harmonics alias")

    orders = range(max_r + 1)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            solved = list(pool.map(lambda r: _solve_order(surface, theta, r, lam, config.rank_tol), orders))
    else:
        solved = [_solve_order(surface, theta, r, lam, config.rank_tol) for r in orders]

    rho = np.zeros((N + 1, N + 1), dtype=complex)
    idx = np.arange(N + 1)
    for op, f, x in solved:
        r = op.order
        rec = a_priori_record(op, noise, lam)
        rec.residual = float(np.linalg.norm(op.matrix @ x - f.coefficients))
        if rec.condition_number > ILL_CONDITIONED:
            report.warnings.append(f"diagonal r={r} ill-conditioned (cond={rec.condition_number:.3g})")
        if r == 0:
            report.imag_residue_r0 = float(np.abs(x.imag).max())
            rho[idx, idx] = x.real
        else:
            i = idx[: N + 1 - r]
            rho[i + r, i] = x
            rho[i, i + r] = x.conj()
        report.diagonals.append(rec)

    if report.warnings:
        log.warning("%d reconstruction warning(s); first: %s", len(report.warnings), report.warnings[0])

    trace = float(np.trace(rho).real)
    if trace == 0.0:
        raise SingularModel("reconstructed trace is zero")
    report.trace_factor = 1.0 / trace
    rho *= report.trace_factor
    return TwoModeDensityMatrix(geometry, rho), report


def clip_to_psd(rho: TwoModeDensityMatrix) -> TwoModeDensityMatrix:
    """Nearest positive semidefinite, unit-trace matrix by eigenvalue clipping."""
    w, v = np.linalg.eigh(rho.entries)
    w = np.clip(w, 0.0, None)
    fixed = (v * w) @ v.conj().T
    fixed = (fixed + fixed.conj().T) / 2
    return TwoModeDensityMatrix(rho.geometry, fixed / np.trace(fixed).real)


@dataclass(frozen=True, eq=False)
class JointSolution:
    """Unconstrained solution over all (N+1)^2 complex unknowns."""

    rho: np.ndarray
    rank: int
    unknowns: int
    residual: float


def full_forward_matrix(geometry: AngularMomentumGeometry, theta: float, phases: np.ndarray) -> np.ndarray:
    """``T[(m, k), (l, l')] = conj(D_{l m}(phi_k)) D_{l' m}(phi_k)``."""
    dim = geometry.dimension
    blocks = []
    for phi in phases:
        d = rotation_matrix(geometry, BeamSplitterSetting(theta, phi)).entries
        # rows m, columns (l, l') flattened row-major
        blocks.append(np.einsum("am,bm->mab", d.conj(), d).reshape(dim, dim * dim))
    # order rows as (m, k)
    return np.stack(blocks, axis=1).reshape(dim * len(phases), dim * dim)


def joint_least_squares_oracle(
    surface: ProbabilitySurface,
    theta: Optional[float] = None,
    allow_balanced: bool = False,
    guard: float = DEFAULT_BALANCED_GUARD,
) -> JointSolution:
    """Solve ``P = T vec(rho)`` in one stacked real least-squares problem."""
    geometry = surface.geometry
    if geometry.total_number > JOINT_MAX_N:
        raise ScaleExceeded(f"joint oracle supports N <= {JOINT_MAX_N}")
    theta = surface.theta if theta is None else float(theta)
    if abs(theta - math.pi / 4) < guard and not allow_balanced:
        raise SingularModel("T^dag T is singular for a balanced beamsplitter")
    t = full_forward_matrix(geometry, theta, surface.grid.values)
    p = surface.values.reshape(-1)  # row-major (m, k) matches T rows
    stacked = np.block([[t.real, -t.imag], [t.imag, t.real]])
    rhs = np.concatenate([p, np.zeros_like(p)])
    sol, _, rank, _ = np.linalg.lstsq(stacked, rhs, rcond=None)
    n2 = geometry.dimension ** 2
    vec = sol[:n2] + 1j * sol[n2:]
    residual = float(np.linalg.norm(stacked @ sol - rhs))
    return JointSolution(vec.reshape(geometry.dimension, geometry.dimension), int(rank), 2 * n2, residual)
