"""Schwinger two-mode <-> angular momentum bookkeeping and rotation matrices.

A two-mode state with ``N`` atoms, ``n`` of them in mode 1, is the spin
state ``|j, m>`` with ``j = N/2`` and ``m = n - j``.  The phase shifter and
beamsplitter together act as ``U(theta, phi) = exp[i 2 theta J.n_phi]`` with
``n_phi = x cos(phi) - y sin(phi)``.

Arrays are always indexed by the integer ``n`` in ``0..N``; half-integer
labels only appear inside formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2
import numpy as np
from scipy.linalg import expm

from .errors import IndexOutOfRange, ScaleExceeded

ORACLE_MAX_N = 64
DEFAULT_BALANCED_GUARD = 1e-6

# Target absolute accuracy of a rotation matrix entry.  Entries whose k-sum
# cancels badly enough to miss it in double precision are re-summed in MPFR.
_ENTRY_TOL = 1e-14
_EPS = np.finfo(float).eps
# i**p for p = 0..3
_I_POWERS = np.array([1.0, 1.0j, -1.0, -1.0j])


@dataclass(frozen=True)
class AngularMomentumGeometry:
    """Fixed total atom number ``N``; ``j = N/2`` is kept doubled (``two_j == N``)."""

    total_number: int

    def __post_init__(self):
        if isinstance(self.total_number, bool) or int(self.total_number) != self.total_number:
            raise ValueError(f"total_number must be an integer, got {self.total_number!r}")
        if self.total_number < 0:
            raise ValueError("total_number must be nonnegative")
        object.__setattr__(self, "total_number", int(self.total_number))

    @property
    def dimension(self) -> int:
        return self.total_number + 1

    @property
    def two_j(self) -> int:
        return self.total_number

    @property
    def j(self) -> Fraction:
        return Fraction(self.total_number, 2)

    def m_of(self, n: int) -> Fraction:
        """Spin projection for mode-1 count ``n``."""
        if not 0 <= n <= self.total_number:
            raise IndexOutOfRange(f"n={n} outside 0..{self.total_number}")
        return Fraction(2 * n - self.total_number, 2)

    def index_of(self, m) -> int:
        """Mode-1 count ``n`` for the (half-)integer projection ``m``."""
        two_m = Fraction(m) * 2
        if two_m.denominator != 1:
            raise IndexOutOfRange(f"m={m} is not a half-integer")
        two_n = int(two_m) + self.total_number
        if two_n % 2 or not 0 <= two_n // 2 <= self.total_number:
            raise IndexOutOfRange(f"m={m} not in {{-j..j}} for j={self.j}")
        return two_n // 2

    def m_values(self) -> list[Fraction]:
        return [self.m_of(n) for n in range(self.dimension)]


@dataclass(frozen=True)
class BeamSplitterSetting:
    """Beamsplitter angle ``theta`` (transmission cos^2 theta) and phase shift ``phase``."""

    theta: float
    phase: float = 0.0
    guard: float = DEFAULT_BALANCED_GUARD

    def __post_init__(self):
        theta = float(self.theta)
        if not (0.0 <= theta <= math.pi / 2):
            raise ValueError(f"theta={theta} outside [0, pi/2]")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phase", float(self.phase) % (2 * math.pi))

    @property
    def transmission(self) -> float:
        return math.cos(self.theta) ** 2

    @property
    def balanced(self) -> bool:
        return abs(self.theta - math.pi / 4) < self.guard

    def with_phase(self, phase: float) -> "BeamSplitterSetting":
        return BeamSplitterSetting(self.theta, phase, self.guard)


@dataclass(frozen=True, eq=False)
class RotationMatrix:
    """``entries[a, b] = <l|U(theta, phi)|m>`` with ``l = a - j``, ``m = b - j``."""

    geometry: AngularMomentumGeometry
    setting: BeamSplitterSetting
    entries: np.ndarray

    def __post_init__(self):
        self.entries.setflags(write=False)

    def unitarity_error(self) -> float:
        d = self.entries
        return float(np.abs(d.conj().T @ d - np.eye(d.shape[0])).max())


@lru_cache(maxsize=None)
def _log_factorials(max_n: int) -> np.ndarray:
    # math.log of the exact integer factorial is correctly rounded to ~1 ulp
    table = np.array([math.log(math.factorial(n)) for n in range(max_n + 1)])
    table.setflags(write=False)
    return table


def log_factorial_table(max_n: int) -> np.ndarray:
    """Return ``ln(n!)`` for ``n = 0..max_n`` (read-only array)."""
    if max_n < 0:
        raise ValueError("max_n must be nonnegative")
    return _log_factorials(int(max_n))


@lru_cache(maxsize=None)
def _factorials(max_n: int) -> tuple:
    return tuple(gmpy2.mpz(math.factorial(n)) for n in range(max_n + 1))


def _neumaier_add(total, comp, term):
    """Vectorized compensated accumulation step; returns new (total, comp)."""
    t = total + term
    big = np.abs(total) >= np.abs(term)
    comp = comp + np.where(big, (total - t) + term, (term - t) + total)
    return t, comp


def _double_sums(n_total: int, theta: float, nl: np.ndarray, nm: np.ndarray):
    """Real k-sums in double precision plus the sum of term magnitudes.

    The element is ``i**(nl - nm) * sum`` at phase zero.  Every term is
    ``sign * exp(log magnitude)``; the sign is ``i**(2k) = (-1)**k``.
    """
    N = n_total
    lf = log_factorial_table(N)
    c, s = math.cos(theta), math.sin(theta)
    log_c = math.log(c) if c > 0 else -math.inf
    log_s = math.log(s) if s > 0 else -math.inf
    prefix = 0.5 * (lf[nm] + lf[N - nm] + lf[nl] + lf[N - nl])

    total = np.zeros(nl.shape)
    comp = np.zeros(nl.shape)
    magnitude = np.zeros(nl.shape)
    k_lo = np.maximum(0, nm - nl)
    k_hi = np.minimum(nm, N - nl)
    for k in range(N + 1):
        valid = (k >= k_lo) & (k <= k_hi)
        if not valid.any():
            continue
        cos_pow = N - 2 * k + nm - nl
        sin_pow = 2 * k + nl - nm
        a = np.clip(nm - k, 0, N)
        b = np.clip(N - nl - k, 0, N)
        d = np.clip(k + nl - nm, 0, N)
        with np.errstate(invalid="ignore"):
            # 0 * -inf only occurs for a zero exponent, where the power is 1
            log_pow = np.where(cos_pow == 0, 0.0, cos_pow * log_c) + np.where(
                sin_pow == 0, 0.0, sin_pow * log_s
            )
        log_mag = prefix - lf[k] - lf[a] - lf[b] - lf[d] + log_pow
        term = np.where(valid, np.exp(np.where(valid, log_mag, -np.inf)), 0.0)
        if k % 2:
            term = -term
        total, comp = _neumaier_add(total, comp, term)
        magnitude += np.abs(term)
    return total + comp, magnitude


def _mpfr_sum(n_total: int, cs, nl: int, nm: int) -> float:
    """Same k-sum as ``_double_sums`` for one element, in the active MPFR precision."""
    N = n_total
    fact = _factorials(N)
    c, s, ratio = cs
    k_lo = max(0, nm - nl)
    k_hi = min(nm, N - nl)
    root = gmpy2.sqrt(gmpy2.mpfr(fact[nm] * fact[N - nm] * fact[nl] * fact[N - nl]))
    denom = fact[k_lo] * fact[nm - k_lo] * fact[N - nl - k_lo] * fact[k_lo + nl - nm]
    term = root / denom * c ** (N - 2 * k_lo + nm - nl) * s ** (2 * k_lo + nl - nm)
    if k_lo % 2:
        term = -term
    acc = term
    for k in range(k_lo, k_hi):
        term = term * ratio * ((nm - k) * (N - nl - k)) / ((k + 1) * (k + 1 + nl - nm))
        acc += term
    return float(acc)


def _refine(n_total, theta, nl, nm, sums, magnitude):
    """Re-sum entries whose double-precision cancellation error may exceed ``_ENTRY_TOL``."""
    lf_max = log_factorial_table(n_total)[-1] if n_total else 0.0
    # relative error of one term is dominated by exp() of a log of size ~lf_max
    err = magnitude * _EPS * (4.0 * lf_max + n_total + 8.0)
    bad = np.flatnonzero(err > _ENTRY_TOL)
    if bad.size == 0:
        return sums
    c_dbl = math.cos(theta)
    if c_dbl == 0.0:
        return sums
    prec = 64 + int(math.ceil(math.log2(float(magnitude.flat[bad].max()) + 1.0)))
    out = sums.copy()
    with gmpy2.context(gmpy2.get_context(), precision=prec):
        t = gmpy2.mpfr(theta)
        c, s = gmpy2.cos(t), gmpy2.sin(t)
        cs = (c, s, -(s * s) / (c * c))
        for idx in bad:
            out.flat[idx] = _mpfr_sum(n_total, cs, int(nl.flat[idx]), int(nm.flat[idx]))
    return out


def _check_label(geometry: AngularMomentumGeometry, label) -> int:
    try:
        return geometry.index_of(label)
    except (TypeError, ValueError) as exc:
        raise IndexOutOfRange(f"invalid label {label!r}") from exc


def wigner_element(geometry: AngularMomentumGeometry, setting: BeamSplitterSetting, l, m) -> complex:
    """``<l| U(theta, phi) |m>`` from the explicit factorial sum.

    ``l`` and ``m`` are (half-)integers in ``{-j..j}``; floats such as ``0.5``
    and :class:`fractions.Fraction` are both accepted.
    """
    nl = np.array([_check_label(geometry, l)])
    nm = np.array([_check_label(geometry, m)])
    N = geometry.total_number
    sums, mag = _double_sums(N, setting.theta, nl, nm)
    value = _refine(N, setting.theta, nl, nm, sums, mag)[0]
    diff = int(nl[0] - nm[0])
    return complex(_I_POWERS[diff % 4] * value * np.exp(1j * diff * setting.phase))


def _reduced_matrix(n_total: int, theta: float) -> np.ndarray:
    """Real k-sums for every (l, m) at phase zero, using the symmetries of exp(2i theta J_x).

    J_x is real symmetric and commutes with the flip m -> -m, so the phase-zero
    matrix is symmetric and centro-symmetric; only one representative per
    orbit is evaluated.
    """
    N = n_total
    a, b = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    rep = (a <= b) & (a + b <= N)
    nl, nm = a[rep], b[rep]
    sums, mag = _double_sums(N, theta, nl, nm)
    sums = _refine(N, theta, nl, nm, sums, mag)
    out = np.empty((N + 1, N + 1))
    # transpose and flip both reverse l-m, so the real sum picks up (-1)**(l-m)
    swapped = np.where((nl - nm) % 2, -sums, sums)
    out[nl, nm] = sums
    out[nm, nl] = swapped
    out[N - nl, N - nm] = swapped
    out[N - nm, N - nl] = sums
    return out


@lru_cache(maxsize=64)
def _phase_zero_matrix(n_total: int, theta: float) -> np.ndarray:
    n = np.arange(n_total + 1)
    diff = n[:, None] - n[None, :]
    mat = _I_POWERS[diff % 4] * _reduced_matrix(n_total, theta)
    mat.setflags(write=False)
    return mat


def phase_zero_rotation(geometry: AngularMomentumGeometry, theta: float) -> np.ndarray:
    """``D(theta, 0)`` as a read-only complex array (cached per ``(N, theta)``)."""
    return _phase_zero_matrix(geometry.total_number, float(theta))


def apply_phase(d0: np.ndarray, phase: float) -> np.ndarray:
    """``D(theta, phi)[l, m] = D(theta, 0)[l, m] * exp(i (l - m) phi)``."""
    n = np.arange(d0.shape[0])
    return d0 * np.exp(1j * (n[:, None] - n[None, :]) * phase)


def rotation_matrix(geometry: AngularMomentumGeometry, setting: BeamSplitterSetting) -> RotationMatrix:
    d0 = phase_zero_rotation(geometry, setting.theta)
    return RotationMatrix(geometry, setting, apply_phase(d0, setting.phase))


def ladder_operators(geometry: AngularMomentumGeometry):
    """Dense ``(J_+, J_-, J_z)`` with ``<m+1|J_+|m> = sqrt(j(j+1) - m(m+1))``."""
    N = geometry.total_number
    j = N / 2
    m = np.arange(N + 1) - j
    up = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    j_plus = np.diag(up, k=-1).astype(complex)
    return j_plus, j_plus.conj().T, np.diag(m).astype(complex)


def rotation_oracle(geometry: AngularMomentumGeometry, setting: BeamSplitterSetting) -> np.ndarray:
    """Dense ``expm(i 2 theta (J_x cos phi - J_y sin phi))`` built from ladder operators."""
    if geometry.total_number > ORACLE_MAX_N:
        raise ScaleExceeded(f"rotation_oracle supports N <= {ORACLE_MAX_N}")
    j_plus, j_minus, _ = ladder_operators(geometry)
    jx = (j_plus + j_minus) / 2
    jy = (j_plus - j_minus) / 2j
    phi = setting.phase
    generator = jx * math.cos(phi) - jy * math.sin(phi)
    return expm(2j * setting.theta * generator)
