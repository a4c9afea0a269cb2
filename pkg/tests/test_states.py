import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from bectomo.errors import GeometryMismatch, IndexOutOfRange, WeightError
from bectomo.states import (
    CoherentSpinParams,
    TwoModeDensityMatrix,
    coherent_projected_state,
    density_from_mixture,
    fock_product_state,
    per_diagonal_distance,
    random_pure_state,
    state_distance,
)
from bectomo.su2 import AngularMomentumGeometry

from helpers import REF_AZIMUTH, REF_N, REF_POLAR


def test_symmetric_coherent_state():
    psi = coherent_projected_state(AngularMomentumGeometry(1), CoherentSpinParams(math.pi / 4, 0.0))
    np.testing.assert_allclose(psi.amplitudes, [1 / math.sqrt(2)] * 2, atol=1e-15)


@pytest.mark.parametrize("n,polar", [(3, 0.3), (REF_N, REF_POLAR), (12, 1.2)])
def test_coherent_populations_are_binomial(n, polar):
    psi = coherent_projected_state(AngularMomentumGeometry(n), CoherentSpinParams(polar, 0.4))
    expected = binom.pmf(np.arange(n + 1), n, math.cos(polar) ** 2)
    np.testing.assert_allclose(np.abs(psi.amplitudes) ** 2, expected, atol=1e-12)


def test_reference_state_global_phase():
    psi = coherent_projected_state(AngularMomentumGeometry(REF_N), CoherentSpinParams(REF_POLAR, REF_AZIMUTH))
    assert np.allclose(np.angle(psi.amplitudes), REF_AZIMUTH)
    assert np.vdot(psi.amplitudes, psi.amplitudes).real == pytest.approx(1.0, abs=1e-12)


def test_relative_phase_variant():
    g = AngularMomentumGeometry(5)
    psi = coherent_projected_state(g, CoherentSpinParams(0.6, 0.3), relative_phase=True)
    ratios = psi.amplitudes[1:] / psi.amplitudes[:-1]
    np.testing.assert_allclose(np.angle(ratios), 0.3, atol=1e-12)


def test_fock_states():
    g = AngularMomentumGeometry(4)
    np.testing.assert_array_equal(fock_product_state(g, 4).amplitudes, [0, 0, 0, 0, 1])
    np.testing.assert_array_equal(fock_product_state(g, 0).amplitudes, [1, 0, 0, 0, 0])
    g6 = AngularMomentumGeometry(6)
    # n1 = N/2 + m with m = +-2
    assert g6.m_of(5) == 2 and g6.m_of(1) == -2
    with pytest.raises(IndexOutOfRange):
        fock_product_state(g, 5)


def test_pure_mixture_is_projector():
    psi = random_pure_state(AngularMomentumGeometry(5), np.random.default_rng(1))
    rho = density_from_mixture([(1.0, psi)])
    assert rho.purity == pytest.approx(1.0, abs=1e-12)


def test_equal_fock_mixture():
    g = AngularMomentumGeometry(2)
    rho = density_from_mixture([(0.5, fock_product_state(g, 0)), (0.5, fock_product_state(g, 2))])
    np.testing.assert_array_equal(rho.entries, np.diag([0.5, 0, 0.5]))


def test_two_state_mixture_eigenvalues(rng):
    g = AngularMomentumGeometry(5)
    rho = density_from_mixture([(0.3, random_pure_state(g, rng)), (0.7, random_pure_state(g, rng))])
    assert np.trace(rho.entries).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(rho.entries).min() >= -1e-12


def test_mixture_errors(rng):
    g = AngularMomentumGeometry(2)
    a = random_pure_state(g, rng)
    with pytest.raises(WeightError):
        density_from_mixture([(0.6, a), (0.6, a)])
    with pytest.raises(WeightError):
        density_from_mixture([(1.5, a), (-0.5, a)])
    with pytest.raises(GeometryMismatch):
        density_from_mixture([(0.5, a), (0.5, random_pure_state(AngularMomentumGeometry(3), rng))])


def test_density_rejects_bad_matrices():
    g = AngularMomentumGeometry(1)
    with pytest.raises(ValueError):
        TwoModeDensityMatrix(g, [[1.0, 0.5], [0.0, 0.0]])
    with pytest.raises(ValueError):
        TwoModeDensityMatrix(g, np.eye(2))
    # purity > 1 is tolerated unless the physical invariants are requested
    odd = np.array([[1.5, 0], [0, -0.5]])
    TwoModeDensityMatrix(g, odd)
    with pytest.raises(ValueError):
        TwoModeDensityMatrix(g, odd, physical=True)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(0, 20), k=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_mixtures_satisfy_invariants(n, k, seed):
    rng = np.random.default_rng(seed)
    g = AngularMomentumGeometry(n)
    w = rng.dirichlet(np.ones(k))
    w[-1] = 1 - w[:-1].sum()
    rho = density_from_mixture([(max(x, 0.0), random_pure_state(g, rng)) for x in w])
    assert TwoModeDensityMatrix.invariant_violations(rho.entries, 1e-12, physical=True) == []


def test_distances_trivial():
    g = AngularMomentumGeometry(1)
    a = density_from_mixture([(1.0, fock_product_state(g, 1))])
    b = density_from_mixture([(1.0, fock_product_state(g, 0))])
    assert per_diagonal_distance(a, a, 0) == 0 and per_diagonal_distance(a, a, 1) == 0
    assert per_diagonal_distance(a, b, 0) == pytest.approx(math.sqrt(2))
    assert per_diagonal_distance(a, b, 0, per_element=True) == pytest.approx(1.0)
    with pytest.raises(GeometryMismatch):
        state_distance(a, density_from_mixture([(1.0, fock_product_state(AngularMomentumGeometry(2), 0))]))


def test_distances_against_naive_sums(rng):
    g = AngularMomentumGeometry(5)
    a = density_from_mixture([(1.0, random_pure_state(g, rng))])
    b = density_from_mixture([(0.4, random_pure_state(g, rng)), (0.6, random_pure_state(g, rng))])
    total = 0.0
    for i in range(6):
        for k in range(6):
            total += abs(a.entries[i, k] - b.entries[i, k]) ** 2
    assert state_distance(a, b) == pytest.approx(math.sqrt(total), abs=1e-14)
    for r in range(6):
        diag = sum(abs(a.entries[i, i + r] - b.entries[i, i + r]) ** 2 for i in range(6 - r))
        assert per_diagonal_distance(a, b, r) == pytest.approx(math.sqrt(diag), abs=1e-14)
        assert per_diagonal_distance(a, b, r, per_element=True) == pytest.approx(
            math.sqrt(diag) / math.sqrt(6 - r), abs=1e-14
        )


@settings(max_examples=25, deadline=None)
@given(n=st.integers(0, 15), seed=st.integers(0, 2**32 - 1))
def test_diagonal_norms_add_up(n, seed):
    rng = np.random.default_rng(seed)
    g = AngularMomentumGeometry(n)
    a = density_from_mixture([(1.0, random_pure_state(g, rng))])
    b = density_from_mixture([(1.0, random_pure_state(g, rng))])
    parts = [per_diagonal_distance(a, b, r) ** 2 * (1 if r == 0 else 2) for r in range(n + 1)]
    assert sum(parts) == pytest.approx(state_distance(a, b) ** 2, abs=1e-10)
