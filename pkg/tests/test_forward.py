import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from bectomo.errors import NonHermitianInput, OrderOutOfRange
from bectomo.forward import (
    PhaseGrid,
    ProbabilitySurface,
    diagonal_operator,
    exact_probabilities,
    fourier_transform,
    harmonic,
    probability_surface,
)
from bectomo.states import (
    CoherentSpinParams,
    coherent_projected_state,
    density_from_mixture,
    fock_product_state,
    random_mixed_state,
)
from bectomo.su2 import AngularMomentumGeometry, BeamSplitterSetting, rotation_oracle

from helpers import REF_AZIMUTH, REF_K, REF_N, REF_POLAR, oracle_forward_block


def fock_density(n, n1):
    return density_from_mixture([(1.0, fock_product_state(AngularMomentumGeometry(n), n1))])


@pytest.mark.parametrize("n,theta", [(1, 0.3), (6, math.pi / 8), (20, 1.0)])
def test_single_mode_input_gives_binomial(n, theta):
    rho = fock_density(n, n)
    expected = binom.pmf(np.arange(n + 1), n, math.cos(theta) ** 2)
    for phi in (0.0, 2.5):
        p = exact_probabilities(rho, BeamSplitterSetting(theta, phi))
        np.testing.assert_allclose(p, expected, atol=1e-13)


def test_probabilities_against_expm_oracle(rng):
    g = AngularMomentumGeometry(3)
    rho = random_mixed_state(g, rng)
    s = BeamSplitterSetting(0.6, 1.1)
    u = rotation_oracle(g, s)
    expected = np.real(np.diag(u.conj().T @ rho.entries @ u))
    np.testing.assert_allclose(exact_probabilities(rho, s), expected, atol=1e-10)
    assert exact_probabilities(rho, s).sum() == pytest.approx(1.0, abs=1e-12)


def test_non_hermitian_input_rejected():
    bad = np.array([[0.5, 0.1], [0.3, 0.5]])
    with pytest.raises(NonHermitianInput):
        exact_probabilities(bad, BeamSplitterSetting(0.3))


def test_surface_matches_columnwise_probabilities(rng):
    g = AngularMomentumGeometry(5)
    rho = random_mixed_state(g, rng)
    grid = PhaseGrid(12)
    surf = probability_surface(rho, 0.5, grid)
    for k, phi in enumerate(grid.values):
        np.testing.assert_allclose(surf.values[:, k], exact_probabilities(rho, BeamSplitterSetting(0.5, phi)), atol=1e-13)
    assert surf.exact and not surf.aliased


def test_fock_surface_is_phase_independent():
    surf = probability_surface(fock_density(8, 3), 0.4, PhaseGrid(20))
    assert np.abs(surf.values - surf.values[:, :1]).max() <= 1e-14
    assert np.abs(fourier_transform(surf, 1).coefficients).max() <= 1e-15


def test_ref_surface_shape_and_normalization():
    g = AngularMomentumGeometry(REF_N)
    rho = coherent_projected_state(g, CoherentSpinParams(REF_POLAR, REF_AZIMUTH)).density()
    surf = probability_surface(rho, math.pi / 8, PhaseGrid(REF_K))
    assert surf.values.shape == (50, 180)
    assert np.abs(surf.values.sum(axis=0) - 1).max() <= 1e-12
    assert surf.values.min() >= -1e-14


def test_alias_free_grids_agree(rng):
    rho = random_mixed_state(AngularMomentumGeometry(4), rng)
    coarse = probability_surface(rho, 0.5, PhaseGrid(10))
    fine = probability_surface(rho, 0.5, PhaseGrid(20))
    for r in range(5):
        np.testing.assert_allclose(
            fourier_transform(coarse, r).coefficients, fourier_transform(fine, r).coefficients, atol=1e-12
        )


def test_aliased_grid_is_flagged():
    rho = fock_density(4, 2)
    surf = probability_surface(rho, 0.5, PhaseGrid(9))
    assert surf.aliased


def test_zeroth_order_is_row_mean(rng):
    surf = probability_surface(random_mixed_state(AngularMomentumGeometry(3), rng), 0.3, PhaseGrid(8))
    np.testing.assert_allclose(fourier_transform(surf, 0).coefficients, surf.values.mean(axis=1), atol=1e-15)


def test_fourier_against_direct_sum(rng):
    n = 5
    g = AngularMomentumGeometry(n)
    rho = random_mixed_state(g, rng)
    surf = probability_surface(rho, 0.7, PhaseGrid(2 * n + 2))
    for r in range(n + 1):
        t = oracle_forward_block(n, 0.7, r)
        direct = np.array([sum(t[m, i] * rho.entries[i + r, i] for i in range(n + 1 - r)) for m in range(n + 1)])
        np.testing.assert_allclose(fourier_transform(surf, r).coefficients, direct, atol=1e-12)


def test_order_range():
    surf = probability_surface(fock_density(3, 1), 0.3, PhaseGrid(8))
    with pytest.raises(OrderOutOfRange):
        fourier_transform(surf, 4)
    with pytest.raises(OrderOutOfRange):
        diagonal_operator(AngularMomentumGeometry(3), 0.3, -1)


def test_band_limit(rng):
    n = 6
    surf = probability_surface(random_mixed_state(AngularMomentumGeometry(n), rng), 0.5, PhaseGrid(40))
    # orders strictly between N and K - N cannot alias back onto a real harmonic
    for r in range(n + 1, 40 - n):
        assert np.abs(harmonic(surf, r)).max() <= 1e-12


def test_balanced_operator_kills_odd_vectors(rng):
    for n in (4, 9):
        op = diagonal_operator(AngularMomentumGeometry(n), math.pi / 4, 0)
        for _ in range(10):
            v = rng.normal(size=n + 1)
            v = v - v[::-1]
            assert np.linalg.norm(op.apply(v)) <= 1e-12 * np.linalg.norm(v)


def test_last_diagonal_is_single_column():
    g = AngularMomentumGeometry(1)
    theta = math.pi / 8
    op = diagonal_operator(g, theta, 1)
    assert op.matrix.shape == (2, 1)
    d = rotation_oracle(g, BeamSplitterSetting(theta))
    np.testing.assert_allclose(op.matrix[:, 0], np.conj(d[1, :]) * d[0, :], atol=1e-15)


def test_operator_full_rank_and_singular_values():
    g = AngularMomentumGeometry(6)
    for r in range(7):
        op = diagonal_operator(g, math.pi / 8, r)
        assert op.min_singular_value > 0
        np.testing.assert_allclose(op.singular_values, np.linalg.svd(op.matrix, compute_uv=False), atol=1e-12)
        assert np.all(np.diff(op.singular_values) <= 0)


def test_noisy_surface_tolerance():
    g = AngularMomentumGeometry(1)
    grid = PhaseGrid(2)
    ProbabilitySurface(g, grid, 0.3, [[-0.01, 0.5], [1.0, 0.5]], trials_per_phase=100)
    with pytest.raises(ValueError):
        ProbabilitySurface(g, grid, 0.3, [[-0.01, 0.5], [1.01, 0.5]])


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 10), alpha=st.floats(0, 1), seed=st.integers(0, 2**32 - 1),
       theta=st.floats(0.05, 1.5), phi=st.floats(0, 6.28))
def test_linearity(n, alpha, seed, theta, phi):
    rng = np.random.default_rng(seed)
    g = AngularMomentumGeometry(n)
    a, b = random_mixed_state(g, rng), random_mixed_state(g, rng)
    s = BeamSplitterSetting(theta, phi)
    mixed = alpha * a.entries + (1 - alpha) * b.entries
    np.testing.assert_allclose(
        exact_probabilities(mixed, s),
        alpha * exact_probabilities(a, s) + (1 - alpha) * exact_probabilities(b, s),
        atol=1e-12,
    )


@settings(max_examples=30, deadline=None)
@given(n=st.integers(0, 12), seed=st.integers(0, 2**32 - 1), theta=st.floats(0.05, 1.5), extra=st.integers(0, 5))
def test_fourier_decoupling(n, seed, theta, extra):
    rng = np.random.default_rng(seed)
    rho = random_mixed_state(AngularMomentumGeometry(n), rng).entries
    surf = probability_surface(rho, theta, PhaseGrid(2 * n + 2 + extra))
    assert np.abs(surf.values.sum(axis=0) - 1).max() <= 1e-12
    g = AngularMomentumGeometry(n)
    for r in range(n + 1):
        op = diagonal_operator(g, theta, r)
        expected = op.apply(np.diagonal(rho, offset=-r))
        assert np.abs(fourier_transform(surf, r).coefficients - expected).max() <= 1e-10


@pytest.mark.parametrize("n,n1", [(6, 5), (6, 4), (9, 8), (20, 13)])
def test_balanced_indistinguishability(n, n1):
    grid = PhaseGrid(2 * n + 2)
    s1 = probability_surface(fock_density(n, n1), math.pi / 4, grid)
    s2 = probability_surface(fock_density(n, n - n1), math.pi / 4, grid)
    assert np.abs(s1.values - s2.values).max() <= 1e-12
