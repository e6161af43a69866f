import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nullcone.spectral import (
    DEFAULT_PROFILE,
    ConfigurationError,
    LPProfile,
    SpectralField,
    SphereGrid,
    besov_norm,
    coefficient_index,
    laplacian,
    lp_blocks,
    lp_project,
    sobolev_norm,
    wigner_d,
)

SQRT4PI = np.sqrt(4 * np.pi)


def test_constant_analyzes_to_single_coefficient(grid16):
    c = grid16.analyze(np.ones(grid16.shape))
    expect = np.zeros(grid16.ncoef)
    expect[0] = SQRT4PI
    assert np.allclose(c, expect, atol=1e-13)


def test_basis_element_is_delta(grid16):
    Y = SpectralField.harmonic(2, 1, grid16)
    c = grid16.analyze(Y.values())
    expect = np.zeros(grid16.ncoef, complex)
    expect[coefficient_index(2, 1)] = 1.0
    assert np.abs(c - expect).max() < 1e-13


def test_y10_matches_closed_form(grid16):
    th, _ = grid16.mesh()
    Y = SpectralField.harmonic(1, 0, grid16).values()
    assert np.abs(Y - np.sqrt(3 / (4 * np.pi)) * np.cos(th)).max() < 1e-14


@pytest.mark.parametrize("spin", [0, -1, 1, -2, 2])
def test_round_trip(grid16, rng, spin):
    c = grid16.random_coeffs(rng, spin)
    back = grid16.analyze(grid16.synthesize(c, spin), spin)
    assert np.abs(back - c).max() / np.abs(c).max() < 1e-12


def test_spin_mismatch_rejected(grid8):
    with pytest.raises(ConfigurationError):
        grid8.analyze(np.zeros((3, 3)))
    with pytest.raises(ConfigurationError):
        grid8.synthesize(np.zeros(5))
    with pytest.raises(ConfigurationError):
        grid8.analyze(np.zeros(grid8.shape), spin=9)


def test_undersampled_grid_rejected():
    with pytest.raises(ConfigurationError):
        SphereGrid(8, n_theta=4)


def test_quadrature_integrates_products_exactly(grid16, rng):
    a = grid16.random_coeffs(rng)
    b = grid16.random_coeffs(rng)
    fa, fb = grid16.synthesize(a), grid16.synthesize(b)
    assert abs(grid16.integrate(fa * np.conj(fb)) - np.sum(a * np.conj(b))) < 1e-11


def test_wigner_d_small_cases():
    beta = 0.7
    d = wigner_d(1, beta)
    # d^1_{00} = cos beta, d^1_{10} = -sin beta / sqrt2
    assert abs(d[1, 1] - np.cos(beta)) < 1e-14
    assert abs(d[2, 1] + np.sin(beta) / np.sqrt(2)) < 1e-14
    assert np.allclose(d @ d.T, np.eye(3), atol=1e-14)


def test_eth_raises_spin_and_matches_derivative(grid16):
    # eth of a spin-0 f equals -(d_theta + i/sin d_phi) f
    th, ph = grid16.mesh()
    f = np.sin(th) ** 2 * np.cos(2 * ph) + np.cos(th)
    df = -(2 * np.sin(th) * np.cos(th) * np.cos(2 * ph) - np.sin(th)
           + 1j / np.sin(th) * (-2 * np.sin(th) ** 2 * np.sin(2 * ph)))
    c = grid16.analyze(f)
    eth = grid16.synthesize(c * grid16.eth_factor(0), 1)
    assert np.abs(eth - df).max() < 1e-12


def test_ethbar_eth_is_laplacian(grid16, rng):
    c = grid16.random_coeffs(rng, 0)
    lhs = c * grid16.eth_factor(0) * grid16.ethbar_factor(1)
    assert np.allclose(lhs, -grid16.bochner_eigenvalues(0) * c)


@pytest.mark.parametrize("spin", [-2, -1, 1])
def test_conjugation_flips_spin(grid16, rng, spin):
    c = grid16.random_coeffs(rng, spin)
    f = grid16.synthesize(c, spin)
    back = grid16.analyze(np.conj(f), -spin)
    assert np.abs(back - grid16.conjugate_coeffs(c, spin)).max() < 1e-12


@pytest.mark.parametrize("l,m,lam", [(1, 0, 2.0), (8, 0, 72.0), (0, 0, 0.0)])
def test_laplacian_eigenvalues(grid16, l, m, lam):
    Y = SpectralField.harmonic(l, m, grid16)
    assert np.abs((laplacian(Y) + Y * lam).coeffs).max() < 1e-13


def test_constant_lp_blocks(grid16):
    one = SpectralField.from_values(np.ones(grid16.shape), grid16)
    for k in range(6):
        assert lp_project(one, k).norm() < 1e-13
    assert np.abs((lp_project(one, "minus") - one).coeffs).max() < 1e-13


def test_y80_lands_in_block_three(grid16):
    Y = SpectralField.harmonic(8, 0, grid16)
    norms = [lp_project(Y, k).norm() for k in range(7)]
    assert np.argmax(norms) == 3
    assert abs(norms[3] - 1.0) < 1e-12
    assert sum(norms) - norms[3] < 1e-12
    assert lp_project(Y, "below 0").norm() < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), spin=st.sampled_from([0, -1, -2]),
       width=st.floats(0.02, 0.45))
def test_partition_of_unity(seed, spin, width):
    grid = SphereGrid(12)
    prof = LPProfile(width=width)
    f = SpectralField(spin, grid.random_coeffs(np.random.default_rng(seed), spin), grid)
    low, blocks = lp_blocks(f, prof)
    total = low.coeffs + sum(b.coeffs for b in blocks)
    assert np.abs(total - f.coeffs).max() <= 1e-10 * np.abs(f.coeffs).max()


def test_profile_support_and_partition():
    xi = np.geomspace(1e-3, 1e4, 2000)
    lo, hi = DEFAULT_PROFILE.support
    vals = DEFAULT_PROFILE.cutoff(xi)
    assert np.all(vals[(xi < lo) | (xi > hi)] == 0)
    total = sum(DEFAULT_PROFILE.cutoff(xi / 4.0 ** k) for k in range(-10, 12))
    assert np.abs(total - 1).max() < 1e-14


def test_besov_examples(grid16):
    c = 2.5
    one = SpectralField.from_values(c * np.ones(grid16.shape), grid16)
    for a, s in [(1, 0), (2, 1), (np.inf, -0.5)]:
        assert abs(besov_norm(one, a, s) - c * SQRT4PI) < 1e-12
    Y = SpectralField.harmonic(8, 0, grid16)
    assert abs(besov_norm(Y, 1, 0) - 1) < 1e-12
    assert abs(besov_norm(Y, 1, 1) - 8) < 1e-11
    with pytest.raises(ConfigurationError):
        besov_norm(Y, 0.5, 0)


def test_sobolev_examples(grid16):
    c = -1.5
    one = SpectralField.from_values(c * np.ones(grid16.shape), grid16)
    assert abs(sobolev_norm(one, 3.0) - abs(c) * SQRT4PI) < 1e-12
    Y = SpectralField.harmonic(1, 0, grid16)
    assert abs(sobolev_norm(Y, 2) - 3) < 1e-13


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31), s=st.sampled_from([-0.5, 0.0, 0.5, 1.0]))
def test_besov_sobolev_comparable(seed, s):
    grid = SphereGrid(16)
    f = SpectralField(0, grid.random_coeffs(np.random.default_rng(seed), 0, decay=1.0), grid)
    ratio = besov_norm(f, 2, s) / sobolev_norm(f, s)
    assert 0.25 < ratio < 4
