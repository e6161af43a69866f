import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nullcone import tensor as tn
from nullcone.hodge import (
    HodgeSection,
    d1,
    d1_star,
    d2,
    d2_star,
    d_inverse,
    gauss_curvature,
    gradient,
    projection,
)
from nullcone.spectral import SpectralField, SphereGrid

GRID = SphereGrid(16)


def _rel(a, b):
    return np.abs(a.coeffs - b.coeffs).max() / max(np.abs(b.coeffs).max(), 1e-300)


def _spectral(section, factor):
    return section._like(factor * section.coeffs)


def sections(rank):
    return st.builds(
        lambda seed, scale: HodgeSection.random(rank, GRID, np.random.default_rng(seed),
                                                metric_scale=scale),
        st.integers(0, 2 ** 31), st.floats(0.25, 4.0))


@settings(max_examples=25, deadline=None)
@given(f=sections(0))
def test_d1_d1star_is_minus_laplacian(f):
    # D1 D1* = -Delta on scalars
    lam = GRID.bochner_eigenvalues(0) / f.metric_scale
    assert _rel(d1(d1_star(f)), _spectral(f, lam)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(X=sections(1))
def test_d1star_d1(X):
    # D1* D1 = -Delta + K on 1-forms
    lam = GRID.bochner_eigenvalues(-1) / X.metric_scale
    K = gauss_curvature(X.metric_scale)
    assert _rel(d1_star(d1(X)), _spectral(X, lam + K)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(X=sections(1))
def test_d2_d2star(X):
    # D2 D2* = -1/2 Delta - 1/2 K on 1-forms
    lam = GRID.bochner_eigenvalues(-1) / X.metric_scale
    K = gauss_curvature(X.metric_scale)
    assert _rel(d2(d2_star(X)), _spectral(X, 0.5 * lam - 0.5 * K)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(V=sections(2))
def test_d2star_d2(V):
    # D2* D2 = -1/2 Delta + K on symmetric traceless 2-tensors
    lam = GRID.bochner_eigenvalues(-2) / V.metric_scale
    K = gauss_curvature(V.metric_scale)
    assert _rel(d2_star(d2(V)), _spectral(V, 0.5 * lam + K)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), scale=st.floats(0.25, 4.0))
def test_adjointness(seed, scale):
    rng = np.random.default_rng(seed)
    f, X, V = (HodgeSection.random(r, GRID, rng, metric_scale=scale) for r in (0, 1, 2))
    a, b = d1(X).inner(f), X.inner(d1_star(f))
    assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)
    a, b = d2(V).inner(X), V.inner(d2_star(X))
    assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)


def test_conformal_scaling_is_exact(rng):
    lam = 0.3
    scale = np.exp(2 * lam)
    f = HodgeSection.random(0, GRID, rng)
    X = HodgeSection.random(1, GRID, rng)
    V = HodgeSection.random(2, GRID, rng)
    Xs = HodgeSection.from_coeffs(1, X.coeffs, GRID, scale)
    Vs = HodgeSection.from_coeffs(2, V.coeffs, GRID, scale)
    fs = HodgeSection.from_coeffs(0, f.coeffs, GRID, scale)
    assert np.array_equal(d1(Xs).coeffs, d1(X).coeffs / scale)
    assert np.array_equal(d2(Vs).coeffs, d2(V).coeffs / scale)
    assert np.array_equal(d1_star(fs).coeffs, d1_star(f).coeffs)


def test_gradient_has_no_curl(rng):
    c = GRID.random_coeffs(rng, 0)
    c = 0.5 * (c + GRID.conjugate_coeffs(c, 0))  # real scalar
    f = HodgeSection.from_coeffs(0, c, GRID)
    div = d1(gradient(f)).data.values()
    lap = GRID.synthesize(-GRID.bochner_eigenvalues(0) * c)
    assert np.abs(div.imag).max() < 1e-11
    assert np.abs(div - lap).max() < 1e-11


def test_zero_maps_to_zero():
    X = HodgeSection.from_coeffs(1, np.zeros(GRID.ncoef, complex), GRID)
    assert np.all(d1(X).coeffs == 0)


def test_d1_of_d1star_y30():
    f = HodgeSection(0, SpectralField.harmonic(3, 0, GRID))
    assert _rel(d1(d1_star(f)), f * 12.0) < 1e-12


def test_d1star_kills_constants():
    one = HodgeSection(0, SpectralField.from_values(3.0 * np.ones(GRID.shape), GRID))
    assert np.abs(d1_star(one).coeffs).max() < 1e-13 * one.norm()


def test_d2star_d2_on_y52():
    c = np.zeros(GRID.ncoef, complex)
    c[5 ** 2 + 5 + 2] = 1.0
    V = HodgeSection.from_coeffs(2, c, GRID)
    # -1/2 Delta + K on a spin-2 degree-5 mode: 1/2 (30 - 4) + 1 = 14
    assert _rel(d2_star(d2(V)), V * 14.0) < 1e-12


def test_d2_d2star_vanishes_at_degree_one():
    c = np.zeros(GRID.ncoef, complex)
    c[1 ** 2 + 1 + 0] = 1.0
    X = HodgeSection.from_coeffs(1, c, GRID)
    # identity value 1/2 (l - 1)(l + 2) = 0: degree-one forms are conformal Killing
    assert np.abs(d2_star(X).coeffs).max() < 1e-14


def test_rank_mismatch_is_type_error():
    X = HodgeSection.random(1, GRID, np.random.default_rng(0))
    with pytest.raises(TypeError):
        d2(X)
    with pytest.raises(TypeError):
        d1_star(X)


@pytest.mark.parametrize("op,inv,rank", [(d1, "D1", 1), (d2, "D2", 2)])
def test_left_inverse(rng, op, inv, rank):
    X = HodgeSection.random(rank, GRID, rng)
    back = d_inverse(op(X), inv)
    # D^-1 D = I on the domain; degree l = |spin| - 1 is absent
    assert _rel(back, X) < 1e-10


def test_inverse_of_constant_is_zero():
    one = HodgeSection(0, SpectralField.from_values(np.ones(GRID.shape), GRID))
    assert np.abs(d_inverse(one, "D1").coeffs).max() < 1e-14
    # constants are orthogonal to the range of D1
    X = HodgeSection.random(1, GRID, np.random.default_rng(1))
    assert abs(d1(X).inner(one)) < 1e-11


@pytest.mark.parametrize("which,rank", [("D1", 0), ("D1*", 1), ("D2", 1), ("D2*", 2)])
def test_projection_idempotent(rng, which, rank):
    Y = HodgeSection.random(rank, GRID, rng)
    P = projection(Y, which)
    assert _rel(projection(P, which), P) < 1e-12


@pytest.mark.parametrize("which,rank", [("D1*", 1), ("D2*", 2)])
def test_adjoint_inverse_recovers_range_preimage(rng, which, rank):
    fwd = {"D1*": d1_star, "D2*": d2_star}[which]
    X = HodgeSection.random(rank - 1, GRID, rng)
    Y = fwd(X)
    assert _rel(fwd(d_inverse(Y, which)), Y) < 1e-10


@pytest.mark.parametrize("which,rank", [("D1", 0), ("D1*", 1), ("D2", 1), ("D2*", 2)])
def test_inverse_elliptic_bound(rng, which, rank):
    Y = HodgeSection.random(rank, GRID, rng)
    Z = d_inverse(Y, which)
    C = (Z.gradient_norm() + Z.norm()) / Y.norm()
    assert C <= 4.0


def test_frame_definitions_match_spectral(rng):
    X = HodgeSection.random(1, GRID, rng)
    f = HodgeSection.random(0, GRID, rng)
    V = HodgeSection.random(2, GRID, rng)
    G = tn.round_metric(GRID.shape)
    eps = tn.volume_form(G)
    eps_up = np.einsum("ac...,bd...,cd...->ab...", G, G, eps)
    dX = tn.round_nabla(X.frame_values(), "d", GRID)
    # D1 X = div X - i curl X
    d1_frame = np.einsum("ab...,ab...->...", G, dX) - 1j * np.einsum("ab...,ab...->...", eps_up, dX)
    assert np.abs(d1_frame - d1(X).data.values()).max() < 1e-10
    # D1* f = -grad Re f - star grad Im f
    fv = f.data.values()
    dre = tn.round_nabla(fv.real.astype(complex), "", GRID)
    dim = tn.round_nabla(fv.imag.astype(complex), "", GRID)
    emix = np.einsum("ad...,dc...->ac...", eps, G)
    d1s = -dre - np.einsum("ac...,c...->a...", emix, dim)
    assert np.abs(d1s - d1_star(f).frame_values()).max() < 1e-10
    # D2 V = div V
    dV = tn.round_nabla(V.frame_values(), "dd", GRID)
    assert np.abs(np.einsum("bc...,bac...->a...", G, dV) - d2(V).frame_values()).max() < 1e-10
    # -2 D2* X = nabla X + nabla X^T - g div X
    sym = dX + np.swapaxes(dX, 0, 1) - G * np.einsum("ab...,ab...->...", G, dX)
    assert np.abs(-0.5 * sym - d2_star(X).frame_values()).max() < 1e-10
