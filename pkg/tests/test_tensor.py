import numpy as np
import pytest
import sympy as sp

from nullcone import tensor as tn
from nullcone.spectral import SphereGrid

GRID = SphereGrid(16)
th, ph = sp.symbols("theta phi")
COORDS = (th, ph)
# round-sphere Christoffel symbols Gamma^k_ij
_GAMMA = {(0, 1, 1): -sp.sin(th) * sp.cos(th), (1, 0, 1): sp.cos(th) / sp.sin(th),
          (1, 1, 0): sp.cos(th) / sp.sin(th)}


def _G(k, i, j):
    return _GAMMA.get((k, i, j), 0)


def _ev(expr):
    TH, PH = GRID.mesh()
    return sp.lambdify((th, ph), expr, "numpy")(TH, PH) * np.ones_like(TH)


def _frames():
    TH, _ = GRID.mesh()
    m = [1 / np.sqrt(2), 1j / (np.sqrt(2) * np.sin(TH))]
    mb = [1 / np.sqrt(2), -1j / (np.sqrt(2) * np.sin(TH))]
    return [m, mb]


@pytest.fixture(scope="module")
def harmonic_pieces():
    x, y, z = sp.sin(th) * sp.cos(ph), sp.sin(th) * sp.sin(ph), sp.cos(th)
    u = x * y + z
    w = x - 2 * z * z + y * z
    X = [sp.diff(u, c) for c in COORDS]
    W = [sp.diff(w, c) for c in COORDS]
    return X, W


def test_nabla_of_covariant_two_tensor(harmonic_pieces):
    X, W = harmonic_pieces
    T = [[X[i] * W[j] for j in range(2)] for i in range(2)]
    DT = [[[sp.diff(T[b][c], COORDS[a])
            - sum(_G(k, a, b) * T[k][c] + _G(k, a, c) * T[b][k] for k in range(2))
            for c in range(2)] for b in range(2)] for a in range(2)]
    fr = _frames()
    Tn = np.zeros((2, 2) + GRID.shape, complex)
    DTn = np.zeros((2, 2, 2) + GRID.shape, complex)
    for A in range(2):
        for B in range(2):
            Tn[A, B] = sum(fr[A][i] * fr[B][j] * _ev(T[i][j]) for i in range(2) for j in range(2))
            for C in range(2):
                DTn[C, A, B] = sum(fr[C][a] * fr[A][i] * fr[B][j] * _ev(DT[a][i][j])
                                   for a in range(2) for i in range(2) for j in range(2))
    assert np.abs(tn.round_nabla(Tn, "dd", GRID) - DTn).max() < 1e-10 * np.abs(DTn).max()


def test_nabla_of_vector(harmonic_pieces):
    X, _ = harmonic_pieces
    V = [X[0], X[1] / sp.sin(th) ** 2]
    DV = [[sp.diff(V[b], COORDS[a]) + sum(_G(b, a, k) * V[k] for k in range(2))
           for b in range(2)] for a in range(2)]
    fr = _frames()
    TH, _ = GRID.mesh()

    def dual(A, vec):
        # theta^A(v) = h(frame[1-A], v)
        f = fr[1 - A]
        return f[0] * vec[0] + np.sin(TH) ** 2 * f[1] * vec[1]

    Vn = np.array([dual(A, [_ev(V[0]), _ev(V[1])]) for A in range(2)])
    DVn = np.array([[dual(B, [sum(fr[C][a] * _ev(DV[a][0]) for a in range(2)),
                              sum(fr[C][a] * _ev(DV[a][1]) for a in range(2))])
                     for B in range(2)] for C in range(2)])
    assert np.abs(tn.round_nabla(Vn, "u", GRID) - DVn).max() < 1e-10 * np.abs(DVn).max()


def test_metric_is_parallel_and_inverse(rng):
    h = tn.round_metric(GRID.shape)
    assert np.abs(tn.round_nabla(h, "dd", GRID)).max() < 1e-12
    f = np.real(GRID.synthesize(GRID.random_coeffs(rng, 0, lmax=3))) * 0.1
    g = h * np.exp(2 * f)
    G = tn.inverse_metric(g)
    prod = np.einsum("ab...,bc...->ac...", g, G)
    assert np.abs(prod - tn.identity(GRID.shape)).max() < 1e-14
    assert np.abs(tn.area_density(g) - np.exp(2 * f)).max() < 1e-14


def test_conformal_gauss_curvature(rng):
    # K[e^{2f} h] = e^{-2f} (1 - Delta f)
    c = GRID.random_coeffs(rng, 0, lmax=3)
    c = 0.5 * (c + GRID.conjugate_coeffs(c, 0)) * 0.05
    f = np.real(GRID.synthesize(c))
    lap = np.real(GRID.synthesize(-GRID.bochner_eigenvalues(0) * c))
    g = tn.round_metric(GRID.shape) * np.exp(2 * f)
    K = tn.gauss_curvature(g, GRID)
    assert np.abs(K - np.exp(-2 * f) * (1 - lap)).max() < 1e-6


def test_norm_and_trace_of_metric():
    h = tn.round_metric(GRID.shape)
    assert np.allclose(tn.trace(h, h), 2)
    assert np.allclose(tn.norm_sq(h, "dd", h), 2)
    assert np.abs(tn.traceless(h, h, h)).max() < 1e-15


def test_spins_of_components():
    assert tn.component_spin((1,), "d") == -1
    assert tn.component_spin((0,), "d") == 1
    assert tn.component_spin((0, 1), "dd") == 0
    assert tn.component_spin((1,), "u") == 1
