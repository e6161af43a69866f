"""Pointwise tensor algebra and covariant derivatives on S^2 in a null frame.

Tensors are arrays whose leading axes are frame indices of length 2, followed
by arbitrary batch axes and the two grid axes.  Index value 0 refers to
m = (e_theta + i e_phi)/sqrt2 (or its dual), 1 to mbar.  ``kinds`` is a
string with one letter per index, 'd' for covariant and 'u' for
contravariant.  Contracting an upper with a lower index is a plain sum;
lower-lower contractions go through the inverse metric.

The component T_{A...} has spin weight  sum(+1 if (kind=='d') == (A==0)
else -1), and round covariant derivatives act as

    (nabla_m T)_{...}    = -eth T_{...} / sqrt2
    (nabla_mbar T)_{...} = -ethbar T_{...} / sqrt2.
"""
from __future__ import annotations

import itertools

import numpy as np

SQRT2 = np.sqrt(2.0)
LETTERS = "abcdefghijklmnop"


def component_spin(index, kinds):
    return sum(1 if (k == "d") == (i == 0) else -1 for i, k in zip(index, kinds))


def spins(kinds):
    r = len(kinds)
    out = np.zeros((2,) * r, dtype=int)
    for idx in itertools.product((0, 1), repeat=r):
        out[idx] = component_spin(idx, kinds)
    return out


def round_metric(shape=(), dtype=complex):
    """Unit round metric h_AB (equal to h^AB) broadcast to ``shape``."""
    h = np.zeros((2, 2) + tuple(shape), dtype=dtype)
    h[0, 1] = 1.0
    h[1, 0] = 1.0
    return h


def identity(shape=(), dtype=complex):
    d = np.zeros((2, 2) + tuple(shape), dtype=dtype)
    d[0, 0] = 1.0
    d[1, 1] = 1.0
    return d


def _by_spin(values, kinds):
    groups = {}
    for idx in itertools.product((0, 1), repeat=len(kinds)):
        groups.setdefault(component_spin(idx, kinds), []).append(idx)
    return groups


def to_coeffs(values, kinds, grid):
    """Analyze every component with its own spin."""
    r = len(kinds)
    out = np.zeros(values.shape[:-2] + (grid.ncoef,), dtype=complex)
    for s, idxs in _by_spin(values, kinds).items():
        stack = np.stack([values[i] for i in idxs])
        c = grid.analyze(stack, s)
        for j, i in enumerate(idxs):
            out[i] = c[j]
    return out


def from_coeffs(coeffs, kinds, grid):
    out = np.zeros(coeffs.shape[:-1] + grid.shape, dtype=complex)
    for s, idxs in _by_spin(coeffs, kinds).items():
        stack = np.stack([coeffs[i] for i in idxs])
        v = grid.synthesize(stack, s)
        for j, i in enumerate(idxs):
            out[i] = v[j]
    return out


def project(values, kinds, grid):
    """Band-limit projection of every component."""
    return from_coeffs(to_coeffs(values, kinds, grid), kinds, grid)


def round_nabla(values, kinds, grid):
    """Round-metric covariant derivative; the new index comes first."""
    values = np.asarray(values)
    out = np.zeros((2,) + values.shape, dtype=complex)
    for s, idxs in _by_spin(values, kinds).items():
        stack = np.stack([values[i] for i in idxs])
        c = grid.analyze(stack, s)
        up = grid.synthesize(-c * grid.eth_factor(s) / SQRT2, s + 1)
        down = grid.synthesize(-c * grid.ethbar_factor(s) / SQRT2, s - 1)
        for j, i in enumerate(idxs):
            out[(0,) + i] = up[j]
            out[(1,) + i] = down[j]
    return out


def inverse_metric(g):
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    G = np.empty_like(g)
    G[0, 0] = g[1, 1] / det
    G[1, 1] = g[0, 0] / det
    G[0, 1] = -g[0, 1] / det
    G[1, 0] = -g[1, 0] / det
    return G


def area_density(g):
    """sqrt(det g) relative to the unit round metric (real)."""
    return np.sqrt(np.real(g[0, 1] * g[1, 0] - g[0, 0] * g[1, 1]))


def volume_form(g):
    """Volume form eps_AB, oriented like the round one (eps(m, mbar) = -i)."""
    rho = area_density(g)
    eps = np.zeros_like(g)
    eps[0, 1] = -1j * rho
    eps[1, 0] = 1j * rho
    return eps


def christoffel(g, grid, G=None):
    """Difference tensor C^e_ab between the g- and round connections."""
    G = inverse_metric(g) if G is None else G
    dg = round_nabla(g, "dd", grid)  # dg[c, a, b] = nabla_c g_ab
    low = 0.5 * (np.einsum("abd...->dab...", dg) + np.einsum("bad...->dab...", dg) - dg)
    return np.einsum("ed...,dab...->eab...", G, low)


def _apply_connection(out, values, kinds, C):
    r = len(kinds)
    src = LETTERS[1:r + 1]
    for i, kind in enumerate(kinds):
        tin = src[:i] + "y" + src[i + 1:]
        if kind == "d":
            out -= np.einsum(f"ya{src[i]}...,{tin}...->a{src}...", C, values)
        else:
            out += np.einsum(f"{src[i]}ay...,{tin}...->a{src}...", C, values)
    return out


def nabla(values, kinds, grid, C=None):
    """Covariant derivative for the metric whose difference tensor is C."""
    out = round_nabla(values, kinds, grid)
    if C is None:
        return out
    return _apply_connection(out, values, kinds, C)


def gauss_curvature(g, grid, G=None, C=None):
    """Gauss curvature of g from its difference tensor to the round metric."""
    G = inverse_metric(g) if G is None else G
    C = christoffel(g, grid, G) if C is None else C
    dC = round_nabla(C, "udd", grid)  # dC[a, f, b, c] = nabla_a C^f_bc
    shape = g.shape[2:]
    ric = -round_metric(shape)
    ric = ric - np.einsum("aabc...->bc...", dC) + np.einsum("baac...->bc...", dC)
    ric = ric + np.einsum("eac...,abe...->bc...", C, C) - np.einsum("ebc...,aae...->bc...", C, C)
    return np.real(-0.5 * np.einsum("bc...,bc...->...", G, ric))


def conj_tensor(values, r):
    """Components of the complex-conjugate tensor (indices flipped)."""
    return np.conj(np.flip(values, axis=tuple(range(r))))


def norm_sq(values, kinds, g, G=None):
    """Pointwise |T|^2 with respect to g (real, for complex T as well)."""
    r = len(kinds)
    G = inverse_metric(g) if G is None else G
    tbar = conj_tensor(values, r)
    out = values
    src = LETTERS[:r]
    for i, kind in enumerate(kinds):
        m = G if kind == "d" else g
        tin = src[:i] + "y" + src[i + 1:]
        out = np.einsum(f"{src[i]}y...,{tin}...->{src}...", m, out)
    return np.real(np.einsum(f"{src}...,{src}...->...", out, tbar)) if r else np.abs(values) ** 2


def trace(T, G):
    return np.einsum("ab...,ab...->...", G, T)


def traceless(T, g, G):
    return T - 0.5 * trace(T, G) * g


def raise_first(T, G):
    """T_a... -> T^a_... using the inverse metric."""
    return np.einsum("ab...,b...->a...", G, T)
