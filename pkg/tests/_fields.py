"""Smooth band-limited test fields and metrics shared by the test modules."""
import numpy as np

from nullcone import tensor as tn
from nullcone.foliation import HorizontalField, HorizontalMetric


def smooth_field(kinds, time, grid, seed=0, band=4, amplitude=1.0):
    """Random field whose components are band-limited spin harmonics times cos t, sin 2t."""
    rng = np.random.default_rng(seed)
    spins = tn.spins(kinds)
    t = time.nodes
    c = np.zeros((2,) * len(kinds) + (len(t), grid.ncoef), complex)
    for idx in np.ndindex(spins.shape):
        a = grid.random_coeffs(rng, int(spins[idx]), lmax=band)
        b = grid.random_coeffs(rng, int(spins[idx]), lmax=band)
        c[idx] = np.outer(np.cos(t), a) + np.outer(np.sin(2 * t), b)
    return HorizontalField(amplitude * tn.from_coeffs(c, kinds, grid), kinds, time, grid)


def wobbly_metric(time, grid, seed=5, amplitude=0.1, band=3):
    """gamma = e^{2 f cos t} h + (q t (1 + t) in the traceless slots): smooth, non-conformal."""
    rng = np.random.default_rng(seed)
    t = time.nodes[:, None, None]
    f = np.real(grid.synthesize(grid.random_coeffs(rng, 0, lmax=band))) * amplitude
    q = grid.synthesize(grid.random_coeffs(rng, -2, lmax=band), -2) * amplitude
    g = np.zeros((2, 2, len(time)) + grid.shape, complex)
    g[0, 1] = g[1, 0] = np.exp(2 * f * np.cos(t))
    g[1, 1] = q * t * (1 + t)
    g[0, 0] = np.conj(g[1, 1])
    return HorizontalMetric(HorizontalField(g, "dd", time, grid))
