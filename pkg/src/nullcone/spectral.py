"""Band-limited spin-weighted spectral calculus on the unit round sphere.

Fields are sampled on a Gauss-Legendre (colatitude) by uniform (azimuth)
grid.  Spin-weighted harmonics follow the convention

    sY_lm(theta, phi) = (-1)^s sqrt((2l+1)/4pi) d^l_{m,-s}(theta) e^{i m phi}

for which the raising/lowering operators act as

    eth  sY_lm = +sqrt((l-s)(l+s+1)) (s+1)Y_lm
    ethb sY_lm = -sqrt((l+s)(l-s+1)) (s-1)Y_lm

Coefficients are stored l-major with m running from -l to l, so the flat
index of (l, m) is l*l + l + m.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre


class ConfigurationError(ValueError):
    """Raised when grids, spins or parameters are inconsistent."""


def coefficient_index(l, m):
    return l * l + l + m


def degree_order(lmax):
    """Return the (l, m) arrays matching the flat coefficient layout."""
    l = np.concatenate([np.full(2 * j + 1, j) for j in range(lmax + 1)])
    m = np.concatenate([np.arange(-j, j + 1) for j in range(lmax + 1)])
    return l, m


def wigner_d(l, beta):
    """Wigner small-d matrices d^l_{m',m}(beta) for an array of angles.

    Computed from the spectral decomposition of J_y, which is stable for the
    moderate degrees used here.  Returns shape beta.shape + (2l+1, 2l+1) with
    rows indexed by m' and columns by m, both running from -l to l.
    """
    beta = np.asarray(beta, dtype=float)
    m = np.arange(-l, l + 1)
    jp = np.zeros((2 * l + 1, 2 * l + 1))
    for k in range(2 * l):
        jp[k + 1, k] = np.sqrt((l - m[k]) * (l + m[k] + 1))
    jy = (jp - jp.T) / 2j
    mu, v = np.linalg.eigh(jy)
    phase = np.exp(-1j * np.multiply.outer(beta, mu))
    return np.einsum("ak,bk,...k->...ab", v, v.conj(), phase).real


@lru_cache(maxsize=None)
def _legendre_nodes(n_theta):
    x, w = roots_legendre(n_theta)
    order = np.argsort(-x)  # theta ascending
    return np.arccos(x[order]), w[order]


@lru_cache(maxsize=None)
def _spin_table(lmax, n_theta, spin):
    """Table T[m+L, i, l] of spin-weighted harmonic colatitude factors."""
    theta, _ = _legendre_nodes(n_theta)
    table = np.zeros((2 * lmax + 1, n_theta, lmax + 1))
    sign = -1.0 if spin % 2 else 1.0
    for l in range(abs(spin), lmax + 1):
        d = wigner_d(l, theta)  # (n_theta, 2l+1, 2l+1)
        col = d[:, :, l - spin]  # d^l_{m,-s}
        norm = sign * np.sqrt((2 * l + 1) / (4 * np.pi))
        table[lmax - l:lmax + l + 1, :, l] = norm * col.T
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def _layout(lmax):
    l, m = degree_order(lmax)
    return l, m, m + lmax


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre x uniform-azimuth grid resolving degree ``lmax``.

    The defaults give exact quadrature for products of two band-limited
    fields (degree 2*lmax).  Derived tables are cached per spin.
    """

    lmax: int
    n_theta: int | None = None
    n_phi: int | None = None

    def __post_init__(self):
        if self.lmax < 0:
            raise ConfigurationError("lmax must be non-negative")
        if self.n_theta is None:
            object.__setattr__(self, "n_theta", self.lmax + 1)
        if self.n_phi is None:
            object.__setattr__(self, "n_phi", 2 * self.lmax + 2)
        if self.n_theta < self.lmax + 1:
            raise ConfigurationError("n_theta must be at least lmax + 1")
        if self.n_phi < 2 * self.lmax + 1:
            raise ConfigurationError("n_phi must be at least 2*lmax + 1")

    @property
    def ncoef(self):
        return (self.lmax + 1) ** 2

    @property
    def shape(self):
        return (self.n_theta, self.n_phi)

    @property
    def theta(self):
        return _legendre_nodes(self.n_theta)[0]

    @property
    def phi(self):
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def weights(self):
        """Area weights w(theta_i, phi_j) summing to 4 pi."""
        w = _legendre_nodes(self.n_theta)[1]
        return np.repeat(w[:, None] * (2 * np.pi / self.n_phi), self.n_phi, axis=1)

    @property
    def degrees(self):
        return _layout(self.lmax)[0]

    @property
    def orders(self):
        return _layout(self.lmax)[1]

    def mesh(self):
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    def integrate(self, values):
        """Quadrature over the sphere of the trailing two axes."""
        return np.einsum("...ij,ij->...", values, self.weights)

    def spin_mask(self, spin):
        return self.degrees >= abs(spin)

    def analyze(self, values, spin=0):
        """Grid samples (..., n_theta, n_phi) -> coefficients (..., ncoef)."""
        values = np.asarray(values)
        if values.shape[-2:] != self.shape:
            raise ConfigurationError(
                f"samples have shape {values.shape[-2:]}, grid is {self.shape}")
        if abs(spin) > self.lmax:
            raise ConfigurationError(f"spin {spin} exceeds lmax {self.lmax}")
        L = self.lmax
        batch = values.shape[:-2]
        f = np.fft.fft(values, axis=-1) * (2 * np.pi / self.n_phi)
        cols = np.arange(-L, L + 1) % self.n_phi
        fm = f[..., cols]  # (..., n_theta, 2L+1)
        fm = fm * _legendre_nodes(self.n_theta)[1][:, None]
        fm = np.moveaxis(fm.reshape(-1, self.n_theta, 2 * L + 1), -1, 0)
        table = _spin_table(L, self.n_theta, spin)
        a = np.matmul(fm, table)  # (2L+1, B, L+1)
        l, _, mi = _layout(L)
        out = a[mi, :, l]  # (ncoef, B)
        return np.moveaxis(out, 0, -1).reshape(batch + (self.ncoef,))

    def synthesize(self, coeffs, spin=0):
        """Coefficients (..., ncoef) -> grid samples (..., n_theta, n_phi)."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-1] != self.ncoef:
            raise ConfigurationError(
                f"expected {self.ncoef} coefficients, got {coeffs.shape[-1]}")
        if abs(spin) > self.lmax:
            raise ConfigurationError(f"spin {spin} exceeds lmax {self.lmax}")
        L = self.lmax
        batch = coeffs.shape[:-1]
        flat = coeffs.reshape(-1, self.ncoef)
        l, _, mi = _layout(L)
        padded = np.zeros((2 * L + 1, flat.shape[0], L + 1), dtype=complex)
        padded[mi, :, l] = flat.T
        table = _spin_table(L, self.n_theta, spin)
        g = np.matmul(padded, np.swapaxes(table, 1, 2))  # (2L+1, B, n_theta)
        f = np.zeros((flat.shape[0], self.n_theta, self.n_phi), dtype=complex)
        cols = np.arange(-L, L + 1) % self.n_phi
        f[..., cols] = np.moveaxis(g, 0, -1)
        out = np.fft.ifft(f, axis=-1) * self.n_phi
        return out.reshape(batch + self.shape)

    def eth_factor(self, spin):
        l = self.degrees
        return np.sqrt(np.clip((l - spin) * (l + spin + 1), 0, None))

    def ethbar_factor(self, spin):
        l = self.degrees
        return -np.sqrt(np.clip((l + spin) * (l - spin + 1), 0, None))

    def bochner_eigenvalues(self, spin=0):
        """Eigenvalues of minus the round Laplacian on spin-``spin`` components."""
        l = self.degrees
        lam = l * (l + 1.0) - spin * spin
        return np.where(l >= abs(spin), lam, 0.0)

    def conjugate_coeffs(self, coeffs, spin):
        """Coefficients of conj(f) (spin -s) from those of f (spin s)."""
        l, m = self.degrees, self.orders
        flip = coefficient_index(l, -m)
        sign = np.where((m + spin) % 2 == 0, 1.0, -1.0)
        return sign * np.conj(coeffs[..., flip])

    def random_coeffs(self, rng, spin=0, lmax=None, batch=(), decay=0.0):
        """Gaussian random band-limited coefficients with optional l-decay."""
        lcut = self.lmax if lmax is None else lmax
        l = self.degrees
        shape = tuple(batch) + (self.ncoef,)
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        c *= ((l >= abs(spin)) & (l <= lcut)) / (1.0 + l) ** decay
        return c


def eth(coeffs, spin, grid):
    """Coefficients of eth f (spin s+1)."""
    return coeffs * grid.eth_factor(spin)


def ethbar(coeffs, spin, grid):
    """Coefficients of ethbar f (spin s-1)."""
    return coeffs * grid.ethbar_factor(spin)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Spin-weighted field stored by its harmonic coefficients."""

    spin: int
    coeffs: np.ndarray
    grid: SphereGrid

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape[-1] != self.grid.ncoef:
            raise ConfigurationError("coefficient count does not match grid")
        c = np.where(self.grid.spin_mask(self.spin), c, 0.0)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_values(cls, values, grid, spin=0):
        return cls(spin, grid.analyze(values, spin), grid)

    @classmethod
    def from_function(cls, func, grid, spin=0):
        th, ph = grid.mesh()
        return cls.from_values(func(th, ph), grid, spin)

    @classmethod
    def harmonic(cls, l, m, grid, spin=0):
        c = np.zeros(grid.ncoef, dtype=complex)
        c[coefficient_index(l, m)] = 1.0
        return cls(spin, c, grid)

    def values(self):
        return self.grid.synthesize(self.coeffs, self.spin)

    def _like(self, coeffs, spin=None):
        return SpectralField(self.spin if spin is None else spin, coeffs, self.grid)

    def _check(self, other):
        if other.grid != self.grid or other.spin != self.spin:
            raise ConfigurationError("fields live on different grids or spins")

    def __add__(self, other):
        self._check(other)
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.coeffs - other.coeffs)

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, c):
        return self._like(self.coeffs * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self._like(self.coeffs / c)

    def conj(self):
        return self._like(self.grid.conjugate_coeffs(self.coeffs, self.spin), -self.spin)

    def eth(self):
        return self._like(eth(self.coeffs, self.spin, self.grid), self.spin + 1)

    def ethbar(self):
        return self._like(ethbar(self.coeffs, self.spin, self.grid), self.spin - 1)

    def norm(self):
        """L2 norm via Parseval."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def inner(self, other):
        """Complex L2 inner product <self, other> (antilinear in ``other``)."""
        self._check(other)
        return complex(np.sum(self.coeffs * np.conj(other.coeffs)))


def analyze(samples, grid, spin=0):
    return SpectralField.from_values(samples, grid, spin)


def synthesize(f):
    return f.values()


def laplacian(f):
    """Round Laplacian acting on the spin components of a tensor."""
    return f._like(-f.grid.bochner_eigenvalues(f.spin) * f.coeffs)


def _smooth_step(x, width):
    """C-infinity step rising from 0 at -width to 1 at +width."""
    x = np.asarray(x, dtype=float)
    a = np.clip(width + x, 0.0, None)
    b = np.clip(width - x, 0.0, None)
    ea = np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
    eb = np.where(b > 0, np.exp(-1.0 / np.where(b > 0, b, 1.0)), 0.0)
    return ea / (ea + eb)


@dataclass(frozen=True)
class LPProfile:
    """Dyadic Littlewood-Paley cutoff varsigma and its projectors.

    varsigma(xi) = step(x + 1/2) - step(x - 1/2) with x = log_4 |xi|, where
    ``step`` is a smooth transition of half-width ``width`` (in log_4 units).
    The shifted copies varsigma(4^-k xi) telescope to exactly one.
    """

    width: float = 0.1
    k_min: int = -4
    k_max: int | None = None

    def __post_init__(self):
        if not 0 < self.width < 0.5:
            raise ConfigurationError("width must lie in (0, 1/2)")

    @property
    def support(self):
        return (4.0 ** (-0.5 - self.width), 4.0 ** (0.5 + self.width))

    def cutoff(self, xi):
        xi = np.abs(np.asarray(xi, dtype=float))
        pos = xi > 0
        x = np.log(np.where(pos, xi, 1.0)) / np.log(4.0)
        val = _smooth_step(x + 0.5, self.width) - _smooth_step(x - 0.5, self.width)
        return np.where(pos, val, 0.0)

    def k_range(self, lam_max):
        top = self.k_max
        if top is None:
            top = int(np.ceil(np.log(max(lam_max, 1.0)) / np.log(4.0))) + 1
        return range(0, top + 1)

    def multiplier(self, lam, k):
        """Spectral multiplier of P_k, P_- ('minus') or P_<0 ('below 0')."""
        lam = np.asarray(lam, dtype=float)
        kernel = np.isclose(lam, 0.0, atol=1e-12)
        if k == "minus":
            return kernel.astype(float)
        if k == "below 0":
            lo = self.k_min
            pos = lam[~kernel]
            if pos.size:
                lo = min(lo, int(np.floor(np.log(pos.min()) / np.log(4.0))) - 2)
            total = kernel.astype(float)
            for j in range(lo, 0):
                total = total + np.where(kernel, 0.0, self.cutoff(lam / 4.0 ** j))
            return total
        return np.where(kernel, 0.0, self.cutoff(lam / 4.0 ** k))


DEFAULT_PROFILE = LPProfile()


def lp_project(f, k, profile=DEFAULT_PROFILE):
    lam = f.grid.bochner_eigenvalues(f.spin)
    return f._like(profile.multiplier(lam, k) * f.coeffs)


def lp_blocks(f, profile=DEFAULT_PROFILE):
    """Return (P_<0 f, [P_0 f, P_1 f, ...]) covering the spectrum of f."""
    lam = f.grid.bochner_eigenvalues(f.spin)
    ks = profile.k_range(lam.max())
    return lp_project(f, "below 0", profile), [lp_project(f, k, profile) for k in ks]


def besov_combine(low, blocks, a, s):
    """Combine block norms into the Besov sum (max form when a is inf)."""
    blocks = np.asarray(blocks, dtype=float)
    weights = 2.0 ** (s * np.arange(len(blocks)))
    if a == np.inf:
        return float(max(low, np.max(weights * blocks, initial=0.0)))
    if a < 1:
        raise ConfigurationError("summability exponent must be >= 1")
    total = np.sum((weights * blocks) ** a) + low ** a
    return float(total ** (1.0 / a))


def besov_norm(f, a, s, profile=DEFAULT_PROFILE):
    if a < 1:
        raise ConfigurationError("summability exponent must be >= 1")
    low, blocks = lp_blocks(f, profile)
    return besov_combine(low.norm(), [b.norm() for b in blocks], a, s)


def sobolev_multiplier(grid, spin, s):
    return (1.0 + grid.bochner_eigenvalues(spin)) ** (s / 2.0)


def sobolev_norm(f, s):
    return f._like(sobolev_multiplier(f.grid, f.spin, s) * f.coeffs).norm()
