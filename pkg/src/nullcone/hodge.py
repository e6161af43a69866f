"""Symmetric Hodge operators on round spheres of constant conformal scale.

A section is stored through one spin-weighted component in the null frame
m = (e_theta + i e_phi)/sqrt2 of the round unit sphere:

    rank 0   f            complex scalar (spin 0)
    rank 1   X(mbar)      real 1-form (spin -1); X(m) is its conjugate
    rank 2   X(mbar,mbar) real symmetric traceless 2-tensor (spin -2)

``metric_scale`` is the constant factor e^{2 lambda} of the metric relative
to the unit round metric.  Components are always taken in the unit-sphere
frame, so only the explicit scale factors change with lambda.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import ConfigurationError, SpectralField

SQRT2 = np.sqrt(2.0)

_SPIN = {0: 0, 1: -1, 2: -2}


def _d1_symbol(grid):
    # D1 X = -sqrt2 eth X(mbar)
    return -SQRT2 * grid.eth_factor(-1)


def _d1_star_symbol(grid):
    # D1* f (mbar) = ethbar f / sqrt2
    return grid.ethbar_factor(0) / SQRT2


def _d2_symbol(grid):
    # D2 X (mbar) = -eth X(mbar, mbar) / sqrt2
    return -grid.eth_factor(-2) / SQRT2


def _d2_star_symbol(grid):
    # D2* X (mbar, mbar) = ethbar X(mbar) / sqrt2
    return grid.ethbar_factor(-1) / SQRT2


@dataclass(frozen=True, eq=False)
class HodgeSection:
    rank: int
    data: SpectralField
    metric_scale: float = 1.0

    def __post_init__(self):
        if self.rank not in _SPIN:
            raise ConfigurationError("rank must be 0, 1 or 2")
        if self.data.spin != _SPIN[self.rank]:
            raise ConfigurationError(
                f"rank-{self.rank} sections carry spin {_SPIN[self.rank]} data")
        if not self.metric_scale > 0:
            raise ConfigurationError("metric_scale must be positive")

    @property
    def grid(self):
        return self.data.grid

    @property
    def coeffs(self):
        return self.data.coeffs

    @classmethod
    def from_coeffs(cls, rank, coeffs, grid, metric_scale=1.0):
        return cls(rank, SpectralField(_SPIN[rank], coeffs, grid), metric_scale)

    @classmethod
    def from_frame(cls, values, rank, grid, metric_scale=1.0):
        """Build from null-frame grid components (shape (2,)*rank + grid)."""
        values = np.asarray(values)
        comp = values[(1,) * rank] if rank else values
        return cls(rank, SpectralField.from_values(comp, grid, _SPIN[rank]), metric_scale)

    @classmethod
    def random(cls, rank, grid, rng, metric_scale=1.0, lmax=None):
        c = grid.random_coeffs(rng, _SPIN[rank], lmax=lmax)
        return cls.from_coeffs(rank, c, grid, metric_scale)

    def frame_values(self):
        """Null-frame grid components of the tensor."""
        v = self.data.values()
        if self.rank == 0:
            return v
        out = np.zeros((2,) * self.rank + v.shape, dtype=complex)
        out[(1,) * self.rank] = v
        out[(0,) * self.rank] = np.conj(v)
        return out

    def _like(self, coeffs, rank=None):
        rank = self.rank if rank is None else rank
        return HodgeSection.from_coeffs(rank, coeffs, self.grid, self.metric_scale)

    def __add__(self, other):
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self._like(self.coeffs - other.coeffs)

    def __mul__(self, c):
        return self._like(self.coeffs * c)

    __rmul__ = __mul__

    def inner(self, other):
        """Real L2 inner product with respect to the scaled metric."""
        if other.rank != self.rank:
            raise ConfigurationError("rank mismatch")
        weight = self.metric_scale ** (1 - self.rank) * (2.0 if self.rank else 1.0)
        return float(weight * np.real(np.sum(self.coeffs * np.conj(other.coeffs))))

    def norm(self):
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def gradient_norm(self):
        """L2 norm of the covariant derivative (round connection)."""
        lam = self.grid.bochner_eigenvalues(self.data.spin)
        weight = self.metric_scale ** (-self.rank) * (2.0 if self.rank else 1.0)
        return float(np.sqrt(weight * np.sum(lam * np.abs(self.coeffs) ** 2)))


def _require(X, rank, op):
    if X.rank != rank:
        raise TypeError(f"{op} acts on rank-{rank} sections, got rank {X.rank}")


def d1(X):
    """div X - i curl X."""
    _require(X, 1, "d1")
    return X._like(_d1_symbol(X.grid) * X.coeffs / X.metric_scale, rank=0)


def d1_star(f):
    """-grad Re f - (star grad) Im f."""
    _require(f, 0, "d1_star")
    return f._like(_d1_star_symbol(f.grid) * f.coeffs, rank=1)


def d2(X):
    """Divergence of a symmetric traceless 2-tensor."""
    _require(X, 2, "d2")
    return X._like(_d2_symbol(X.grid) * X.coeffs / X.metric_scale, rank=1)


def d2_star(X):
    """Minus the traceless symmetrized gradient, halved."""
    _require(X, 1, "d2_star")
    return X._like(_d2_star_symbol(X.grid) * X.coeffs, rank=2)


def gradient(f):
    """Gradient of a real scalar as a rank-1 section."""
    _require(f, 0, "gradient")
    return f._like(-f.grid.ethbar_factor(0) * f.coeffs / SQRT2, rank=1)


_INVERSES = {
    # name: (input rank, output rank, symbol, scale power)
    "D1": (0, 1, _d1_symbol, 1),
    "D1*": (1, 0, _d1_star_symbol, 0),
    "D2": (1, 2, _d2_symbol, 1),
    "D2*": (2, 1, _d2_star_symbol, 0),
}


def d_inverse(Y, which):
    """Inverse of a Hodge operator composed with projection onto its range.

    For the adjoints the preimage is taken in the range of the operator
    itself, so d_inverse(d_i*(X), 'Di*') recovers X up to its kernel part.
    """
    try:
        rank_in, rank_out, symbol, power = _INVERSES[which]
    except KeyError:
        raise ConfigurationError(f"unknown operator {which!r}") from None
    _require(Y, rank_in, f"inverse of {which}")
    sym = symbol(Y.grid)
    safe = np.where(np.abs(sym) > 1e-12, sym, 1.0)
    c = np.where(np.abs(sym) > 1e-12, Y.coeffs / safe, 0.0)
    return Y._like(c * Y.metric_scale ** power, rank=rank_out)


_FORWARD = {"D1": d1, "D1*": d1_star, "D2": d2, "D2*": d2_star}


def projection(Y, which):
    """Projection onto the range of ``which`` (equals D D^-1)."""
    return _FORWARD[which](d_inverse(Y, which))


def gauss_curvature(metric_scale=1.0):
    return 1.0 / metric_scale
