"""Horizontal tensor fields on [0, delta] x S^2 and their covariant t-calculus.

A horizontal field stores grid samples with layout (2,)*rank + (n_t, n_theta,
n_phi).  Derivatives in t are finite differences of configurable even order
(centered in the interior, one-sided at the ends); covariant integrals and
parallel transport are fourth-order Runge-Kutta solves of the pointwise
linear ODE d/dt Phi = Psi + k.Phi, with sources interpolated to half steps by
cubic Lagrange interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad

from . import tensor as tn
from .spectral import DEFAULT_PROFILE, ConfigurationError, SphereGrid, besov_combine

MAX_RANK = 4


class UnsupportedRankError(ValueError):
    pass


def fd_weights(z, x, m):
    """Fornberg weights for the m-th derivative at z from nodes x."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def _stencils(nodes, width, z_points=None):
    """Start indices and weights of `width`-point stencils around each target."""
    n = len(nodes)
    width = min(width, n)
    targets = nodes if z_points is None else z_points
    starts = np.empty(len(targets), dtype=int)
    for i, z in enumerate(targets):
        j = int(np.clip(np.searchsorted(nodes, z) - width // 2, 0, n - width))
        starts[i] = j
    return starts, width


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Nodes of the foliation parameter with quadrature and FD order.

    ``bounded`` grids (the renormalized chart) must satisfy 0 <= t < 1.
    """

    nodes: np.ndarray
    order: int = 6
    weights: np.ndarray | None = None
    bounded: bool = True

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ConfigurationError("time nodes must be a non-empty 1-d array")
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("time nodes must be strictly increasing")
        if self.bounded and (t[0] < 0 or t[-1] >= 1):
            raise ConfigurationError("renormalized time must satisfy 0 <= t < 1")
        if self.order < 2 or self.order % 2:
            raise ConfigurationError("finite-difference order must be even and >= 2")
        object.__setattr__(self, "nodes", t)
        if self.weights is None:
            object.__setattr__(self, "weights", self.trapezoid_weights(t))

    @staticmethod
    def trapezoid_weights(t):
        w = np.zeros_like(t)
        if t.size > 1:
            h = np.diff(t)
            w[:-1] += h / 2
            w[1:] += h / 2
        return w

    @classmethod
    def uniform(cls, t_max, dt=None, n=None, order=6):
        if (dt is None) == (n is None):
            raise ConfigurationError("give exactly one of dt and n")
        if n is None:
            n = int(round(t_max / dt)) + 1
        return cls(np.linspace(0.0, t_max, n), order=order)

    def __len__(self):
        return self.nodes.size

    @property
    def t_max(self):
        return float(self.nodes[-1])

    @property
    def delta(self):
        return float(self.nodes[-1] - self.nodes[0])

    @property
    def dt(self):
        return float(self.nodes[1] - self.nodes[0]) if len(self) > 1 else 0.0

    def index_of(self, tau):
        i = int(np.argmin(np.abs(self.nodes - tau)))
        if abs(self.nodes[i] - tau) > 1e-12 * max(1.0, abs(tau)):
            raise ConfigurationError(f"tau={tau} is not a grid node")
        return i

    @cached_property
    def _derivative_stencils(self):
        starts, width = _stencils(self.nodes, self.order + 1)
        w = np.array([fd_weights(z, self.nodes[j:j + width], 1)
                      for z, j in zip(self.nodes, starts)])
        return starts, w

    def derivative(self, values, axis):
        if len(self) < 2:
            raise ConfigurationError("time derivative needs at least two nodes")
        starts, w = self._derivative_stencils
        values = np.moveaxis(values, axis, 0)
        out = np.zeros(values.shape, dtype=np.result_type(values, float))
        shape = (-1,) + (1,) * (values.ndim - 1)
        for j in range(w.shape[1]):
            out += w[:, j].reshape(shape) * values[starts + j]
        return np.moveaxis(out, 0, axis)

    def integrate(self, values, axis=0):
        return np.tensordot(self.weights, values, axes=([0], [axis]))

    def interpolation(self, z):
        """(start index, weights) of cubic Lagrange interpolation at time z."""
        starts, width = _stencils(self.nodes, 4, np.atleast_1d(z))
        j = starts[0]
        x = self.nodes[j:j + width]
        return j, fd_weights(float(z), x, 0)

    def half_steps(self):
        """Interpolation data for the midpoint of every interval."""
        mids = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        return [self.interpolation(z) for z in mids]


def node_factor(a):
    """Reshape a per-node array so it broadcasts against (n_t, ntheta, nphi)."""
    return np.asarray(a)[:, None, None]


@dataclass(frozen=True, eq=False)
class HorizontalField:
    """Tensor field tangent to the level spheres, sampled on the grid."""

    values: np.ndarray
    kinds: str
    time: TimeGrid
    grid: SphereGrid

    def __post_init__(self):
        if any(k not in "ud" for k in self.kinds):
            raise ConfigurationError("kinds must consist of 'u' and 'd'")
        if len(self.kinds) > MAX_RANK:
            raise UnsupportedRankError(f"total rank above {MAX_RANK} is unsupported")
        v = np.asarray(self.values)
        expect = (2,) * len(self.kinds) + (len(self.time),) + self.grid.shape
        if v.shape != expect:
            raise ConfigurationError(f"values have shape {v.shape}, expected {expect}")
        object.__setattr__(self, "values", v)

    @property
    def rank(self):
        return (self.kinds.count("u"), self.kinds.count("d"))

    @property
    def order(self):
        return len(self.kinds)

    @classmethod
    def zeros(cls, kinds, time, grid):
        shape = (2,) * len(kinds) + (len(time),) + grid.shape
        return cls(np.zeros(shape, dtype=complex), kinds, time, grid)

    @classmethod
    def static(cls, values, kinds, time, grid):
        """t-independent field from a single-sphere sample array."""
        values = np.asarray(values)
        r = len(kinds)
        v = np.broadcast_to(np.expand_dims(values, r), values.shape[:r] + (len(time),) + grid.shape)
        return cls(np.array(v, dtype=complex), kinds, time, grid)

    def like(self, values, kinds=None):
        return HorizontalField(values, self.kinds if kinds is None else kinds, self.time, self.grid)

    def node(self, i):
        return self.values[(slice(None),) * self.order + (i,)]

    def __add__(self, other):
        return self.like(self.values + _values(other))

    def __sub__(self, other):
        return self.like(self.values - _values(other))

    def __neg__(self):
        return self.like(-self.values)

    def __mul__(self, c):
        return self.like(self.values * c)

    __rmul__ = __mul__

    def scale_nodes(self, a):
        """Multiply node-wise by a per-node scalar array."""
        return self.like(self.values * node_factor(a))

    def real(self):
        return self.like(np.real(self.values).astype(complex))

    def coeffs(self):
        return tn.to_coeffs(self.values, self.kinds, self.grid)

    def projected(self):
        return self.like(tn.project(self.values, self.kinds, self.grid))


def _values(x):
    return x.values if isinstance(x, HorizontalField) else x


@dataclass(frozen=True, eq=False)
class HorizontalMetric:
    """Family gamma[t] of metrics on S^2 with second fundamental form k.

    If ``k`` is not given it is measured as half the t-derivative of gamma.
    ``conformal_log`` records u when gamma = e^{2u} x base.
    """

    gamma: HorizontalField
    k: HorizontalField | None = None
    conformal_log: np.ndarray | None = None

    def __post_init__(self):
        if self.gamma.kinds != "dd":
            raise ConfigurationError("metric must be a covariant 2-tensor")
        g = self.gamma.values
        det = np.real(g[0, 1] * g[1, 0] - g[0, 0] * g[1, 1])
        if np.any(det <= 0) or np.any(np.real(g[0, 1]) <= 0):
            raise ConfigurationError("metric is not positive definite")
        if self.k is None:
            object.__setattr__(self, "k", self.gamma.like(0.5 * lie_t(self.gamma).values))

    @classmethod
    def round(cls, time, grid):
        g = tn.round_metric((len(time),) + grid.shape)
        zero = HorizontalField.zeros("dd", time, grid)
        return cls(HorizontalField(g, "dd", time, grid), zero, np.zeros(len(time)))

    @classmethod
    def conformal(cls, u, time, grid, du=None, base=None):
        """gamma = e^{2u} base with u constant on each sphere.

        With ``du`` (the t-derivative of u) supplied, k = du gamma exactly;
        otherwise k is measured from gamma.
        """
        u = np.asarray(u, dtype=float)
        base = tn.round_metric(grid.shape) if base is None else base
        g = base[:, :, None] * node_factor(np.exp(2 * u))
        gamma = HorizontalField(g, "dd", time, grid)
        k = None if du is None else gamma.scale_nodes(np.asarray(du, dtype=float))
        return cls(gamma, k, u)

    @property
    def time(self):
        return self.gamma.time

    @property
    def grid(self):
        return self.gamma.grid

    @cached_property
    def inverse(self):
        return tn.inverse_metric(self.gamma.values)

    @cached_property
    def density(self):
        """Area density relative to the unit round sphere, per node."""
        return tn.area_density(self.gamma.values)

    @cached_property
    def christoffel(self):
        return tn.christoffel(self.gamma.values, self.grid, self.inverse)

    @cached_property
    def volume_form(self):
        return tn.volume_form(self.gamma.values)

    @cached_property
    def k_mixed(self):
        """k^a_b = gamma^{ac} k_cb."""
        return np.einsum("ac...,cb...->ab...", self.inverse, self.k.values)

    @cached_property
    def trace_k(self):
        return tn.trace(self.k.values, self.inverse)

    def gauss_curvature(self):
        return tn.gauss_curvature(self.gamma.values, self.grid, self.inverse, self.christoffel)

    def area(self):
        return self.grid.integrate(self.density)

    def nabla(self, field):
        """Horizontal covariant derivative (new covariant index first)."""
        v = tn.nabla(field.values, field.kinds, self.grid, self.christoffel)
        return field.like(v, "d" + field.kinds)

    def norm_sq(self, field):
        return tn.norm_sq(field.values, field.kinds, self.gamma.values, self.inverse)

    def second_fundamental_form(self):
        return SecondFundamentalForm.from_metric(self)


@dataclass(frozen=True, eq=False)
class SecondFundamentalForm:
    k: HorizontalField
    trace_k: HorizontalField
    traceless: HorizontalField

    @classmethod
    def from_metric(cls, metric):
        tr = metric.trace_k
        hat = metric.k.values - 0.5 * tr * metric.gamma.values
        return cls(metric.k, metric.k.like(tr, ""), metric.k.like(hat))

    def reassembled(self, metric):
        return self.traceless.values + 0.5 * self.trace_k.values * metric.gamma.values


def _unit_step(x):
    x = np.asarray(x, dtype=float)
    a = np.clip(x, 0.0, None)
    b = np.clip(1.0 - x, 0.0, None)
    ea = np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
    eb = np.where(b > 0, np.exp(-1.0 / np.where(b > 0, b, 1.0)), 0.0)
    return ea / (ea + eb)


@dataclass(frozen=True)
class CutoffPair:
    """Smooth eta_+ (0 on [0, delta/3], 1 on [2 delta/3, delta]) and eta_- = 1 - eta_+.

    eta_+ is the normalized primitive of a plateau bump whose edges have
    relative width ``edge``; its slope never exceeds 3 / ((1 - edge) delta).
    """

    delta: float
    edge: float = 0.2

    def _bump(self, x):
        return _unit_step(x / self.edge) * _unit_step((1.0 - x) / self.edge)

    def _ramp(self, x):
        x = float(np.clip(x, 0.0, 1.0))
        if x <= 0.5:
            val = quad(self._bump, 0.0, x, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        else:
            val = (1.0 - self.edge) - quad(self._bump, x, 1.0, epsabs=1e-14,
                                           epsrel=1e-13, limit=200)[0]
        return val / (1.0 - self.edge)

    def eta_plus(self, t):
        x = 3.0 * np.asarray(t, dtype=float) / self.delta - 1.0
        return np.vectorize(self._ramp)(x)

    def eta_minus(self, t):
        return 1.0 - self.eta_plus(t)

    def d_eta_plus(self, t):
        x = 3.0 * np.asarray(t, dtype=float) / self.delta - 1.0
        inside = (x > 0) & (x < 1)
        return np.where(inside, self._bump(np.clip(x, 0, 1)), 0.0) * 3.0 / (
            self.delta * (1.0 - self.edge))

    def d_eta_minus(self, t):
        return -self.d_eta_plus(t)


# ---------------------------------------------------------------------------
# t-derivatives


def lie_t(field):
    """Vertical Lie derivative: t-derivative of frame components."""
    return field.like(field.time.derivative(field.values, field.order))


def _k_action(values, kinds, kmix):
    """A(Psi) with nabla_t Psi = L_t Psi - A(Psi)."""
    r = len(kinds)
    src = tn.LETTERS[:r]
    out = np.zeros_like(values, dtype=complex)
    for i, kind in enumerate(kinds):
        tin = src[:i] + "y" + src[i + 1:]
        if kind == "d":
            out += np.einsum(f"y{src[i]}...,{tin}...->{src}...", kmix, values)
        else:
            out -= np.einsum(f"{src[i]}y...,{tin}...->{src}...", kmix, values)
    return out


def nabla_t(field, metric):
    """Covariant t-derivative; identical to lie_t on scalars."""
    lt = lie_t(field)
    if not field.kinds:
        return lt
    return lt.like(lt.values - _k_action(field.values, field.kinds, metric.k_mixed))


def _interp(values, axis, data):
    j, w = data
    sl = [slice(None)] * values.ndim
    out = 0.0
    for m, wm in enumerate(w):
        sl[axis] = j + m
        out = out + wm * values[tuple(sl)]
    return out


def _node(values, axis, i):
    sl = [slice(None)] * values.ndim
    sl[axis] = i
    return values[tuple(sl)]


def _transport_solve(source, kinds, metric, tau_index, initial=None):
    """RK4 solve of d/dt Phi = source + A(Phi) away from node tau_index."""
    time = metric.time
    r = len(kinds)
    kmix = metric.k_mixed
    n = len(time)
    shape = (2,) * r + (n,) + metric.grid.shape
    out = np.zeros(shape, dtype=complex)
    start = np.zeros((2,) * r + metric.grid.shape, dtype=complex) if initial is None else initial
    out[(slice(None),) * r + (tau_index,)] = start
    mids = time.half_steps()
    t = time.nodes

    def rhs(phi, src, km):
        f = _k_action(phi, kinds, km) if r else 0.0
        return f + src if src is not None else f

    def src_at(i):
        return None if source is None else _node(source, r, i)

    def src_mid(m):
        return None if source is None else _interp(source, r, mids[m])

    for direction in (1, -1):
        i = tau_index
        phi = start
        while 0 <= i + direction < n:
            j = i + direction
            h = t[j] - t[i]
            m = min(i, j)
            km_i, km_j = _node(kmix, 2, i), _node(kmix, 2, j)
            km_m = _interp(kmix, 2, mids[m])
            s_i, s_j, s_m = src_at(i), src_at(j), src_mid(m)
            k1 = rhs(phi, s_i, km_i)
            k2 = rhs(phi + 0.5 * h * k1, s_m, km_m)
            k3 = rhs(phi + 0.5 * h * k2, s_m, km_m)
            k4 = rhs(phi + h * k3, s_j, km_j)
            phi = phi + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            out[(slice(None),) * r + (j,)] = phi
            i = j
    return out


def cint(field, metric, tau=0.0):
    """Covariant integral from tau: nabla_t cint = field, zero at tau."""
    i = metric.time.index_of(tau)
    return field.like(_transport_solve(field.values, field.kinds, metric, i))


def cint_star(field, metric, cutoffs=None):
    """Antiderivative cut off at both ends: cint_0(eta_+ Psi) + cint_delta(eta_- Psi).

    It satisfies nabla_t cint_star(Psi) = Psi and
    cint_star(nabla_t Psi) = Psi - cint_0(eta_+' Psi) - cint_delta(eta_-' Psi).
    """
    time = metric.time
    cutoffs = CutoffPair(time.t_max) if cutoffs is None else cutoffs
    t = time.nodes - time.nodes[0]
    ep = cutoffs.eta_plus(t)
    em = 1.0 - ep
    a = cint(field.scale_nodes(ep), metric, time.nodes[0])
    b = cint(field.scale_nodes(em), metric, time.nodes[-1])
    return a + b


def parallel_transport(initial, kinds, metric, tau=0.0):
    """Transport of a single-sphere tensor with nabla_t (pF) = 0."""
    i = metric.time.index_of(tau)
    v = _transport_solve(None, kinds, metric, i, initial=np.asarray(initial, dtype=complex))
    return HorizontalField(v, kinds, metric.time, metric.grid)


def jacobian(metric):
    """J = exp(integral_0^t tr k), the density of eps[t] against eps[0]."""
    tr = HorizontalField(metric.trace_k, "", metric.time, metric.grid)
    log_j = cint(tr, metric, metric.time.nodes[0])
    return log_j.like(np.exp(np.real(log_j.values)).astype(complex))


# ---------------------------------------------------------------------------
# commutators


def curl_k(metric):
    """C_abc = nabla_b k_ac - nabla_c k_ab (first index of nabla k is b)."""
    dk = metric.nabla(metric.k).values  # dk[b, a, c] = nabla_b k_ac
    return np.einsum("bac...->abc...", dk) - np.einsum("cab...->abc...", dk)


def _index_sum(values, kinds, tensor_low, G, sign_lower=-1.0):
    """sum_i of gamma^{cd} T_{a u_i c} Psi_{..d..} (lower) and the upper analogue.

    ``tensor_low`` has indices [a, u, c]; the result gains a leading index a.
    """
    r = len(kinds)
    src = tn.LETTERS[1:r + 1]
    raised = np.einsum("auc...,cd...->aud...", tensor_low, G)  # T_{au}^{d}
    out = 0.0
    for i, kind in enumerate(kinds):
        tin = src[:i] + "y" + src[i + 1:]
        if kind == "d":
            out = out + sign_lower * np.einsum(f"a{src[i]}y...,{tin}...->a{src}...", raised, values)
        else:
            # + gamma^{c v} T_{a d c} Psi^{..d..}
            t_up = np.einsum("adc...,cv...->avd...", tensor_low, G)
            out = out - sign_lower * np.einsum(f"a{src[i]}y...,{tin}...->a{src}...", t_up, values)
    return out


def commutator_terms(field, metric, which):
    """Left and right sides of the selected commutation formula."""
    G = metric.inverse
    kinds = field.kinds
    if which == "lie":
        lhs = lie_t(metric.nabla(field)).values - metric.nabla(lie_t(field)).values
        dk = metric.nabla(metric.k).values  # [a, u, c] = nabla_a k_uc
        sym = dk + np.einsum("uac...->auc...", dk) - np.einsum("cau...->auc...", dk)
        rhs = _index_sum(field.values, kinds, sym, G) if kinds else np.zeros_like(lhs)
        return lhs, rhs
    curl = curl_k(metric)
    kmix_low = np.einsum("ac...,cd...->ad...", metric.k.values, G)  # k_a^d
    if which == "nabla_t":
        lhs = nabla_t(metric.nabla(field), metric).values - metric.nabla(nabla_t(field, metric)).values
        dpsi = metric.nabla(field).values
        rhs = -np.einsum("ad...,d...->a...", kmix_low, dpsi)
        if kinds:
            rhs = rhs + _index_sum(field.values, kinds, curl, G)
        return lhs, rhs
    if which == "cint":
        t0 = metric.time.nodes[0]
        phi = cint(field, metric, t0)
        lhs = cint(metric.nabla(field), metric, t0).values - metric.nabla(phi).values
        dphi = metric.nabla(phi).values
        inner = np.einsum("ad...,d...->a...", kmix_low, dphi)
        if kinds:
            inner = inner - _index_sum(phi.values, kinds, curl, G)
        rhs = cint(field.like(inner, "d" + kinds), metric, t0).values
        return lhs, rhs
    raise ConfigurationError(f"unknown commutator {which!r}")


def commutator_residual(field, metric, which):
    """L^{2,2} norm of LHS - RHS of a commutation formula."""
    lhs, rhs = commutator_terms(field, metric, which)
    diff = field.like(lhs - rhs, "d" + field.kinds)
    return mixed_norm(diff, metric, "tx", 2, 2)


# ---------------------------------------------------------------------------
# norms


def pointwise_norm(field, metric):
    return np.sqrt(np.maximum(metric.norm_sq(field), 0.0))


def slice_norms(field, metric, q):
    """||Psi[tau]||_{L^q_x} with respect to gamma[tau], per node."""
    mag = pointwise_norm(field, metric)
    if q == np.inf:
        return mag.reshape(mag.shape[0], -1).max(axis=1)
    dens = metric.density
    return metric.grid.integrate(mag ** q * dens) ** (1.0 / q)


def _time_norm(values, time, p, axis=0):
    if p == np.inf:
        return np.max(values, axis=axis)
    return time.integrate(values ** p, axis) ** (1.0 / p)


def mixed_norm(field, metric, order, p, q, J=None):
    """Iterated norms L^{p,q}_{t,x} (order 'tx') or L^{q,p}_{x,t} (order 'xt').

    For 'xt' the inner t-integral carries the weight J^{p/q} and the outer
    integral is against eps[0], as in the definition.
    """
    if min(p, q) < 1:
        raise ConfigurationError("exponents must lie in [1, inf]")
    time = metric.time
    if order == "tx":
        return float(_time_norm(slice_norms(field, metric, q), time, p))
    if order != "xt":
        raise ConfigurationError("order must be 'tx' or 'xt'")
    mag = pointwise_norm(field, metric)
    if q == np.inf:
        return float(np.max(_time_norm(mag, time, p)))
    J = np.real(jacobian(metric).values) if J is None else J
    inner = _time_norm(mag * J ** (1.0 / q), time, p)
    dens0 = metric.density[0]
    return float(metric.grid.integrate(inner ** q * dens0) ** (1.0 / q))


def lp_components(field, k, profile=DEFAULT_PROFILE):
    """Apply P_k (or 'minus' / 'below 0') componentwise on the round background."""
    grid = field.grid
    c = field.coeffs()
    spins = tn.spins(field.kinds)
    out = np.empty_like(c)
    for idx in np.ndindex(spins.shape):
        lam = grid.bochner_eigenvalues(int(spins[idx]))
        out[idx] = profile.multiplier(lam, k) * c[idx]
    return field.like(tn.from_coeffs(out, field.kinds, grid))


def sobolev_components(field, s):
    grid = field.grid
    c = field.coeffs()
    spins = tn.spins(field.kinds)
    out = np.empty_like(c)
    for idx in np.ndindex(spins.shape):
        lam = grid.bochner_eigenvalues(int(spins[idx]))
        out[idx] = (1.0 + lam) ** (s / 2.0) * c[idx]
    return field.like(tn.from_coeffs(out, field.kinds, grid))


def sobolev_slices(field, metric, s):
    """||Lambda^s Psi[tau]||_{L^2(gamma[tau])} per node."""
    return slice_norms(sobolev_components(field, s), metric, 2)


def besov_tx(field, metric, a, p, s, profile=DEFAULT_PROFILE):
    """B^{a,p,s}_{l,t,x}: L-P blocks measured in L^{p,2}_{t,x}."""
    lam_max = field.grid.lmax * (field.grid.lmax + 1.0)
    low = mixed_norm(lp_components(field, "below 0", profile), metric, "tx", p, 2)
    blocks = [mixed_norm(lp_components(field, k, profile), metric, "tx", p, 2)
              for k in profile.k_range(lam_max)]
    return besov_combine(low, blocks, a, s)


def n1_norm(field, metric, dt_field=None):
    """N^1: ||nabla_t Psi|| + ||nabla Psi|| + ||Psi||, all in L^{2,2}_{t,x}."""
    dt_field = nabla_t(field, metric) if dt_field is None else dt_field
    parts = (dt_field, metric.nabla(field), field)
    return sum(mixed_norm(f, metric, "tx", 2, 2) for f in parts)


def initial_half_norm(field, metric):
    return float(sobolev_slices(_first_node(field), _first_node_metric(metric), 0.5)[0])


def _first_node(field):
    t = TimeGrid(field.time.nodes[:1], bounded=False)
    return HorizontalField(field.values[(slice(None),) * field.order + (slice(0, 1),)],
                           field.kinds, t, field.grid)


def _first_node_metric(metric):
    g = _first_node(metric.gamma)
    return HorizontalMetric(g, g.like(np.zeros_like(g.values)))


def n1i_norm(field, metric, dt_field=None):
    return n1_norm(field, metric, dt_field) + initial_half_norm(field, metric)


def antiderivative_candidates(field, metric):
    """Explicit t-antiderivatives of ``field`` used to bound N^{0*} from above."""
    nodes = metric.time.nodes
    yield "cint_0", cint(field, metric, nodes[0])
    yield "cint_end", cint(field, metric, nodes[-1])
    yield "cint_mid", cint(field, metric, nodes[len(nodes) // 2])
    yield "cint_star", cint_star(field, metric)


def n0star_upper(field, metric):
    """min of N^{1i} over explicit antiderivatives: an upper bound for N^{0*}."""
    best = np.inf
    for _, phi in antiderivative_candidates(field, metric):
        best = min(best, n1i_norm(phi, metric, dt_field=field))
    return float(best)


def b20(field, metric):
    """B^{2,0}_{t,x} = B^{1,2,0}_{l,t,x}."""
    return besov_tx(field, metric, 1, 2, 0.0)


def sum_norm_upper(field, metric, decomposition=None):
    """Upper bound for ||Psi||_{N^{0*} + B^{2,0}} from explicit splittings.

    ``decomposition`` is a list of (part_in_N0star, part_in_B20) pairs summing
    to ``field``; by default the two trivial splittings are tried.
    """
    if decomposition is None:
        return float(min(n0star_upper(field, metric), b20(field, metric)))
    best = np.inf
    for a, b in decomposition:
        best = min(best, n0star_upper(a, metric) + b20(b, metric))
    return float(best)


def n_norms(field, metric):
    n1 = n1_norm(field, metric)
    return {
        "N1": n1,
        "N1i": n1 + initial_half_norm(field, metric),
        "N0star_upper": n0star_upper(field, metric),
        "sum_norm_upper": sum_norm_upper(field, metric),
    }


# ---------------------------------------------------------------------------
# conformal changes


def conformal_metric(metric, u):
    """Metric e^{2u} gamma with its measured second fundamental form."""
    u = np.asarray(u, dtype=float)
    gbar = metric.gamma.scale_nodes(np.exp(2 * u))
    return HorizontalMetric(gbar)


def conformal_transport_check(field, metric, u, relative=False):
    """Residual of nabla-bar_t[e^{(l-r)u} Psi] = e^{(l-r)u} nabla_t Psi."""
    u = np.asarray(u, dtype=float)
    r, l = field.rank
    w = np.exp((l - r) * u)
    bar = conformal_metric(metric, u)
    lhs = nabla_t(field.scale_nodes(w), bar)
    rhs = nabla_t(field, metric).scale_nodes(w)
    res = mixed_norm(lhs - rhs, metric, "tx", 2, 2)
    if relative:
        return res / max(mixed_norm(rhs, metric, "tx", 2, 2), np.finfo(float).tiny)
    return res


def conformal_sff_check(metric, u, du):
    """Residuals of tr-bar k-bar = tr k + 2 du and khat-bar = e^{2u} khat (relative)."""
    u = np.asarray(u, dtype=float)
    bar = conformal_metric(metric, u)
    tr_res = np.real(bar.trace_k) - (np.real(metric.trace_k) + 2 * node_factor(du))
    scale = max(np.abs(np.real(bar.trace_k)).max(), 1.0)
    hat = metric.k.values - 0.5 * metric.trace_k * metric.gamma.values
    hat_bar = bar.k.values - 0.5 * bar.trace_k * bar.gamma.values
    diff = hat_bar - hat * node_factor(np.exp(2 * u))
    ref = max(np.abs(hat_bar).max(), np.abs(bar.k.values).max(), 1e-300)
    return float(np.abs(tr_res).max() / scale), float(np.abs(diff).max() / ref)
