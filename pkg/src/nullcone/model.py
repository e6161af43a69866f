"""Physical and renormalized null-cone data, the renormalization maps and
exact Schwarzschild/Minkowski data.

Both containers live on one uniform t-grid; the physical s-nodes are the
images s = s0/(1-t) of the t-nodes.  Physical mixed norms use the s-grid
with quadrature weights pushed forward from t (w_s = ds/dt w_t), so integrals
in the two charts agree to roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import tensor as tn
from .foliation import HorizontalField, HorizontalMetric, TimeGrid, jacobian, node_factor
from .spectral import ConfigurationError, SphereGrid


class DomainError(ValueError):
    pass


class IncompleteDataError(ValueError):
    pass


@dataclass(frozen=True)
class AffineChart:
    s0: float
    m: float = 0.0

    def __post_init__(self):
        if self.m < 0:
            raise DomainError("mass must be nonnegative")
        if not self.s0 > 2 * self.m:
            raise DomainError("need s0 > 2m")

    def s_of_t(self, t):
        return self.s0 / (1.0 - np.asarray(t, dtype=float))

    def t_of_s(self, s):
        return 1.0 - self.s0 / np.asarray(s, dtype=float)

    def ds_dt(self, t):
        return self.s0 / (1.0 - np.asarray(t, dtype=float)) ** 2

    def s_time(self, time):
        """The physical s-grid, with quadrature weights pushed forward from t."""
        s = self.s_of_t(time.nodes)
        return TimeGrid(s, order=time.order, weights=self.ds_dt(time.nodes) * time.weights,
                        bounded=False)


PHYSICAL_FIELDS = ("mind", "chi", "zeta", "chibar", "alpha", "beta", "rho", "sigma",
                   "betabar", "mu")
PHYSICAL_KINDS = {"mind": "dd", "chi": "dd", "zeta": "d", "chibar": "dd", "alpha": "dd",
                  "beta": "d", "rho": "", "sigma": "", "betabar": "d", "mu": ""}
RENORMALIZED_FIELDS = ("gamma", "H", "Z", "Hbar", "A", "B", "R", "Bbar", "M")
RENORMALIZED_KINDS = {"gamma": "dd", "H": "dd", "Z": "d", "Hbar": "dd", "A": "dd",
                      "B": "d", "R": "", "Bbar": "d", "M": "", "dtrH": "d"}


@dataclass(frozen=True, eq=False)
class PhysicalConeData:
    chart: AffineChart
    mind: HorizontalField
    chi: HorizontalField
    zeta: HorizontalField
    chibar: HorizontalField
    alpha: HorizontalField
    beta: HorizontalField
    rho: HorizontalField
    sigma: HorizontalField
    betabar: HorizontalField
    mu: HorizontalField

    def __post_init__(self):
        for name in PHYSICAL_FIELDS:
            f = getattr(self, name)
            if f is None:
                raise IncompleteDataError(f"missing field {name}")
            if f.kinds != PHYSICAL_KINDS[name]:
                raise ConfigurationError(f"{name} must have index kinds {PHYSICAL_KINDS[name]!r}")

    @property
    def time(self):
        return self.mind.time

    @property
    def grid(self):
        return self.mind.grid

    @cached_property
    def s(self):
        return self.chart.s_of_t(self.time.nodes)

    @cached_property
    def s_time(self):
        return self.chart.s_time(self.time)

    @cached_property
    def metric(self):
        """g-slash on the t-grid; its t-second fundamental form is (ds/dt) chi."""
        k = self.chi.scale_nodes(self.chart.ds_dt(self.time.nodes))
        return HorizontalMetric(self.mind, k)

    @cached_property
    def s_metric(self):
        """g-slash on the s-grid (second fundamental form chi), for physical norms."""
        return HorizontalMetric(on_time(self.mind, self.s_time), on_time(self.chi, self.s_time))

    def items(self):
        return {name: getattr(self, name) for name in PHYSICAL_FIELDS}


@dataclass(frozen=True, eq=False)
class RenormalizedConeData:
    chart: AffineChart
    gamma: HorizontalField
    H: HorizontalField
    Z: HorizontalField
    Hbar: HorizontalField
    A: HorizontalField
    B: HorizontalField
    R: HorizontalField
    Bbar: HorizontalField
    M: HorizontalField
    dtrH: HorizontalField | None = None

    def __post_init__(self):
        for name in RENORMALIZED_FIELDS:
            f = getattr(self, name)
            if f is None:
                raise IncompleteDataError(f"missing field {name}")
            if f.kinds != RENORMALIZED_KINDS[name]:
                raise ConfigurationError(f"{name} must have index kinds {RENORMALIZED_KINDS[name]!r}")

    @property
    def time(self):
        return self.gamma.time

    @property
    def grid(self):
        return self.gamma.grid

    @cached_property
    def s(self):
        return self.chart.s_of_t(self.time.nodes)

    @cached_property
    def metric(self):
        """gamma with k = H (the second fundamental form of the t-foliation)."""
        return HorizontalMetric(self.gamma, self.H)

    def trace_H(self):
        return self.H.like(tn.trace(self.H.values, self.metric.inverse), "")

    def grad_trace_H(self):
        """Stored nabla tr H if present, else computed from H."""
        if self.dtrH is not None:
            return self.dtrH
        return self.metric.nabla(self.trace_H())

    def items(self, with_derived=False):
        out = {name: getattr(self, name) for name in RENORMALIZED_FIELDS}
        if with_derived and self.dtrH is not None:
            out["dtrH"] = self.dtrH
        return out

    def with_fields(self, **kw):
        return replace(self, **kw)


def on_time(f, time):
    return HorizontalField(f.values, f.kinds, time, f.grid)


def _static(values, kinds, time, grid):
    return HorizontalField.static(values, kinds, time, grid)


def round_family(time, grid, scale):
    """scale(t)^2 times the unit round metric."""
    h = tn.round_metric((len(time),) + grid.shape)
    return HorizontalField(h * node_factor(np.asarray(scale) ** 2), "dd", time, grid)


def schwarzschild_exact(m, s0, grid, time):
    """Schwarzschild (Minkowski for m = 0) cone data in the affine foliation."""
    chart = AffineChart(s0, m)
    s = chart.s_of_t(time.nodes)
    g = round_family(time, grid, s)
    zero1 = HorizontalField.zeros("d", time, grid)
    zero2 = HorizontalField.zeros("dd", time, grid)
    zero0 = HorizontalField.zeros("", time, grid)
    ones = np.ones((len(time),) + grid.shape, dtype=complex)
    return PhysicalConeData(
        chart=chart,
        mind=g,
        chi=g.scale_nodes(1.0 / s),
        zeta=zero1,
        chibar=g.scale_nodes(-(1.0 - 2 * m / s) / s),
        alpha=zero2,
        beta=zero1,
        rho=zero0.like(ones * node_factor(-2 * m / s ** 3)),
        sigma=zero0,
        betabar=zero1,
        mu=zero0.like(ones * node_factor(2 * m / s ** 3)),
    )


def minkowski_exact(s0, grid, time):
    return schwarzschild_exact(0.0, s0, grid, time)


def renormalize(phys):
    c = phys.chart
    s, s0, m = phys.s, c.s0, c.m
    g = phys.mind
    rho_sigma = phys.rho.values + 1j * phys.sigma.values
    return RenormalizedConeData(
        chart=c,
        gamma=g.scale_nodes(s ** -2.0),
        H=(phys.chi - g.scale_nodes(1.0 / s)) * (1.0 / s0),
        Z=phys.zeta.scale_nodes(s / s0),
        Hbar=phys.chibar.scale_nodes(1.0 / s) + g.scale_nodes((1 - 2 * m / s) / s ** 2),
        A=phys.alpha.scale_nodes(s ** 2 / s0 ** 2),
        B=phys.beta.scale_nodes(s ** 3 / s0 ** 2),
        R=phys.rho.like((rho_sigma * node_factor(s ** 3) + 2 * m) / s0),
        Bbar=phys.betabar.scale_nodes(s),
        M=phys.mu.like((phys.mu.values * node_factor(s ** 3) - 2 * m) / s0),
    )


def derenormalize(ren):
    c = ren.chart
    s, s0, m = ren.s, c.s0, c.m
    g = ren.gamma.scale_nodes(s ** 2)
    rs = (ren.R.values * s0 - 2 * m) * node_factor(s ** -3.0)
    return PhysicalConeData(
        chart=c,
        mind=g,
        chi=ren.H * s0 + g.scale_nodes(1.0 / s),
        zeta=ren.Z.scale_nodes(s0 / s),
        chibar=ren.Hbar.scale_nodes(s) - g.scale_nodes((1 - 2 * m / s) / s),
        alpha=ren.A.scale_nodes(s0 ** 2 / s ** 2),
        beta=ren.B.scale_nodes(s0 ** 2 / s ** 3),
        rho=ren.R.like(np.real(rs).astype(complex)),
        sigma=ren.R.like(np.imag(rs).astype(complex)),
        betabar=ren.Bbar.scale_nodes(1.0 / s),
        mu=ren.M.like((ren.M.values * s0 + 2 * m) * node_factor(s ** -3.0)),
    )


# ---------------------------------------------------------------------------
# observables


def traceless_part(T, metric):
    return tn.traceless(T.values, metric.gamma.values, metric.inverse)


def mass_aspect(phys):
    """mu recomputed from its definition, and the L^inf residual against the stored mu."""
    met = phys.metric
    G = met.inverse
    dz = met.nabla(phys.zeta).values
    chi_hat = traceless_part(phys.chi, met)
    chibar_hat = traceless_part(phys.chibar, met)
    mu = (-np.einsum("ab...,ab...->...", G, dz) - phys.rho.values
          + 0.5 * np.einsum("ac...,bd...,ab...,cd...->...", G, G, chi_hat, chibar_hat))
    return phys.mu.like(mu), float(np.abs(mu - phys.mu.values).max())


def area_radius(phys):
    """r(v) from the area 4 pi r^2 of each level sphere."""
    return np.sqrt(phys.metric.area() / (4 * np.pi))


def hawking_masses(phys, form="mu"):
    """Hawking mass of every level sphere, from mu or from tr chi tr chibar."""
    met = phys.metric
    r = area_radius(phys)
    dens = met.density
    if form == "mu":
        return r / (8 * np.pi) * phys.grid.integrate(np.real(phys.mu.values) * dens)
    if form == "expansion":
        trc = np.real(tn.trace(phys.chi.values, met.inverse))
        trcb = np.real(tn.trace(phys.chibar.values, met.inverse))
        return r / 2 * (1 + phys.grid.integrate(trc * trcb * dens) / (16 * np.pi))
    raise ConfigurationError(f"unknown Hawking mass form {form!r}")


def hawking_mass(phys, v, form="mu"):
    i = phys.time.index_of(float(phys.chart.t_of_s(v)))
    return float(hawking_masses(phys, form)[i])


def radius_ratio(ren, J=None):
    """r/s per node from the Jacobian: (1/4pi int J d eps[0])^(1/2)."""
    met = ren.metric
    J = np.real(jacobian(met).values) if J is None else J
    return np.sqrt(ren.grid.integrate(J * met.density[0]) / (4 * np.pi))


def radius_ratio_direct(ren):
    """r/s per node from the area of gamma[t] directly."""
    return np.sqrt(ren.metric.area() / (4 * np.pi))


# ---------------------------------------------------------------------------
# synthetic data


def real_one_form(xi):
    """Null-frame components of the real 1-form with X(mbar) = xi."""
    out = np.empty((2,) + xi.shape, dtype=complex)
    out[0] = np.conj(xi)
    out[1] = xi
    return out


def real_sym_traceless(Xi):
    """Components of the real symmetric round-traceless 2-tensor with X(mbar, mbar) = Xi."""
    out = np.zeros((2, 2) + Xi.shape, dtype=complex)
    out[0, 0] = np.conj(Xi)
    out[1, 1] = Xi
    return out


def random_sphere_tensor(kind, grid, rng, lmax, amplitude=1.0):
    """Random real band-limited tensor on one sphere: 'scalar', 'complex', 'one_form', 'sym2'."""
    if kind == "scalar":
        c = grid.random_coeffs(rng, 0, lmax=lmax)
        return amplitude * np.real(grid.synthesize(c, 0)).astype(complex)
    if kind == "complex":
        c = grid.random_coeffs(rng, 0, lmax=lmax) + 1j * grid.random_coeffs(rng, 0, lmax=lmax)
        return amplitude * grid.synthesize(c, 0)
    if kind == "one_form":
        return amplitude * real_one_form(grid.synthesize(grid.random_coeffs(rng, -1, lmax=lmax), -1))
    if kind == "sym2":
        return amplitude * real_sym_traceless(grid.synthesize(grid.random_coeffs(rng, -2, lmax=lmax), -2))
    raise ConfigurationError(f"unknown tensor kind {kind!r}")


_TENSOR_KIND = {"": "scalar", "d": "one_form", "dd": "sym2"}


def random_field(kinds, time, grid, rng, lmax, amplitude=1.0, n_modes=3, complex_scalar=False):
    """Smooth random horizontal field: sum of profiles times smooth t-functions."""
    kind = "complex" if (complex_scalar and kinds == "") else _TENSOR_KIND[kinds]
    t = time.nodes
    out = 0.0
    for j in range(n_modes):
        prof = random_sphere_tensor(kind, grid, rng, lmax)
        a, w, ph = rng.normal(), 1.0 + 2.0 * rng.random(), 2 * np.pi * rng.random()
        ft = a * np.cos(w * t + ph) / (j + 1)
        out = out + np.expand_dims(prof, len(kinds)) * node_factor(ft)
    return HorizontalField(amplitude * np.asarray(out, dtype=complex), kinds, time, grid)


def perturbed_physical(chart, time, grid, eps, rng, lmax=3):
    """Gauss-consistent perturbation of Schwarzschild data.

    g-slash = s^2 e^{2 eps f} round with f static and band-limited; chi, chibar,
    zeta and the curvature get smooth random perturbations of size eps; rho is
    then fixed by the Gauss equation and mu by its definition, so both
    Hawking-mass formulas apply.
    """
    base = schwarzschild_exact(chart.m, chart.s0, grid, time)
    s = base.s
    f = random_sphere_tensor("scalar", grid, rng, lmax, eps)
    g = base.mind.like(base.mind.values * np.exp(2 * f))
    met0 = HorizontalMetric(g, g.like(g.values * node_factor(chart.ds_dt(time.nodes) / s)))
    pert = lambda kinds, scale=1.0: random_field(kinds, time, grid, rng, lmax, eps * scale)
    chi = g.scale_nodes(1.0 / s) + pert("dd").scale_nodes(s) + g.like(
        g.values * pert("").values[None, None] / node_factor(s))
    chibar = g.scale_nodes(-(1.0 - 2 * chart.m / s) / s) + pert("dd").scale_nodes(s)
    zeta = pert("d").scale_nodes(1.0 / s)
    G = met0.inverse
    K = met0.gauss_curvature()
    quad = 0.5 * (np.einsum("ac...,bd...,ab...,cd...->...", G, G, chi.values, chibar.values)
                  - tn.trace(chi.values, G) * tn.trace(chibar.values, G))
    rho = g.like(np.real(-K + quad).astype(complex), "")
    draft = PhysicalConeData(chart=chart, mind=g, chi=chi, zeta=zeta, chibar=chibar,
                             alpha=pert("dd").scale_nodes(s0_over(s, chart) ** 2),
                             beta=pert("d").scale_nodes(s0_over(s, chart) ** 3),
                             rho=rho, sigma=pert("").scale_nodes(s ** -3.0),
                             betabar=pert("d").scale_nodes(1.0 / s),
                             mu=rho)
    mu, _ = mass_aspect(draft)
    return replace(draft, mu=mu.real())


def s0_over(s, chart):
    return chart.s0 / s


def _smooth_series(t, rng, n_modes):
    """Random sum of a_j cos(w_j t + p_j) and its t-derivative."""
    a = rng.normal(size=n_modes) / np.arange(1, n_modes + 1)
    w = 1.0 + 2.0 * rng.random(n_modes)
    p = 2 * np.pi * rng.random(n_modes)
    arg = np.outer(t, w) + p
    return np.cos(arg) * a, -np.sin(arg) * a * w


def random_renormalized(chart, time, grid, eps, rng, lmax=3, n_modes=2):
    """Random renormalized data with k = H holding exactly.

    gamma = e^{2u}(round + q) with u scalar and q symmetric round-traceless,
    both smooth in t, and H = 1/2 d_t gamma in closed form.  The remaining
    fields are independent smooth random fields of size eps, so the data do
    not solve the structure equations.
    """
    t = time.nodes
    u = 0.0
    du = 0.0
    q = 0.0
    dq = 0.0
    for _ in range(n_modes):
        f = random_sphere_tensor("scalar", grid, rng, lmax, eps)
        c, dc = _smooth_series(t, rng, 1)
        u = u + f[None] * node_factor(c[:, 0])
        du = du + f[None] * node_factor(dc[:, 0])
        X = random_sphere_tensor("sym2", grid, rng, lmax, eps)
        c, dc = _smooth_series(t, rng, 1)
        q = q + X[:, :, None] * node_factor(c[:, 0])
        dq = dq + X[:, :, None] * node_factor(dc[:, 0])
    h = tn.round_metric((len(time),) + grid.shape)
    e2u = np.exp(2 * u)
    gamma = e2u * (h + q)
    H = du * gamma + 0.5 * e2u * dq
    rf = lambda kinds, cplx=False: random_field(kinds, time, grid, rng, lmax, eps, n_modes,
                                                complex_scalar=cplx)
    F = lambda v, kinds: HorizontalField(np.asarray(v, dtype=complex), kinds, time, grid)
    return RenormalizedConeData(chart=chart, gamma=F(gamma, "dd"), H=F(H, "dd"), Z=rf("d"),
                                Hbar=rf("dd") + F(gamma, "dd") * 0.0, A=_traceless(rf("dd"), gamma),
                                B=rf("d"), R=rf("", True), Bbar=rf("d"), M=rf(""))


def _traceless(f, gamma):
    return f.like(tn.traceless(f.values, gamma, tn.inverse_metric(gamma)))
