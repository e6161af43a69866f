"""Null structure equations: residuals in both charts, forward evolution of
the renormalized system, Gauss-curvature reconstruction and norm budgets."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn
from .foliation import (
    HorizontalField,
    HorizontalMetric,
    besov_tx,
    lie_t,
    mixed_norm,
    n1_norm,
    nabla_t,
    node_factor,
    sobolev_slices,
    sum_norm_upper,
    _k_action,
)
from .model import RenormalizedConeData, on_time, renormalize
from .spectral import DEFAULT_PROFILE, besov_combine

GROUPS = {
    "ev": "evolution",
    "ell": "elliptic",
    "gc": "gauss_codazzi",
    "evd": "derivative_evolution",
    "nb": "bianchi",
}

EQUATIONS = ("ev_H", "ev_Z", "ev_Hbar", "ell_D2", "ell_D1", "gc_codazzi", "gc_gauss",
             "evd_trH", "evd_M", "nb_B", "nb_R", "nb_Bbar")

# E_renormalized = (s^p / s0^q) E_physical, as (p, q)
WEIGHTS = {
    "ev_H": (2, 2), "ev_Z": (3, 2), "ev_Hbar": (1, 1),
    "ell_D2": (2, 1), "ell_D1": (3, 1),
    "gc_codazzi": (0, 1), "gc_gauss": (2, 0),
    "evd_trH": (4, 2), "evd_M": (5, 2),
    "nb_B": (5, 3), "nb_R": (5, 2), "nb_Bbar": (3, 1),
}

DEFAULT_FLOOR = 1e-8


def group_of(name):
    return GROUPS[name.split("_")[0]]


def weight(name, s, s0):
    p, q = WEIGHTS[name]
    return s ** p / s0 ** q


class ConjugatePointError(RuntimeError):
    """tr H left the configured range: a null conjugate point may be forming."""


# ---------------------------------------------------------------------------
# pointwise operators for a general metric


class _Ops:
    """Contractions and Hodge-type operators for one metric (arrays in, arrays out)."""

    def __init__(self, g, G, C, eps, grid):
        self.g, self.G, self.C, self.eps, self.grid = g, G, C, eps, grid
        self.eps_up = np.einsum("ac...,bd...,cd...->ab...", G, G, eps)
        self.eps_mix = np.einsum("ad...,dc...->ac...", eps, G)  # eps_a^c

    @classmethod
    def of(cls, metric):
        return cls(metric.gamma.values, metric.inverse, metric.christoffel,
                   metric.volume_form, metric.grid)

    @classmethod
    def from_gamma(cls, g, grid):
        G = tn.inverse_metric(g)
        return cls(g, G, tn.christoffel(g, grid, G), tn.volume_form(g), grid)

    def nabla(self, v, kinds):
        return tn.nabla(v, kinds, self.grid, self.C)

    def tr(self, T):
        return tn.trace(T, self.G)

    def hat(self, T):
        return T - 0.5 * self.tr(T) * self.g

    def dot1(self, X, Y):
        return np.einsum("ab...,a...,b...->...", self.G, X, Y)

    def dot2(self, S, T):
        return np.einsum("ac...,bd...,ab...,cd...->...", self.G, self.G, S, T)

    def sq(self, S, T):
        """gamma^{cd} S_ac T_bd."""
        return np.einsum("ac...,cd...,bd...->ab...", S, self.G, T)

    def act(self, S, X):
        """gamma^{bc} S_ab X_c."""
        return np.einsum("ab...,bc...,c...->a...", S, self.G, X)

    def d1(self, X, dX=None):
        dX = self.nabla(X, "d") if dX is None else dX
        return (np.einsum("ab...,ab...->...", self.G, dX)
                - 1j * np.einsum("ab...,ab...->...", self.eps_up, dX))

    def d2(self, X):
        dX = self.nabla(X, "dd")
        return np.einsum("bc...,bac...->a...", self.G, dX)

    def d1_star(self, f):
        dre = self.nabla(np.real(f).astype(complex), "")
        dim = self.nabla(np.imag(f).astype(complex), "")
        return -dre - np.einsum("ac...,c...->a...", self.eps_mix, dim)

    def div(self, X, dX=None):
        dX = self.nabla(X, "d") if dX is None else dX
        return np.einsum("ab...,ab...->...", self.G, dX)


def _sym(T):
    return T + np.swapaxes(T, 0, 1)


def _outer(X, Y):
    return np.einsum("a...,b...->ab...", X, Y)


# ---------------------------------------------------------------------------
# residuals


def renormalized_residual_fields(ren):
    """LHS - RHS of every renormalized structure equation, as horizontal fields."""
    met = ren.metric
    op = _Ops.of(met)
    time = ren.time
    m, s0 = ren.chart.m, ren.chart.s0
    omt = node_factor(1.0 - time.nodes)
    one_m = node_factor(1.0 - 2 * m / ren.s)
    g = op.g
    H, Z, Hb = ren.H.values, ren.Z.values, ren.Hbar.values
    A, B, R, Bb, M = ren.A.values, ren.B.values, ren.R.values, ren.Bbar.values, ren.M.values
    trH, trHb = op.tr(H), op.tr(Hb)
    Hh, Hbh = op.hat(H), op.hat(Hb)
    dZ = op.nabla(Z, "d")
    dH = op.nabla(H, "dd")
    dtrH = ren.grad_trace_H().values
    nt = lambda f: nabla_t(f, met).values
    ReR, ImR = np.real(R), np.imag(R)

    E = {}
    E["ev_H"] = nt(ren.H) + op.sq(H, H) + A
    E["ev_Z"] = nt(ren.Z) + 2 * op.act(H, Z) + B
    E["ev_Hbar"] = (nt(ren.Hbar) + _sym(dZ) + 0.5 * _sym(op.sq(H, Hb)) - one_m * H
                    - 2 * omt * _outer(Z, Z) - ReR * g)
    E["ell_D2"] = op.d2(Hh) - (-omt * B + Z + 0.5 * dtrH + 0.5 * omt * trH * Z
                               - omt * op.act(Hh, Z))
    E["ell_D1"] = op.d1(Z, dZ) - (-R - M + 0.5 * np.einsum(
        "ac...,bd...,ab...,cd...->...", op.G + 1j * op.eps_up, op.G, Hh, Hbh))
    X = omt * B - Z
    E["gc_codazzi"] = (np.einsum("bac...->abc...", dH) - np.einsum("cab...->abc...", dH)
                       + np.einsum("bc...,ad...,d...->abc...", op.eps, op.eps_mix, X)
                       - omt * (np.einsum("ab...,c...->abc...", H, Z)
                                - np.einsum("ac...,b...->abc...", H, Z)))
    K = met.gauss_curvature()
    E["gc_gauss"] = K - 1 - (-omt * ReR + 0.5 * omt * one_m * trH - 0.5 * trHb
                             + 0.5 * omt * (op.dot2(H, Hb) - trH * trHb))
    E["evd_trH"] = (nt(ren.grad_trace_H()) + op.act(H, dtrH)
                    + 2 * np.einsum("bc...,de...,bd...,ace...->a...", op.G, op.G, H, dH))
    E["evd_M"] = nt(ren.M) - _m_rhs(op, M, H, Hh, Z, B, dZ, dtrH, trH, trHb, omt, one_m, m, s0)
    E["nb_B"] = nt(ren.B) - (op.d2(A) / omt - 2 * trH * B + op.act(A, Z))
    Q = omt * _outer(Z, B) + 0.5 * np.einsum("cd...,ac...,bd...->ab...", op.G, Hb, A)
    E["nb_R"] = nt(ren.R) - (op.d1(B) - 1.5 * trH * (R - 2 * m / s0)
                             - np.einsum("ab...,ab...->...", op.G - 1j * op.eps_up, Q))
    E["nb_Bbar"] = nt(ren.Bbar) - (op.d1_star(np.conj(R)) - trH * Bb
                                   + 3 * omt * Z * (ReR - 2 * m / s0)
                                   - 3 * omt * np.einsum("ab...,b...->a...", op.eps_mix, Z) * ImR
                                   + 2 * omt * op.act(Hbh, B))
    return {k: _wrap(v, ren) for k, v in E.items()}


def _m_rhs(op, M, H, Hh, Z, B, dZ, dtrH, trH, trHb, omt, one_m, m, s0):
    return (-1.5 * trH * (M + 2 * m / s0) - 2 * omt * op.dot1(Z, B)
            + 2 * np.einsum("ab...,cd...,ac...,bd...->...", op.G, op.G, Hh, dZ)
            - 2 * omt * op.dot2(Hh, _outer(Z, Z))
            + 2 * op.dot1(Z, dtrH)
            + 1.5 * (omt * trH + 2) * op.dot1(Z, Z)
            - 0.25 * (trHb - 2 * one_m) * op.dot2(Hh, Hh))


def _wrap(v, data):
    v = np.asarray(v, dtype=complex)
    n_idx = v.ndim - 3
    return HorizontalField(v, "d" * n_idx, data.time, data.grid)


def physical_residual_fields(phys):
    """LHS - RHS of every physical structure equation (t-grid samples)."""
    met = phys.metric
    op = _Ops.of(met)
    time = phys.time
    dt_ds = node_factor(1.0 / phys.chart.ds_dt(time.nodes))
    ns = lambda f: dt_ds * nabla_t(f, met).values
    g = op.g
    chi, zeta, chib = phys.chi.values, phys.zeta.values, phys.chibar.values
    alpha, beta, betab = phys.alpha.values, phys.beta.values, phys.betabar.values
    rho, sigma, mu = np.real(phys.rho.values), np.real(phys.sigma.values), phys.mu.values
    rs = rho + 1j * sigma
    trc, trcb = op.tr(chi), op.tr(chib)
    ch, cbh = op.hat(chi), op.hat(chib)
    dz = op.nabla(zeta, "d")
    dchi = op.nabla(chi, "dd")
    dtrc = op.nabla(trc, "")

    E = {}
    E["ev_H"] = ns(phys.chi) + op.sq(chi, chi) + alpha
    E["ev_Z"] = ns(phys.zeta) + 2 * op.act(chi, zeta) + beta
    E["ev_Hbar"] = ns(phys.chibar) + _sym(dz) + 0.5 * _sym(op.sq(chi, chib)) - 2 * _outer(zeta, zeta) - rho * g
    E["ell_D2"] = op.d2(ch) - (-beta + 0.5 * dtrc + 0.5 * trc * zeta - op.act(ch, zeta))
    E["ell_D1"] = op.d1(zeta, dz) - (-rs - mu + 0.5 * np.einsum(
        "ac...,bd...,ab...,cd...->...", op.G + 1j * op.eps_up, op.G, ch, cbh))
    E["gc_codazzi"] = (np.einsum("bac...->abc...", dchi) - np.einsum("cab...->abc...", dchi)
                       + np.einsum("bc...,ad...,d...->abc...", op.eps, op.eps_mix, beta)
                       - np.einsum("ab...,c...->abc...", chi, zeta)
                       + np.einsum("ac...,b...->abc...", chi, zeta))
    K = met.gauss_curvature()
    E["gc_gauss"] = K + rho - 0.5 * (op.dot2(chi, chib) - trc * trcb)
    dtrc_f = phys.zeta.like(dtrc)
    E["evd_trH"] = (ns(dtrc_f) + op.act(chi, dtrc)
                    + 2 * np.einsum("bc...,de...,bd...,ace...->a...", op.G, op.G, chi, dchi))
    E["evd_M"] = ns(phys.mu) - (-1.5 * trc * mu - 2 * op.dot1(zeta, beta) + 2 * op.dot1(dtrc, zeta)
                                + 2 * np.einsum("ab...,cd...,ac...,bd...->...", op.G, op.G, ch, dz)
                                - 2 * op.dot2(ch, _outer(zeta, zeta))
                                + 1.5 * trc * op.dot1(zeta, zeta)
                                - 0.25 * trcb * op.dot2(ch, ch))
    E["nb_B"] = ns(phys.beta) - (op.d2(alpha) - 2 * trc * beta + op.act(alpha, zeta))
    Q = _outer(zeta, beta) + 0.5 * np.einsum("cd...,ac...,bd...->ab...", op.G, chib, alpha)
    rs_f = phys.rho.like(rs)
    E["nb_R"] = ns(rs_f) - (op.d1(beta) - 1.5 * trc * rs
                            - np.einsum("ab...,ab...->...", op.G - 1j * op.eps_up, Q))
    E["nb_Bbar"] = ns(phys.betabar) - (op.d1_star(np.conj(rs)) - trc * betab + 3 * zeta * rho
                                       - 3 * np.einsum("ab...,b...->a...", op.eps_mix, zeta) * sigma
                                       + 2 * op.act(cbh, beta))
    return {k: _wrap(v, phys) for k, v in E.items()}


@dataclass
class ResidualReport:
    """Per-equation L^{2,2} residual norms with pass floors."""

    values: dict
    floors: dict
    chart: str
    grid: dict = field(default_factory=dict)

    @property
    def groups(self):
        out = {}
        for name, v in self.values.items():
            out.setdefault(group_of(name), {})[name] = v
        return out

    @property
    def passed(self):
        return all(self.values[k] <= self.floors[k] for k in self.values)

    def failures(self):
        return [k for k in self.values if not self.values[k] <= self.floors[k]]

    def rows(self):
        return [{"name": k, "group": group_of(k), "value": float(v), "floor": float(self.floors[k]),
                 "pass": bool(v <= self.floors[k])} for k, v in self.values.items()]

    def to_dict(self):
        return {"chart": self.chart, "grid": self.grid, "passed": self.passed, "rows": self.rows()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        return rows_to_csv(self.rows())


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["name", "value", "floor", "pass"], extrasaction="ignore",
                       lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _grid_meta(data):
    t = data.time
    return {"lmax": data.grid.lmax, "n_t": len(t), "t_max": t.t_max, "dt": t.dt,
            "s0": data.chart.s0, "m": data.chart.m}


def _floors(floors):
    out = {k: DEFAULT_FLOOR for k in EQUATIONS}
    if isinstance(floors, dict):
        out.update(floors)
    elif floors is not None:
        out = {k: float(floors) for k in EQUATIONS}
    return out


def residuals_renormalized(ren, floors=None):
    E = renormalized_residual_fields(ren)
    met = ren.metric
    vals = {k: mixed_norm(E[k], met, "tx", 2, 2) for k in EQUATIONS}
    return ResidualReport(vals, _floors(floors), "renormalized", _grid_meta(ren))


def residuals_physical(phys, floors=None):
    """Residuals in L^{2,2}_{s,x} with respect to g-slash."""
    E = physical_residual_fields(phys)
    sm = phys.s_metric
    vals = {k: mixed_norm(on_time(E[k], phys.s_time), sm, "tx", 2, 2) for k in EQUATIONS}
    return ResidualReport(vals, _floors(floors), "physical", _grid_meta(phys))


def dictionary_check(phys):
    """Compare renormalized residuals with weighted physical ones, pointwise.

    Returns per equation the relative L^{2,2}_{t,x} size of E_ren - w E_phys.
    """
    ren = renormalize(phys)
    Er = renormalized_residual_fields(ren)
    Ep = physical_residual_fields(phys)
    met = ren.metric
    out = {}
    for k in EQUATIONS:
        w = node_factor(weight(k, ren.s, ren.chart.s0))
        diff = Er[k] - Ep[k].like(Ep[k].values * w)
        ref = mixed_norm(Er[k], met, "tx", 2, 2)
        out[k] = mixed_norm(diff, met, "tx", 2, 2) / max(ref, np.finfo(float).tiny)
    return out


# ---------------------------------------------------------------------------
# evolution


EVOLVED = ("gamma", "H", "Z", "Hbar", "dtrH", "M")
_EV_KINDS = {"gamma": "dd", "H": "dd", "Z": "d", "Hbar": "dd", "dtrH": "d", "M": ""}


def _evolution_rhs(state, src, t, chart, grid):
    """Lie t-derivatives of the evolved fields at one time."""
    g, H, Z, Hb, dtrH, M = (state[k] for k in EVOLVED)
    A, B, R = src["A"], src["B"], src["R"]
    op = _Ops.from_gamma(g, grid)
    kmix = np.einsum("ac...,cb...->ab...", op.G, H)
    m, s0 = chart.m, chart.s0
    omt = 1.0 - t
    one_m = 1.0 - 2 * m * (1.0 - t) / s0
    trH, trHb = op.tr(H), op.tr(Hb)
    Hh = op.hat(H)
    dZ = op.nabla(Z, "d")
    dH = op.nabla(H, "dd")
    lie = lambda v, kinds, nt: nt + _k_action(v, kinds, kmix)
    out = {"gamma": 2 * H}
    out["H"] = lie(H, "dd", -op.sq(H, H) - A)
    out["Z"] = lie(Z, "d", -2 * op.act(H, Z) - B)
    out["Hbar"] = lie(Hb, "dd", -_sym(dZ) - 0.5 * _sym(op.sq(H, Hb)) + one_m * H
                      + 2 * omt * _outer(Z, Z) + np.real(R) * g)
    out["dtrH"] = lie(dtrH, "d", -op.act(H, dtrH)
                      - 2 * np.einsum("bc...,de...,bd...,ace...->a...", op.G, op.G, H, dH))
    out["M"] = _m_rhs(op, M, H, Hh, Z, B, dZ, dtrH, trH, trHb, omt, one_m, m, s0)
    return out


def _node_of(f, i):
    return f.values[(slice(None),) * f.order + (i,)]


def _interp_node(f, data):
    j, w = data
    r = f.order
    return sum(wm * f.values[(slice(None),) * r + (j + q,)] for q, wm in enumerate(w))


def evolve(initial, curvature, chart, trace_ceiling=50.0, progress=None):
    """Integrate the evolution and derivative-evolution equations with RK4.

    ``initial`` maps H, Z, Hbar, M (and optionally gamma, dtrH) to single-sphere
    arrays; ``curvature`` maps A, B, R, Bbar to horizontal fields on the t-grid.
    Sources between nodes are cubic-Lagrange interpolated.  Raises
    ConjugatePointError if |tr H| exceeds ``trace_ceiling``.
    """
    A = curvature["A"]
    time, grid = A.time, A.grid
    state = {}
    g0 = initial.get("gamma")
    state["gamma"] = tn.round_metric(grid.shape) if g0 is None else np.asarray(g0, dtype=complex)
    for k in ("H", "Z", "Hbar", "M"):
        state[k] = np.asarray(initial[k], dtype=complex)
    if initial.get("dtrH") is None:
        op = _Ops.from_gamma(state["gamma"], grid)
        state["dtrH"] = op.nabla(op.tr(state["H"]), "")
    else:
        state["dtrH"] = np.asarray(initial["dtrH"], dtype=complex)

    n = len(time)
    out = {k: np.zeros((2,) * len(_EV_KINDS[k]) + (n,) + grid.shape, dtype=complex) for k in EVOLVED}

    def store(i, st):
        for k in EVOLVED:
            out[k][(slice(None),) * len(_EV_KINDS[k]) + (i,)] = st[k]
        tr = np.abs(tn.trace(st["H"], tn.inverse_metric(st["gamma"])))
        if not np.all(np.isfinite(tr)) or tr.max() > trace_ceiling:
            raise ConjugatePointError(
                f"conjugate-point warning: |tr H| exceeded {trace_ceiling} at t={time.nodes[i]:.6g}")

    store(0, state)
    names = ("A", "B", "R")
    mids = time.half_steps()
    t = time.nodes
    for i in range(n - 1):
        h = t[i + 1] - t[i]
        tm = 0.5 * (t[i] + t[i + 1])
        s_i = {k: _node_of(curvature[k], i) for k in names}
        s_m = {k: _interp_node(curvature[k], mids[i]) for k in names}
        s_j = {k: _node_of(curvature[k], i + 1) for k in names}
        f = lambda st, src, tt: _evolution_rhs(st, src, tt, chart, grid)
        add = lambda st, d, c: {k: st[k] + c * d[k] for k in EVOLVED}
        k1 = f(state, s_i, t[i])
        k2 = f(add(state, k1, h / 2), s_m, tm)
        k3 = f(add(state, k2, h / 2), s_m, tm)
        k4 = f(add(state, k3, h), s_j, t[i + 1])
        state = {k: state[k] + h / 6 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]) for k in EVOLVED}
        store(i + 1, state)
        if progress is not None:
            progress(i + 1, n)

    F = {k: HorizontalField(out[k], _EV_KINDS[k], time, grid) for k in EVOLVED}
    return RenormalizedConeData(chart=chart, gamma=F["gamma"], H=F["H"], Z=F["Z"], Hbar=F["Hbar"],
                                A=curvature["A"], B=curvature["B"], R=curvature["R"],
                                Bbar=curvature["Bbar"], M=F["M"], dtrH=F["dtrH"])


def initial_slice(ren):
    """Initial data of a renormalized data set in the form accepted by evolve."""
    out = {k: _node_of(getattr(ren, k), 0) for k in ("gamma", "H", "Z", "Hbar", "M")}
    out["dtrH"] = _node_of(ren.grad_trace_H(), 0)
    return out


def curvature_of(ren):
    return {k: getattr(ren, k) for k in ("A", "B", "R", "Bbar")}


# ---------------------------------------------------------------------------
# Gauss curvature and the K-decomposition


@dataclass
class KDecomposition:
    """K = f + div V + W with f = 1 and V = (1-t) Z."""

    f: float
    V: HorizontalField
    W: HorizontalField
    norms: dict
    identity_residual: np.ndarray  # per-node L^2 norm of K - f - div V - W
    closed_form_gap: np.ndarray  # per-node L^2 norm of W minus its closed form


def reconstructed_gauss_curvature(ren):
    """K from the renormalized Gauss equation."""
    met = ren.metric
    op = _Ops.of(met)
    omt = node_factor(1.0 - ren.time.nodes)
    one_m = node_factor(1.0 - 2 * ren.chart.m / ren.s)
    H, Hb = ren.H.values, ren.Hbar.values
    trH, trHb = op.tr(H), op.tr(Hb)
    K = 1 + (-omt * np.real(ren.R.values) + 0.5 * omt * one_m * trH - 0.5 * trHb
             + 0.5 * omt * (op.dot2(H, Hb) - trH * trHb))
    return ren.M.like(np.asarray(K, dtype=complex))


def slice_l2(field, metric):
    from .foliation import slice_norms
    return slice_norms(field, metric, 2)


def gauss_curvature(ren):
    """Reconstructed K and its canonical decomposition."""
    met = ren.metric
    op = _Ops.of(met)
    K = reconstructed_gauss_curvature(ren)
    omt = node_factor(1.0 - ren.time.nodes)
    V = ren.Z.like(ren.Z.values * omt)
    divV = op.div(V.values)
    W = K.like(K.values - 1 - divV)
    one_m = node_factor(1.0 - 2 * ren.chart.m / ren.s)
    trH, trHb = op.tr(ren.H.values), op.tr(ren.Hbar.values)
    W_closed = -0.5 * trHb + omt * (ren.M.values + 0.5 * one_m * trH - 0.25 * trH * trHb)
    ident = slice_l2(K.like(K.values - 1 - divV - W.values), met)
    gap = slice_l2(K.like(W.values - W_closed), met)
    norms = {"V.Hinf_half": besov_tx(V, met, 2, np.inf, 0.5),
             "W.Linf2_xt": mixed_norm(W, met, "xt", 2, np.inf)}
    return K, KDecomposition(1.0, V, W, norms, ident, gap)


# ---------------------------------------------------------------------------
# norm budget


@dataclass
class FluxBudget:
    flux_gamma: float
    init_gamma: float
    output_norms: dict
    refined_curvature: dict

    def rows(self):
        rows = [{"name": "flux_gamma", "value": self.flux_gamma},
                {"name": "init_gamma", "value": self.init_gamma}]
        rows += [{"name": k, "value": v} for k, v in self.output_norms.items()]
        return rows

    def to_dict(self):
        return {"flux_gamma": self.flux_gamma, "init_gamma": self.init_gamma,
                "output_norms": self.output_norms,
                "refined_curvature": {k: np.asarray(v).tolist() for k, v in self.refined_curvature.items()}}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        return rows_to_csv([dict(r, floor="", **{"pass": ""}) for r in self.rows()])


def _first(f):
    from .foliation import _first_node
    return _first_node(f)


def _slice_besov(field, metric, a, s, profile=DEFAULT_PROFILE):
    """Per-node B^{a,s}_x norms."""
    from .foliation import lp_components, slice_norms
    lam_max = field.grid.lmax * (field.grid.lmax + 1.0)
    low = slice_norms(lp_components(field, "below 0", profile), metric, 2)
    blocks = [slice_norms(lp_components(field, k, profile), metric, 2) for k in profile.k_range(lam_max)]
    return np.array([besov_combine(low[i], [b[i] for b in blocks], a, s) for i in range(len(low))])


def flux_norms(ren):
    met = ren.metric
    return {k: mixed_norm(getattr(ren, k), met, "tx", 2, 2) for k in ("A", "B", "R", "Bbar")}


def initial_norms(ren):
    from .foliation import _first_node_metric
    met0 = _first_node_metric(ren.metric)
    trH = ren.trace_H()
    return {
        "trH[0].Linf": float(np.abs(trH.values[0]).max()),
        "H[0].H_half": float(sobolev_slices(_first(ren.H), met0, 0.5)[0]),
        "Z[0].H_half": float(sobolev_slices(_first(ren.Z), met0, 0.5)[0]),
        "Hbar[0].B0": float(_slice_besov(_first(ren.Hbar), met0, 1, 0.0)[0]),
        "dtrH[0].B0": float(_slice_besov(_first(ren.grad_trace_H()), met0, 1, 0.0)[0]),
        "M[0].B0": float(_slice_besov(_first(ren.M), met0, 1, 0.0)[0]),
    }


def budget_report(ren, with_sum_norms=True):
    """Every norm in the a priori estimate, evaluated on one data set."""
    met = ren.metric
    fl = flux_norms(ren)
    init = initial_norms(ren)
    out = {}
    trH = ren.trace_H()
    out["trH.Linf_inf"] = mixed_norm(trH, met, "tx", np.inf, np.inf)
    for name in ("H", "Z"):
        f = getattr(ren, name)
        n1 = n1_norm(f, met)
        l2 = mixed_norm(f, met, "xt", 2, np.inf)
        hb = besov_tx(f, met, 2, np.inf, 0.5)
        out[f"{name}.N1"] = n1
        out[f"{name}.Linf2_xt"] = l2
        out[f"{name}.Hinf_half"] = hb
        out[f"{name}.total"] = n1 + l2 + hb
    dtrH = ren.grad_trace_H()
    out["dt_dtrH.L21_xt"] = mixed_norm(nabla_t(dtrH, met), met, "xt", 1, 2)
    out["dtM.L21_xt"] = mixed_norm(lie_t(ren.M), met, "xt", 1, 2)
    for name, f in (("dtrH", dtrH), ("M", ren.M), ("Hbar", ren.Hbar)):
        a = mixed_norm(f, met, "xt", np.inf, 2)
        b = besov_tx(f, met, 1, np.inf, 0.0)
        out[f"{name}.L2inf_xt"] = a
        out[f"{name}.Binf0"] = b
        out[f"{name}.total"] = a + b
    if with_sum_norms:
        out["dH.sum_upper"] = sum_norm_upper(met.nabla(ren.H), met)
        out["dZ.sum_upper"] = sum_norm_upper(met.nabla(ren.Z), met)
        out["dtHbar.sum_upper"] = sum_norm_upper(nabla_t(ren.Hbar, met), met)
    K, _ = gauss_curvature(ren)
    Km1 = K.like(K.values - 1)
    out["K-1.Hinf_-half"] = besov_tx(Km1, met, 2, np.inf, -0.5)
    refined = {
        "tau": ren.time.nodes.copy(),
        "K-1.H_-half": sobolev_slices(Km1, met, -0.5),
        "trHbar.L2": slice_l2(ren.trace_H().like(tn.trace(ren.Hbar.values, met.inverse)), met),
        "one_minus_tau": 1.0 - ren.time.nodes,
    }
    return FluxBudget(float(sum(fl.values())), float(sum(init.values())),
                      {**{f"flux.{k}": v for k, v in fl.items()},
                       **{f"init.{k}": v for k, v in init.items()}, **out}, refined)


def cauchy_tail(field, ren):
    """Per-node bound on the Cauchy increment: int_tau^{t_max} ||nabla_t Psi||_{L^2_x} dt,
    together with the remaining curvature flux on [tau, t_max]."""
    met = ren.metric
    time = ren.time
    rate = slice_l2(nabla_t(field, met), met)
    flux_density = sum(slice_l2(getattr(ren, k), met) ** 2 for k in ("A", "B", "R", "Bbar"))
    tail = _reverse_cumtrapz(rate, time.nodes)
    remaining = np.sqrt(np.maximum(_reverse_cumtrapz(flux_density, time.nodes), 0.0))
    return tail, remaining


def _reverse_cumtrapz(y, t):
    seg = 0.5 * (y[1:] + y[:-1]) * np.diff(t)
    out = np.zeros_like(y)
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


def measured_sff_error(ren):
    """max |1/2 L_t gamma - H| relative to max |H| (or absolute if H = 0)."""
    k = 0.5 * lie_t(ren.gamma).values
    ref = max(np.abs(ren.H.values).max(), 1.0)
    return float(np.abs(k - ren.H.values).max() / ref)
