"""Command-line front end: nullcone generate | verify | evolve | norms | report.

Exit codes: 0 success, 1 residual check failed, 2 bad configuration or
malformed input, 3 evolution aborted at a suspected conjugate point.
"""
from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import os
import sys

import numpy as np

from . import io as cio
from .foliation import (
    HorizontalField,
    TimeGrid,
    besov_tx,
    mixed_norm,
    n0star_upper,
    n1_norm,
    n1i_norm,
    sobolev_slices,
    sum_norm_upper,
)
from .model import (
    AffineChart,
    PhysicalConeData,
    RenormalizedConeData,
    derenormalize,
    hawking_masses,
    radius_ratio,
    random_field,
    random_sphere_tensor,
    renormalize,
    schwarzschild_exact,
    on_time,
)
from .spectral import ConfigurationError, SphereGrid
from .structure import (
    ConjugatePointError,
    budget_report,
    evolve,
    gauss_curvature,
    initial_slice,
    curvature_of,
    residuals_physical,
    residuals_renormalized,
    rows_to_csv,
)
from . import tensor as tn

EXIT_OK, EXIT_RESIDUAL, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    """Run parameters; every tolerance lives here with its default."""

    lmax: int = 16
    n_t: int | None = None
    t_max: float = 0.9
    dt: float = 1e-3
    s0: float = 4.0
    m: float = 1.0
    seed: int = 0
    eps: float = 1e-3
    fd_order: int = 6
    band: int = 4
    residual_floor: float = 1e-8
    floors: dict = dataclasses.field(default_factory=dict)
    trace_ceiling: float = 50.0
    sum_norms: bool = True

    def validate(self):
        if not self.t_max < 1 or self.t_max <= 0:
            raise UsageError("t_max must satisfy 0 < t_max < 1")
        if self.m < 0 or not self.s0 > 2 * self.m:
            raise UsageError("need m >= 0 and s0 > 2m")
        if self.lmax < 4:
            raise UsageError("lmax must be at least 4")
        if self.n_t is None and not self.dt > 0:
            raise UsageError("dt must be positive")
        if self.n_t is not None and self.n_t < 2:
            raise UsageError("n_t must be at least 2")
        return self

    def time(self):
        if self.n_t is not None:
            return TimeGrid.uniform(self.t_max, n=self.n_t, order=self.fd_order)
        n = self.t_max / self.dt
        if abs(n - round(n)) > 1e-9 * max(n, 1):
            raise UsageError("t_max must be an integer multiple of dt")
        return TimeGrid.uniform(self.t_max, dt=self.dt, order=self.fd_order)

    def grid(self):
        return SphereGrid(self.lmax)

    def chart(self):
        return AffineChart(self.s0, self.m)

    def floor_map(self):
        from .structure import EQUATIONS
        out = {k: self.residual_floor for k in EQUATIONS}
        out.update(self.floors)
        return out


def load_config(path, overrides):
    cfg = RunConfig()
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        names = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = dataclasses.replace(cfg, **data)
    cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


# ---------------------------------------------------------------------------
# output helpers


def _emit(args, payload, rows=None):
    if args.format == "csv" and rows is not None:
        text = rows_to_csv(rows)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if args.out and args.command != "generate" and args.command != "evolve":
        with open(args.out, "w") as fh:
            fh.write(text)
    elif not args.quiet:
        sys.stdout.write(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


def _load(path):
    try:
        return cio.load(path)
    except cio.FormatError as exc:
        raise UsageError(str(exc)) from exc


def _report_for(data, cfg):
    if isinstance(data, PhysicalConeData):
        return residuals_physical(data, cfg.floor_map())
    return residuals_renormalized(data, cfg.floor_map())


# ---------------------------------------------------------------------------
# commands


def perturbed_data(cfg):
    """Renormalized input set: round gamma, eps-size initial fields, eps-size curvature."""
    time, grid, chart = cfg.time(), cfg.grid(), cfg.chart()
    rng = np.random.default_rng(cfg.seed)
    eps, band = cfg.eps, cfg.band
    static = lambda kind, kinds: HorizontalField.static(
        random_sphere_tensor(kind, grid, rng, band, eps), kinds, time, grid)
    h = tn.round_metric(grid.shape)
    H0 = (random_sphere_tensor("sym2", grid, rng, band, eps)
          + 0.5 * h * random_sphere_tensor("scalar", grid, rng, band, eps))
    H = HorizontalField.static(H0, "dd", time, grid)
    gamma = HorizontalField(tn.round_metric((len(time),) + grid.shape), "dd", time, grid)
    return RenormalizedConeData(
        chart=chart, gamma=gamma, H=H, Z=static("one_form", "d"), Hbar=static("sym2", "dd"),
        A=random_field("dd", time, grid, rng, band, eps), B=random_field("d", time, grid, rng, band, eps),
        R=random_field("", time, grid, rng, band, eps, complex_scalar=True),
        Bbar=random_field("d", time, grid, rng, band, eps), M=static("scalar", ""))


def cmd_generate(args, cfg):
    if not args.out:
        raise UsageError("generate needs --out")
    if args.kind == "schwarzschild":
        data = schwarzschild_exact(cfg.m, cfg.s0, cfg.grid(), cfg.time())
    elif args.kind == "minkowski":
        cfg = dataclasses.replace(cfg, m=0.0)
        data = schwarzschild_exact(0.0, cfg.s0, cfg.grid(), cfg.time())
    else:
        data = perturbed_data(cfg)
    cio.save(data, args.out)
    if not args.quiet:
        sys.stdout.write(json.dumps({"written": args.out, "kind": args.kind}, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_verify(args, cfg):
    data = _load(args.file)
    rep = _report_for(data, cfg)
    _emit(args, rep.to_dict(), rep.rows())
    return EXIT_OK if rep.passed else EXIT_RESIDUAL


def _tables(ren):
    phys = derenormalize(ren)
    return {
        "t": ren.time.nodes,
        "v": phys.s,
        "hawking_mass": hawking_masses(phys),
        "r_over_s": radius_ratio(ren),
    }


def cmd_evolve(args, cfg):
    data = _load(args.file)
    ren = renormalize(data) if isinstance(data, PhysicalConeData) else data
    try:
        out = evolve(initial_slice(ren), curvature_of(ren), ren.chart, trace_ceiling=cfg.trace_ceiling)
    except ConjugatePointError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_BLOWUP
    if args.out:
        cio.save(out, args.out)
    rep = residuals_renormalized(out, cfg.floor_map())
    budget = budget_report(out, with_sum_norms=cfg.sum_norms)
    payload = {"residuals": rep.to_dict(), "budget": budget.to_dict(), "tables": _tables(out)}
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
    if not args.quiet:
        if args.format == "csv":
            tab = payload["tables"]
            sys.stdout.write("t,v,hawking_mass,r_over_s\n")
            for row in zip(tab["t"], tab["v"], tab["hawking_mass"], tab["r_over_s"]):
                sys.stdout.write(",".join(f"{x:.17g}" for x in row) + "\n")
        else:
            sys.stdout.write(json.dumps(payload["tables"], indent=2, sort_keys=True,
                                        default=_jsonable) + "\n")
    return EXIT_OK


NORMS = ("Lpq_tx", "Lqp_xt", "besov_tx", "N1", "N1i", "N0star_upper", "sum_norm_upper",
         "sobolev_x")


def _parse_exp(x):
    return np.inf if str(x).lower() in ("inf", "infinity") else float(x)


def cmd_norms(args, cfg):
    if args.norm not in NORMS:
        raise UsageError(f"unknown norm {args.norm!r}; valid names: {', '.join(NORMS)}")
    data = _load(args.file)
    items = data.items() if isinstance(data, PhysicalConeData) else data.items(with_derived=True)
    if args.field not in items:
        raise UsageError(f"unknown field {args.field!r}; available: {', '.join(items)}")
    f = items[args.field]
    if isinstance(data, PhysicalConeData):
        met = data.s_metric if args.norm in ("Lpq_tx", "Lqp_xt", "besov_tx", "sobolev_x") else data.metric
        if met is data.s_metric:
            f = on_time(f, data.s_time)
    else:
        met = data.metric
    p, q = _parse_exp(args.p), _parse_exp(args.q)
    if args.norm == "Lpq_tx":
        val = mixed_norm(f, met, "tx", p, q)
    elif args.norm == "Lqp_xt":
        val = mixed_norm(f, met, "xt", p, q)
    elif args.norm == "besov_tx":
        val = besov_tx(f, met, _parse_exp(args.a), p, args.s)
    elif args.norm == "N1":
        val = n1_norm(f, met)
    elif args.norm == "N1i":
        val = n1i_norm(f, met)
    elif args.norm == "N0star_upper":
        val = n0star_upper(f, met)
    elif args.norm == "sum_norm_upper":
        val = sum_norm_upper(f, met)
    else:
        val = sobolev_slices(f, met, args.s).tolist()
    payload = {"field": args.field, "norm": args.norm, "p": args.p, "q": args.q, "a": args.a,
               "s": args.s, "value": val}
    _emit(args, payload, [{"name": f"{args.field}.{args.norm}", "value": val}]
          if not isinstance(val, list) else None)
    return EXIT_OK


def cmd_report(args, cfg):
    data = _load(args.file)
    ren = renormalize(data) if isinstance(data, PhysicalConeData) else data
    budget = budget_report(ren, with_sum_norms=cfg.sum_norms)
    _, kd = gauss_curvature(ren)
    payload = budget.to_dict()
    payload["k_decomposition"] = {"norms": kd.norms, "identity_residual": kd.identity_residual,
                                  "closed_form_gap": kd.closed_form_gap}
    _emit(args, payload, [dict(r, floor="", **{"pass": ""}) for r in budget.rows()])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--out", help="output path")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--quiet", action="store_true")
    cfgopts = argparse.ArgumentParser(add_help=False)
    for name, typ in (("lmax", int), ("n-t", int), ("t-max", float), ("dt", float), ("s0", float),
                      ("m", float), ("seed", int), ("eps", float), ("fd-order", int),
                      ("band", int), ("residual-floor", float), ("trace-ceiling", float)):
        cfgopts.add_argument(f"--{name}", type=typ, default=None)

    p = argparse.ArgumentParser(prog="nullcone", description=__doc__.splitlines()[0],
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("generate", parents=[common, cfgopts], help="write oracle or perturbed data")
    g.add_argument("kind", choices=("schwarzschild", "minkowski", "perturbed"))
    v = sub.add_parser("verify", parents=[common, cfgopts], help="residuals of the structure equations")
    v.add_argument("file")
    e = sub.add_parser("evolve", parents=[common, cfgopts], help="integrate the renormalized system")
    e.add_argument("file")
    e.add_argument("--report", help="write residuals, budget and tables as JSON here")
    n = sub.add_parser("norms", parents=[common, cfgopts], help="evaluate a named norm of a field")
    n.add_argument("file")
    n.add_argument("--field", required=True)
    n.add_argument("--norm", required=True)
    n.add_argument("--p", default="2")
    n.add_argument("--q", default="2")
    n.add_argument("--a", default="1")
    n.add_argument("--s", type=float, default=0.0)
    r = sub.add_parser("report", parents=[common, cfgopts], help="norm budget and K-decomposition")
    r.add_argument("file")
    return p


COMMANDS = {"generate": cmd_generate, "verify": cmd_verify, "evolve": cmd_evolve,
            "norms": cmd_norms, "report": cmd_report}
_CFG_KEYS = ("lmax", "n_t", "t_max", "dt", "s0", "m", "seed", "eps", "fd_order", "band",
             "residual_floor", "trace_ceiling")


@contextlib.contextmanager
def _thread_limit():
    n = os.environ.get("NULLCONE_THREADS")
    if not n:
        yield
        return
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=max(1, int(n))):
        yield


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, {k: getattr(args, k, None) for k in _CFG_KEYS})
        with _thread_limit():
            return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigurationError, ValueError) as exc:
        sys.stderr.write(f"nullcone: error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
