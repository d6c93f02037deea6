"""Command-line front end.

Subcommands: cycle, growth, equiv, fig1, fig2, fig3, extract-orbit,
validate-barrier.  Figure commands write a CSV (the authoritative artifact)
plus a rendered PNG into the output directory.  All commands are
deterministic given (config, seed); CSV output uses a one-line header, LF
endings, and 12-significant-digit floats.

Exit codes: 0 success, 1 numeric failure, 2 configuration/validation failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import apps, random_hill, stochastic
from .cycle import (DEGENERACY_TOL, first_order_coeffs, integrate_cycle,
                    small_q_elements, small_q_h)
from .errors import (ConfigError, DegenerateBaseError, DomainError, HillError,
                     InsufficientTraceError, NotEllipticError)
from .model import (PERIOD, BarrierShape, HillParams, PerturbationDist,
                    RunConfig, barrier_validate, load_config, stream)
from .random_hill import (RandomHillRun, growth_direct_random, growth_eta_sampled,
                          growth_t22, growth_t31)
from .xfer import TransferMatrix, elliptical_decompose

FAST_CYCLES = 10_000
DEFAULT_DIRECT_CYCLES = 1_000_000


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _plot_lines(path: Path, x, series, xlabel, ylabel, logx=False, logy=False):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, y, style in series:
        yy = np.asarray(y, dtype=float)
        mask = np.isfinite(yy)
        if logy:
            mask &= yy > 0
        ax.plot(np.asarray(x)[mask], yy[mask], style, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)


@dataclass(frozen=True)
class SweepSpec:
    """Grid for one sweep axis: explicit list or (min, max, count, spacing)."""

    axis: str
    grid: np.ndarray

    def __post_init__(self):
        if self.axis not in ("lambda", "amplitude", "tau_c"):
            raise ConfigError(f"unknown sweep axis {self.axis!r}")
        if len(self.grid) == 0:
            raise ConfigError("sweep grid is empty")
        if np.any(np.diff(self.grid) <= 0):
            raise ConfigError("sweep grid must be strictly increasing")


def parse_grid(axis: str, text: str | None, grid_list: str | None,
               default: str) -> SweepSpec:
    if grid_list:
        vals = np.array([float(v) for v in grid_list.split(",")])
        return SweepSpec(axis, vals)
    spec = text or default
    parts = spec.split(":")
    if len(parts) != 4:
        raise ConfigError(f"grid must be min:max:count:lin|log, got {spec!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if parts[3] == "lin":
        vals = np.linspace(lo, hi, count)
    elif parts[3] == "log":
        if lo <= 0:
            raise ConfigError("log grid needs positive endpoints")
        vals = np.geomspace(lo, hi, count)
    else:
        raise ConfigError(f"grid spacing must be lin or log, got {parts[3]!r}")
    return SweepSpec(axis, vals)


def _point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


# -- cycle --------------------------------------------------------------

def cmd_cycle(args) -> int:
    cfg = load_config(args.config)
    report = barrier_validate(cfg.barrier)
    if not report.ok:
        for name, resid in report.violations:
            print(f"barrier violation: {name} residual={_fmt(resid)}", file=sys.stderr)
        return 2
    sol = integrate_cycle(cfg.params, cfg.barrier, tol=cfg.integrator_tol)
    phi = math.sqrt(cfg.params.lam) * PERIOD
    near_deg = abs(math.cos(phi)) < DEGENERACY_TOL
    try:
        coeffs = first_order_coeffs(sol)
        xyzw = (coeffs.X, coeffs.Y, coeffs.W, coeffs.Z)
    except DegenerateBaseError as exc:
        print(f"note: first-order coefficients unavailable ({exc})")
        xyzw = (math.nan,) * 4
    if abs(sol.h) < 1.0:
        form = elliptical_decompose(TransferMatrix(sol.h, sol.y2pi, sol.g, sol.h2))
        theta, ell_len = form.theta, form.L
    else:
        print("note: |h| >= 1, outside the elliptic regime")
        theta, ell_len = math.nan, math.nan

    names = ["lambda", "q", "barrier", "h", "g", "y2_pi", "dy2_pi",
             "I1", "I2", "J1", "J2", "X", "Y", "W", "Z", "theta", "L",
             "wronskian_residual", "symmetry_residual", "near_degenerate"]
    values = [cfg.params.lam, cfg.params.q, cfg.barrier.kind, sol.h, sol.g,
              sol.y2pi, sol.h2, sol.i1, sol.i2, sol.j1, sol.j2, *xyzw,
              theta, ell_len, sol.wronskian_residual, sol.symmetry_residual,
              near_deg]
    for n, v in zip(names, values):
        print(f"{n:>20}: {v if isinstance(v, str) else _fmt(v)}")
    if near_deg:
        print("flag: cos(phi) ~ 0 (lambda near (k+1/2)^2); small-q g-formula "
              "is degenerate here, J uses its limit branch")
    row = [v if isinstance(v, str) else v for v in values]
    print("csv:", ",".join(names))
    print("csv:", ",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    if args.out:
        write_csv(Path(args.out) / "cycle.csv", names, [row])
    return 0


# -- growth -------------------------------------------------------------

def _n_cycles(args, cfg: RunConfig) -> int:
    if args.fast:
        return FAST_CYCLES
    if args.cycles:
        return int(args.cycles)
    return cfg.n_cycles


def cmd_growth(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.master_seed
    n = _n_cycles(args, cfg)
    methods = ["direct", "t22", "t31"] if args.method == "all" else [args.method]
    rows = []
    for method in methods:
        if method == "direct":
            run = RandomHillRun.from_params(cfg.params.lam, cfg.params.q, cfg.barrier,
                                            cfg.ell_dist, cfg.p_dist, mode=args.mode,
                                            tol=cfg.integrator_tol)
            est = growth_direct_random(run, n, seed=seed,
                                       renorm_every=cfg.renorm_every,
                                       control=args.control)
            rows.append((method, est.gamma, est.stderr, est.n_cycles))
        elif method == "t22":
            base = integrate_cycle(cfg.params, cfg.barrier, tol=cfg.integrator_tol)
            coeffs = first_order_coeffs(base)
            gamma = growth_t22(base, coeffs, cfg.ell_dist.second_moment,
                               cfg.p_dist.second_moment)
            rows.append((method, gamma, 0.0, 0))
        elif method == "t31":
            if cfg.params.q != 0.0:
                raise ConfigError("t31 assumes a zero mean forcing (q = 0 with "
                                  "symmetric p draws)")
            if cfg.ell_dist.second_moment != 0.0:
                raise ConfigError("t31 holds lambda constant; ell_dist must be degenerate")
            gamma = growth_t31(cfg.params.lam, cfg.p_dist.second_moment, cfg.barrier)
            rows.append((method, gamma, 0.0, 0))
        else:
            raise ConfigError(f"unknown growth method {method!r}")
    for method, gamma, se, used in rows:
        print(f"method={method} gamma={_fmt(gamma)} stderr={_fmt(se)} n_cycles={used}")
    if args.out:
        write_csv(Path(args.out) / "growth.csv",
                  ["method", "gamma", "stderr", "n_cycles"], rows)
    return 0


def cmd_equiv(args) -> int:
    cfg = load_config(args.config)
    if cfg.noise is None:
        raise ConfigError("equiv needs a noise block in the run config")
    if cfg.noise.form != "multiplicative":
        raise ConfigError("the direct/equivalence comparison needs the "
                          "multiplicative form; additive growth is computed "
                          "via the equivalence route only")
    seed = args.seed if args.seed is not None else cfg.master_seed
    n = _n_cycles(args, cfg)
    coupling = BarrierShape.unit() if cfg.noise_coupling == "unit" else None
    common = dict(coupling=coupling, tol=cfg.integrator_tol,
                  renorm_every=cfg.renorm_every)
    gd = stochastic.growth_stochastic(cfg.params, cfg.barrier, cfg.noise, n,
                                      seed, method="direct", **common)
    ge = stochastic.growth_stochastic(cfg.params, cfg.barrier, cfg.noise, n,
                                      seed, method="equivalence", **common)
    comb = math.hypot(gd.stderr, ge.stderr)
    gap = abs(gd.gamma - ge.gamma)
    print(f"gamma_direct={_fmt(gd.gamma)} stderr={_fmt(gd.stderr)}")
    print(f"gamma_equivalence={_fmt(ge.gamma)} stderr={_fmt(ge.stderr)}")
    print(f"gap={_fmt(gap)} combined_stderr={_fmt(comb)} "
          f"gap_over_stderr={_fmt(gap / comb if comb > 0 else math.inf)}")
    if args.out:
        write_csv(Path(args.out) / "equiv.csv",
                  ["gamma_direct", "stderr_direct", "gamma_equivalence",
                   "stderr_equivalence", "gap", "combined_stderr"],
                  [(gd.gamma, gd.stderr, ge.gamma, ge.stderr, gap, comb)])
    return 0


# -- figures ------------------------------------------------------------

def cmd_fig1(args) -> int:
    spec = parse_grid("lambda", args.grid, args.grid_list, "0.26:10:200:lin")
    q = args.q
    shape = BarrierShape.sin2()
    rows = []
    for lam in spec.grid:
        h_exact = integrate_cycle(HillParams(lam, q), shape, tol=1e-10).h
        h52 = small_q_h(lam, q, shape, "first-order")
        h55 = small_q_h(lam, q, shape, "generalized")
        rows.append((lam, h_exact, h52, h55))
    out = Path(args.out)
    write_csv(out / "fig1.csv", ["lambda", "h_exact", "h_eq52", "h_eq55"], rows)
    arr = np.array(rows)
    _plot_lines(out / "fig1.png", arr[:, 0],
                [("numerical", arr[:, 1], "-"),
                 ("first order", arr[:, 2], ":"),
                 ("generalized", arr[:, 3], "--")],
                "lambda", "matrix element h")
    print(f"wrote {out / 'fig1.csv'} and {out / 'fig1.png'} ({len(rows)} points)")
    return 0


def _fig2_point(task):
    lam, aq, n, seed, idx, n_steps = task
    shape = BarrierShape.sin2()
    p_dist = PerturbationDist("uniform-symmetric", aq)
    zero = PerturbationDist("uniform-symmetric", 0.0)
    run = RandomHillRun.from_params(lam, 0.0, shape, zero, p_dist, mode="exact")
    est = growth_direct_random(run, n, seed=_point_seed(seed, 4 * idx),
                               control=True, n_steps=n_steps)
    g62 = growth_t31(lam, aq * aq / 3.0, shape)
    try:
        g57, se57 = growth_eta_sampled(lam, shape, p_dist, n,
                                       seed=_point_seed(seed, 4 * idx + 1),
                                       mode="small-q-first-order")
    except NotEllipticError:
        g57, se57 = math.nan, math.nan
    try:
        ghi, sehi = growth_eta_sampled(lam, shape, p_dist, n,
                                       seed=_point_seed(seed, 4 * idx + 2),
                                       mode="small-q-generalized")
    except (NotEllipticError, DomainError):
        ghi, sehi = math.nan, math.nan
    return (aq, est.gamma, est.stderr, g57, se57, g62, ghi, sehi)


def cmd_fig2(args) -> int:
    spec = parse_grid("amplitude", args.grid, args.grid_list, "0.001:1:13:log")
    n = FAST_CYCLES if args.fast else (int(args.cycles) if args.cycles
                                       else DEFAULT_DIRECT_CYCLES)
    seed = args.seed if args.seed is not None else 0
    tasks = [(args.lam, float(aq), n, seed, i, args.n_steps)
             for i, aq in enumerate(spec.grid)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_fig2_point, tasks))
    else:
        rows = [_fig2_point(t) for t in tasks]
    out = Path(args.out)
    header = ["A_q", "gamma_direct", "stderr_direct", "gamma_eq57_sampled",
              "stderr_eq57", "gamma_eq62", "gamma_higher_order", "stderr_higher"]
    write_csv(out / "fig2.csv", header, rows)
    arr = np.array(rows)
    _plot_lines(out / "fig2.png", arr[:, 0],
                [("direct product", arr[:, 1], "-"),
                 ("sampled moments", arr[:, 3], ":"),
                 ("closed form", arr[:, 5], "--"),
                 ("higher order", arr[:, 6], "-.")],
                "fluctuation amplitude A_q", "growth rate gamma",
                logx=True, logy=True)
    print(f"wrote {out / 'fig2.csv'} and {out / 'fig2.png'} "
          f"({len(rows)} points, {n} cycles each)")
    return 0


def cmd_fig3(args) -> int:
    spec = parse_grid("lambda", args.grid, args.grid_list, "0.26:64:200:log")
    shapes = [("gamma_sin4", BarrierShape.sin4()),
              ("gamma_sin2", BarrierShape.sin2()),
              ("gamma_delta", BarrierShape.delta())]
    rows = []
    for lam in spec.grid:
        rows.append((lam, *(growth_t31(lam, args.mean_q_sq, s) for _, s in shapes)))
    out = Path(args.out)
    write_csv(out / "fig3.csv", ["lambda"] + [n for n, _ in shapes], rows)
    arr = np.array(rows)
    _plot_lines(out / "fig3.png", arr[:, 0],
                [("sin^4 barrier", arr[:, 1], "-"),
                 ("sin^2 barrier", arr[:, 2], "--"),
                 ("delta barrier", arr[:, 3], ":")],
                "lambda", "growth rate gamma", logx=True, logy=True)
    print(f"wrote {out / 'fig3.csv'} and {out / 'fig3.png'} ({len(rows)} points)")
    return 0


# -- orbit extraction and barrier validation ----------------------------

def cmd_extract_orbit(args) -> int:
    trace = apps.OrbitTrace.from_csv(args.trace)
    try:
        a, b, c = (float(v) for v in args.axes.split(","))
    except ValueError as exc:
        raise ConfigError(f"--axes must be a,b,c floats: {exc}") from exc
    axes = apps.AxisRatios(a, b, c)
    cycles = apps.extract_cycles(trace, axes)
    out = Path(args.out)
    write_csv(out / "cycles.csv", ["k", "lambda", "q", "zero_forcing"],
              [(k, cy.lam, cy.q, cy.flagged_zero_forcing)
               for k, cy in enumerate(cycles)])
    seg_rows = []
    for k, cy in enumerate(cycles):
        if cy.flagged_zero_forcing:
            continue
        seg_rows.extend((k, t, v) for t, v in zip(cy.tau, cy.qhat))
    write_csv(out / "barrier_segments.csv", ["k", "tau", "qhat"], seg_rows)
    usable = [cy for cy in cycles if not cy.flagged_zero_forcing]
    if usable:
        grid, pooled = apps.pooled_barrier(cycles)
        write_csv(out / "barrier_pooled.csv", ["tau", "qhat"],
                  list(zip(grid, pooled)))
    lams = [cy.lam for cy in cycles]
    qs = [cy.q for cy in cycles]
    print(f"extracted {len(cycles)} segments "
          f"({len(cycles) - len(usable)} flagged zero-forcing)")
    print(f"lambda: mean={_fmt(np.mean(lams))} min={_fmt(np.min(lams))} "
          f"max={_fmt(np.max(lams))}")
    print(f"q: mean={_fmt(np.mean(qs))} min={_fmt(np.min(qs))} max={_fmt(np.max(qs))}")
    return 0


def cmd_validate_barrier(args) -> int:
    import csv as csvmod

    with open(args.barrier, "r", encoding="utf-8", newline="") as fh:
        reader = csvmod.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "value"]:
            raise ConfigError(f"barrier file {args.barrier} must have header t,value")
        samples = [(float(r[0]), float(r[1])) for r in reader if r]
    shape = BarrierShape.tabulated(samples, renormalize=False)
    report = barrier_validate(shape)
    if report.ok:
        print("barrier ok")
        return 0
    for name, resid in report.violations:
        print(f"violation: {name} residual={_fmt(resid)}", file=sys.stderr)
    return 2


# -- entry point ---------------------------------------------------------

def _add_common(p, config_required=True):
    if config_required:
        p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.add_argument("--cycles", type=int, default=None, help="override cycle count")
    p.add_argument("--out", default=None, help="output directory for CSV files")
    p.add_argument("--fast", action="store_true",
                   help=f"CI mode: {FAST_CYCLES} cycles")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hillrand",
                                 description="Random and stochastic Hill's "
                                             "equations: cycle maps, growth "
                                             "rates, figures")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cycle", help="one-cycle diagnostics")
    _add_common(p)
    p.set_defaults(func=cmd_cycle)

    p = sub.add_parser("growth", help="growth-rate estimates")
    _add_common(p)
    p.add_argument("--method", choices=["direct", "t22", "t31", "all"],
                   default="direct")
    p.add_argument("--mode", choices=list(random_hill.MODES), default="exact",
                   help="per-cycle element route for --method direct")
    p.add_argument("--control", action="store_true",
                   help="control-variate variance reduction for direct runs")
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("equiv", help="stochastic direct vs equivalence comparison")
    _add_common(p)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("fig1", help="matrix element h vs lambda at fixed q")
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--grid", default=None, help="min:max:count:lin|log")
    p.add_argument("--grid-list", default=None, help="explicit comma-separated grid")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("fig2", help="growth-rate estimators vs amplitude A_q")
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--grid", default=None, help="min:max:count:lin|log")
    p.add_argument("--grid-list", default=None)
    p.add_argument("--cycles", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fast", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--n-steps", type=int, default=128,
                   help="RK4 steps per cycle for the exact route")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("fig3", help="small-q growth rate vs lambda per barrier")
    p.add_argument("--mean-q-sq", type=float, default=1.0)
    p.add_argument("--grid", default=None)
    p.add_argument("--grid-list", default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_fig3)

    p = sub.add_parser("extract-orbit", help="random-Hill parameters from an orbit trace")
    p.add_argument("--trace", required=True, help="CSV with header t,x,z")
    p.add_argument("--axes", required=True, help="ellipsoid semi-axes a,b,c")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_extract_orbit)

    p = sub.add_parser("validate-barrier", help="check a tabulated barrier file")
    p.add_argument("--barrier", required=True, help="CSV with header t,value")
    p.set_defaults(func=cmd_validate_barrier)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InsufficientTraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HillError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
