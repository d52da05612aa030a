"""Command-line frontend.

Every command validates its parameters, runs the corresponding library
routine, and writes one CSV per result table plus a JSON manifest
(manifest.json) holding the fully resolved configuration, library version,
seed, and wall time. Numbers are written with 17 significant digits so the
CSVs round-trip to the exact double values; identical configuration and seed
give byte-identical CSVs.

Exit codes: 0 success, 2 invalid configuration or parameters, 3 numerical
failure (for example a non-convergent message iteration); the manifest is
still written in the exit-3 case, with the failure reason.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__, bounds, bp, ising, nn, sim
from .nn import BPDivergenceError

MANIFEST_SCHEMA_VERSION = 1


class NumericalFailure(RuntimeError):
    """A computation ran but its numerical outcome is unusable."""


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _grid(lo, hi, steps, name):
    if steps < 1:
        raise ValueError(f"{name}-steps must be >= 1, got {steps}")
    if steps == 1:
        return np.array([float(hi)])
    return np.linspace(lo, hi, steps)


def _parse_int_list(text):
    try:
        values = [int(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"expected a comma-separated integer list, got {text!r}") from exc
    if not values:
        raise ValueError("empty integer list")
    return values


def _threads(args):
    value = getattr(args, "threads", None)
    if value is None:
        value = os.environ.get("SOFIC_PRESSURE_THREADS", "1")
    value = int(value)
    if value < 1:
        raise ValueError(f"--threads must be >= 1, got {value}")
    return value


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sofic-pressure",
        description="Pressure diagnostics for the Ising model on free-group trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {}
    required = {}

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--config", default=None, help="key=value file; flags override it")
        commands[name] = p
        required[name] = []

        # requiredness is enforced after config-file merging, not by argparse,
        # so required values may come from the file
        original = p.add_argument

        def add_argument(*args, **kwargs):
            if kwargs.pop("required", False):
                required[name].append(args[0].lstrip("-").replace("-", "_"))
            return original(*args, **kwargs)

        p.add_argument = add_argument
        return p

    p = add("thresholds", "uniqueness and reconstruction thresholds")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--r-max", type=int, default=None, help="emit all ranks r..r-max")

    p = add("pressure-curve", "observables of the chain family over a t grid")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--t-min", type=float, default=-2.0)
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--t-steps", type=int, default=201)

    p = add("fixed-points", "roots of the consistency equation")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-12)

    p = add("region", "classification of the (r, J) plane")
    p.add_argument("--r-min", type=int, default=2)
    p.add_argument("--r-max", type=int, required=True)
    p.add_argument("--J-min", type=float, default=None)
    p.add_argument("--J-max", type=float, required=True)
    p.add_argument("--steps", "--J-steps", dest="steps", type=int, default=100)

    p = add("figure5", "edge bound vs all-plus vs plus-chain pressures")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--J-min", type=float, default=0.05)
    p.add_argument("--J-max", type=float, default=2.0)
    p.add_argument("--J-steps", type=int, default=100)

    p = add("potts-curve", "pressure along one-parameter tilt families")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--family", type=int, default=None, help="one family index (default: all)")
    p.add_argument("--t-min", type=float, default=-2.0)
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--t-steps", type=int, default=201)
    p.add_argument("--tol", type=float, default=1e-10)

    p = add("verify-theoremB", "check the sufficient-condition inequality chain")
    p.add_argument("--r-max", type=int, default=100)
    p.add_argument("--grid-points", type=int, default=10_000)

    p = add("constant-search", "minimal threshold multipliers c(r)")
    p.add_argument("--r-min", type=int, default=2)
    p.add_argument("--r-max", type=int, default=None)
    p.add_argument("--r-list", type=str, default=None, help="explicit comma-separated ranks")
    p.add_argument("--tol", type=float, default=1e-4)

    p = add("annealed", "exact expected good-model count")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=None, help="TV radius (default: nearest-profile ball)")

    p = add("simulate", "Monte Carlo second moments and optional Glauber trace")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--glauber-steps", type=int, default=0)
    p.add_argument("--record-every", type=int, default=1000)

    p = add("coexistence", "weight of the small-magnetization window vs n")
    p.add_argument("--n", type=str, required=True, help="comma-separated sizes, e.g. 8,12,16,20")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.1, help="magnetization window half-width")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)

    return parser, commands, required


def _apply_config_file(path, subparser):
    """Install key=value pairs from a config file as subcommand defaults.

    argparse re-runs each argument's `type` on string defaults, so values
    get the same coercion and validation as command-line flags; explicit
    flags still override the file.
    """
    defaults = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            defaults[key.replace("-", "_")] = value
    known = {action.dest for action in subparser._actions}  # noqa: SLF001
    unknown = sorted(set(defaults) - known)
    if unknown:
        raise ValueError(f"unknown config keys for this command: {unknown}")
    subparser.set_defaults(**defaults)


def _write_manifest(out_dir, manifest):
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")


def run(argv=None):
    parser, commands, required = _build_parser()
    pre, _ = parser.parse_known_args(argv)
    if getattr(pre, "config", None):
        _apply_config_file(pre.config, commands[pre.command])
    args = parser.parse_args(argv)
    missing = [d for d in required[args.command] if getattr(args, d) is None]
    if missing:
        flags = ", ".join("--" + d.replace("_", "-") for d in missing)
        raise ValueError(f"missing required parameters: {flags}")

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise ValueError(f"output directory {out_dir!r} is not writable")

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "command": args.command,
        "config": {
            k: v for k, v in sorted(vars(args).items()) if k not in ("command", "config")
        },
        "library_version": __version__,
        "seed": getattr(args, "seed", None),
        "status": "ok",
        "failure": None,
        "outputs": [],
    }
    started = time.perf_counter()
    try:
        manifest["outputs"] = _HANDLERS[args.command](args, out_dir)
    except (BPDivergenceError, NumericalFailure) as exc:
        manifest["status"] = "numerical-failure"
        manifest["failure"] = str(exc)
        manifest["wall_time_s"] = time.perf_counter() - started
        _write_manifest(out_dir, manifest)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    manifest["wall_time_s"] = time.perf_counter() - started
    _write_manifest(out_dir, manifest)
    return 0


def _cmd_thresholds(args, out_dir):
    r_hi = args.r_max if args.r_max is not None else args.r
    if r_hi < args.r:
        raise ValueError("--r-max must be >= --r")
    rows = [
        (r, bp.uniqueness_threshold(r), bp.reconstruction_threshold(r))
        for r in range(args.r, r_hi + 1)
    ]
    path = os.path.join(out_dir, "thresholds.csv")
    _write_csv(path, ["r", "J_uniq", "J_rec"], rows)
    return [path]


def _cmd_pressure_curve(args, out_dir):
    params = ising.IsingParams(J=args.J, r=args.r)
    rows = []
    for t in _grid(args.t_min, args.t_max, args.t_steps, "t"):
        rep = ising.pressure_report(ising.build_mu_t(t, params))
        rows.append(
            (t, rep.energy, rep.f_invariant, rep.f_pressure, rep.edge_entropy, rep.edge_pressure)
        )
    path = os.path.join(out_dir, "pressure_curve.csv")
    _write_csv(
        path,
        ["t", "energy", "f_invariant", "f_pressure", "edge_entropy", "edge_pressure"],
        rows,
    )
    return [path]


def _cmd_fixed_points(args, out_dir):
    params = ising.IsingParams(J=args.J, r=args.r)
    roots = bp.solve_fixed_points(params, tol=args.tol)
    rows = [(0.0, roots.residuals[0.0])]
    if roots.t_plus is not None:
        rows.append((roots.t_plus, roots.residuals[roots.t_plus]))
        rows.append((roots.t_minus, roots.residuals[roots.t_minus]))
    path = os.path.join(out_dir, "fixed_points.csv")
    _write_csv(path, ["root", "residual"], rows)
    return [path]


def _cmd_region(args, out_dir):
    j_lo = args.J_min if args.J_min is not None else args.J_max / args.steps
    points = bounds.region_data(
        range(args.r_min, args.r_max + 1),
        _grid(j_lo, args.J_max, args.steps, "J"),
    )
    path = os.path.join(out_dir, "region.csv")
    _write_csv(path, ["r", "J", "class"], [(p.r, p.J, p.classification) for p in points])
    return [path]


def _cmd_figure5(args, out_dir):
    rows = bounds.figure5_data(args.r, _grid(args.J_min, args.J_max, args.J_steps, "J"))
    path = os.path.join(out_dir, "figure5.csv")
    _write_csv(
        path,
        ["T", "P_edge_FB", "P_delta_plus", "P_f_plus"],
        [
            (1.0 / row.J, row.edge_pressure_fb, row.delta_plus_pressure, row.plus_pressure)
            for row in rows
        ],
    )
    return [path]


def _cmd_potts_curve(args, out_dir):
    inter = nn.potts_interaction(args.q, args.J, args.r)
    families = [args.family] if args.family is not None else list(range(1, args.q))
    t_grid = _grid(args.t_min, args.t_max, args.t_steps, "t")
    rows = []
    for family in families:
        for t, pressure in nn.potts_family_curve(inter, t_grid, family, tol=args.tol):
            rows.append((t, family, pressure))
    path = os.path.join(out_dir, "potts_curve.csv")
    _write_csv(path, ["t", "family", "f_pressure"], rows)
    return [path]


def _cmd_verify(args, out_dir):
    report = bounds.verify_noneq_conditions(args.r_max, grid_points=args.grid_points)
    rows = [
        (c.name, c.worst_point, c.n_points, c.min_margin, c.passed)
        for c in report.checks
    ]
    path = os.path.join(out_dir, "inequalities.csv")
    _write_csv(path, ["check", "worst_point", "n_points", "min_margin", "passed"], rows)
    if not report.passed:
        failing = [c.name for c in report.checks if not c.passed]
        raise NumericalFailure(f"inequality checks failed: {failing}")
    return [path]


def _cmd_constant_search(args, out_dir):
    if args.r_list is not None:
        r_set = _parse_int_list(args.r_list)
    elif args.r_max is not None:
        r_set = list(range(args.r_min, args.r_max + 1))
    else:
        raise ValueError("constant-search needs --r-max or --r-list")
    result = bounds.minimal_constant_search(r_set, tol=args.tol)
    rows = [(r, result.c_by_r[r]) for r in sorted(result.c_by_r)]
    path = os.path.join(out_dir, "constant_search.csv")
    _write_csv(path, ["r", "c"], rows)
    return [path]


def _cmd_annealed(args, out_dir):
    params = ising.IsingParams(J=args.J, r=args.r)
    chain = ising.build_mu_t(args.t, params)
    eps = args.eps if args.eps is not None else sim.nearest_profile_eps(args.n, chain)
    log_count = sim.annealed_count_exact(args.n, args.r, chain, eps)
    rows = [
        (
            args.n,
            args.r,
            args.J,
            args.t,
            eps,
            log_count,
            log_count / args.n,
            ising.f_invariant(chain),
        )
    ]
    path = os.path.join(out_dir, "annealed.csv")
    _write_csv(
        path,
        ["n", "r", "J", "t", "eps", "log_count", "log_count_per_site", "f_invariant"],
        rows,
    )
    return [path]


def _cmd_simulate(args, out_dir):
    params = ising.IsingParams(J=args.J, r=args.r)
    chain = ising.build_mu_t(args.t, params)
    result = sim.second_moment_mc(
        args.n, args.r, chain, args.eps, args.samples, args.seed, threads=_threads(args)
    )
    path = os.path.join(out_dir, "second_moment.csv")
    _write_csv(
        path,
        [
            "n", "r", "J", "t", "eps", "samples", "seed",
            "mean_count", "mean_square", "pz_ratio", "se_mean", "se_square",
        ],
        [
            (
                args.n, args.r, args.J, args.t, args.eps, result.samples, args.seed,
                result.mean_count, result.mean_square, result.pz_ratio,
                result.se_mean, result.se_square,
            )
        ],
    )
    outputs = [path]
    if args.glauber_steps > 0:
        sigma = sim.sample_hom(args.n, args.r, np.random.SeedSequence((args.seed, 1 << 32)))
        trace = sim.glauber_run(
            sigma,
            args.J,
            args.glauber_steps,
            np.random.SeedSequence((args.seed, (1 << 32) + 1)),
            record_every=args.record_every,
        )
        gpath = os.path.join(out_dir, "glauber.csv")
        _write_csv(
            gpath,
            ["step", "magnetization"],
            list(zip(trace.steps.tolist(), trace.magnetization.tolist())),
        )
        outputs.append(gpath)
    return outputs


def _cmd_coexistence(args, out_dir):
    n_list = _parse_int_list(args.n)
    rows = sim.coexistence_weight(
        n_list, args.r, args.J, args.eps, args.samples, args.seed, threads=_threads(args)
    )
    path = os.path.join(out_dir, "coexistence.csv")
    _write_csv(
        path,
        ["n", "mean_weight", "std_error", "samples"],
        [(row.n, row.mean_weight, row.std_error, row.samples) for row in rows],
    )
    return [path]


_HANDLERS = {
    "thresholds": _cmd_thresholds,
    "pressure-curve": _cmd_pressure_curve,
    "fixed-points": _cmd_fixed_points,
    "region": _cmd_region,
    "figure5": _cmd_figure5,
    "potts-curve": _cmd_potts_curve,
    "verify-theoremB": _cmd_verify,
    "constant-search": _cmd_constant_search,
    "annealed": _cmd_annealed,
    "simulate": _cmd_simulate,
    "coexistence": _cmd_coexistence,
}


def main(argv=None):
    try:
        code = run(argv)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    sys.exit(code)


if __name__ == "__main__":
    main()
