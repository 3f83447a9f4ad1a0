"""Command-line entry point.

One JSON config holds shared sections (model, weights, psi, seed) and one
section per subcommand. ``--set a.b.c=value`` overrides any dotted path;
values are parsed as JSON when possible. Exit codes: 0 success, 1 usage or
input error, 2 assumption violation (including spectral overlap),
3 numerical failure.
"""

import argparse
import csv
import io
import json
import os
import sys
from math import pi

import numpy as np

from .errors import AssumptionViolation, NumericalError, SingCLTError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSUMPTION = 2
EXIT_NUMERICAL = 3
OUTPUT_ENV = "SINGCLT_OUTPUT_DIR"
SUBCOMMANDS = ("spectrum", "simulate", "hermite", "measure", "limit-cov", "diagrams",
               "contraction", "verify")


class UsageError(Exception):
    pass


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg, assignment):
    """Set cfg[a][b][c] = value for ``a.b.c=value``; list indices are integers."""
    if "=" not in assignment:
        raise UsageError(f"override {assignment!r} is not key=value")
    key, value = assignment.split("=", 1)
    parts = key.split(".")
    node = cfg
    for n, part in enumerate(parts):
        last = n == len(parts) - 1
        if isinstance(node, list):
            try:
                idx = int(part)
                node[idx]
            except (ValueError, IndexError):
                raise UsageError(f"bad list index {part!r} in {key!r}")
            if last:
                node[idx] = _parse_value(value)
            else:
                node = node[idx]
        else:
            if last:
                node[part] = _parse_value(value)
            else:
                node = node.setdefault(part, {})
                if not isinstance(node, (dict, list)):
                    raise UsageError(f"{key!r} passes through a scalar")
    return cfg


def _section(cfg, name):
    return dict(cfg.get(name.replace("-", "_"), {}) or {})


def _need(cfg, key):
    if key not in cfg:
        raise UsageError(f"config needs a {key!r} section")
    return cfg[key]


def _model(cfg):
    from .spectral import SpectralModel
    return SpectralModel.from_dict(_need(cfg, "model"))


def _weights(cfg, model=None):
    from .weights import WeightSpec
    w = dict(_need(cfg, "weights"))
    if model is not None:
        w.setdefault("time_domain", model.time_domain)
    return WeightSpec.from_dict(w)


class Output:
    """Writes artifacts under one directory and prints one summary line per result."""

    def __init__(self, directory, fmt, stream=None):
        self.dir = directory
        self.fmt = fmt
        self.stream = stream or sys.stdout
        self.written = []

    def write(self, name, text):
        os.makedirs(self.dir, exist_ok=True)
        path = os.path.join(self.dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        self.written.append(path)
        return path

    def summary(self, line):
        print(line, file=self.stream)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _spectrum_grid(model, n, lam_max):
    if model.discrete:
        x = -pi + (np.arange(n) + 0.5) * 2 * pi / n
    else:
        L = lam_max if lam_max is not None else 2 * max(c.kappa for c in model.components) + 10
        x = np.linspace(-L, L, n)
    sing = np.asarray(model.singularities())
    keep = np.min(np.abs(x[:, None] - sing[None, :]), axis=1) > 1e-9
    return x[keep]


def cmd_spectrum(cfg, out):
    from .spectral import convolution_value, integrate_density, spectral_density

    model = _model(cfg)
    sec = _section(cfg, "spectrum")
    orders = [int(j) for j in sec.get("orders", [1, 2])]
    conj = bool(cfg.get("conjecture_mode", False))
    x = _spectrum_grid(model, int(sec.get("n_grid", 1024)), sec.get("lambda_max"))
    cols = {}
    for j in orders:
        cols[j] = spectral_density(model, x) if j == 1 else convolution_value(model, j, x, conj)
    mass = integrate_density(model, 1)
    if out.fmt == "csv":
        path = out.write("spectrum.csv", _csv_text(
            ["lambda"] + [f"f{j}" for j in orders],
            [[x[i]] + [cols[j][i] for j in orders] for i in range(x.size)]))
    else:
        path = out.write("spectrum.json", json.dumps(
            {"model": model.to_dict(), "lambda": x.tolist(),
             "densities": {str(j): cols[j].tolist() for j in orders}, "integral_f": mass},
            indent=2))
    out.summary(f"spectrum: {x.size} points, orders {orders}, int f = {mass:.12g} -> {path}")


def cmd_simulate(cfg, out):
    from .simulate import SimulationPlan, paths_to_csv, simulate_values

    model = _model(cfg)
    sec = _section(cfg, "simulate")
    plan = SimulationPlan(model, int(sec.get("n_points", 4096)), float(sec.get("step", 1.0)),
                          int(cfg.get("seed", 0)), sec.get("method", "circulant"),
                          int(sec.get("padding", 4)), float(sec.get("tol_embed", 1e-8)))
    R = int(sec.get("replicates", 1))
    X = simulate_values(plan, range(R))
    if out.fmt == "csv":
        path = out.write("paths.csv", paths_to_csv(X))
        out.write("paths.plan.json", json.dumps(plan.to_dict(), indent=2))
    else:
        path = out.write("paths.json", json.dumps({"plan": plan.to_dict(),
                                                   "paths": X.tolist()}))
    out.summary(f"simulate: {R} path(s) of {plan.n_points} points, "
                f"sample variance {float(X.var()):.6g} -> {path}")


def cmd_hermite(cfg, out):
    from .hermite import hermite_coefficients

    sec = _section(cfg, "hermite")
    exp = hermite_coefficients(_need(cfg, "psi"), int(sec.get("d", 40)),
                               center=bool(sec.get("center", False)))
    if out.fmt == "csv":
        path = out.write("hermite.csv", _csv_text(
            ["k", "C_k", "C_k2_over_kfact"],
            [[k, float(c), exp.weight(k) if k else 0.0] for k, c in enumerate(exp.coefficients)]))
    else:
        path = out.write("hermite.json", exp.to_json())
    out.summary(f"hermite: rank {exp.rank}, E psi^2 = {exp.second_moment:.10g}, "
                f"tail after d={exp.truncation}: {exp.coefficient_tail():.3g} -> {path}")


def cmd_measure(cfg, out):
    from .weights import default_measure_edges, limit_measure, matrix_measure, parseval_check

    sec = _section(cfg, "measure")
    weights = _weights(cfg, _model(cfg) if "model" in cfg else None)
    T = sec.get("T", 1024)
    edges = default_measure_edges(weights, T, int(sec.get("n_cells", 512)))
    grid = matrix_measure(weights, T, edges)
    gaps = [abs(a / b - 1) for a, b in (parseval_check(weights, i, T) for i in range(weights.q))]
    if out.fmt == "csv":
        path = out.write("measure.csv", grid.to_csv())
    else:
        try:
            limit = limit_measure(weights).to_dict()
        except SingCLTError:
            limit = None
        path = out.write("measure.json", json.dumps(
            {"T": T, "edges": grid.edges.tolist(), "re": grid.entries.real.tolist(),
             "im": grid.entries.imag.tolist(), "limit": limit}))
    out.summary(f"measure: T={T}, {grid.entries.shape[0]} cells, diagonal mass "
                f"{np.round(grid.diagonal_mass(), 12).tolist()}, max Parseval gap "
                f"{max(gaps):.2g} -> {path}")


def cmd_limit_cov(cfg, out):
    from .hermite import hermite_coefficients
    from .limitcov import limit_covariance

    model = _model(cfg)
    weights = _weights(cfg, model)
    sec = _section(cfg, "limit-cov")
    exp = hermite_coefficients(_need(cfg, "psi"), int(sec.get("coefficients", 60)),
                               center=bool(sec.get("center", False)))
    res = limit_covariance(model, weights, exp, d=sec.get("d"),
                           tail_tol=float(sec.get("tail_tol", 0.01)),
                           strict=bool(sec.get("strict", False)),
                           include_remainder=bool(sec.get("include_remainder", True)),
                           conjecture_mode=bool(cfg.get("conjecture_mode", False)))
    path = out.write("limit_cov.csv", res.to_csv()) if out.fmt == "csv" else \
        out.write("limit_cov.json", res.to_json())
    out.summary(f"limit-cov: q={weights.q}, d={res.truncation}, trace Xi = "
                f"{float(np.trace(res.Xi)):.10g} -> {path}")


def cmd_diagrams(cfg, out, order=None):
    from .diagrams import classify_levels, enumerate_diagrams

    sec = _section(cfg, "diagrams")
    order = order or sec.get("order")
    if not order:
        raise UsageError("diagrams needs --order or diagrams.order in the config")
    order = tuple(int(x) for x in order)
    ds = enumerate_diagrams(order)
    n_reg = sum(d.is_regular for d in ds)
    if out.fmt == "csv":
        path = out.write("diagrams.csv", _csv_text(
            ["index", "regular", "q", "levels", "edges"],
            [[i, int(d.is_regular), " ".join(map(str, d.level_indegrees)),
              " ".join(classify_levels(d)), json.dumps(d.to_dict()["edges"])]
             for i, d in enumerate(ds)]))
    else:
        path = out.write("diagrams.json", json.dumps(
            {"order": list(order), "count": len(ds), "regular": n_reg,
             "diagrams": [dict(d.to_dict(), regular=d.is_regular) for d in ds]}))
    out.summary(f"diagrams: order {order}: |L| = {len(ds)}, |L*| = {n_reg} -> {path}")


def cmd_contraction(cfg, out):
    from .diagrams import ContractionSpec, contraction_norm

    model = _model(cfg)
    weights = _weights(cfg, model)
    sec = _section(cfg, "contraction")
    j, p = int(sec.get("j", 2)), int(sec.get("p", 1))
    horizons = sec.get("horizons", [128, 256, 512, 1024])
    z = sec.get("z")
    z = tuple(z) if z is not None else None
    vals = [contraction_norm(ContractionSpec(j, p, T, model, weights, z)) for T in horizons]
    slope = float(np.polyfit(np.log(horizons), np.log(vals), 1)[0]) if len(vals) > 1 else None
    if out.fmt == "csv":
        path = out.write("contraction.csv", _csv_text(["T", "norm2"], zip(horizons, vals)))
    else:
        path = out.write("contraction.json", json.dumps(
            {"j": j, "p": p, "horizons": list(horizons), "norm2": vals, "slope": slope}))
    s = "n/a" if slope is None else f"{slope:.4f}"
    out.summary(f"contraction: j={j}, p={p}, log-log slope {s} -> {path}")


def cmd_verify(cfg, out):
    from .harness import ExperimentConfig, run_experiment

    sec = _section(cfg, "verify")
    model = _model(cfg)
    exp_cfg = dict(sec)
    exp_cfg.update(model=model.to_dict(), weights=_weights(cfg, model).to_dict(),
                   psi=_need(cfg, "psi"), seed=int(cfg.get("seed", sec.get("seed", 0))))
    exp_cfg.setdefault("horizons", [1024, 2048])
    exp_cfg.setdefault("conjecture_mode", bool(cfg.get("conjecture_mode", False)))
    config = ExperimentConfig.from_dict(exp_cfg)
    rep = run_experiment(config)
    path = out.write("report.csv", rep.to_csv()) if out.fmt == "csv" else \
        out.write("report.json", rep.to_json())
    for h in rep.horizons:
        ks = max(d["ks"] for d in h["directions"]) if h["directions"] else float("nan")
        out.summary(f"verify: T={h['T']}: cov distance {h['cov_distance']:.4f}, max KS {ks:.4f}")
    verdict = "PASS" if rep.passed else "FAIL"
    failed = [k for k, v in rep.verdicts.items() if not v]
    out.summary(f"verify: {verdict}" + (f" ({', '.join(failed)})" if failed else "")
                + f" -> {path}")


COMMANDS = {"spectrum": cmd_spectrum, "simulate": cmd_simulate, "hermite": cmd_hermite,
            "measure": cmd_measure, "limit-cov": cmd_limit_cov, "diagrams": cmd_diagrams,
            "contraction": cmd_contraction, "verify": cmd_verify}


def build_parser():
    parser = argparse.ArgumentParser(prog="singclt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a dotted config path")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output-dir", help=f"artifact directory (default ${OUTPUT_ENV} or .)")
        if name == "diagrams":
            p.add_argument("--order", help="comma-separated level sizes, e.g. 2,2,2,2")
    return parser


def dispatch(argv=None, stream=None):
    """Run one invocation and return its exit code."""
    stream = stream or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = load_config(args.config)
        for s in args.set:
            apply_override(cfg, s)
        if args.seed is not None:
            cfg["seed"] = args.seed
        out_dir = args.output_dir or os.environ.get(OUTPUT_ENV) or "."
        out = Output(out_dir, args.format, stream)
        if args.command == "diagrams":
            order = None
            if args.order:
                try:
                    order = [int(x) for x in args.order.split(",")]
                except ValueError:
                    raise UsageError(f"bad --order {args.order!r}")
            cmd_diagrams(cfg, out, order)
        else:
            COMMANDS[args.command](cfg, out)
        return EXIT_OK
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SingCLTError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None):
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
