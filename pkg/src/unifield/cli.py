"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 assumption failure,
3 step limit exceeded.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .blocks import (
    BlockGeometry,
    example1_family,
    example2_family,
    minorization_family,
    setvalued_family,
    assumption3_violations,
    default_example1_phi,
)
from .errors import (
    AssumptionFailed,
    KernelError,
    ParseError,
    StepLimitExceeded,
    UnifieldError,
    WindowMismatch,
)
from .kernel import DEFAULT_DELTA0, compute_minorization, example2_kernel, load_kernel
from .lattice import Box
from .oracle import DEFAULT_TOL, EmpiricalJoint, compare_report, forward_grids, joint_from_grids
from .percolation import DEFAULT_STEP_LIMIT, cluster_stats
from .sampler import check_assumption, perfect_batch

EXIT_OK, EXIT_USAGE, EXIT_ASSUMPTION, EXIT_STEPS = 0, 1, 2, 3
DEFAULT_GEOMETRY = {"minorization": (1, 2), "example1": (1, 3), "example2": (2, 2), "setvalued": (2, 2)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="unifield", description="Perfect simulation of two-parent unilateral fields.")
    p.add_argument("--version", action="version", version=f"unifield {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--kernel", help="preset (k2, example1:a,b,c, example2:p, iid:...) or JSON file")
    common.add_argument("--seed", type=_nonneg, default=0)
    common.add_argument("--reps", type=_positive, default=1)
    common.add_argument("--step-limit", type=_positive, default=DEFAULT_STEP_LIMIT)
    common.add_argument("--delta0", type=float, default=DEFAULT_DELTA0)
    common.add_argument("--force", action="store_true", help="run even when an assumption gate fails")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--workers", type=_positive, default=1)

    block = _Parser(add_help=False)
    block.add_argument("--algo", choices=("site", "block"), default="site")
    block.add_argument("--l", type=_positive)
    block.add_argument("--d", type=int)
    block.add_argument("--family", help="minorization | example1:r1,r2 | example2:p | setvalued")

    v = sub.add_parser("validate", parents=[common, block], help="check a kernel against the assumptions")
    v.add_argument("--format", choices=("text", "json"), default="text")

    s = sub.add_parser("sample", parents=[common, block], help="draw perfect samples")
    s.add_argument("--window", nargs=2, type=_positive, metavar=("M", "N"), required=True)
    s.add_argument("--format", choices=("csv", "json", "pgm"), default="csv")

    c = sub.add_parser("percstats", parents=[common], help="backward-cluster statistics on L x L boxes")
    c.add_argument("sizes", nargs="+", type=_positive, metavar="L")
    c.add_argument("--format", choices=("csv", "json"), default="csv")

    o = sub.add_parser("oracle", parents=[common], help="forward-simulation estimate of the window law")
    o.add_argument("--window", nargs=2, type=_positive, metavar=("M", "N"), required=True)
    o.add_argument("--offset", type=_positive, default=30)
    o.add_argument("--boundary", default="const:0", help="const:z or iid")
    o.add_argument("--format", choices=("json",), default="json")

    x = sub.add_parser("compare", help="compare two empirical joint files")
    x.add_argument("a")
    x.add_argument("b")
    x.add_argument("--tol", type=float, default=DEFAULT_TOL)
    x.add_argument("--out")
    x.add_argument("--format", choices=("json",), default="json")
    return p


# -- configuration ------------------------------------------------------------

def _parse_family(text):
    if text is None:
        return None, ()
    name, _, params = text.partition(":")
    try:
        vals = tuple(float(x) for x in params.split(",")) if params else ()
    except ValueError:
        raise UsageError(f"bad --family parameters in {text!r}") from None
    need = {"minorization": 0, "setvalued": 0, "example1": 2, "example2": 1}
    if name not in need:
        raise UsageError(f"unknown family {name!r}")
    if len(vals) != need[name]:
        raise UsageError(f"family {name} takes {need[name]} parameter(s), got {len(vals)}")
    return name, vals


def resolve_config(args) -> dict:
    cfg = {"command": args.command, "version": __version__}
    if args.command == "compare":
        cfg.update(a=args.a, b=args.b, tol=args.tol)
        return cfg
    if args.kernel is None:
        raise UsageError("--kernel is required")
    cfg.update(kernel=args.kernel, seed=args.seed, reps=args.reps, step_limit=args.step_limit,
               delta0=args.delta0, force=args.force, format=args.format)
    if hasattr(args, "window"):
        cfg["window"] = list(args.window)
    if hasattr(args, "algo"):
        fam, params = _parse_family(args.family)
        if args.algo == "block" and fam is None:
            fam = "minorization"
        cfg["algo"] = args.algo
        if fam is not None:
            l0, d0 = DEFAULT_GEOMETRY[fam]
            l = args.l if args.l is not None else l0
            d = args.d if args.d is not None else d0
            if d < 2:
                raise UsageError("--d must be >= 2")
            cfg.update(family=fam, family_params=list(params), l=l, d=d)
        elif args.l is not None or args.d is not None:
            raise UsageError("--l/--d need --algo block or --family")
    if args.command == "percstats":
        cfg["sizes"] = list(args.sizes)
    if args.command == "oracle":
        cfg.update(offset=args.offset, boundary=args.boundary)
    return cfg


def build_system(cfg, kernel):
    fam, params = cfg["family"], cfg["family_params"]
    geom = BlockGeometry(cfg["l"], cfg["d"])
    if fam == "minorization":
        return minorization_family(kernel, geom)
    if fam == "setvalued":
        return setvalued_family(kernel, geom)
    if fam == "example2":
        (p,) = params
        ref = example2_kernel(p)
        if kernel.n_states != 3 or not np.allclose(kernel.table, ref.table, atol=1e-12):
            raise UsageError(f"family example2:{p:g} does not realise kernel {cfg['kernel']}")
        return example2_family(p, geom)
    if fam == "example1":
        r1, r2 = params
        return example1_family(kernel, r1, r2, geometry=geom)
    raise UsageError(f"unknown family {fam}")


# -- workers --------------------------------------------------------------------

def _sample_chunk(cfg, keys):
    kernel = load_kernel(cfg["kernel"])
    box = Box(*cfg["window"])
    if cfg["algo"] == "site":
        values, b, km = perfect_batch(kernel, box, cfg["seed"], keys, cfg["step_limit"],
                                      cfg["delta0"], force=True)
        return values, b, km
    from .blocks import block_samples
    system = build_system(cfg, kernel)
    out = block_samples(system, box, cfg["seed"], keys, cfg["step_limit"], force=True)
    return (np.stack([s.values for s in out]),
            np.array([s.meta["b_size"] for s in out]),
            np.array([s.meta["kmax"] for s in out]))


def _oracle_chunk(cfg, keys):
    kernel = load_kernel(cfg["kernel"])
    return forward_grids(kernel, Box(*cfg["window"]), cfg["offset"], keys, cfg["seed"], cfg["boundary"])


def _run_chunks(fn, cfg, reps, workers):
    keys = np.arange(reps, dtype=np.int64)
    if workers <= 1 or reps < 2:
        return [fn(cfg, keys)]
    chunks = [c for c in np.array_split(keys, min(workers * 4, reps)) if len(c)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, [cfg] * len(chunks), chunks))


# -- output -----------------------------------------------------------------------

def _header_lines(cfg):
    return [f"# unifield {__version__}", "# config: " + json.dumps(cfg, sort_keys=True)]


def format_samples(cfg, values, b, km) -> str:
    fmt = cfg["format"]
    r, m, n = values.shape
    if fmt == "csv":
        buf = io.StringIO()
        buf.write("\n".join(_header_lines(cfg)) + "\n")
        cols = [f"x{i}_{j}" for j in range(1, n + 1) for i in range(1, m + 1)]
        buf.write(",".join(["replicate", "b_size", "kmax"] + cols) + "\n")
        for k in range(r):
            row = values[k].T.ravel().tolist()
            buf.write(",".join(map(str, [k, int(b[k]), int(km[k])] + row)) + "\n")
        return buf.getvalue()
    if fmt == "json":
        grids = [{"replicate": k, "b_size": int(b[k]), "kmax": int(km[k]),
                  "rows": values[k].T.tolist()} for k in range(r)]
        return json.dumps({"config": cfg, "grids": grids}, sort_keys=True) + "\n"
    n_states = load_kernel(cfg["kernel"]).n_states
    if n_states > 256:
        raise UsageError("PGM output supports at most 256 states")
    scale = 255 // max(n_states - 1, 1)
    buf = io.StringIO()
    for k in range(r):
        buf.write("P2\n")
        buf.write("\n".join(_header_lines(cfg)) + "\n")
        buf.write(f"# replicate {k} b_size {int(b[k])} kmax {int(km[k])}\n")
        buf.write(f"{m} {n}\n255\n")
        for j in range(n, 0, -1):
            buf.write(" ".join(str(int(values[k, i - 1, j - 1]) * scale) for i in range(1, m + 1)) + "\n")
    return buf.getvalue()


def _emit(text: str, out):
    if out:
        try:
            with open(out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {out!r}: {exc}") from exc
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------------

def cmd_validate(cfg, args) -> int:
    kernel = load_kernel(cfg["kernel"])
    m = compute_minorization(kernel)
    n = kernel.n_states
    report = {"config": cfg, "states": n, "delta": m.delta, "tau": m.tau.tolist(),
              "phi": None if m.phi is None else m.phi.tolist()}
    lines = [f"kernel {kernel.name}: {n} states", f"tau = {np.round(m.tau, 12).tolist()}",
             f"delta = {m.delta:.12g}"]
    ok = True
    if m.assumption1_holds:
        lines.append(f"phi = {np.round(m.phi, 12).tolist()}")
        if m.residual is not None:
            lines.append("H rows (y1, y2): " + "; ".join(
                f"({a},{c}) {np.round(m.residual[a, c], 12).tolist()}"
                for a in range(n) for c in range(n)))
            report["H"] = m.residual.tolist()
        lines.append("Assumption 1 holds (delta > 0)")
        certified = m.delta >= cfg["delta0"]
        lines.append(f"site algorithm: delta {'>=' if certified else '<'} delta0 = {cfg['delta0']:g}"
                     f" -> {'certified' if certified else 'not certified'}")
    else:
        certified = False
        lines.append("Assumption 1 fails: delta = 0, no site-wise coupling exists")
    report["assumption1"] = bool(m.assumption1_holds)
    report["site_certified"] = bool(certified)
    if cfg.get("family"):
        fam, params = cfg["family"], cfg["family_params"]
        if fam == "example1":
            r1, r2 = params
            try:
                phi = default_example1_phi(kernel, (0, 1))
                problems = assumption3_violations(kernel, (0, 1), phi, r1, r2)
            except AssumptionFailed as exc:
                problems = [str(exc)]
            verdict = not problems
            lines.append(f"rho1^2*rho2 = {r1 * r1 * r2:.6g} (need > 2/3)")
            lines.append("Assumption 3 " + ("holds" if verdict else "fails: " + "; ".join(problems)))
            report["assumption3"] = verdict
            ok = verdict
        else:
            try:
                system = build_system(cfg, kernel)
                dt = system.delta_tilde
                thr = system.geometry.threshold
                verdict = dt > thr
                lines.append(f"block family {fam} l={cfg['l']} d={cfg['d']}: P(W=0) = {dt:.6g} "
                             f"{'>' if verdict else '<='} (d-1)/d = {thr:.6g}")
                lines.append("Assumption 2 " + ("holds" if verdict else "fails"))
            except AssumptionFailed as exc:
                verdict = False
                dt = None
                lines.append(f"Assumption 2 fails: {exc}")
            report["assumption2"] = verdict
            report["delta_tilde"] = dt
            ok = verdict
    else:
        ok = certified
    text = json.dumps(report, sort_keys=True) + "\n" if cfg["format"] == "json" else "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK if ok else EXIT_ASSUMPTION


def cmd_sample(cfg, args) -> int:
    kernel = load_kernel(cfg["kernel"])
    if cfg["algo"] == "site":
        check_assumption(compute_minorization(kernel), cfg["delta0"], cfg["force"])
    else:
        build_system(cfg, kernel).gate(cfg["force"])
    if cfg["format"] == "pgm" and kernel.n_states > 256:
        raise UsageError("PGM output supports at most 256 states")
    parts = _run_chunks(_sample_chunk, cfg, cfg["reps"], args.workers)
    values = np.concatenate([p[0] for p in parts])
    b = np.concatenate([p[1] for p in parts])
    km = np.concatenate([p[2] for p in parts])
    _emit(format_samples(cfg, values, b, km), args.out)
    return EXIT_OK


def cmd_percstats(cfg, args) -> int:
    kernel = load_kernel(cfg["kernel"])
    m = compute_minorization(kernel)
    check_assumption(m, cfg["delta0"], cfg["force"])
    rows = cluster_stats(m.delta, cfg["sizes"], cfg["reps"], cfg["seed"], cfg["step_limit"])
    if cfg["format"] == "json":
        text = json.dumps({"config": cfg, "delta": m.delta, "rows": rows}, sort_keys=True) + "\n"
    else:
        keys = list(rows[0])
        lines = _header_lines(cfg) + [",".join(keys)]
        lines += [",".join(_fmt(r[k]) for k in keys) for r in rows]
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _fmt(x):
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(round(x, 10))
    return str(x)


def cmd_oracle(cfg, args) -> int:
    kernel = load_kernel(cfg["kernel"])
    parts = _run_chunks(_oracle_chunk, cfg, cfg["reps"], args.workers)
    grids = np.concatenate(parts)
    joint = joint_from_grids(grids, kernel.n_states, {"config": cfg})
    _emit(json.dumps(joint.to_json(), sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_compare(cfg, args) -> int:
    a, b = EmpiricalJoint.load(args.a), EmpiricalJoint.load(args.b)
    rep = compare_report(a, b, args.tol)
    _emit(json.dumps({"config": cfg, "report": rep.to_json()}, sort_keys=True) + "\n", args.out)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "sample": cmd_sample, "percstats": cmd_percstats,
            "oracle": cmd_oracle, "compare": cmd_compare}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except AssumptionFailed as exc:
        print(f"unifield: assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except StepLimitExceeded as exc:
        print(f"unifield: step limit exceeded: {exc}", file=sys.stderr)
        return EXIT_STEPS
    except (UsageError, KernelError, ParseError, WindowMismatch, OSError, ValueError) as exc:
        print(f"unifield: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnifieldError as exc:
        print(f"unifield: internal error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None):
    sys.exit(run(argv))
