"""Command-line interface.

Exit codes: 0 success or pass, 1 verification failure, 2 invalid input,
3 numerical failure (singular or failed trajectory, degenerate transform).
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import Parameter, SystemSpec
from .errors import BranchCollision, ChazyError, DegenerateInput, MultipleRoot
from .halphen import AngleTriple, CombinationRule, infer_parameter, integrate_w, triple_jet_from_w
from .io import (HALPHEN_HEADER, TRIPLE_HEADER, SampledTrajectory, parse_complex_list,
                 read_csv, write_csv)
from .odeint import TOL_RANGE, integrate
from .transforms import AppliedTransform, catalog, compose, get
from .verify import audit, pointwise_residual, verify_samples

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("chazylab")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


@dataclass
class RunConfig:
    tol: float = 1e-10
    pass_threshold: float = 1e-6
    n_check: int = 200
    seed: int = 0
    format: str = "csv"

    def validate(self):
        lo, hi = TOL_RANGE
        if not lo <= self.tol <= hi:
            raise UsageError(f"tol must lie in [{lo:g}, {hi:g}]")
        if self.n_check < 2:
            raise UsageError("n_check must be at least 2")
        if self.pass_threshold <= 0:
            raise UsageError("pass_threshold must be positive")
        if self.format not in ("csv", "json"):
            raise UsageError("format must be csv or json")
        return self


_CONFIG_TYPES = {"tol": float, "pass_threshold": float, "n_check": int,
                 "seed": int, "format": str}


def load_config(path) -> dict:
    """Read ``key = value`` lines (``#`` comments, optional section headers)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string("[chazylab]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"bad config {path}: {exc.message.splitlines()[0]}") from None
    out = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if key not in _CONFIG_TYPES:
                raise UsageError(f"unknown config key {key!r}")
            try:
                out[key] = _CONFIG_TYPES[key](raw.strip().strip('"'))
            except ValueError:
                raise UsageError(f"bad value for {key}: {raw!r}") from None
    return out


def _config(args) -> RunConfig:
    values = load_config(args.config) if args.config else {}
    for key in _CONFIG_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return RunConfig(**values).validate()


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------


def _parameter(text):
    try:
        return Parameter.parse(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _triple_literal(text):
    try:
        return parse_complex_list(text, 3)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _id_list(text):
    return [v.strip().upper() for v in text.split(",") if v.strip()]


def _angles(text):
    try:
        return AngleTriple.parse(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message.splitlines()[0])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--tol", type=float, help="integration tolerance (default 1e-10)")
    common.add_argument("--threshold", dest="pass_threshold", type=float,
                        help="pass threshold for residuals (default 1e-6)")
    common.add_argument("--n-check", dest="n_check", type=int,
                        help="checkpoints per trajectory (default 200)")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")

    p = _Parser(prog="chazylab", description=(
        "Integrate generalised Chazy systems and check the maps between them."))
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    sub.add_parser("catalog", parents=[common], help="list the transform catalog")

    s = sub.add_parser("integrate", parents=[common], help="integrate a (P,Q,R) system")
    s.add_argument("--k", type=_parameter, required=True)
    s.add_argument("--ic", type=_triple_literal, required=True, help='"P,Q,R" as a+bi')
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--x1", type=float, required=True)
    s.add_argument("--out", help="output file (default stdout)")

    s = sub.add_parser("transform", parents=[common], help="map a sampled trajectory")
    s.add_argument("--id", required=True)
    s.add_argument("--variant")
    s.add_argument("--branch", type=int, default=0)
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out")

    s = sub.add_parser("verify", parents=[common], help="check a sampled trajectory")
    s.add_argument("--k", type=_parameter, required=True)
    s.add_argument("--in", dest="infile", required=True)

    s = sub.add_parser("audit", parents=[common], help="random-trial audit of entries")
    s.add_argument("--id", required=True, help="entry id, comma list, or 'all'")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--out")

    s = sub.add_parser("compose", parents=[common], help="apply a chain of transforms")
    s.add_argument("--ids", type=_id_list, required=True)
    s.add_argument("--branches", type=_int_list)
    s.add_argument("--variants", type=lambda t: t.split(","))
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="infile")
    src.add_argument("--ic", type=_triple_literal)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--x1", type=float, default=0.25)
    s.add_argument("--out")

    s = sub.add_parser("halphen", parents=[common], help="integrate the Halphen system")
    s.add_argument("--angles", type=_angles, required=True)
    s.add_argument("--weights", type=_int_list)
    s.add_argument("--k", type=_parameter, help="parameter of the combination (inferred if omitted)")
    s.add_argument("--ic", type=_triple_literal, required=True, help='"w1,w2,w3" as a+bi')
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--x1", type=float, required=True)
    s.add_argument("--out")
    s.add_argument("--triple-out", help="also write the combined (P,Q,R) samples")
    return p


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _emit(cfg, out, xs, states, header=TRIPLE_HEADER, meta=None):
    if cfg.format == "json":
        names = [h[:-3] for h in header[1::2]]
        payload = dict(meta or {})
        payload["samples"] = [
            {"x": float(x), **{n: [float(z.real), float(z.imag)] for n, z in zip(names, s)}}
            for x, s in zip(xs, states)]
        text = json.dumps(payload, indent=2)
        if out:
            with open(out, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
    elif out:
        write_csv(out, xs, states, header)
    else:
        write_csv(sys.stdout, xs, states, header)


def _load_triples(path):
    try:
        xs, ys, _ = read_csv(path, TRIPLE_HEADER)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return SampledTrajectory(xs, ys, label=path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_catalog(args, cfg):
    rows = []
    for e in catalog():
        rows.append({"id": e.id, "source": str(e.source), "target": str(e.target),
                     "branches": e.branch_count, "variants": list(e.variants)})
    if cfg.format == "json":
        print(json.dumps(rows, indent=2))
    else:
        for r in rows:
            print(f"{r['id']:<4} k {r['source']:>3} -> {r['target']:<3} "
                  f"branches={r['branches']} variants={','.join(r['variants'])}")
    return EXIT_OK


def cmd_integrate(args, cfg):
    spec = SystemSpec(args.k)
    traj = integrate(_kernels.chazy_rhs, args.ic, args.x0, args.x1, cfg.tol,
                     params=spec.kernel_params, label=f"k={args.k}")
    xs = np.linspace(traj.x0, traj.x_end, cfg.n_check)
    _emit(cfg, args.out, xs, traj.sample(xs),
          meta={"k": str(args.k), "status": traj.status, "tol": cfg.tol})
    if not traj.completed:
        raise NumericalFailure(f"trajectory {traj.status} at x={traj.x_end:.17g} ({traj.reason})")
    return EXIT_OK


def cmd_transform(args, cfg):
    try:
        entry = get(args.id)
        variant = args.variant or entry.preferred
        entry.triple_map(variant)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not 0 <= args.branch < entry.branch_count:
        raise UsageError(f"{entry.id} has branches 0..{entry.branch_count - 1}")
    src = _load_triples(args.infile)
    image = AppliedTransform(entry, variant, args.branch, src, xs=src.xs)
    img = image.sample(src.xs)
    _emit(cfg, args.out, src.xs, img,
          meta={"id": entry.id, "variant": variant, "branch": args.branch,
                "k": str(entry.target)})
    return EXIT_OK


def cmd_verify(args, cfg):
    src = _load_triples(args.infile)
    rep = verify_samples(SystemSpec(args.k), src.xs, src.ys, cfg.tol, cfg.pass_threshold)
    if rep.degenerate:
        raise NumericalFailure(rep.reason)
    print(f"{rep.status} k={args.k} max_residual={rep.max_residual:.3e} "
          f"at x={rep.argmax_x:.6g} samples={rep.samples_checked}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_audit(args, cfg):
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    ids = [e.id for e in catalog()] if args.id.strip().lower() == "all" else _id_list(args.id)
    try:
        entries = [get(i) for i in ids]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    reports = []
    ok = True
    for e in entries:
        rep = audit(e, args.trials, cfg.seed, n_check=cfg.n_check, tol=cfg.tol,
                    threshold=cfg.pass_threshold)
        reports.append(rep)
        for v in rep.variants:
            worst = "n/a" if v.worst_residual is None else f"{v.worst_residual:.2e}"
            print(f"{e.id} {v.name:<9} {v.verdict:<12} worst={worst}")
        ok &= bool(rep.passing)
    if args.out:
        payload = reports[0].to_dict() if len(reports) == 1 else [r.to_dict() for r in reports]
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compose(args, cfg):
    try:
        comp = compose(args.ids, args.branches, args.variants)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.infile:
        src = _load_triples(args.infile)
        image = comp.apply_trajectory(src, xs=src.xs)
        xs = src.xs
    else:
        spec = SystemSpec(comp.source)
        src = integrate(_kernels.chazy_rhs, args.ic, args.x0, args.x1, cfg.tol,
                        params=spec.kernel_params)
        if not src.completed:
            raise NumericalFailure(f"source trajectory {src.status} at x={src.x_end:.6g}")
        xs = src.grid(cfg.n_check)
        image = comp.apply_trajectory(src, n_grid=cfg.n_check)
    img, dimg = image.sample(xs), image.derivative(xs)
    res = pointwise_residual(SystemSpec(comp.target), img, dimg)
    worst = float(np.max(res))
    _emit(cfg, args.out, xs, img, meta={"ids": comp.ids, "k": str(comp.target)})
    status = "pass" if worst <= cfg.pass_threshold else "fail"
    print(f"{status} {comp} k={comp.source}->{comp.target} max_residual={worst:.3e}",
          file=sys.stderr)
    return EXIT_OK if status == "pass" else EXIT_FAIL


def cmd_halphen(args, cfg):
    rule = None
    if args.k is not None and args.weights is None:
        raise UsageError("--k needs --weights")
    if args.weights is not None:
        if len(args.weights) != 3:
            raise UsageError("--weights needs three integers")
        if args.k is not None:
            rule = CombinationRule(tuple(args.weights), args.angles, args.k)
        else:
            rule = infer_parameter(args.weights, args.angles)
            if rule is None:
                raise UsageError(f"weights {args.weights} with angles ({args.angles}) "
                                 "match no admissible combination")
    traj = integrate_w(args.angles, args.ic, args.x0, args.x1, cfg.tol)
    xs = np.linspace(traj.x0, traj.x_end, cfg.n_check)
    ws = traj.sample(xs)
    _emit(cfg, args.out, xs, ws, HALPHEN_HEADER, meta={"angles": str(args.angles)})
    if not traj.completed:
        raise NumericalFailure(f"w-trajectory {traj.status} at x={traj.x_end:.17g}")
    if rule is None:
        return EXIT_OK
    triples, dtriples = triple_jet_from_w(rule, ws)
    if args.triple_out:
        _emit(cfg, args.triple_out, xs, triples, meta={"k": str(rule.parameter)})
    worst = float(np.max(pointwise_residual(SystemSpec(rule.parameter), triples, dtriples)))
    status = "pass" if worst <= cfg.pass_threshold else "fail"
    print(f"{status} {rule} max_residual={worst:.3e}", file=sys.stderr)
    return EXIT_OK if status == "pass" else EXIT_FAIL


COMMANDS = {
    "catalog": cmd_catalog, "integrate": cmd_integrate, "transform": cmd_transform,
    "verify": cmd_verify, "audit": cmd_audit, "compose": cmd_compose,
    "halphen": cmd_halphen,
}


def _setup_logging():
    level = os.environ.get("CHAZY_LOG", "error").strip().upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level),
                        format="%(levelname)s %(name)s: %(message)s")


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def _join_negative_values(argv):
    # "--ic -2+0i,..." would otherwise be read as an unknown option
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE_VALUE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def run(argv=None) -> int:
    """Parse ``argv`` and execute; returns the exit code."""
    _setup_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"chazylab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        print(f"chazylab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DegenerateInput, BranchCollision, MultipleRoot) as exc:
        print(f"chazylab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ChazyError, ValueError) as exc:
        print(f"chazylab: error: {str(exc).splitlines()[0]}", file=sys.stderr)
        return EXIT_INPUT


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
