"""Command-line interface.

    acmcheck verify FILE      full report (exit 0 valid, 2 axioms fail, 1 input error)
    acmcheck classify FILE    class flags and H1 rank only
    acmcheck zoo list
    acmcheck zoo emit NAME [--n N] [--a MATRIX-or-FILE]
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .acm import AcmStructure
from .exprjet import EvaluationError, ExprError
from .fields import ManifoldFileError
from .report import RunConfig, classification_summary, format_text, run
from .zoo import EXAMPLES, get_example

EXIT_OK, EXIT_INPUT, EXIT_AXIOMS = 0, 1, 2


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _config(ns) -> RunConfig:
    return RunConfig(samples=ns.samples, seed=ns.seed, tol=ns.tol,
                     involutivity_tol=ns.involutivity_tol, threads=ns.threads)


def _analyze(ns, reduce: bool) -> int:
    cfg = _config(ns)
    structure = AcmStructure.load(ns.file)
    report = run(structure, cfg)
    out = classification_summary(report) if reduce else report
    text = format_text(out) if ns.format == "text" else dump_json(out)
    _emit(text, ns.output)
    return EXIT_OK if report["valid"] else EXIT_AXIOMS


def cmd_verify(ns) -> int:
    return _analyze(ns, reduce=False)


def cmd_classify(ns) -> int:
    return _analyze(ns, reduce=True)


def _read_matrix(arg: str):
    path = Path(arg)
    text = path.read_text(encoding="utf-8") if path.is_file() else arg
    try:
        a = np.asarray(json.loads(text), dtype=float)
    except (json.JSONDecodeError, ValueError, TypeError) as exc:
        raise ValueError(f"--a must be a JSON square matrix or a file containing one: {exc}") from None
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("--a must be a square matrix")
    return a


def cmd_zoo(ns) -> int:
    if ns.zoo_cmd == "list":
        _emit("".join(f"{name}\n" for name in EXAMPLES), None)
        return EXIT_OK
    a = _read_matrix(ns.a) if ns.a is not None else None
    if a is not None and ns.n is not None and a.shape[0] != ns.n:
        raise ValueError(f"--a is {a.shape[0]}x{a.shape[0]} but --n is {ns.n}")
    structure = get_example(ns.name, n=ns.n, a=a)
    _emit(dump_json(structure.to_json()), ns.output)
    return EXIT_OK


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acmcheck", description="Verify almost contact metric structures.")
    sub = p.add_subparsers(dest="command", required=True)

    run_opts = argparse.ArgumentParser(add_help=False)
    run_opts.add_argument("file", help="manifold definition (JSON)")
    run_opts.add_argument("--samples", type=_positive_int, default=100)
    run_opts.add_argument("--seed", type=int, default=42)
    run_opts.add_argument("--tol", type=float, default=1e-8)
    run_opts.add_argument("--involutivity-tol", type=float, default=1e-5)
    run_opts.add_argument("--threads", type=_positive_int, default=None, help="worker threads (default: all cores)")
    run_opts.add_argument("--format", choices=("json", "text"), default="json")
    run_opts.add_argument("--output", "-o", default=None)

    sub.add_parser("verify", parents=[run_opts], help="full report").set_defaults(func=cmd_verify)
    sub.add_parser("classify", parents=[run_opts], help="class flags only").set_defaults(func=cmd_classify)

    zoo = sub.add_parser("zoo", help="built-in examples")
    zsub = zoo.add_subparsers(dest="zoo_cmd", required=True)
    zsub.add_parser("list")
    emit = zsub.add_parser("emit")
    emit.add_argument("name")
    emit.add_argument("--n", type=_positive_int, default=None)
    emit.add_argument("--a", default=None, help="skew matrix as JSON text or a JSON file")
    emit.add_argument("--output", "-o", default=None)
    zoo.set_defaults(func=cmd_zoo)
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except ManifoldFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ExprError, EvaluationError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
