"""Command-line interface.

Exit codes: 0 success, 2 validation failure (and argparse usage errors),
3 identifiability failure, 4 I/O or format error.  Every outcome prints one
JSON object to stdout except ``error``, which prints the bare number.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .completion import CompletionConfig, complete, reconstruct_fibers
from .errors import (
    CompletionError,
    FormatError,
    IdentifiabilityError,
    PatternValidationError,
)
from .harness import ExperimentSpec, median_errors, relative_error, run_sweep
from .io import read_dtns, write_dtns, write_trials_csv
from .patterns import validate_pattern
from .tensor import tt_to_dense


def _json_ready(obj):
    """Recursively convert to plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def _emit(payload):
    print(json.dumps(_json_ready(payload)))


def _ints(text):
    return tuple(int(part) for part in text.split(","))


def _floats(text):
    return tuple(float(part) for part in text.split(","))


def _cmd_complete(args):
    data = read_dtns(args.input, expect="dense")
    pattern = read_dtns(args.pattern, expect="pattern")
    config = CompletionConfig(
        ranks=_ints(args.ranks),
        method=args.method,
        combine=args.combine,
        tol=args.tol,
        validate_first=not args.no_validate,
    )
    tt, diagnostics = complete(data, pattern, config)
    write_dtns(args.output, tt)
    _emit({"output": args.output, "ranks": list(tt.ranks), "diagnostics": diagnostics})
    return 0


def _cmd_reconstruct(args):
    tt = read_dtns(args.tt, expect="tt")
    if (args.input is None) != (args.pattern is None):
        raise ValueError("--input and --pattern must be given together")
    if args.input is not None:
        data = read_dtns(args.input, expect="dense")
        pattern = read_dtns(args.pattern, expect="pattern")
        dense = reconstruct_fibers(tt, pattern, data)
    else:
        dense = tt_to_dense(tt)
    write_dtns(args.output, dense)
    _emit({"output": args.output, "shape": list(dense.shape)})
    return 0


def _cmd_validate(args):
    pattern = read_dtns(args.pattern, expect="pattern")
    report = validate_pattern(pattern, _ints(args.ranks))
    _emit(report.to_dict())
    return 0 if report.overall_valid else 2


def _cmd_synth(args):
    spec = ExperimentSpec(
        shape=_ints(args.shape),
        ranks_true=_ints(args.ranks_true),
        ranks_fit=_ints(args.ranks_fit if args.ranks_fit else args.ranks_true),
        snr_db=_floats(args.snr),
        missing_rate=_floats(args.missing),
        trials=args.trials,
        seed=args.seed,
        method=args.method,
        combine=args.combine,
    )
    results = run_sweep(spec)
    write_trials_csv(args.csv, results, spec.method, spec.combine)
    summary = {
        "csv": args.csv,
        "cells": [
            {"snr_db": snr, "missing_rate": rate, **stats}
            for (snr, rate), stats in sorted(median_errors(results).items())
        ],
    }
    _emit(summary)
    return 0


def _cmd_error(args):
    ref = read_dtns(args.ref, expect="dense")
    est = read_dtns(args.est, expect="dense")
    print(repr(relative_error(ref, est)))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ttfiber",
        description="Tensor-train completion of tensors observed fiber-wise "
        "along the last mode",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complete", help="decompose a masked tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--pattern", required=True)
    p.add_argument("--ranks", required=True, help="comma separated, e.g. 1,3,3,3,4,1")
    p.add_argument("--method", choices=("intersection", "constraint"), default="intersection")
    p.add_argument("--combine", choices=("none", "pairs"), default="none")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--output", required=True)
    p.add_argument("--no-validate", action="store_true")
    p.set_defaults(func=_cmd_complete)

    p = sub.add_parser("reconstruct", help="evaluate a decomposition densely")
    p.add_argument("--tt", required=True)
    p.add_argument("--input")
    p.add_argument("--pattern")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("validate", help="check recovery conditions of a pattern")
    p.add_argument("--pattern", required=True)
    p.add_argument("--ranks", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("synth", help="synthetic sweep, results to CSV")
    p.add_argument("--shape", required=True)
    p.add_argument("--ranks-true", required=True)
    p.add_argument("--ranks-fit")
    p.add_argument("--snr", required=True, help="comma separated dB values, inf allowed")
    p.add_argument("--missing", required=True, help="comma separated rates in [0,1)")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("intersection", "constraint"), default="intersection")
    p.add_argument("--combine", choices=("none", "pairs"), default="none")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("error", help="relative error between two dense files")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.set_defaults(func=_cmd_error)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PatternValidationError as err:
        _emit({"error": type(err).__name__, "message": str(err)})
        return 2
    except IdentifiabilityError as err:
        _emit({"error": type(err).__name__, "message": str(err)})
        return 3
    except (FormatError, OSError) as err:
        _emit({"error": type(err).__name__, "message": str(err)})
        return 4
    except (ValueError, CompletionError) as err:
        _emit({"error": type(err).__name__, "message": str(err)})
        return 2


if __name__ == "__main__":
    sys.exit(main())
