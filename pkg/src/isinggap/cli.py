"""Command-line front end.

Every report is JSON and embeds a manifest (command, parameters, seed,
version, SHA-256 of input files); re-running with the same manifest gives
byte-identical output. Exit codes: 0 ok, 2 usage, 3 size cap exceeded,
4 numerical failure, 5 a computed check failed.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import IsingGapError
from .model import canonicalize, dumps_model, load_model

EXIT_OK, EXIT_USAGE, EXIT_CAP, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4, 5
THREADS_ENV = "ISINGGAP_THREADS"


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(args, inputs=()) -> dict:
    # output locations and the worker count do not affect results
    skip = ("func", "out", "out_dir", "trace", "threads", "command")
    params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {
        "command": args.command,
        "params": params,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "inputs": {str(p): _digest(p) for p in inputs},
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _emit(report: dict, out=None) -> None:
    text = json.dumps(_jsonable(report), indent=1, allow_nan=False)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


# -- subcommands ------------------------------------------------------------

def cmd_gen(args) -> int:
    from .generators import curie_weiss, diluted_sk, sk_model
    from .rng import SeededRng

    inputs = ()
    if args.family == "sk":
        model = sk_model(args.n, args.beta, SeededRng(args.seed))
    elif args.family == "diluted":
        model = diluted_sk(args.n, args.d, args.beta, SeededRng(args.seed))
    elif args.family == "curie-weiss":
        model = curie_weiss(args.n, args.beta, args.h0)
    else:
        if not args.input:
            raise ValueError("family 'file' needs --input")
        model = load_model(args.input)
        inputs = (args.input,)
    text = dumps_model(model, {"manifest": _manifest(args, inputs)}) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_certify(args) -> int:
    from .exact import spectral_gap
    from .influence import MAX_INFLUENCE_N, l2_dobrushin_certificate

    model = load_model(args.model)
    gap = spectral_gap(model, args.method)
    report = {"manifest": _manifest(args, [args.model]), **gap.to_dict()}
    ok = gap.residual <= 1e-9 * max(1, model.n)
    if gap.spread < 1.0:
        report["certificate"] = "1 - spread"
        ok &= gap.passed
    else:
        report["certificate"] = "none"
        report["pass"] = None
    if model.n <= MAX_INFLUENCE_N:
        inf = l2_dobrushin_certificate(model)
        if inf["certified_gap"] is not None:
            inf["pass"] = bool(gap.gap_exact >= inf["certified_gap"] - 1e-9)
            ok &= inf["pass"]
        report["influence"] = inf
    _emit(report, args.out)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_influence(args) -> int:
    from .influence import l2_dobrushin_certificate

    model = load_model(args.model)
    report = {"manifest": _manifest(args, [args.model]), **l2_dobrushin_certificate(model)}
    _emit(report, args.out)
    return EXIT_OK


def cmd_mix(args) -> int:
    from .dynamics import mixing_report

    if not 0.0 < args.eps <= 1.0:
        raise ValueError("--eps must lie in (0, 1]")
    model = load_model(args.model)
    rep = mixing_report(model, args.eps, args.time_model)
    report = {"manifest": _manifest(args, [args.model]), **rep.to_dict()}
    _emit(report, args.out)
    # discrete-time bound is an order bound, reported but not gated
    return EXIT_OK if (rep.passed or args.time_model == "discrete") else EXIT_CHECK


def _localization_inputs(args):
    from .exact import test_function
    from .localization import ControlParams

    model = canonicalize(load_model(args.model)).model
    phi = test_function(args.phi, model)
    params = ControlParams(delta=args.delta, dt=args.dt)
    return model, phi, params


def cmd_localize(args) -> int:
    from .localization import run_localization, write_trace_csv
    from .rng import SeededRng

    model, phi, params = _localization_inputs(args)
    path = run_localization(model, phi, params, SeededRng(args.seed))
    if args.trace:
        write_trace_csv(args.trace, path)
    report = {"manifest": _manifest(args, [args.model]), "path": path.summary(),
              "M0": path.M0, "M_T": path.M_T, "Y0": path.Y0, "Y_T": path.Y_T}
    _emit(report, args.out)
    return EXIT_OK if path.terminated else EXIT_CHECK


def cmd_needle(args) -> int:
    from .localization import needle_decomposition, supermartingale_check, write_trace_csv
    from .rng import SeededRng

    model, phi, params = _localization_inputs(args)
    dec = needle_decomposition(model, phi, args.paths, params, SeededRng(args.seed), workers=_threads(args))
    report = {"manifest": _manifest(args, [args.model]), **dec.to_dict()}
    if args.paths >= 16:
        sm = supermartingale_check(dec)
        report["supermartingale"] = {k: v for k, v in sm.items() if not k.startswith(("mean_", "se_"))}
        report["supermartingale"]["mean_dirichlet"] = sm["mean_dirichlet"]
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for k, p in enumerate(dec.paths):
            write_trace_csv(out / f"path_{k:05d}.csv", p)
        _emit(report, out / "decomposition.json")
    else:
        _emit(report, args.out)
    failed = dec.diagnostics["failed_paths"]
    return EXIT_CHECK if failed > 0.01 * args.paths else EXIT_OK


def cmd_compare_dirichlet(args) -> int:
    from .exact import witness_report

    model = load_model(args.model)
    rep = witness_report(model)
    report = {"manifest": _manifest(args, [args.model]), **rep}
    _emit(report, args.out)
    return EXIT_OK if rep["edge_form_le_n"] else EXIT_CHECK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isinggap", description=__doc__.splitlines()[0],
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker cap (default: ${THREADS_ENV} or 1); results do not depend on it")
    sub = p.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    g = sub.add_parser("gen", help="generate a model file", formatter_class=fmt)
    g.add_argument("family", choices=["sk", "diluted", "curie-weiss", "file"])
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--beta", type=float, default=0.2)
    g.add_argument("--d", type=int, default=3, help="degree for 'diluted'")
    g.add_argument("--h0", type=float, default=0.0, help="uniform field for 'curie-weiss'")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--input", help="model file for family 'file'")
    g.add_argument("--out", help="output path (default stdout)")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("certify", help="exact Glauber gap versus 1 - spread", formatter_class=fmt)
    c.add_argument("model")
    c.add_argument("--method", choices=["auto", "dense", "iterative"], default="auto")
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    i = sub.add_parser("influence", help="l2-Dobrushin influence certificate", formatter_class=fmt)
    i.add_argument("model")
    i.add_argument("--out")
    i.set_defaults(func=cmd_influence)

    m = sub.add_parser("mix", help="exact worst-start mixing time versus the bound", formatter_class=fmt)
    m.add_argument("model")
    m.add_argument("--eps", type=float, default=0.01)
    m.add_argument("--time-model", choices=["continuous", "discrete"], default="continuous")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mix)

    for name, fn, helptext in (("localize", cmd_localize, "one localization path"),
                               ("needle", cmd_needle, "needle decomposition over many paths")):
        s = sub.add_parser(name, help=helptext, formatter_class=fmt)
        s.add_argument("model")
        s.add_argument("--phi", default="magnetization",
                       help="magnetization | coordinate:k | parity | witness | file:<csv>")
        s.add_argument("--dt", type=float, default=1e-3)
        s.add_argument("--delta", type=float, default=1e-2)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out")
        if name == "localize":
            s.add_argument("--trace", help="write the path trace CSV here")
        else:
            s.add_argument("--paths", type=int, default=256)
            s.add_argument("--out-dir", help="write decomposition.json and per-path trace CSVs here")
        s.set_defaults(func=fn)

    w = sub.add_parser("compare-dirichlet", help="witness separating the two Dirichlet forms",
                       formatter_class=fmt)
    w.add_argument("model")
    w.add_argument("--out")
    w.set_defaults(func=cmd_compare_dirichlet)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IsingGapError as exc:
        print(f"isinggap: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, IndexError, OSError) as exc:
        print(f"isinggap: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
