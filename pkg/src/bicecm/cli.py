"""Command-line interface.

Exit codes: 0 success, 1 configuration error, 2 every repetition failed.
"""
import argparse
import json
import logging
import sys

from .experiment import (
    ConfigError,
    load_config_dict,
    run_experiment,
    spec_from_dict,
    write_outputs,
)
from .networks import NAMES, EnumerationRefused, NetworkError, builtin, enumerate_pf, load, save

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED = 0, 1, 2

# flag -> (config section or None, key)
_OVERRIDES = {
    "seed": (None, "seed"),
    "reps": (None, "repetitions"),
    "workers": (None, "workers"),
    "method": (None, "method"),
    "out": (None, "output"),
    "samples": ("engine", "N"),
    "delta_target": ("engine", "delta_tar"),
    "delta_eps": ("engine", "delta_eps"),
    "prior_c": ("engine", "C"),
    "prior_eps": ("engine", "epsilon"),
    "kmax": ("engine", "kmax"),
    "fixed_k": ("engine", "k"),
    "t_max": ("engine", "t_max"),
}


def _model_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--builtin", choices=NAMES, help="built-in network")
    g.add_argument("--network", metavar="FILE", help="network definition file (JSON)")
    p.add_argument("--p0", type=float, help="probability of a zero-capacity edge (benchmarks)")
    p.add_argument("--thr", type=float, help="max-flow threshold (benchmarks)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bicecm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run repeated estimations")
    p.add_argument("--config", metavar="FILE", help="experiment config (YAML)")
    _model_args(p)
    p.add_argument("--method", choices=("bice", "mcs"))
    p.add_argument("--seed", type=int, help="base seed; repetition r uses seed + r")
    p.add_argument("--reps", type=int, help="number of repetitions")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--samples", type=int, help="samples per level (N)")
    p.add_argument("--delta-target", type=float)
    p.add_argument("--delta-eps", type=float)
    p.add_argument("--prior-c", type=float)
    p.add_argument("--prior-eps", type=float)
    p.add_argument("--kmax", type=int, help="select K by BIC over 1..kmax (0 = fixed K)")
    p.add_argument("--fixed-k", type=int, help="number of components in fixed-K mode")
    p.add_argument("--t-max", type=int)
    p.add_argument("--reference", help="'enumerate' or a literal failure probability")
    p.add_argument("--out", metavar="DIR", help="directory for repetitions.csv and summary.json")

    p = sub.add_parser("enumerate", help="exact failure probability by enumeration")
    _model_args(p)

    p = sub.add_parser("export-network", help="write a built-in network as JSON")
    p.add_argument("name", choices=NAMES)
    p.add_argument("--p0", type=float, default=1e-3)
    p.add_argument("--thr", type=float, default=0.0)
    p.add_argument("-o", "--output", required=True, metavar="FILE")
    return parser


def _merge(doc, lines, args):
    doc = dict(doc)
    doc["engine"] = dict(doc.get("engine") or {})
    model = dict(doc.get("model") or {})
    if args.builtin:
        model.pop("file", None)
        model["builtin"] = args.builtin
    if args.network:
        model.pop("builtin", None)
        model["file"] = args.network
    if args.p0 is not None:
        model["p0"] = args.p0
    if args.thr is not None:
        model["thr"] = args.thr
    doc["model"] = model
    for attr, (section, key) in _OVERRIDES.items():
        value = getattr(args, attr)
        if value is None:
            continue
        target = doc if section is None else doc[section]
        target[key] = value
        # Overridden fields no longer have a line in the file.
        lines.pop((key,) if section is None else (section, key), None)
    if args.reference is not None:
        try:
            doc["reference"] = float(args.reference)
        except ValueError:
            doc["reference"] = args.reference
    return doc


def _model_from_args(args):
    if args.network:
        return load(args.network)
    if args.builtin:
        kw = {k: v for k, v in (("p0", args.p0), ("thr", args.thr)) if v is not None}
        return builtin(args.builtin, **kw)
    raise ConfigError(["one of --builtin or --network is required"])


def cmd_run(args) -> int:
    doc, lines = load_config_dict(args.config) if args.config else ({}, {})
    spec = spec_from_dict(_merge(doc, lines, args), lines)
    summary = run_experiment(spec, write=False)
    if spec.output:
        csv_path, json_path = write_outputs(summary, spec.output)
        logging.info("wrote %s and %s", csv_path, json_path)
    print(json.dumps(summary.to_json_dict(), indent=2))
    if summary.failures == len(summary.records):
        for r in summary.records:
            print(f"repetition {r.rep}: {r.error}", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


def cmd_enumerate(args) -> int:
    model = _model_from_args(args)
    try:
        pf = enumerate_pf(model)
    except EnumerationRefused as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(repr(pf))
    return EXIT_OK


def cmd_export(args) -> int:
    save(builtin(args.name, args.p0, args.thr), args.output)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "enumerate": cmd_enumerate, "export-network": cmd_export}
    try:
        return handler[args.command](args)
    except (ConfigError, NetworkError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
