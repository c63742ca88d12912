"""Command-line surface tying the engines together.

Subcommands: cap, scan, frakc, verify, classify, truthtable.  Parameters
come from flags or from a --config file (TOML, with JSON fallback by
extension); unknown config keys are rejected.  Exit codes: 0 success,
2 configuration error, 3 certification failure, 4 engine non-convergence.

All file output is atomic and deterministic: identical configs produce
byte-identical CSV/JSON.  Probe sampling is seeded from --seed (default 0).
The CAPLAB_THREADS environment variable caps scan parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
import tomllib

import numpy as np

from . import classifier, grid, radial, reports, verifier
from .errors import (ArgumentError, CalibrationError, CaplabError,
                     ConfigError, ParameterRangeError)
from .operators import WeightField, weight_field_from_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERTIFICATION = 3
EXIT_NONCONVERGENCE = 4


def _load_config(path: str) -> dict:
    try:
        if path.endswith(".json"):
            with open(path) as fh:
                return json.load(fh)
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}")


def _merge_config(args, keys: dict) -> dict:
    """Config file values, overridden by any explicitly set flags."""
    cfg = {}
    if getattr(args, "config", None):
        file_cfg = _load_config(args.config)
        unknown = set(file_cfg) - set(keys)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key, conv in keys.items():
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = conv(val)
    return cfg


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        reports.write_text_atomic(args.out, text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _weight_from(cfg: dict) -> WeightField:
    block = {"kind": cfg.get("weight", "radial_power"), "n": cfg["n"]}
    if block["kind"] == "radial_power":
        block["sigma"] = cfg.get("sigma", 0.0)
    return weight_field_from_config(block)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

_CAP_KEYS = {"n": int, "p": float, "sigma": float, "rin": float, "rout": float,
             "weight": str, "engine": str, "spacing": float, "max_iters": int}


def cmd_cap(args) -> int:
    cfg = _merge_config(args, _CAP_KEYS)
    for key in ("n", "p", "rin", "rout"):
        if key not in cfg:
            raise ConfigError(f"cap requires --{key}")
    fld = _weight_from(cfg)
    engine = cfg.get("engine", "radial")
    if engine == "radial":
        res = radial.radial_capacity(cfg["n"], cfg["p"], fld, cfg["rin"], cfg["rout"])
    elif engine == "discrete":
        spacing = cfg.get("spacing", cfg["rin"] / 16.0)
        prob = grid.build_annulus_problem(fld, cfg["p"], cfg["rin"], cfg["rout"], spacing)
        opts = grid.DescentOptions(max_iters=cfg.get("max_iters", 50_000))
        res = grid.discrete_capacity(prob, opts)
    else:
        raise ConfigError(f"unknown engine {engine!r} (radial|discrete)")
    _emit(args, reports.dumps_json(reports.capacity_result_to_dict(res)) + "\n")
    return EXIT_OK if res.converged else EXIT_NONCONVERGENCE


_SCAN_KEYS = {"n": int, "p": float, "sigma": float, "weight": str,
              "rmin": float, "rmax": float, "points": int, "ratio": float}


def cmd_scan(args) -> int:
    cfg = _merge_config(args, _SCAN_KEYS)
    for key in ("n", "p"):
        if key not in cfg:
            raise ConfigError(f"scan requires --{key}")
    fld = _weight_from(cfg)
    R_list = radial.default_r_sweep(cfg.get("rmin", 10.0), cfg.get("rmax", 1e4),
                                    cfg.get("points", 13))
    seq = radial.capacity_scan(cfg["n"], cfg["p"], fld, R_list,
                               ratio=cfg.get("ratio", 0.5))
    return _emit_sweep(args, seq)


_FRAKC_KEYS = {"n": int, "sigma": float, "weight": str, "q": float, "nu": float,
               "rmin": float, "rmax": float, "points": int}


def cmd_frakc(args) -> int:
    cfg = _merge_config(args, _FRAKC_KEYS)
    for key in ("n", "q"):
        if key not in cfg:
            raise ConfigError(f"frakc requires --{key}")
    fld = _weight_from(cfg)
    nu = cfg.get("nu", classifier.default_nu(cfg["q"]))
    R_list = radial.default_r_sweep(cfg.get("rmin", 10.0), cfg.get("rmax", 1e4),
                                    cfg.get("points", 13))
    seq = radial.frak_c_scan(cfg["n"], fld, cfg["q"], nu, R_list)
    return _emit_sweep(args, seq)


def _emit_sweep(args, seq) -> int:
    if args.out_csv:
        reports.write_text_atomic(args.out_csv, reports.sequence_to_csv(seq))
    fit = None
    if all(v > 0 for v in seq.values):
        fit = radial.fit_log_slope(seq)
    payload = {"sequence": reports.sequence_to_dict(seq),
               "fit": reports.slope_fit_to_dict(fit) if fit else None}
    _emit(args, reports.dumps_json(payload) + "\n")
    if args.svg:
        reports.svg_loglog_plot(args.svg, seq.radii, seq.values, fit=fit,
                                title="capacity sweep")
    return EXIT_OK


_VERIFY_KEYS = {"example": str, "n": int, "q": float, "sigma": float,
                "mu": float, "alpha": str}


def cmd_verify(args) -> int:
    cfg = _merge_config(args, _VERIFY_KEYS)
    for key in ("example", "n", "sigma"):
        if key not in cfg:
            raise ConfigError(f"verify requires --{key}")
    kind = f"example{cfg['example']}"
    q = cfg.get("q", 1.0 if kind == "example7" else None)
    if q is None:
        raise ConfigError("verify requires --q for this family")
    alpha_raw = cfg.get("alpha", "auto")
    auto = alpha_raw == "auto"
    alpha = 1.0 if auto else float(alpha_raw)
    pair = verifier.template_pair(kind, cfg["n"], q, cfg["sigma"],
                                  mu=cfg.get("mu"), alpha=alpha)
    report = verifier.certify(pair, auto_alpha=auto)
    _emit(args, reports.dumps_json(report) + "\n")
    return EXIT_OK if report["passed"] else EXIT_CERTIFICATION


_CLASSIFY_KEYS = {"n": int, "q": float, "sigma": float}


def cmd_classify(args) -> int:
    cfg = _merge_config(args, _CLASSIFY_KEYS)
    for key in ("n", "q", "sigma"):
        if key not in cfg:
            raise ConfigError(f"classify requires --{key}")
    verdict = classifier.classify_model(cfg["n"], cfg["q"], cfg["sigma"])
    payload = reports.verdict_to_dict(verdict)
    if args.check_capacity:
        seqs = classifier.model_capacity_sequences(cfg["n"], cfg["q"], cfg["sigma"])
        payload["capacity"] = reports.verdict_to_dict(
            classifier.classify_capacity(seqs, cfg["q"]))
    _emit(args, reports.dumps_json(payload) + "\n")
    return EXIT_OK


def cmd_truthtable(args) -> int:
    rows = classifier.model_truth_table(with_capacity=args.check_capacity)
    _emit(args, reports.truth_table_to_csv(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caplab",
        description="Weighted condenser capacities, scaling sweeps, "
                    "solution-pair certification, regime classification.")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for sampling probes (default 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="TOML (or .json) parameter file")
        p.add_argument("--out", help="write the JSON/CSV report here (atomic)")
        p.set_defaults(fn=fn)
        return p

    p = add("cap", cmd_cap, "capacity of one condenser")
    for flag, typ in (("--n", int), ("--p", float), ("--sigma", float),
                      ("--rin", float), ("--rout", float), ("--spacing", float),
                      ("--max-iters", int)):
        p.add_argument(flag, type=typ, dest=flag.lstrip("-").replace("-", "_"))
    p.add_argument("--weight", choices=["radial_power", "identity", "zero"])
    p.add_argument("--engine", choices=["radial", "discrete"])

    for name, fn, helptext in (("scan", cmd_scan, "capacity sweep over R with slope fit"),
                               ("frakc", cmd_frakc, "composite capacity product sweep")):
        p = add(name, fn, helptext)
        for flag, typ in (("--n", int), ("--p", float), ("--sigma", float),
                          ("--q", float), ("--nu", float), ("--rmin", float),
                          ("--rmax", float), ("--points", int), ("--ratio", float)):
            if name == "frakc" and flag in ("--p", "--ratio"):
                continue
            if name == "scan" and flag in ("--q", "--nu"):
                continue
            p.add_argument(flag, type=typ, dest=flag.lstrip("-"))
        p.add_argument("--weight", choices=["radial_power", "identity", "zero"])
        p.add_argument("--out-csv", dest="out_csv", help="write the (R, value) CSV here")
        p.add_argument("--svg", help="write a log-log plot here")

    p = add("verify", cmd_verify, "certify a counterexample family instance")
    p.add_argument("--example", choices=["2", "4", "5", "7"])
    for flag, typ in (("--n", int), ("--q", float), ("--sigma", float), ("--mu", float)):
        p.add_argument(flag, type=typ, dest=flag.lstrip("-"))
    p.add_argument("--alpha", default=None,
                   help="free constant, or 'auto' to calibrate (default)")

    p = add("classify", cmd_classify, "regime verdict for (n, q, sigma)")
    for flag in ("--n", "--q", "--sigma"):
        p.add_argument(flag, type=float if flag != "--n" else int,
                       dest=flag.lstrip("-"))
    p.add_argument("--check-capacity", action="store_true", dest="check_capacity",
                   help="also run the capacity rules on engine sweeps")

    p = add("truthtable", cmd_truthtable, "canonical 20-point regime battery as CSV")
    p.add_argument("--check-capacity", action="store_true", dest="check_capacity",
                   help="add capacity-rule verdicts from engine sweeps")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed)  # probe sampling fallback; engines pass RNGs explicitly
    try:
        return args.fn(args)
    except (ConfigError, ArgumentError) as exc:
        print(f"caplab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CalibrationError, ParameterRangeError) as exc:
        print(f"caplab: certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except CaplabError as exc:
        print(f"caplab: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
