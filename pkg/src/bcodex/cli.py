"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration (nothing is written),
3 a numerical tolerance check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import codes as codes_mod
from .channels import CompletenessError, channel_from_spec
from .cv_shift import (
    four_mode_nullifiers,
    gkp_bin_decoder,
    gkp_flip_probability,
    gkp_repetition_mc,
    logical_action,
    single_mode_detection_ranks,
    transversal_logical_displacement,
    undetectable_weight2_directions,
)
from .fock_core import FockOperator, TruncationError, identity, standard_operator
from .kl import DEFAULT_TOL, kl_matrix
from .recovery import RecoveryError, default_threads, noise_sweep
from .serialize import code_from_dict, code_to_dict, csv_text, dumps, write_text

COMMANDS = ("code", "kl", "sweep", "channel", "gkp-rep", "gkp-bin", "nullifier", "chebyshev")
SWEEP_HEADER = ("chi", "p_logical", "p_physical", "gain")
MC_HEADER = ("sigma", "n_samples", "seed", "residual_var_x", "residual_var_x_stderr",
             "residual_var_p", "residual_var_p_stderr", "wrap_rate")
BIN_HEADER = ("sigma", "n_samples", "seed", "logical_flip_rate", "logical_flip_stderr",
              "analytic_flip_rate")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    code: str | None = None
    params: dict = field(default_factory=dict)
    code_file: str | None = None
    errors: list = field(default_factory=list)
    include_identity: bool = True
    channel: dict | None = None
    grid: list = field(default_factory=list)
    cutoff: int | None = None
    tol: float = DEFAULT_TOL
    seed: int = 0
    sigma: float | None = None
    samples: int = 100000
    D: int | None = None
    support: list = field(default_factory=list)
    q: list = field(default_factory=list)
    threads: int | None = None
    out: str | None = None
    format: str | None = None
    timing: bool = False

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format is None:
            self.format = "csv" if self.command in ("sweep", "gkp-rep", "gkp-bin") else "json"
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.format == "csv" and self.command not in ("sweep", "gkp-rep", "gkp-bin"):
            raise ConfigError(f"{self.command} only writes json")
        if self.threads is None:
            self.threads = default_threads()
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.command in ("code", "kl", "sweep"):
            if (self.code is None) == (self.code_file is None):
                raise ConfigError("give exactly one of --code or --code-file")
            if self.code is not None and self.code not in CODE_BUILDERS:
                raise ConfigError(f"unknown code family {self.code!r}")
        if self.command == "kl":
            for spec in self.errors:
                parse_error_spec(spec)
        if self.command == "sweep":
            if not self.channel or "kind" not in self.channel:
                raise ConfigError("sweep needs --channel")
            if not self.grid:
                raise ConfigError("sweep needs --grid")
            if sorted(self.grid) != list(self.grid):
                raise ConfigError("grid must be sorted")
            for spec in self.errors:
                parse_error_spec(spec)
        if self.command == "channel":
            if not self.channel or "kind" not in self.channel or self.cutoff is None:
                raise ConfigError("channel needs --channel and --cutoff")
        if self.command in ("gkp-rep", "gkp-bin"):
            if self.sigma is None or self.sigma <= 0:
                raise ConfigError("--sigma must be positive")
            if self.samples < 2:
                raise ConfigError("--samples must be >= 2")
        if self.command == "chebyshev":
            if self.D is None or self.D < 0 or not self.support or self.cutoff is None:
                raise ConfigError("chebyshev needs --D, --support and --cutoff")
        return self

    def echo(self) -> dict:
        doc = dataclasses.asdict(self)
        doc.pop("out")
        doc.pop("threads")  # worker count never changes results
        return doc


CODE_BUILDERS = {
    "binomial": lambda p, c: codes_mod.binomial_code(int(p["N"]), int(p["D"]), _need(c)),
    "cat": lambda p, c: codes_mod.cat_code(int(p["N"]), float(p["alpha"]), _need(c)),
    "number_phase": lambda p, c: codes_mod.number_phase_code(int(p["N"]), _need(c)),
    "gkp_approx": lambda p, c: codes_mod.gkp_approx_code(
        float(p["Delta"]), _need(c), p.get("variant", "square_qubit")),
    "dual_rail": lambda p, c: codes_mod.dual_rail_code(),
    "cly2": lambda p, c: codes_mod.cly_code("two_mode"),
    "cly3": lambda p, c: codes_mod.cly_code("three_mode"),
    "trivial": lambda p, c: codes_mod.trivial_code(_need(c)),
}


def _need(cutoff):
    if cutoff is None:
        raise ConfigError("this code family needs --cutoff")
    return int(cutoff)


def parse_error_spec(spec: str):
    """``kind[:order][@mode]`` with kind in I, loss, gain, dephasing, phasor, rotation."""
    body, _, mode = spec.partition("@")
    kind, _, arg = body.partition(":")
    if kind not in ("I", "loss", "gain", "dephasing", "phasor", "rotation"):
        raise ConfigError(f"unknown error spec {spec!r}")
    try:
        mode_i = int(mode) if mode else 0
        if kind == "rotation":
            value = float(arg)
        elif kind == "I":
            value = 0
        else:
            value = int(arg) if arg else 1
    except ValueError as exc:
        raise ConfigError(f"bad error spec {spec!r}") from exc
    return kind, value, mode_i


def error_operator(spec: str, cutoffs) -> FockOperator:
    kind, value, mode = parse_error_spec(spec)
    if kind == "I":
        return identity(cutoffs)
    if kind == "phasor":
        return standard_operator("phasor", cutoffs, mode, value)
    if kind == "rotation":
        return standard_operator("rotation", cutoffs, mode, value)
    base = {"loss": "lower", "gain": "raise", "dephasing": "number"}[kind]
    m = np.linalg.matrix_power(standard_operator(base, cutoffs, mode).matrix, value)
    return FockOperator(cutoffs, m)


def build_code(cfg: RunConfig):
    if cfg.code_file:
        with open(cfg.code_file, encoding="utf-8") as fh:
            return code_from_dict(json.load(fh))
    return CODE_BUILDERS[cfg.code](cfg.params, cfg.cutoff)


# --------------------------------------------------------------- commands

def _cmd_code(cfg):
    code = build_code(cfg)
    errs = [error_operator(s, code.cutoffs) for s in cfg.errors] or None
    fp = codes_mod.code_footprint(code, errs)
    return {"code": code_to_dict(code), "footprint": dataclasses.asdict(fp)}


def _cmd_kl(cfg):
    code = build_code(cfg)
    specs = (["I"] if cfg.include_identity and "I" not in cfg.errors else []) + list(cfg.errors)
    ops = [error_operator(s, code.cutoffs) for s in specs]
    return {"kl": kl_matrix(code, ops, specs, cfg.tol).to_dict()}


def _cmd_sweep(cfg):
    code = build_code(cfg)
    opts = {k: v for k, v in cfg.channel.items() if k not in ("kind", "chi", "sigma")}
    specs = list(cfg.errors)
    if specs and cfg.include_identity and "I" not in specs:
        specs.insert(0, "I")
    errs = [error_operator(s, code.cutoffs) for s in specs] or None
    rows = noise_sweep(code, cfg.channel["kind"], cfg.grid, errs, opts, cfg.threads, cfg.tol)
    return {"header": SWEEP_HEADER,
            "rows": [(r.chi, r.p_logical, r.p_physical, r.gain) for r in rows]}


def _cmd_channel(cfg):
    ch = channel_from_spec(cfg.channel, int(cfg.cutoff))
    return {"channel": {"kind": ch.kind, "chi": ch.chi, "n_kraus": len(ch.kraus),
                        "safe_levels": ch.safe_levels,
                        "completeness_defect": ch.completeness_defect}}


def _cmd_gkp_rep(cfg):
    r = gkp_repetition_mc(cfg.sigma, cfg.samples, cfg.seed, cfg.threads)
    return {"header": MC_HEADER,
            "rows": [(r.sigma, r.n_samples, r.seed, r.residual_var_x, r.residual_var_x_stderr,
                      r.residual_var_p, r.residual_var_p_stderr, r.wrap_rate)],
            "sums": r.sums}


def _cmd_gkp_bin(cfg):
    r = gkp_bin_decoder(cfg.sigma, cfg.samples, cfg.seed, cfg.threads)
    return {"header": BIN_HEADER,
            "rows": [(r.sigma, r.n_samples, r.seed, r.logical_flip_rate, r.logical_flip_stderr,
                      gkp_flip_probability(r.sigma))],
            "sums": r.sums}


def _cmd_nullifier(cfg):
    nul = four_mode_nullifiers()
    weight2 = undetectable_weight2_directions(nul)
    qs = cfg.q or [1.0]
    records = [transversal_logical_displacement(float(q)) for q in qs]
    return {"nullifiers": {
        "rows": nul.rows,
        "single_mode_ranks": single_mode_detection_ranks(nul),
        "undetectable_weight2": [{"direction": v, "logical_action": logical_action(nul, v)}
                                 for v in weight2],
        "distance": 2 if weight2 and all(r == 2 for r in single_mode_detection_ranks(nul)) else None,
        "transversal": [{"q": r.q, "syndrome": r.syndrome, "logical_action": r.logical_action,
                         "passes": r.passes} for r in records],
    }}


def _cmd_chebyshev(cfg):
    res = codes_mod.chebyshev_search(int(cfg.D), cfg.support, int(cfg.cutoff), cfg.seed)
    return {"code": code_to_dict(res.code), "objective": res.objective, "residual": res.residual}


HANDLERS = {"code": _cmd_code, "kl": _cmd_kl, "sweep": _cmd_sweep, "channel": _cmd_channel,
            "gkp-rep": _cmd_gkp_rep, "gkp-bin": _cmd_gkp_bin, "nullifier": _cmd_nullifier,
            "chebyshev": _cmd_chebyshev}


def emit(result: dict, fmt: str, metadata: dict) -> str:
    """Deterministic text for a finished result (stable keys, LF endings)."""
    if fmt == "csv":
        return csv_text(result["header"], result["rows"], metadata)
    doc = dict(result)
    if "header" in doc:
        doc["rows"] = [dict(zip(doc.pop("header"), row)) for row in doc["rows"]]
    doc["metadata"] = metadata
    return dumps(doc)


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        result = HANDLERS[cfg.command](cfg)
    except (ConfigError, KeyError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (CompletenessError, RecoveryError, TruncationError) as exc:
        print(f"error: numerical tolerance failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    metadata = {"config": cfg.echo(), "version": __version__, "command": cfg.command}
    if cfg.timing:
        metadata["wall_time_s"] = time.perf_counter() - start
    text = emit(result, cfg.format, metadata)
    if cfg.out:
        write_text(cfg.out, text)
    else:
        sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------- parsing

def _kv(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {item!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def _floats(text):
    return [float(t) for t in text.split(",") if t] if text else []


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bcodex", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of RunConfig fields; overrides flags")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int, help="worker cap (default $BCODEX_THREADS or 1)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--timing", action="store_true", help="record wall time in the metadata")
    code_args = argparse.ArgumentParser(add_help=False)
    code_args.add_argument("--code", help=f"family: {', '.join(CODE_BUILDERS)}")
    code_args.add_argument("--code-file", help="JSON code document")
    code_args.add_argument("--param", action="append", metavar="KEY=VALUE")
    code_args.add_argument("--cutoff", type=int)
    code_args.add_argument("--errors", nargs="*", default=[],
                           help="error specs kind[:order][@mode], e.g. loss:1 phasor:-2 rotation:0.1")

    s = sub.add_parser("code", parents=[common, code_args], help="build a code and its footprint")
    s = sub.add_parser("kl", parents=[common, code_args], help="Knill-Laflamme report")
    s.add_argument("--no-identity", action="store_true", help="do not prepend the identity error")
    s = sub.add_parser("sweep", parents=[common, code_args], help="noise sweep with coding gain")
    s.add_argument("--no-identity", action="store_true", help="do not prepend the identity error")
    s.add_argument("--channel", required=False, help="channel kind or JSON spec")
    s.add_argument("--grid", help="comma-separated sorted noise strengths")
    s = sub.add_parser("channel", parents=[common], help="build and certify a noise channel")
    s.add_argument("--channel", help="channel kind or JSON spec")
    s.add_argument("--chi", type=float)
    s.add_argument("--ell-max", type=int)
    s.add_argument("--cutoff", type=int)
    for name, text in (("gkp-rep", "GKP repetition shift-correction Monte Carlo"),
                       ("gkp-bin", "single-mode GKP binning decoder Monte Carlo")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--sigma", type=float)
        s.add_argument("--samples", type=int, default=100000)
    s = sub.add_parser("nullifier", parents=[common], help="four-mode nullifier analysis")
    s.add_argument("--q", help="comma-separated transversal displacement amounts")
    s = sub.add_parser("chebyshev", parents=[common], help="Chebyshev-style code search")
    s.add_argument("--D", type=int)
    s.add_argument("--support", help="comma-separated Fock levels")
    s.add_argument("--cutoff", type=int)
    return p


def _channel_arg(text):
    if text is None:
        return None
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    return {"kind": text}


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command)
    cfg.out, cfg.format, cfg.threads = args.out, args.format, args.threads
    cfg.tol, cfg.seed, cfg.timing = args.tol, args.seed, args.timing
    if hasattr(args, "code"):
        cfg.code, cfg.code_file = args.code, args.code_file
        cfg.params = _kv(args.param)
        cfg.errors = list(args.errors)
    if hasattr(args, "cutoff"):
        cfg.cutoff = args.cutoff
    if hasattr(args, "no_identity"):
        cfg.include_identity = not args.no_identity
    if hasattr(args, "channel"):
        cfg.channel = _channel_arg(args.channel)
        if args.command == "channel" and cfg.channel is not None:
            if args.chi is not None:
                cfg.channel.setdefault("sigma" if cfg.channel["kind"] == "displacement" else "chi", args.chi)
            if args.ell_max is not None:
                cfg.channel.setdefault("ell_max", args.ell_max)
    if hasattr(args, "grid"):
        cfg.grid = _floats(args.grid)
    if hasattr(args, "sigma"):
        cfg.sigma, cfg.samples = args.sigma, args.samples
    if hasattr(args, "q"):
        cfg.q = _floats(args.q)
    if hasattr(args, "D"):
        cfg.D = args.D
        cfg.support = [int(v) for v in _floats(args.support)]
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        if doc.get("command", cfg.command) != cfg.command:
            raise ConfigError("config command does not match the subcommand")
        for key, val in doc.items():
            setattr(cfg, key, val)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
