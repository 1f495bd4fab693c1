"""Command-line front end.

Each subcommand resolves its parameters from three layers: built-in
defaults, then an INI config file (one section per subcommand), then
flags.  Every value's source is recorded and echoed into the output
artifacts, and stochastic subcommands require an explicit seed: nothing
consults the wall clock or ambient entropy.

Exit codes: 0 success, 1 runtime/data error, 2 usage/parameter error.
"""

from __future__ import annotations

import argparse
import configparser
import difflib
import json
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ensemble, lasso, sweep, theory, witness
from .errors import DataError, ParameterError

PROG = "sparselasso"


@dataclass(frozen=True)
class Opt:
    name: str
    kind: str  # int | float | str | bool | int_list | float_list
    default: object = None
    required: bool = False
    help: str = ""
    choices: Optional[tuple] = None

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


_GEN_OPTS = (
    Opt("n", "int", required=True, help="number of rows"),
    Opt("p", "int", required=True, help="number of columns"),
    Opt("gamma", "float", required=True, help="sparsification level in (0, 1]"),
    Opt("convention", "str", default="standard", choices=ensemble.CONVENTIONS, help="entry variance convention"),
    Opt("seed", "int", required=True, help="matrix seed"),
    Opt("out", "str", help="output path (default: standard output)"),
)

_SOLVE_OPTS = (
    Opt("matrix", "str", required=True, help="serialized matrix path"),
    Opt("y", "str", required=True, help="observation vector path, one value per line"),
    Opt("lam", "float", required=True, help="regularization weight"),
    Opt("tol", "float", default=1e-8, help="convergence tolerance"),
    Opt("max_iter", "int", default=10000, help="sweep cap"),
    Opt("zero_tol", "float", default=1e-8, help="support threshold"),
)

_WITNESS_OPTS = (
    Opt("matrix", "str", required=True, help="serialized matrix path"),
    Opt("k", "int", required=True, help="support size (first k columns)"),
    Opt("beta_min", "float", default=1.0, help="support magnitude"),
    Opt("sign_pattern", "str", default="all_plus", choices=("all_plus", "alternating", "seeded_random"), help="support sign pattern"),
    Opt("sign_seed", "int", help="seed for sign_pattern=seeded_random"),
    Opt("sigma2", "float", default=0.0625, help="noise variance"),
    Opt("noise_seed", "int", required=True, help="noise seed"),
    Opt("lam", "float", required=True, help="regularization weight"),
)

_SWEEP_OPTS = (
    Opt("p_list", "int_list", required=True, help="ambient dimensions, comma separated"),
    Opt("theta_grid", "float_list", required=True, help="control parameter grid, comma separated"),
    Opt("trials", "int", required=True, help="trials per grid point"),
    Opt("base_seed", "int", required=True, help="sweep seed"),
    Opt("sparsity_rule", "str", default="polynomial", choices=sweep.SPARSITY_RULES, help="how k is derived from p"),
    Opt("poly_exponent", "float", default=0.5, help="k = ceil(p^c) for the polynomial rule"),
    Opt("linear_alpha", "float", default=0.125, help="k = ceil(alpha p) for the linear rule"),
    Opt("k_list", "int_list", help="explicit k per p (sparsity_rule=explicit)"),
    Opt("gamma_rule", "str", default="log_over_sqrt", choices=sweep.GAMMA_RULES, help="sparsification schedule"),
    Opt("gamma_value", "float", help="gamma for gamma_rule=constant"),
    Opt("lambda_rule", "str", default="scaled", choices=sweep.LAMBDA_RULES, help="regularization schedule"),
    Opt("lambda_value", "float", help="lambda for lambda_rule=constant"),
    Opt("sigma2", "float", default=0.0625, help="noise variance"),
    Opt("beta_min", "float", default=1.0, help="support magnitude"),
    Opt("mode", "str", default="witness", choices=sweep.MODES, help="trial evaluation mode"),
    Opt("convention", "str", default="rescaled", choices=ensemble.CONVENTIONS, help="matrix ensemble convention"),
    Opt("keep_trials", "bool", default=False, help="retain per-trial records in the JSON output"),
    Opt("out_csv", "str", default="sweep.csv", help="aggregate CSV path"),
    Opt("out_json", "str", help="JSON mirror path (optional)"),
    Opt("threads", "int", default=1, help="worker process cap"),
    Opt("dry_run", "bool", default=False, help="print the resolved grid and exit"),
)

_BOUNDS_OPTS = (
    Opt("seed", "int", required=True, help="sampling seed"),
    Opt("samples", "int", default=100_000, help="Monte Carlo samples per bound"),
)

_CHECK_OPTS = (
    Opt("p_list", "int_list", required=True, help="ambient dimensions, comma separated"),
    Opt("sparsity_rule", "str", default="polynomial", choices=sweep.SPARSITY_RULES, help="how k is derived from p"),
    Opt("poly_exponent", "float", default=0.5, help="k = ceil(p^c) for the polynomial rule"),
    Opt("linear_alpha", "float", default=0.125, help="k = ceil(alpha p) for the linear rule"),
    Opt("k_list", "int_list", help="explicit k per p (sparsity_rule=explicit)"),
    Opt("gamma_rule", "str", default="sixth_root", choices=theory.GAMMA_RULES, help="sparsification schedule"),
    Opt("eps", "float", default=0.0, help="sample-size slack"),
    Opt("beta_min", "float", default=1.0, help="support magnitude"),
)

SUBCOMMANDS = {
    "gen": ("generate and serialize a measurement matrix", _GEN_OPTS),
    "solve": ("solve the Lasso on a matrix and observation file", _SOLVE_OPTS),
    "witness": ("build the recovery witness for a serialized matrix", _WITNESS_OPTS),
    "sweep": ("run a Monte Carlo phase-transition sweep", _SWEEP_OPTS),
    "bounds": ("Monte Carlo domination check of the tail bounds", _BOUNDS_OPTS),
    "check-conditions": ("tabulate schedules and recovery condition scalars", _CHECK_OPTS),
}

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


def _convert(opt: Opt, raw: str, source: str):
    try:
        if opt.kind == "int":
            value = int(raw)
        elif opt.kind == "float":
            value = float(raw)
        elif opt.kind == "bool":
            low = raw.strip().lower()
            if low in _TRUE_WORDS:
                value = True
            elif low in _FALSE_WORDS:
                value = False
            else:
                raise ValueError(f"not a boolean: {raw!r}")
        elif opt.kind == "int_list":
            value = tuple(int(x.strip()) for x in raw.split(",") if x.strip())
        elif opt.kind == "float_list":
            value = tuple(float(x.strip()) for x in raw.split(",") if x.strip())
        else:
            value = raw
    except ValueError as exc:
        raise ParameterError(f"bad value for '{opt.name}' (from {source}): {exc}") from exc
    if opt.choices is not None and value not in opt.choices:
        raise ParameterError(f"'{opt.name}' must be one of {opt.choices}, got {value!r}")
    return value


def _load_file_section(path: str, sub: str, opts: tuple) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ParameterError(f"cannot parse config file {path}: {exc}") from exc
    for section in parser.sections():
        if section not in SUBCOMMANDS:
            raise ParameterError(f"unknown config section [{section}]; valid sections: {', '.join(SUBCOMMANDS)}")
    if not parser.has_section(sub):
        return {}
    valid = {o.name for o in opts}
    out = {}
    for key, raw in parser.items(sub):
        if key not in valid:
            hint = difflib.get_close_matches(key, sorted(valid), n=1)
            suggestion = f"; did you mean '{hint[0]}'?" if hint else ""
            raise ParameterError(f"unknown key '{key}' in [{sub}]{suggestion}")
        out[key] = raw
    return out


def _resolve(sub: str, args: argparse.Namespace) -> tuple[dict, dict]:
    opts = SUBCOMMANDS[sub][1]
    file_vals = _load_file_section(args.config, sub, opts) if args.config else {}
    resolved, provenance = {}, {}
    for opt in opts:
        raw = getattr(args, opt.name)
        if raw is not None:
            resolved[opt.name] = _convert(opt, raw, "flag")
            provenance[opt.name] = "flag"
        elif opt.name in file_vals:
            resolved[opt.name] = _convert(opt, file_vals[opt.name], "file")
            provenance[opt.name] = "file"
        elif opt.required:
            raise ParameterError(f"{sub}: missing required parameter '{opt.name}' (flag {opt.flag} or config key)")
        else:
            resolved[opt.name] = opt.default
            provenance[opt.name] = "default"
    return resolved, provenance


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Lasso signed-support recovery toolkit")
    subs = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    for name, (desc, opts) in SUBCOMMANDS.items():
        sp = subs.add_parser(name, help=desc, description=desc)
        sp.add_argument("--config", help="INI config file; section [%s]" % name)
        for opt in opts:
            if opt.kind == "bool":
                sp.add_argument(opt.flag, dest=opt.name, nargs="?", const="true", default=None, metavar="BOOL", help=opt.help)
            else:
                sp.add_argument(opt.flag, dest=opt.name, default=None, metavar=opt.kind.upper(), help=opt.help)
    return parser


def _json_ready(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, tuple):
        return [_json_ready(v) for v in value]
    return value


def _cmd_gen(cfg: dict, prov: dict) -> int:
    spec = ensemble.EnsembleSpec(n=cfg["n"], p=cfg["p"], gamma=cfg["gamma"], convention=cfg["convention"])
    m = ensemble.sample_matrix(spec, cfg["seed"])
    if cfg["out"] is None:
        ensemble.write_matrix(m, sys.stdout)
    else:
        try:
            with open(cfg["out"], "w") as fh:
                ensemble.write_matrix(m, fh)
        except OSError as exc:
            raise DataError(f"cannot write {cfg['out']}: {exc}") from exc
        print(f"wrote {m.nnz} entries to {cfg['out']}")
    return 0


def _read_matrix_file(path: str) -> ensemble.SparseMeasurementMatrix:
    try:
        with open(path) as fh:
            return ensemble.read_matrix(fh)
    except OSError as exc:
        raise DataError(f"cannot read matrix file {path}: {exc}") from exc


def _cmd_solve(cfg: dict, prov: dict) -> int:
    m = _read_matrix_file(cfg["matrix"])
    try:
        with open(cfg["y"]) as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise DataError(f"cannot read observation file {cfg['y']}: {exc}") from exc
    try:
        y = np.array([float(ln) for ln in lines if ln], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"bad observation file {cfg['y']}: {exc}") from exc
    solution = lasso.solve(
        m,
        y,
        lasso.LassoConfig(lam=cfg["lam"], tol=cfg["tol"], max_iter=cfg["max_iter"], zero_tol=cfg["zero_tol"]),
    )
    out = {
        "beta_hat": solution.beta_hat.tolist(),
        "objective": solution.objective,
        "kkt_residual": solution.kkt_residual,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "config": {k: _json_ready(v) for k, v in cfg.items()},
        "provenance": prov,
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _cmd_witness(cfg: dict, prov: dict) -> int:
    m = _read_matrix_file(cfg["matrix"])
    sig = ensemble.SignalSpec(
        p=m.spec.p,
        k=cfg["k"],
        beta_min=cfg["beta_min"],
        sign_pattern=cfg["sign_pattern"],
        sign_seed=cfg["sign_seed"],
    )
    obs = ensemble.observe(m, ensemble.make_signal(sig), cfg["sigma2"], cfg["noise_seed"])
    report = witness.build(m, sig, obs.w, cfg["lam"])
    out = {
        "invertible": report.invertible,
        "u": _json_ready(report.u),
        "va": _json_ready(report.va),
        "vb": _json_ready(report.vb),
        "event_v": report.event_v,
        "event_u": report.event_u,
        "sign_consistent": report.sign_consistent,
        "success": report.success,
        "margins": None if report.margins is None else dict(report.margins._asdict()),
        "noise_variance": obs.noise_variance,
        "config": {k: _json_ready(v) for k, v in cfg.items()},
        "provenance": prov,
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _sweep_config(cfg: dict) -> sweep.SweepConfig:
    return sweep.SweepConfig(
        p_list=cfg["p_list"],
        theta_grid=cfg["theta_grid"],
        trials=cfg["trials"],
        base_seed=cfg["base_seed"],
        sparsity_rule=cfg["sparsity_rule"],
        poly_exponent=cfg["poly_exponent"],
        linear_alpha=cfg["linear_alpha"],
        k_list=cfg["k_list"],
        gamma_rule=cfg["gamma_rule"],
        gamma_value=cfg["gamma_value"],
        lambda_rule=cfg["lambda_rule"],
        lambda_value=cfg["lambda_value"],
        sigma2=cfg["sigma2"],
        beta_min=cfg["beta_min"],
        mode=cfg["mode"],
        convention=cfg["convention"],
        keep_trials=cfg["keep_trials"],
    )


def _cmd_sweep(cfg: dict, prov: dict) -> int:
    scfg = _sweep_config(cfg)
    if cfg["dry_run"]:
        print("resolved parameters:")
        for key in sorted(cfg):
            print(f"  {key} = {cfg[key]!r}  [{prov[key]}]")
        print("grid:")
        print("  p      theta    k      n      gamma        lambda")
        for pt in sweep.grid_points(scfg):
            clamp = "  (gamma clamped)" if pt.gamma_clamped else ""
            print(f"  {pt.p:<6d} {pt.theta:<8.4g} {pt.k:<6d} {pt.n:<6d} {pt.gamma:<12.6g} {pt.lam:<.6g}{clamp}")
        return 0
    table = sweep.run_sweep(scfg, workers=cfg["threads"])
    if table.trial_records is None:
        extras = {}
    else:
        extras = {"trial_count": len(table.trial_records)}
    sweep_dict = sweep.table_to_dict(table)
    sweep_dict["provenance"] = prov
    sweep.write_outputs(table, cfg["out_csv"], None)
    if cfg["out_json"] is not None:
        try:
            with open(cfg["out_json"], "w") as fh:
                json.dump(sweep_dict, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise DataError(f"cannot write {cfg['out_json']}: {exc}") from exc
    done = f"wrote {cfg['out_csv']}"
    if cfg["out_json"] is not None:
        done += f" and {cfg['out_json']}"
    if extras:
        done += f" ({extras['trial_count']} trial records)"
    print(done)
    return 0


def _cmd_bounds(cfg: dict, prov: dict) -> int:
    checks = theory.run_bound_checks(cfg["seed"], cfg["samples"])
    all_ok = True
    for c in checks:
        params = " ".join(f"{k}={v:g}" for k, v in c.params.items())
        verdict = "PASS" if c.ok else "FAIL"
        all_ok &= c.ok
        print(f"{c.kind:<10s} {params:<28s} bound={c.bound:.6g} estimate={c.estimate:.6g} limit={c.limit:.6g} {verdict}")
    print(f"{'all bounds dominate' if all_ok else 'domination FAILED'} ({cfg['samples']} samples, seed {cfg['seed']})")
    return 0 if all_ok else 1


def _cmd_check_conditions(cfg: dict, prov: dict) -> int:
    p_list = cfg["p_list"]
    if cfg["sparsity_rule"] == "explicit":
        if cfg["k_list"] is None or len(cfg["k_list"]) != len(p_list):
            raise ParameterError("sparsity_rule='explicit' requires k_list matching p_list in length")
    print(f"{'p':>8s} {'k':>6s} {'n':>8s} {'gamma':>10s} {'lambda':>10s} {'q1':>10s} {'q2':>10s} {'q3':>10s} {'snr':>12s}")
    for i, p in enumerate(p_list):
        if cfg["sparsity_rule"] == "polynomial":
            k = int(np.ceil(p ** cfg["poly_exponent"]))
        elif cfg["sparsity_rule"] == "linear":
            k = int(np.ceil(cfg["linear_alpha"] * p))
        else:
            k = cfg["k_list"][i]
        n = theory.required_sample_size(p, k, cfg["eps"])
        gamma, clamped = theory.gamma_schedule(p, k, cfg["gamma_rule"])
        lam = theory.lambda_schedule(n, p, k)
        cond = theory.recovery_conditions(n, p, k, gamma, lam, cfg["beta_min"])
        snr = theory.snr_diagnostic(gamma, n, cfg["beta_min"])
        mark = " *clamped*" if clamped else ""
        print(
            f"{p:>8d} {k:>6d} {n:>8d} {gamma:>10.5g} {lam:>10.5g} "
            f"{cond.q1:>10.5g} {cond.q2:>10.5g} {cond.q3:>10.5g} {snr:>12.6g}{mark}"
        )
    return 0


_HANDLERS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "witness": _cmd_witness,
    "sweep": _cmd_sweep,
    "bounds": _cmd_bounds,
    "check-conditions": _cmd_check_conditions,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        cfg, prov = _resolve(args.subcommand, args)
        return _HANDLERS[args.subcommand](cfg, prov)
    except ParameterError as exc:
        print(f"{PROG} {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"{PROG} {args.subcommand}: error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
