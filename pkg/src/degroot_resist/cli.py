"""Command-line pipeline: generate -> simulate -> perturb -> estimate -> validate, plus rescale and sweep.

Every stage prints one ``key=value`` summary line on stdout as its last line
(values shell-quoted, so ``shlex.split`` parses it); prose goes to stderr.
Exit codes: 0 success, 1 validation failure, 2 input error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import logging
import shlex
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import io
from .core import (
    ConvergenceError,
    check_structure,
    compose_weights,
    consensus_preservation_check,
    consensus_value,
    hull_check,
    max_change,
    rescale,
    simulate,
)
from .estimator import Status, estimate
from .pipeline import SWEEP_COLUMNS, build_network, build_opinions, build_resistance, run_sweep
from .synth import NETWORK, NOISE, OPINIONS, RESISTANCE, derive_seed, perturb

log = logging.getLogger("degroot_resist")

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3


class Outcome:
    """Summary fields accumulated by a stage, rendered as the final stdout line."""

    def __init__(self, command: str):
        self.command = command
        self.code = EXIT_OK
        self.fields: dict[str, object] = {}

    def __setitem__(self, key, value):
        self.fields[key] = value

    def line(self) -> str:
        status = {0: "ok", 1: "validation_failure", 2: "input_error", 3: "numerical_failure"}[self.code]
        parts = [f"command={self.command}", f"status={status}", f"exit={self.code}"]
        for k, v in self.fields.items():
            if isinstance(v, float):
                v = io.fmt(v)
            elif isinstance(v, (list, tuple, np.ndarray)):
                v = ";".join(io.fmt(float(x)) for x in v)
            parts.append(f"{k}={shlex.quote(str(v))}")
        return " ".join(parts)


def _out(cfg: io.RunConfig, default_name: str) -> Path:
    if cfg.output:
        path = Path(cfg.output)
    else:
        path = Path(cfg.out_dir) / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _trajectory_in(cfg: io.RunConfig):
    path = cfg.trajectory or str(Path(cfg.out_dir) / "trajectory.csv")
    return io.read_trajectory(path)


def cmd_generate(cfg: io.RunConfig, out: Outcome) -> None:
    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    c = build_network(cfg)
    d = build_resistance(cfg, c.n)
    x0 = build_opinions(cfg, c.n)
    files = {"network": "network.txt", "resistance": "resistance.csv", "opinions": "opinions.csv"}
    io.write_network(c, outdir / files["network"])
    io.write_resistance(d, outdir / files["resistance"])
    io.write_opinions(x0, outdir / files["opinions"])
    cfg_dict = asdict(cfg)
    cfg_dict["sweep_sigmas"] = list(cfg.sweep_sigmas)
    cfg_dict["sweep_lengths"] = list(cfg.sweep_lengths)
    io.write_manifest(
        {
            "run_seed": cfg.seed,
            "derived_seeds": {
                name: derive_seed(cfg.seed, idx)
                for name, idx in (("network", NETWORK), ("resistance", RESISTANCE), ("opinions", OPINIONS), ("noise", NOISE))
            },
            "files": files,
            "config": cfg_dict,
        },
        outdir / "manifest.json",
    )
    log.info("wrote network, resistance, opinions and manifest to %s", outdir)
    out["n"] = c.n
    out["m"] = x0.m
    out["seed"] = cfg.seed
    out["irreducible"] = str(check_structure(c).irreducible).lower()
    out["out_dir"] = str(outdir)


def cmd_simulate(cfg: io.RunConfig, out: Outcome) -> None:
    c = build_network(cfg)
    d = build_resistance(cfg, c.n)
    x0 = build_opinions(cfg, c.n)
    tr = simulate(c, d, x0, steps=cfg.steps, tol=cfg.tol, max_steps=cfg.max_steps)
    path = _out(cfg, "trajectory.csv")
    io.write_trajectory(tr, path)
    change = max_change(tr)
    converged = cfg.tol is not None and change < cfg.tol
    out["steps"] = tr.steps
    out["final_change"] = change
    out["converged"] = str(converged).lower()
    if converged and check_structure(c).irreducible:
        out["consensus"] = consensus_value(compose_weights(c, d), x0)
    out["output"] = str(path)
    log.info("simulated %d steps; final max change %.3g", tr.steps, change)


def cmd_perturb(cfg: io.RunConfig, out: Outcome) -> None:
    tr = perturb(_trajectory_in(cfg), cfg.sigma, derive_seed(cfg.seed, NOISE))
    path = _out(cfg, "trajectory_noisy.csv")
    io.write_trajectory(tr, path)
    out["sigma"] = cfg.sigma
    out["output"] = str(path)


def cmd_estimate(cfg: io.RunConfig, out: Outcome) -> None:
    tr = _trajectory_in(cfg)
    c = build_network(cfg)
    report = estimate(c, tr, cfg.epsilon, cfg.mode)
    path = _out(cfg, "report.csv")
    io.write_report(report, path)
    out["mode"] = cfg.mode
    out["estimates"] = len(report)
    for s in Status:
        out[f"n_{s.value}"] = report.count(s)
    if cfg.mode == "varying":
        out["misfit_nodes"] = len(report.misfit_nodes)
    if cfg.resistance is not None and cfg.mode == "static":
        truth = io.read_resistance(cfg.resistance).d
        vals = report.values
        ok = ~np.isnan(vals)
        if ok.any():
            out["max_abs_error"] = float(np.max(np.abs(vals[ok] - truth[ok])))
    out["output"] = str(path)
    if report.n_out_of_range:
        log.warning("%d estimate(s) fall outside (0, 1)", report.n_out_of_range)
        out.code = EXIT_VALIDATION
    elif report.estimates and report.count(Status.DEGENERATE) == len(report):
        log.warning("every node is degenerate: opinions never differ from the social term")
    elif not report.estimates:
        log.warning("no usable samples: estimate table is empty")


def cmd_validate(cfg: io.RunConfig, out: Outcome) -> None:
    tr = _trajectory_in(cfg)
    hull = hull_check(tr, cfg.validate_tol)
    cons = consensus_preservation_check(tr, cfg.validate_tol)
    rows = []
    for k in range(tr.m):
        bad = [v for v in hull.violations if v.column == k]
        rows.append({
            "check": "hull",
            "column": k,
            "applicable": "true",
            "ok": str(not bad).lower(),
            "violations": len(bad),
            "max_magnitude": max((v.magnitude for v in bad), default=0.0),
        })
    for k in range(tr.m):
        applies = k in cons.consensus_columns
        dev = float(np.max(np.abs(tr.states[:, :, k] - tr.states[0, :, k]))) if applies else 0.0
        ok = dev <= cfg.validate_tol
        rows.append({
            "check": "consensus",
            "column": k,
            "applicable": str(applies).lower(),
            "ok": str(ok).lower(),
            "violations": int(not ok),
            "max_magnitude": dev,
        })
    path = _out(cfg, "validation.csv")
    io.write_table(rows, path)
    for v in hull.violations[:10]:
        log.warning("hull violation t=%d node=%d column=%d by %.3g", v.t, v.node, v.column, v.magnitude)
    out["hull_violations"] = len(hull.violations)
    out["consensus_columns"] = len(cons.consensus_columns)
    out["consensus_preserved"] = str(cons.preserved).lower()
    out["output"] = str(path)
    if not hull.ok or not cons.preserved:
        out.code = EXIT_VALIDATION


def cmd_rescale(cfg: io.RunConfig, out: Outcome) -> None:
    tr = rescale(_trajectory_in(cfg), cfg.alpha, cfg.beta)
    path = _out(cfg, "trajectory_rescaled.csv")
    io.write_trajectory(tr, path)
    out["alpha"] = cfg.alpha
    out["beta"] = cfg.beta
    out["output"] = str(path)


def cmd_sweep(cfg: io.RunConfig, out: Outcome) -> None:
    rows = run_sweep(cfg)
    path = _out(cfg, "sweep.csv")
    io.write_table(rows, path, SWEEP_COLUMNS)
    out["cells"] = len(rows)
    out["output"] = str(path)


COMMANDS: dict[str, Callable[[io.RunConfig, Outcome], None]] = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "perturb": cmd_perturb,
    "estimate": cmd_estimate,
    "validate": cmd_validate,
    "rescale": cmd_rescale,
    "sweep": cmd_sweep,
}

HELP = {
    "generate": "write a network, resistances, initial opinions and a manifest",
    "simulate": "run the DeGroot process and write the trajectory",
    "perturb": "add gaussian observation noise to a trajectory",
    "estimate": "recover resistances from a trajectory and the network",
    "validate": "check hull containment and consensus preservation",
    "rescale": "apply alpha * x + beta to a trajectory",
    "sweep": "noise x trajectory-length robustness table",
    "run": "run the stage named by `operation` in the config",
    "config-reference": "print every config key with its default",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML run config; flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    for f in fields(io.RunConfig):
        p.add_argument(
            "--" + f.name.replace("_", "-"),
            dest=f.name,
            default=argparse.SUPPRESS,
            metavar=f.name.upper(),
            help=f.metadata["help"],
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degroot-resist",
        description="DeGroot opinion dynamics and scale-free resistance estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        if name != "config-reference":
            _add_config_flags(p)
    return parser


def load_config(args: argparse.Namespace) -> io.RunConfig:
    explicit: set[str] = set()
    cfg = io.RunConfig()
    if getattr(args, "config", None):
        cfg, explicit = io.read_config_with_keys(args.config)
    overrides = {}
    for f in fields(io.RunConfig):
        if f.name in vars(args):
            overrides[f.name] = io.coerce_value(f.name, getattr(args, f.name))
    cfg = cfg.replace(**overrides)
    return io.validate_config(cfg, explicit | set(overrides))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "config-reference":
        sys.stdout.write(io.config_reference())
        return EXIT_OK

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s: %(message)s",
        force=True,
    )
    out = Outcome(args.command)
    try:
        cfg = load_config(args)
        name = args.command
        if name == "run":
            if cfg.operation is None:
                raise io.ConfigError("`run` needs operation = <stage> in the config")
            name = cfg.operation
            out.command = name
        COMMANDS[name](cfg, out)
    except ConvergenceError as exc:
        log.error("%s", exc)
        out.code = EXIT_NUMERICAL
        out["error"] = str(exc)
    except FloatingPointError as exc:
        log.error("%s", exc)
        out.code = EXIT_NUMERICAL
        out["error"] = str(exc)
    except (ValueError, KeyError, OSError) as exc:
        log.error("%s", exc)
        out.code = EXIT_INPUT
        out["error"] = str(exc)
    print(out.line())
    return out.code


if __name__ == "__main__":
    sys.exit(main())
