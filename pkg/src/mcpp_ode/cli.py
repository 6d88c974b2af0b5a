"""Command-line front end: ``mcpp-ode {maxcut,stardisc,validate}``.

Results are emitted as a JSON object or as CSV rows (one per trial plus a
``best`` row).  Exit status is 0 on success, 1 on malformed input or invalid
configuration and 2 on any other failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import Partition
from .maxcut import GSetParseError, informative_t1, read_gset, solve_maxkcut
from .polynomial import random_polynomial_objective
from .solver import AnnealSchedule, StepController, integrate_to_equilibrium, sample_initial
from .stardisc import PointSetError, read_pointset, solve_stardisc
from . import validation as val

TRIAL_FIELDS = ("seed", "value", "steps", "temperatures", "status", "flags")
CSV_FIELDS = ("row",) + TRIAL_FIELDS


class ConfigError(ValueError):
    pass


# RECORDS ==============================================================================

@dataclass
class RunConfig:
    subcommand: str
    instance: str | None = None
    k: int = 2
    trials: int = 100
    seed: int = 0
    t1: float | str | None = None     # "auto": half the critical temperature (maxcut)
    gamma: float = 0.95
    eps0: float = 1e-3
    theta: float | None = None
    rho: float = 1.1
    tol_eq: float = 1e-6
    max_steps: int = 50_000
    max_temps: int = 1000
    size: str | None = None
    temp: float = 1.0
    output: str | None = None
    format: str = "json"

    def validate(self):
        if self.subcommand not in ("maxcut", "stardisc", "validate"):
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.subcommand != "validate" and not self.instance:
            raise ConfigError("an instance path is required")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.rho <= 1:
            raise ConfigError("rho must exceed 1")
        for name in ("trials", "eps0", "tol_eq", "max_steps", "max_temps", "temp"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.t1 == "auto":
            if self.subcommand != "maxcut":
                raise ConfigError("--t1 auto is only available for maxcut")
        elif isinstance(self.t1, str):
            raise ConfigError(f"t1 must be a number or 'auto', got {self.t1!r}")
        for name in ("t1", "theta"):
            v = getattr(self, name)
            if v is not None and v != "auto" and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.subcommand == "maxcut" and self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")


@dataclass
class ResultRecord:
    tool: str
    version: str
    subcommand: str
    instance: str | None
    parameters: dict
    trials: list[dict] = field(default_factory=list)
    best_value: float | None = None
    best_seed: int | None = None
    best_solution: list | None = None
    metrics: dict = field(default_factory=dict)
    timestamp: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        return cls(**d)


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognizable as floats on the way back in
    return s if any(c in s for c in ".e") else s + ".0"


def _to_json(v) -> str:
    if v is None or isinstance(v, (bool, np.bool_)):
        return json.dumps(None if v is None else bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt_float(float(v))
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_to_json(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_to_json(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def emit(record: ResultRecord, fmt: str = "json") -> str:
    """Serialize a record; floats carry 17 significant digits."""
    if fmt == "json":
        return _to_json(asdict(record)) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        cell = lambda x: _fmt_float(float(x)) if isinstance(x, (float, np.floating)) else x
        for t in record.trials:
            w.writerow(["trial"] + [cell(t[f]) if f != "flags" else ";".join(t[f])
                                    for f in TRIAL_FIELDS])
        best = "" if record.best_value is None else _fmt_float(record.best_value)
        w.writerow(["best", "" if record.best_seed is None else record.best_seed, best,
                    "", "", "", ""])
        return buf.getvalue()
    raise ConfigError(f"unknown format {fmt!r}")


def parse_json_record(text: str) -> ResultRecord:
    return ResultRecord.from_dict(json.loads(text))


# RUN ==================================================================================

def _schedule_and_ctrl(cfg: RunConfig, t1_default: float, theta_default: float,
                       t1_auto: float | None = None):
    t1 = t1_default if cfg.t1 is None else t1_auto if cfg.t1 == "auto" else cfg.t1
    sched = AnnealSchedule(t1=t1, gamma=cfg.gamma,
                           eps0=cfg.eps0, max_temps=cfg.max_temps, max_steps=cfg.max_steps,
                           tol_eq=cfg.tol_eq)
    ctrl = StepController(theta=cfg.theta if cfg.theta is not None else theta_default,
                          rho=cfg.rho)
    return sched, ctrl


def _params(cfg: RunConfig, sched=None, ctrl=None) -> dict:
    p = {"trials": cfg.trials, "seed": cfg.seed}
    if sched is not None:
        p.update(t1=sched.t1, gamma=sched.gamma, eps0=sched.eps0, theta=ctrl.theta,
                 rho=ctrl.rho, tol_eq=sched.tol_eq, max_steps=sched.max_steps,
                 max_temps=sched.max_temps)
    return p


def _trial_dicts(reports) -> list[dict]:
    return [{"seed": r.seed, "value": float(r.value), "steps": r.steps,
             "temperatures": r.temperatures, "status": r.status, "flags": list(r.flags)}
            for r in reports]


def _run_maxcut(cfg: RunConfig) -> ResultRecord:
    g = read_gset(cfg.instance)
    auto = informative_t1(g, cfg.k) if cfg.t1 == "auto" else None
    sched, ctrl = _schedule_and_ctrl(cfg, 3.0, 1e-5, auto)
    res = solve_maxkcut(g, cfg.k, cfg.trials, sched, ctrl, cfg.seed)
    params = _params(cfg, sched, ctrl)
    params["k"] = cfg.k
    return ResultRecord("mcpp-ode", __version__, "maxcut", cfg.instance, params,
                        _trial_dicts(res.trials), res.best_cut, res.best_seed,
                        [int(v) for v in res.best_labels])


def _run_stardisc(cfg: RunConfig) -> ResultRecord:
    U = read_pointset(cfg.instance)
    sched, ctrl = _schedule_and_ctrl(cfg, 1e-4, 1e-6 * U.N * U.d)
    res = solve_stardisc(U, cfg.trials, sched, ctrl, cfg.seed)
    return ResultRecord("mcpp-ode", __version__, "stardisc", cfg.instance,
                        _params(cfg, sched, ctrl), _trial_dicts(res.trials), res.value,
                        res.best_seed, [float(v) for v in res.point])


def parse_size(text: str) -> Partition:
    try:
        sizes = tuple(int(t) for t in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"size must look like 2x3x2, got {text!r}")
    try:
        return Partition(sizes)
    except ValueError as e:
        raise ConfigError(str(e))


def _run_validate(cfg: RunConfig) -> ResultRecord:
    if not cfg.size:
        raise ConfigError("validate needs --size, e.g. 2x2")
    part = parse_size(cfg.size)
    rng = np.random.default_rng(cfg.seed)
    obj = random_polynomial_objective(part, rng, degree=2)
    T = cfg.temp
    ctmc = val.build_ctmc(obj, T)
    p = val.stationary_distribution(ctmc)
    eq = integrate_to_equilibrium(sample_initial(part, rng), T, obj, StepController(),
                                  tol_eq=cfg.tol_eq, max_steps=cfg.max_steps)
    cert = val.certify_equilibrium(eq.y, obj, T)
    metrics = {
        "states": ctmc.size,
        "detailed_balance_residual": val.check_detailed_balance(ctmc),
        "stationary_vs_boltzmann": float(np.max(np.abs(p - val.boltzmann_distribution(ctmc)))),
        "mean_field_gap": val.mean_field_gap(eq.y, ctmc),
        "equilibrium_residual": eq.residual,
        "certificate_passed": cert.passed,
        "certificate_eps": cert.eps,
        "rounding_locally_optimal": val.check_local_optimality(cert.y_hat, obj).ok,
    }
    params = {"size": cfg.size, "temp": T, "seed": cfg.seed}
    return ResultRecord("mcpp-ode", __version__, "validate", None, params, metrics=metrics)


def run(cfg: RunConfig, out=None, err=None) -> int:
    """Execute one configuration and write the record; returns the exit status."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        cfg.validate()
        runner = {"maxcut": _run_maxcut, "stardisc": _run_stardisc,
                  "validate": _run_validate}[cfg.subcommand]
        rec = runner(cfg)
        rec.timestamp = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        text = emit(rec, cfg.format)
        if cfg.output:
            Path(cfg.output).write_text(text)
        else:
            out.write(text)
        return 0
    except (ConfigError, GSetParseError, PointSetError, OSError) as e:
        print(f"error: {e}", file=err)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=err)
        return 2


# ARGUMENTS ============================================================================

def _t1_arg(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mcpp-ode", description="Annealed softmax ODE solver for "
                "multiple choice polynomial programs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp_, solver=True):
        sp_.add_argument("--seed", type=int, default=0)
        sp_.add_argument("--output", "-o", help="write here instead of stdout")
        sp_.add_argument("--format", choices=("json", "csv"), default="json")
        sp_.add_argument("--tol-eq", type=float, default=1e-6, help="equilibrium tolerance on ||rhs||_inf")
        sp_.add_argument("--max-steps", type=int, default=50_000, help="step cap per temperature")
        if solver:
            sp_.add_argument("--trials", type=int, default=100)
            sp_.add_argument("--t1", type=_t1_arg, help="initial temperature; 'auto' picks "
                             "half the critical temperature (maxcut only)")
            sp_.add_argument("--gamma", type=float, default=0.95, help="temperature decay")
            sp_.add_argument("--eps0", type=float, default=1e-3, help="rounding tolerance")
            sp_.add_argument("--theta", type=float, help="step error tolerance")
            sp_.add_argument("--rho", type=float, default=1.1, help="step adjust ratio")
            sp_.add_argument("--max-temps", type=int, default=1000)

    mc = sub.add_parser("maxcut", help="MAX-k-CUT on a G-Set file")
    mc.add_argument("instance")
    mc.add_argument("--k", type=int, default=2)
    common(mc)
    sd = sub.add_parser("stardisc", help="star discrepancy lower bound of a point set")
    sd.add_argument("instance")
    common(sd)
    va = sub.add_parser("validate", help="exact CTMC checks on a random small instance")
    va.add_argument("--size", required=True, help="block sizes, e.g. 2x3")
    va.add_argument("--temp", type=float, default=1.0)
    common(va, solver=False)
    return p


def config_from_args(argv=None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    known = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in ns.items() if k in known and v is not None})


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
