"""Command-line front end.

Subcommands: measure-pre, measure-post, classify, sweep, game,
counterexample, verify.  Reports are JSON (CSV for sweeps) with the fully
resolved run configuration embedded, and identical configurations produce
byte-identical output.

Exit codes: 0 success, 1 parse error, 2 dimension/validation error,
3 solver failure.  Errors print one JSON line on stderr.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import channels as ch
from . import measures as ms
from . import search as se
from . import sdp as sdpmod
from . import verify as verifymod
from .errors import SolverFailure, ValidationError


class _ParseError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ParseError(message)


@dataclass
class RunConfig:
    command: str
    channel_uri: str = ""
    lam: float = 0.5
    phi: list = field(default_factory=lambda: [2.0 * np.pi / 3.0, 0.0])
    tol: float = 1e-8
    seed: int = 0
    threads: int = 1
    output_path: str = ""
    format: str = "json"
    full_sign_enumeration: bool = False
    lambdas: list = field(default_factory=list)
    p1_steps: int = 51
    trials: int = 100000
    samples: int = 2000

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError("lambda must lie in [0, 1]")
        if self.tol <= 0.0:
            raise ValidationError("tol must be positive")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if self.format not in ("json", "csv"):
            raise ValidationError(f"unknown format {self.format!r}")


def _parse_reals(text):
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise _ParseError(f"expected comma-separated reals, got {text!r}") from exc


def _resolve_channel(uri):
    if os.path.exists(uri):
        return ch.load_channel(uri)
    return ch.from_uri(uri)


def _complex_matrix_json(m):
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(m)]


def _emit(cfg, payload):
    if cfg.format == "csv":
        text = payload
    else:
        text = json.dumps({"config": asdict(cfg), "result": payload}, sort_keys=True,
                          indent=2) + "\n"
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _cmd_measure_pre(cfg):
    theta = _resolve_channel(cfg.channel_uri)
    game = ms.GameConfig(cfg.lam, np.asarray(cfg.phi))
    mode = "full" if cfg.full_sign_enumeration else "auto"
    rep = sdpmod.preprocessed_improvement(
        theta, game, sign_enumeration=mode, gap_tol=cfg.tol, threads=cfg.threads
    )
    return {
        "value": rep.value,
        "trace_norm": rep.trace_norm,
        "success_probability": ms.success_probability(rep.value, game),
        "per_sign_values": rep.per_sign_values,
        "sign_vectors": [list(s) for s in rep.sign_vectors],
        "verification_residual": rep.verification_residual,
        "sigma_diag": [float(x) for x in rep.sigma_diag],
        "rho_opt": _complex_matrix_json(rep.rho_opt),
        "phi_opt": ch.channel_to_dict(rep.phi_opt),
        "x_opt": _complex_matrix_json(rep.x_opt),
    }


def _cmd_measure_post(cfg):
    theta = _resolve_channel(cfg.channel_uri)
    game = ms.GameConfig(cfg.lam, np.asarray(cfg.phi))
    budget = se.SearchBudget(random_samples=cfg.samples, rng_seed=cfg.seed)
    value = se.postprocessed_improvement_lower(theta, game, budget, gap_tol=cfg.tol)
    return {
        "value": value,
        "lower_bound": True,
        "success_probability_at_least": ms.success_probability(max(value, 0.0), game),
    }


def _cmd_classify(cfg):
    theta = _resolve_channel(cfg.channel_uri)
    return {
        "cptp": ch.is_cptp(theta, cfg.tol),
        "detection_incoherent": ch.is_detection_incoherent(theta, cfg.tol),
        "mio": ch.is_mio(theta, cfg.tol),
    }


def _cmd_sweep(cfg):
    lambdas = cfg.lambdas if cfg.lambdas else [cfg.lam]
    p1_values = np.linspace(0.0, 1.0, cfg.p1_steps)
    mode = "full" if cfg.full_sign_enumeration else "auto"
    rows = se.mixture_sweep(lambdas, p1_values, cfg.phi, threads=cfg.threads,
                            sign_enumeration=mode, gap_tol=cfg.tol)
    if cfg.format == "csv":
        lines = ["lambda,p1,M"]
        for lam, p1, value in rows:
            lines.append(f"{lam:.12g},{p1:.12g},{value:.12g}")
        return "\n".join(lines) + "\n"
    return {"rows": [[lam, p1, value] for lam, p1, value in rows]}


def _cmd_game(cfg):
    theta = _resolve_channel(cfg.channel_uri)
    game = ms.GameConfig(cfg.lam, np.asarray(cfg.phi))
    rep = sdpmod.preprocessed_improvement(theta, game, gap_tol=cfg.tol, threads=cfg.threads)
    s0 = ch.apply(theta, ch.apply(rep.phi_opt, rep.rho_opt))
    s1 = ch.apply(theta, ch.apply(rep.phi_opt,
                                  ch.apply(ch.phase_channel(game.phi), rep.rho_opt)))
    povm = ms.optimal_incoherent_povm(game, s0, s1)
    tr = se.monte_carlo_game(theta, rep.phi_opt, rep.rho_opt, povm, game,
                             cfg.trials, cfg.seed)
    return {
        "trials": tr.trials,
        "successes": tr.successes,
        "empirical_rate": tr.empirical_rate,
        "predicted_rate": tr.predicted_rate,
        "z_score": tr.z_score,
        "measure_value": rep.value,
    }


def _cmd_counterexample(cfg):
    budget = se.SearchBudget(random_samples=cfg.samples, rng_seed=cfg.seed)
    before, after = se.swap_monotonicity_counterexample(budget)
    return {"l_before": before, "l_after": after}


def _cmd_verify(cfg):
    results = verifymod.run_all(seed=cfg.seed)
    for r in results:
        sys.stderr.write(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: {r['detail']}\n")
    all_passed = all(r["passed"] for r in results)
    if not all_passed:
        raise ValidationError("invariant suite reported failures")
    return {"checks": results, "all_passed": all_passed}


_COMMANDS = {
    "measure-pre": _cmd_measure_pre,
    "measure-post": _cmd_measure_post,
    "classify": _cmd_classify,
    "sweep": _cmd_sweep,
    "game": _cmd_game,
    "counterexample": _cmd_counterexample,
    "verify": _cmd_verify,
}


def run(cfg):
    """Execute a resolved RunConfig; returns the process exit code."""
    try:
        payload = _COMMANDS[cfg.command](cfg)
        _emit(cfg, payload)
        return 0
    except SolverFailure as exc:
        sys.stderr.write(json.dumps({"exit_code": 3, "error": str(exc),
                                     "status": exc.status}) + "\n")
        return 3
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"exit_code": 2, "error": str(exc)}) + "\n")
        return 2


def _build_parser():
    parser = _Parser(prog="dyncoh", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--channel", default="", help="file path or built-in URI")
        p.add_argument("--lambda", dest="lam", type=float, default=0.5)
        p.add_argument("--phi", default="2.0943951023931953,0",
                       help="comma-separated phases in radians")
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", dest="output_path", default="")
        p.add_argument("--format", default="csv" if name == "sweep" else "json",
                       choices=("json", "csv"))
        p.add_argument("--full-sign-enumeration", action="store_true",
                       help="solve every sign program, no analytic shortcut")
        if name == "sweep":
            p.add_argument("--lambdas", default="", help="comma-separated priors")
            p.add_argument("--p1-steps", dest="p1_steps", type=int, default=51)
        if name == "game":
            p.add_argument("--trials", type=int, default=100000)
        if name in ("measure-post", "counterexample"):
            p.add_argument("--samples", type=int, default=2000)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        kwargs = {
            "command": ns.command,
            "channel_uri": ns.channel,
            "lam": ns.lam,
            "phi": _parse_reals(ns.phi),
            "tol": ns.tol,
            "seed": ns.seed,
            "threads": ns.threads,
            "output_path": ns.output_path,
            "format": ns.format,
            "full_sign_enumeration": ns.full_sign_enumeration,
        }
        if hasattr(ns, "lambdas"):
            kwargs["lambdas"] = _parse_reals(ns.lambdas) if ns.lambdas else []
            kwargs["p1_steps"] = ns.p1_steps
        if hasattr(ns, "trials"):
            kwargs["trials"] = ns.trials
        if hasattr(ns, "samples"):
            kwargs["samples"] = ns.samples
        cfg = RunConfig(**kwargs)
    except _ParseError as exc:
        sys.stderr.write(json.dumps({"exit_code": 1, "error": str(exc)}) + "\n")
        return 1
    except ValidationError as exc:
        sys.stderr.write(json.dumps({"exit_code": 2, "error": str(exc)}) + "\n")
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
