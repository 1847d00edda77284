"""Command-line front end.

Exit codes: 0 analysis ran (whatever the verdict), 1 internal error,
2 usage error, 3 program lex/parse error, 4 protocol or configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

from . import density as dens
from .dsl import BUILTINS, builtin, compile_index_set, compile_program, compile_target, evaluate
from .dsl.evaluate import EvalError
from .errors import ConfigurationError, DSLError, NotCauchyError, ThresholdError
from .repair import repair_pipeline
from .report import checkpoint_rows, emit_report, number
from .rough import (
    RoughParams,
    SequenceView,
    bad_index_set,
    check_grid,
    combine_verdicts,
    map_points,
    minimal_roughness,
    pointwise_report,
    rough_cauchy_verdict,
    target_value,
)

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_DSL, EXIT_CONFIG = 0, 1, 2, 3, 4
DEFAULT_GRID = "0:1:0.1"
DEFAULT_CHECKPOINTS = "1000,10000,100000,1000000"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    program_source: str | None = None
    builtin_name: str | None = None
    target_source: str | None = None
    grid: list[float] = field(default_factory=list)
    r: float = 0.0
    eps: float = 0.01
    protocol: dens.AnalysisProtocol = dens.DEFAULT_PROTOCOL
    max_index: int | None = None
    fmt: str = "json"
    out: str | None = None
    jobs: int = 1
    extra: dict = field(default_factory=dict)


# ------------------------------------------------------------------ flags


def _finite(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return value


def _count(text: str) -> int:
    try:
        d = Decimal(text.strip())
    except InvalidOperation:
        raise UsageError(f"not an integer: {text!r}") from None
    if not d.is_finite() or d != d.to_integral_value():
        raise UsageError(f"not an integer: {text!r}")
    return int(d)


def parse_grid(spec: str) -> list[float]:
    """Expand "start:stop:step" or "a,b,c" into a strictly increasing list."""
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise UsageError(f"grid range must be start:stop:step, got {spec!r}")
            start, stop, step = (Decimal(p.strip()) for p in parts)
            if not all(v.is_finite() for v in (start, stop, step)):
                raise UsageError("grid bounds must be finite")
            if step <= 0:
                raise UsageError("grid step must be positive")
            if stop < start:
                raise UsageError("grid stop must not be below start")
            count = int((stop - start) / step) + 1
            points = [float(start + i * step) for i in range(count)]
        else:
            points = [float(Decimal(p.strip())) for p in spec.split(",") if p.strip()]
    except InvalidOperation:
        raise UsageError(f"malformed grid {spec!r}") from None
    if not points:
        raise UsageError("grid is empty")
    if any(not math.isfinite(p) for p in points):
        raise UsageError("grid points must be finite")
    if any(b <= a for a, b in zip(points, points[1:])):
        raise UsageError("grid points must be strictly increasing")
    return points


def _add_protocol(p: argparse.ArgumentParser) -> None:
    p.add_argument("--checkpoints", default=DEFAULT_CHECKPOINTS, help="comma list of prefix lengths")
    p.add_argument("--zero-tol", type=_finite, default=0.01)
    p.add_argument("--window", type=int, default=2, help="stability window (final checkpoints that must agree)")
    p.add_argument("--positive-tol", type=_finite, default=0.02)


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--jobs", type=int, default=1, help="parallel grid points")


def _add_program(p: argparse.ArgumentParser, target: bool = True) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", help="built-in program name, e.g. example21")
    src.add_argument("--program", help="path to a .seq program file")
    src.add_argument("--expr", help="program expression text")
    if target:
        p.add_argument("--target", default="0", help="limit function of x (must not use k)")


def _add_sequence_command(sub, name: str, help_text: str, r_default: float = 0.0) -> argparse.ArgumentParser:
    p = sub.add_parser(name, help=help_text)
    _add_program(p)
    p.add_argument("--grid", default=DEFAULT_GRID, help='"start:stop:step" or comma list')
    p.add_argument("--r", type=_finite, default=r_default, help="roughness degree")
    p.add_argument("--eps", type=_finite, default=0.01)
    p.add_argument("--max-index", type=int, help="prefix budget (default: final checkpoint)")
    _add_protocol(p)
    _add_output(p)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughstat",
        description="Natural density and rough statistical convergence analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="density verdict for an index set")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--set", dest="index_set", help='condition over k, e.g. "issquare(k)"')
    group.add_argument("--named-set", choices=sorted(dens.NAMED_SETS), help="built-in index set")
    _add_protocol(p)
    _add_output(p)

    _add_sequence_command(sub, "converge", "pointwise rough statistical convergence")
    p = _add_sequence_command(sub, "roughness", "minimal roughness estimate per grid point")
    p.add_argument("--delta", type=_finite, default=0.01, help="tail fraction for the quantile")
    p = _add_sequence_command(sub, "cauchy", "rough statistical Cauchy test per grid point")
    p.add_argument("--candidates", help="comma list of anchor indices N")
    p = _add_sequence_command(sub, "repair", "band-chain repair per grid point", r_default=0.0)
    p.add_argument("--m-max", type=int, default=20)
    p.add_argument("--eps-classical", type=_finite, help="classical tolerance (default: final band height)")

    p = sub.add_parser("eval", help="evaluate a program at (k, x)")
    _add_program(p, target=False)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--x", type=_finite, default=0.0)
    _add_output(p)
    return parser


def parse_flags(argv) -> RunConfig:
    """Map argv to a RunConfig. Flag errors raise SystemExit(2) or UsageError."""
    args = build_parser().parse_args(argv)
    cfg = RunConfig(command=args.command, fmt=args.format, out=args.out, jobs=args.jobs)
    if cfg.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if args.command != "eval":
        checkpoints = [_count(c) for c in args.checkpoints.split(",") if c.strip()]
        cfg.protocol = dens.AnalysisProtocol(tuple(checkpoints), args.zero_tol, args.window, args.positive_tol)
    if args.command == "density":
        cfg.extra = {"set": args.index_set, "named_set": args.named_set}
        return cfg
    cfg.builtin_name = args.builtin
    if args.program is not None:
        cfg.program_source = Path(args.program).read_text(encoding="utf-8")
        cfg.extra["program_path"] = args.program
    elif args.expr is not None:
        cfg.program_source = args.expr
    if args.command == "eval":
        if args.k < 1:
            raise UsageError("--k must be >= 1")
        cfg.extra = {"k": args.k, "x": args.x}
        return cfg
    cfg.target_source = args.target
    cfg.grid = parse_grid(args.grid)
    cfg.r, cfg.eps = args.r, args.eps
    cfg.max_index = args.max_index
    if args.command == "roughness":
        cfg.extra["delta"] = args.delta
    elif args.command == "cauchy":
        cfg.extra["candidates"] = (
            [_count(c) for c in args.candidates.split(",") if c.strip()] if args.candidates else None
        )
    elif args.command == "repair":
        if args.m_max < 1:
            raise UsageError("--m-max must be >= 1")
        cfg.extra["m_max"] = args.m_max
        cfg.extra["eps_classical"] = args.eps_classical
    return cfg


# ------------------------------------------------------------------ commands


def _program(cfg: RunConfig):
    if cfg.builtin_name is not None:
        if cfg.builtin_name not in BUILTINS:
            raise UsageError(f"unknown built-in program {cfg.builtin_name!r}; known: {', '.join(sorted(BUILTINS))}")
        return builtin(cfg.builtin_name)
    return compile_program(cfg.program_source)


def _config_echo(cfg: RunConfig, program=None) -> dict:
    echo: dict = {}
    if cfg.command == "density":
        echo["set"] = cfg.extra["set"]
        echo["named_set"] = cfg.extra["named_set"]
    else:
        echo["program"] = {"builtin": cfg.builtin_name, "source": program.source if program else None}
    if cfg.command not in ("density", "eval"):
        echo["target"] = cfg.target_source
        echo["grid"] = cfg.grid
        echo["r"] = cfg.r
        echo["eps"] = cfg.eps
        echo["max_index"] = cfg.max_index or cfg.protocol.n_max
    if cfg.command != "eval":
        echo["protocol"] = cfg.protocol.to_dict()
    for key, value in cfg.extra.items():
        if key not in ("set", "named_set", "program_path"):
            echo[key] = value
    return echo


def _run_density(cfg: RunConfig) -> dict:
    if cfg.extra["named_set"]:
        pred = dens.NAMED_SETS[cfg.extra["named_set"]]()
    else:
        pred = dens.program_predicate(compile_index_set(cfg.extra["set"]))
    report = dens.density_verdict(pred, cfg.protocol)
    return {
        "command": "density",
        "config": _config_echo(cfg),
        "checkpoints": checkpoint_rows(report),
        "overall": report.verdict.kind,
    }


def _run_eval(cfg: RunConfig) -> dict:
    program = _program(cfg)
    k, x = cfg.extra["k"], cfg.extra["x"]
    value = evaluate(program, k, x)
    if isinstance(value, EvalError):
        shown, overall = f"error: {value.reason}", "error"
    else:
        shown, overall = (value if isinstance(value, bool) else number(value)), "ok"
    return {
        "command": "eval",
        "config": _config_echo(cfg, program),
        "points": [{"x": x, "k": k, "value": shown}],
        "overall": overall,
    }


def _point_record(x, verdict, report, witness) -> dict:
    return {
        "x": x,
        "verdict": verdict,
        "checkpoints": checkpoint_rows(report) if report is not None else [],
        "witness_bad_indices": list(witness),
    }


def _run_pointwise(cfg: RunConfig) -> dict:
    program = _program(cfg)
    target = compile_target(cfg.target_source)
    grid = check_grid(program, cfg.grid)
    budget = cfg.max_index or cfg.protocol.n_max
    protocol = cfg.protocol

    if cfg.command == "converge":
        rep = pointwise_report(program, target, grid, cfg.r, cfg.eps, protocol, cfg.jobs, budget)
        points = [
            _point_record(x, r.verdict, r.density_report, r.witness_bad_indices) for x, r in rep.points
        ]
        overall = rep.overall
    else:
        def one(x: float) -> dict:
            seq = SequenceView.from_program(program, x, budget)
            goal = target_value(target, x)
            if cfg.command == "roughness":
                return _roughness_point(x, seq, goal, cfg)
            if cfg.command == "cauchy":
                return _cauchy_point(x, seq, cfg)
            return _repair_point(x, seq, cfg)

        points = map_points(one, grid, cfg.jobs)
        if cfg.command == "repair":
            overall = "pass" if all(p["verdict"] == "pass" for p in points) else "fail"
        else:
            overall = combine_verdicts(p["verdict"] for p in points)
    return {
        "command": cfg.command,
        "config": _config_echo(cfg, program),
        "points": points,
        "overall": overall,
    }


def _roughness_point(x, seq, goal, cfg) -> dict:
    est = minimal_roughness(seq, goal, cfg.protocol, cfg.extra["delta"])
    cross = est.cross_check
    record = _point_record(
        x,
        cross.verdict if cross else "undecided",
        cross.density_report if cross else None,
        cross.witness_bad_indices if cross else (),
    )
    quantiles = dict(est.per_checkpoint)
    if record["checkpoints"]:
        for row in record["checkpoints"]:
            row["quantile"] = number(quantiles[row["n"]])
    else:
        record["checkpoints"] = [{"n": n, "quantile": number(q)} for n, q in est.per_checkpoint]
    record["r_hat"] = number(est.r_hat)
    record["bracket"] = [number(b) for b in est.bracket]
    return record


def _cauchy_point(x, seq, cfg) -> dict:
    rep = rough_cauchy_verdict(seq, cfg.r, cfg.eps, cfg.extra["candidates"], cfg.protocol)
    chosen = rep.per_candidate[-1] if rep.per_candidate else None
    witness: tuple = ()
    if chosen is not None:
        anchor = seq.value_at(chosen[0])
        witness = tuple(
            bad_index_set(seq, RoughParams(anchor, cfg.r, cfg.eps)).members(cfg.protocol.n_max, 16)
        )
    record = _point_record(x, rep.verdict, chosen[1] if chosen else None, witness)
    record["witness_N"] = rep.witness_N
    record["candidates"] = [{"N": N, "verdict": r.verdict.kind} for N, r in rep.per_candidate]
    record["skipped_candidates"] = list(rep.skipped)
    return record


def _repair_point(x, seq, cfg) -> dict:
    try:
        result, check = repair_pipeline(seq, cfg.extra["m_max"], cfg.protocol, cfg.extra["eps_classical"])
    except (NotCauchyError, ThresholdError) as exc:
        record = _point_record(x, "not-cauchy", None, ())
        record["error"] = str(exc)
        return record
    chain = result.chain
    record = _point_record(
        x,
        "pass" if check.passed else "fail",
        result.modification_density,
        result.exceptional.members(cfg.protocol.n_max, 16),
    )
    record["limit_estimate"] = chain.limit_estimate
    record["stages"] = [
        {
            "m": s.m,
            "lo": s.band.lo,
            "hi": s.band.hi,
            "height": s.band.height,
            "anchor_index": s.anchor_index,
            "threshold": s.threshold,
        }
        for s in chain.stages
    ]
    record["checks"] = {
        "modification_zero": check.modification_zero,
        "threshold_bound": check.threshold_bound,
        "classical": check.classical.verdict,
        "exception_count": check.exception_count,
        "eps_classical": check.eps_classical,
        "rough": check.rough_check.verdict,
    }
    record["notes"] = list(chain.notes)
    return record


def run(cfg: RunConfig) -> dict:
    if cfg.command == "density":
        return _run_density(cfg)
    if cfg.command == "eval":
        return _run_eval(cfg)
    return _run_pointwise(cfg)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_flags(argv)
        document = run(cfg)
        text = emit_report(document, cfg.fmt)
        if cfg.out:
            Path(cfg.out).write_text(text, encoding="utf-8", newline="")
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except SystemExit as exc:  # argparse
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"roughstat: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DSLError as exc:
        print(f"roughstat: program error: {exc}", file=sys.stderr)
        return EXIT_DSL
    except ConfigurationError as exc:
        print(f"roughstat: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"roughstat: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"roughstat: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
