"""Command-line front end.

Subcommands map one-to-one onto pipeline stages; `run` chains them with
content-hash skipping. Paths and model settings come from a TOML config
(``--config``), with a handful of flags layered on top. Exit codes:
0 success, 1 stage or validation failure, 2 missing input file.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .diagnosis import StepScope, read_candidate_sets
from .errors import CosivoteError
from .pairset import write_pairset
from .pipeline import (
    PipelineConfig,
    build_pairset_records,
    default_config,
    load_config,
    run_pipeline,
    stage_eval,
    stage_judge,
    stage_vote,
    validate_inputs,
    _read_jsonl,
    _write_jsonl,
)

PROG = "cosivote"


def _parse_gens(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"gens must be comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("gens list is empty")
    return values


def _parse_scope(token: str) -> StepScope:
    try:
        return StepScope.parse(token)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Consistency voting and rubric evaluation over candidate diagnoses.",
    )
    parser.add_argument("--config", help="TOML config file (paths, embedders, judge, run)")
    parser.add_argument("--cache-dir", help="override the cache directory")
    parser.add_argument("--concurrency", type=int, help="worker threads for backend calls")
    parser.add_argument(
        "--scope",
        type=_parse_scope,
        help="scope override: whole, step1..step4, or a step name",
    )
    parser.add_argument(
        "--gens",
        type=_parse_gens,
        help="comma-separated sampled-candidate counts, e.g. 5,10,15,20",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="schema-check artifact files line by line")
    p.add_argument("--candidates", help="candidate-set JSONL to check")
    p.add_argument("--verdicts", help="verdict JSONL to check")
    p.add_argument("--votes", help="vote JSONL to check")
    p.add_argument("--pairs", help="pair JSONL to check")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("vote", help="write consensus votes for the candidate file")
    p.set_defaults(func=cmd_vote)

    p = sub.add_parser("judge", help="write rubric verdicts for the candidate file")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser(
        "pairs",
        help="build similarity training pairs from judged candidates "
        "(needs verdicts at the chosen scope; default whole)",
    )
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("eval", help="aggregate votes and verdicts into the report file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="print the accuracy table from the report file")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="vote, judge, and eval in one pass with stage skipping")
    p.set_defaults(func=cmd_run)

    return parser


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config) if args.config else default_config()
    updates = {}
    if args.cache_dir:
        updates["cache_dir"] = Path(args.cache_dir)
    if args.concurrency:
        updates["concurrency"] = args.concurrency
    if args.gens:
        updates["gens"] = args.gens
    scope = args.scope
    if scope is not None:
        if args.command in ("vote", "run"):
            # which texts get embedded for voting
            if scope is StepScope.WHOLE_OUTPUT:
                updates["vote_mode"] = "whole"
            else:
                updates["vote_mode"] = "per-step"
                updates["scopes"] = (scope,)
        elif args.command in ("judge", "eval"):
            # which scopes get judged / reported
            updates["scopes"] = (scope,)
        # the pairs command reads args.scope directly
    if updates:
        config = dataclasses.replace(config, **updates)
    return config


def cmd_validate(config: PipelineConfig, args: argparse.Namespace) -> int:
    targets = {
        "candidates": args.candidates,
        "verdicts": args.verdicts,
        "votes": args.votes,
        "pairs": args.pairs,
    }
    if not any(targets.values()):
        targets["candidates"] = str(config.candidates_path)
    for path in targets.values():
        if path is not None and not Path(path).exists():
            print(f"missing file: {path}", file=sys.stderr)
            return 2
    diagnostics = validate_inputs(**targets)
    for diagnostic in diagnostics:
        print(diagnostic)
    if diagnostics:
        print(f"{len(diagnostics)} problem(s) found", file=sys.stderr)
        return 1
    print("ok")
    return 0


def _load_sets(config: PipelineConfig):
    if not config.candidates_path.exists():
        print(f"candidate file not found: {config.candidates_path}", file=sys.stderr)
        return None
    return read_candidate_sets(config.candidates_path)


def cmd_vote(config: PipelineConfig, args: argparse.Namespace) -> int:
    sets = _load_sets(config)
    if sets is None:
        return 2
    _write_jsonl(stage_vote(config, sets), config.votes_path)
    print(f"wrote {config.votes_path}")
    return 0


def cmd_judge(config: PipelineConfig, args: argparse.Namespace) -> int:
    sets = _load_sets(config)
    if sets is None:
        return 2
    config.cache_dir.mkdir(parents=True, exist_ok=True)
    _write_jsonl(stage_judge(config, sets), config.verdicts_path)
    print(f"wrote {config.verdicts_path}")
    return 0


def cmd_pairs(config: PipelineConfig, args: argparse.Namespace) -> int:
    sets = _load_sets(config)
    if sets is None:
        return 2
    if not config.verdicts_path.exists():
        print(f"verdict file not found: {config.verdicts_path}", file=sys.stderr)
        return 2
    scope = args.scope if args.scope is not None else StepScope.WHOLE_OUTPUT
    pairs = build_pairset_records(sets, _read_jsonl(config.verdicts_path), scope)
    write_pairset(pairs, config.pairs_path)
    print(f"wrote {len(pairs)} pairs to {config.pairs_path}")
    return 0


def cmd_eval(config: PipelineConfig, args: argparse.Namespace) -> int:
    sets = _load_sets(config)
    if sets is None:
        return 2
    for path in (config.votes_path, config.verdicts_path):
        if not path.exists():
            print(f"missing file: {path}", file=sys.stderr)
            return 2
    payload = stage_eval(
        config, sets, _read_jsonl(config.verdicts_path), _read_jsonl(config.votes_path)
    )
    config.report_path.parent.mkdir(parents=True, exist_ok=True)
    config.report_path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {config.report_path}")
    return 0


def cmd_report(config: PipelineConfig, args: argparse.Namespace) -> int:
    if not config.report_path.exists():
        print(f"report file not found: {config.report_path}", file=sys.stderr)
        return 2
    payload = json.loads(config.report_path.read_text(encoding="utf-8"))
    table = payload.get("table")
    if not isinstance(table, str):
        print("report file has no table section", file=sys.stderr)
        return 1
    sys.stdout.write(table)
    return 0


def cmd_run(config: PipelineConfig, args: argparse.Namespace) -> int:
    return run_pipeline(config)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(config, args)
    except CosivoteError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
