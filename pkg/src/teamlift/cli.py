"""Command line entry points.

One subcommand per pipeline stage plus `pipeline` to run them all,
`show`/`whatif` for read-only inspection of a finished run, and `serve`
to expose the same inspection surface over HTTP. The `show` and `whatif`
output is rendered by the same formatters the server uses, so a CLI call
and the matching HTTP request produce byte-identical documents.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import dataio, pipeline, reports, server
from .config import RunConfig, load_config, save_config
from .errors import TeamliftError

log = logging.getLogger(__name__)


def _effective_config(args: argparse.Namespace) -> RunConfig:
    """Resolve the run config: explicit file, then the run dir's copy, then defaults."""
    if getattr(args, "config", None):
        cfg = load_config(Path(args.config))
    else:
        stored = Path(args.out) / "config.kv"
        cfg = load_config(stored) if stored.exists() else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
        cfg.validate()
    return cfg


def cmd_stage(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    out = Path(args.out)
    if args.stage == "generate":
        out.mkdir(parents=True, exist_ok=True)
        save_config(cfg, pipeline.Paths(out=out).config)
    pipeline.run_stage(args.stage, cfg, out, force=args.force)
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    pipeline.run_pipeline(cfg, Path(args.out), force=args.force, resume=args.resume)
    return 0


def cmd_show(args: argparse.Namespace) -> int:
    state = server.load_state(Path(args.out))
    if args.what == "contests":
        doc = reports.contests_overview(state.index, state.bucket_of)
    elif args.what == "contest":
        if not args.id:
            raise TeamliftError("show contest requires an id argument")
        row = state.contest_row(args.id)
        if row is None:
            raise TeamliftError(f"unknown contest {args.id!r}")
        doc = reports.contest_detail(
            row,
            state.manifests[args.id],
            state.atet_by_contest.get(args.id),
            state.bucket_of.get(args.id, "excluded"),
        )
    else:
        doc = reports.model_info(state.bundle, state.eval_summary)
    sys.stdout.write(dataio.render_kv(doc))
    return 0


def cmd_whatif(args: argparse.Namespace) -> int:
    state = server.load_state(Path(args.out))
    raw = {
        "contest_id": args.contest,
        "captain_bonus": args.captain_bonus,
        "reward_fifth": args.reward_fifth,
        "include_worst": args.include_worst,
        "group_size": "" if args.group_size is None else str(args.group_size),
        "noise_level": args.noise_level,
        "n_boot": str(args.n_boot if args.n_boot is not None else state.cfg.simulate.n_boot),
        "seed": str(args.seed_value),
    }
    if args.fifth_prize_frac is not None:
        raw["fifth_prize_frac"] = repr(args.fifth_prize_frac)
    if args.prize_schedule is not None:
        raw["prize_schedule"] = args.prize_schedule
    try:
        req = server.parse_whatif(raw, state.cfg.simulate.n_boot)
        doc = server.run_whatif(state, req)
    except (ValueError, KeyError) as exc:
        raise TeamliftError(str(exc)) from exc
    sys.stdout.write(dataio.render_kv(doc))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    address = args.address or f"{cfg.serve.host}:{cfg.serve.port}"
    server.serve(Path(args.out), address, cfg)
    return 0


def _add_run_flags(p: argparse.ArgumentParser, with_force: bool = True) -> None:
    p.add_argument("--out", required=True, help="run directory for artifacts")
    p.add_argument("--config", help="config file (.kv); defaults to <out>/config.kv when present")
    p.add_argument("--seed", type=int, help="override the config seed")
    if with_force:
        p.add_argument("--force", action="store_true", help="overwrite existing stage outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teamlift",
        description="Estimate, predict, and simulate treatment effects of team contests.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    for stage in pipeline.STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        _add_run_flags(p)
        p.set_defaults(func=cmd_stage, stage=stage)

    p = sub.add_parser("pipeline", help="run every stage in order")
    _add_run_flags(p)
    p.add_argument("--resume", action="store_true", help="skip stages that already completed")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("show", help="print a report from a finished run")
    p.add_argument("what", choices=("contests", "contest", "model"))
    p.add_argument("id", nargs="?", help="contest id (for `show contest`)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_show)

    p = sub.add_parser("whatif", help="simulate one design variant for one contest")
    p.add_argument("--out", required=True)
    p.add_argument("--contest", required=True, help="contest id")
    p.add_argument("--captain-bonus", default="keep", choices=("keep", "on", "off"))
    p.add_argument("--reward-fifth", default="keep", choices=("keep", "on", "off"))
    p.add_argument("--include-worst", default="keep", choices=("keep", "on", "off"))
    p.add_argument("--group-size", type=int, default=None)
    p.add_argument("--fifth-prize-frac", type=float, default=None)
    p.add_argument("--prize-schedule", default=None,
                   help="five amounts, rank 1 first, e.g. 900/500/300/200/100")
    p.add_argument("--noise-level", default="none", choices=("none", "period", "contest"))
    p.add_argument("--n-boot", type=int, default=None)
    p.add_argument("--seed", dest="seed_value", type=int, default=0, help="bootstrap seed")
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("serve", help="serve reports and simulations over HTTP")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="config file (.kv)")
    p.add_argument("--address", help="host:port (default from config)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except TeamliftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
