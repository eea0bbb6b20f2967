"""
Command line front end.

::

    kuranishi_atlas validate (FILE | --demo NAME) [--check maps,index,...] [--level standard]
    kuranishi_atlas pipeline (FILE | --demo NAME) --stages tame,reduce,perturb,count [--seeds 5] [--independence]
    kuranishi_atlas demo NAME | list
    kuranishi_atlas serve

Exit codes: 0 success, 1 a mathematical failure (or a demo outcome that does not
match), 2 a usage or parse error.
"""
import argparse
import logging
import os
from typing import List, Optional

import uvicorn
from pydantic import ValidationError

from kuranishi_atlas.app import app
from kuranishi_atlas.atlas_file import AtlasFile, read_atlas
from kuranishi_atlas.config import CHECK_NAMES, LEVELS, SERVICE_PORT, RunConfig, parse_seeds
from kuranishi_atlas.demos import ATLASES, DEMOS, load_atlas, run_demo
from kuranishi_atlas.errors import AtlasFileError, StageError
from kuranishi_atlas.pipeline import STAGES, count_summary, run_checks, run_stages
from kuranishi_atlas.reports import FAIL, write_witnesses

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _names(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kuranishi_atlas", description="Kuranishi atlas validation and counting")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbs = parser.add_subparsers(dest="verb", required=True)

    def common(sub: argparse.ArgumentParser, source: bool = True) -> None:
        if source:
            group = sub.add_mutually_exclusive_group(required=True)
            group.add_argument("file", nargs="?", help="atlas file")
            group.add_argument("--demo", choices=sorted(ATLASES), help="a shipped atlas instead of a file")
        sub.add_argument("--resolution", help="sample resolution h, e.g. 1/64")
        sub.add_argument("--out", help="output directory for stage files, reports and witnesses")
        sub.add_argument("--seeds", help="seed list '0,1,2' or a count '5'")

    validate = verbs.add_parser("validate", help="run the atlas checks")
    common(validate)
    validate.add_argument("--check", help=f"comma separated subset of {','.join(CHECK_NAMES)}")
    validate.add_argument("--level", choices=LEVELS, help="cocycle level")

    pipeline = verbs.add_parser("pipeline", help="run construction stages in order")
    common(pipeline)
    pipeline.add_argument("--stages", required=True, help=f"comma separated stages from {','.join(STAGES)}")
    pipeline.add_argument("--independence", action="store_true", help="compare counts over all seeds")

    demo = verbs.add_parser("demo", help="run a shipped demo and check its known outcome")
    common(demo, source=False)
    demo.add_argument("name", help="demo name, or 'list'")

    verbs.add_parser("serve", help="run the HTTP service")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "verb": args.verb,
        "resolution": getattr(args, "resolution", None),
        "out": getattr(args, "out", None),
        "seeds": parse_seeds(args.seeds) if getattr(args, "seeds", None) else None,
        "level": getattr(args, "level", None),
        "independence": getattr(args, "independence", None),
    }
    if getattr(args, "check", None):
        overrides["checks"] = _names(args.check)
    return RunConfig.from_env(**overrides)


def _bundle(args: argparse.Namespace) -> AtlasFile:
    if args.demo:
        return load_atlas(args.demo)
    return read_atlas(args.file)


def cmd_validate(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = _bundle(args)
    report = run_checks(bundle.atlas, config)
    print(report.summary())
    if args.out and report.witnesses:
        write_witnesses(os.path.join(args.out, "witnesses.csv"), [report])
    return EXIT_FAILURE if report.status == FAIL else EXIT_OK


def cmd_pipeline(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = _bundle(args)
    try:
        run = run_stages(bundle, _names(args.stages), config)
    except StageError as e:
        print(f"error: {e}")
        return EXIT_FAILURE
    for line in run.transcript:
        print(line)
    if run.count is not None:
        print(run.count.report())
    for path in run.files:
        print(f"wrote {path}")
    summary = count_summary(run)
    return EXIT_FAILURE if any(r["status"] == FAIL for r in summary["reports"]) else EXIT_OK


def cmd_demo(args: argparse.Namespace, config: RunConfig) -> int:
    if args.name == "list":
        for name, demo in DEMOS.items():
            print(f"{name}: {demo.expected}")
        return EXIT_OK
    outcome = run_demo(args.name, config)
    print(outcome.summary())
    if args.out:
        write_witnesses(os.path.join(args.out, f"{args.name}-witnesses.csv"), outcome.reports)
    return EXIT_OK if outcome.ok else EXIT_FAILURE


def cmd_serve(args: argparse.Namespace, config: RunConfig) -> int:
    uvicorn.run(app, host="0.0.0.0", port=int(SERVICE_PORT))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "pipeline": cmd_pipeline, "demo": cmd_demo, "serve": cmd_serve}


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        config = _config(args)
        return COMMANDS[args.verb](args, config)
    except AtlasFileError as e:
        print(f"parse error: {e}")
        return EXIT_USAGE
    except (ValidationError, ValueError, OSError) as e:
        print(f"usage error: {e}")
        return EXIT_USAGE
