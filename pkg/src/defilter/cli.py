"""Command-line entry point for the staged pipeline.

Verbs map one-to-one onto pipeline stages, plus `all`.  Exit codes:
0 success, 2 missing/stale upstream artifact, 3 configuration problem.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, DefilterError, StageDependencyError, StaleArtifactError
from .pipeline import STAGE_ORDER, run_all, run_stage

_VERB_TO_STAGE = {stage.replace("_", "-"): stage for stage in STAGE_ORDER}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="defilter",
        description="Synthesize sticker-occluded faces, train removal "
                    "models, and measure the biometric impact.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in (*_VERB_TO_STAGE, "all"):
        p = sub.add_parser(verb, help=f"run the {verb} stage"
                           if verb != "all" else "run every stage in order")
        p.add_argument("--config", default=None, metavar="PATH",
                       help="YAML config overriding the profile defaults")
        p.add_argument("--stage-dir", default="stages", metavar="PATH",
                       help="root directory for stage artifacts")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured global seed")
        p.add_argument("--profile", choices=("paper", "desk"), default="desk",
                       help="base parameter profile")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, profile=args.profile, seed=args.seed)
        if args.verb == "all":
            results = run_all(config, args.stage_dir)
        else:
            results = [run_stage(config, _VERB_TO_STAGE[args.verb], args.stage_dir)]
        for res in results:
            state = "up-to-date" if res.get("skipped") else "built"
            print(f"{res['stage']}: {state} ({res['content_hash'][:12]})")
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 3
    except (StageDependencyError, StaleArtifactError) as e:
        print(f"dependency error: {e}", file=sys.stderr)
        return 2
    except DefilterError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
