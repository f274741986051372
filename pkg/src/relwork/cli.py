"""Command line entry point.

One subcommand per pipeline stage plus `pipeline` to run them all and
`synth-corpus` to write the bundled synthetic study corpus.  Progress
goes to stderr; failures print a single machine-parsable line of the
form "<category>: <message>" and exit with a category-specific code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .corpus import CorpusError
from .pipeline import STAGES, StageError, load_config, run_pipeline, run_stage
from .synthetic import synthetic_corpus

EXIT_CODES = {
    "config-error": 2,
    "missing-artifact": 3,
    "data-error": 4,
    "internal-error": 1,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relwork",
        description="Extractive related-work generation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_stage_command(name: str, help_text: str):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", default=None, help="YAML configuration file")
        cmd.add_argument("--workdir", default="work", help="artifact directory")
        cmd.add_argument(
            "--force", action="store_true",
            help="rebuild even when artifacts are up to date",
        )
        cmd.add_argument(
            "--profile", choices=("full", "desk"), default="full",
            help="'desk' applies the small-scale overrides (dim 16)",
        )
        return cmd

    stage_help = {
        "ingest": "read the corpus and list eligible targets",
        "graph": "build the per-year bibliography graphs",
        "eud": "tune the edge-type usefulness vector",
        "embed": "train node and word vectors",
        "label": "build candidate sequences and oracle labels",
        "train": "train the sentence extractor",
        "summarize": "extract summaries for held-out targets",
        "evaluate": "score summaries and render the report",
    }
    for stage in STAGES:
        add_stage_command(stage, stage_help[stage])
    add_stage_command("pipeline", "run every stage in order")

    synth = sub.add_parser(
        "synth-corpus", help="write the bundled synthetic study corpus"
    )
    synth.add_argument("--out", required=True, help="output JSONL path")
    synth.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth-corpus":
            records = synthetic_corpus(seed=args.seed)
            with open(args.out, "w", encoding="utf-8") as fh:
                for record in records:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
            print(f"wrote {len(records)} records to {args.out}", file=sys.stderr)
            return 0
        config = load_config(args.config, args.profile)
        if args.command == "pipeline":
            run_pipeline(config, args.workdir, force=args.force)
        else:
            run_stage(args.command, config, args.workdir, force=args.force)
        return 0
    except StageError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except CorpusError as exc:
        print(f"data-error: {exc}", file=sys.stderr)
        return EXIT_CODES["data-error"]
    except Exception as exc:  # pragma: no cover - defensive last resort
        print(f"internal-error: {exc}", file=sys.stderr)
        return EXIT_CODES["internal-error"]


if __name__ == "__main__":
    sys.exit(main())
