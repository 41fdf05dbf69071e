"""Command-line entry point.

Exit codes: 0 success, 1 validation or data error, 2 transport error, 3 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import BACKENDS, load_config
from .errors import DPScoutError, UsageError
from .promptgen import TokenBudget, estimate_tokens, estimators

EXIT_OK, EXIT_DATA, EXIT_TRANSPORT, EXIT_USAGE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="pipeline config (JSON)")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--backend", choices=BACKENDS, help="model backend (overrides config)")
    common.add_argument("--cassette", type=Path, help="record/replay cassette (overrides config)")
    common.add_argument("--model", help="model name (overrides config)")
    common.add_argument("--lenient", action="store_true", default=None, help="skip Java files that fail to lex")
    common.add_argument(
        "--allow-same-project", action="store_true", default=None, help="plan pairs whose instances share a project"
    )
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="dp-scout", description="One-shot LLM design pattern detection harness")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check ground truth against source trees")
    sub.add_parser("plan", parents=[common], help="enumerate example/target prompt pairs")
    run = sub.add_parser("run", parents=[common], help="send planned prompts to the model")
    run.add_argument("--overwrite", action="store_true", help="replace existing cassette entries when recording")
    sub.add_parser("eval", parents=[common], help="parse responses and compute metrics")
    sub.add_parser("report", parents=[common], help="render Markdown and CSV reports")
    sub.add_parser("calibrate", parents=[common], help="compare token estimators on each instance snippet")
    return parser


def _calibrate(config) -> str:
    corpus = pipeline.load_corpus(config)
    names = estimators()
    lines = ["| Instance | " + " | ".join(names) + " |", "|" + " --- |" * (len(names) + 1)]
    for inst in corpus.retained:
        text = corpus.snippets[inst.instance_id].rendered
        counts = [estimate_tokens(text, TokenBudget(estimator_id=n)) for n in names]
        lines.append(f"| {inst.instance_id} | " + " | ".join(str(c) for c in counts) + " |")
    if len(names) == 1:
        lines.append("\nonly the default estimator is registered; install a tokenizer and register it to compare")
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config).with_overrides(
            out=args.out,
            backend=args.backend,
            cassette=args.cassette,
            model=args.model,
            lenient=args.lenient,
            allow_same_project=args.allow_same_project,
        )
        if args.command == "validate":
            text, ok = pipeline.validate(config)
            print(text)
            return EXIT_OK if ok else EXIT_DATA
        if args.command == "plan":
            pair_plan, text = pipeline.plan(config)
            print(text)
            print(f"{len(pair_plan.included)} pairs planned, {len(pair_plan.excluded)} excluded")
        elif args.command == "run":
            done = pipeline.run(config, overwrite=args.overwrite)
            print(f"{len(done)} responses stored in {config.out / pipeline.RUNS}")
        elif args.command == "eval":
            metrics = pipeline.evaluate(config)
            n = sum(len(runs) for runs in metrics.values())
            print(f"scored {n} runs across {len(metrics)} model(s)")
        elif args.command == "report":
            files = pipeline.report(config)
            print(files["report.md"])
        elif args.command == "calibrate":
            print(_calibrate(config))
        else:  # pragma: no cover - argparse rejects unknown commands
            raise UsageError(f"unknown command {args.command}")
    except DPScoutError as exc:
        print(f"dp-scout: {exc}", file=sys.stderr)
        return exc.exit_code
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
