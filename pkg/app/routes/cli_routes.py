import argparse
import logging
import sys
from typing import List, Optional, Sequence

from app.controllers.commandController import (
    eval_tbba,
    gen_stochastic,
    inspect_model,
    run_external_cmd,
    run_generalization_cmd,
    run_stochastic,
)
from app.utils.exceptions import UsageError

PROG = "band-assign"


class CliParser(argparse.ArgumentParser):
    """argparse parser whose errors raise UsageError instead of exiting with status 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _common_flags() -> argparse.ArgumentParser:
    common = CliParser(add_help=False)
    common.add_argument("--config", help="key=value run configuration file (defaults: benchmark settings)")
    common.add_argument("--seed", type=int, default=None, help="master seed (default: DEFAULT_SEED or 7)")
    common.add_argument("--learner-seed", type=int, default=None, help="seed for learner training only")
    common.add_argument("--out", help="output file; .md writes markdown, anything else CSV")
    common.add_argument("--cells", type=int, default=None, help="number of cell realizations")
    common.add_argument("--acceptance-mode", action="store_true",
                        help="fixed default structure and fewer cells to bound runtime")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], default=None)
    common.add_argument("--workers", type=int, default=None, help="worker processes for independent cells")
    common.add_argument("--combos", help="comma-separated combinations, presets (c-2) or features (d+theta)")
    common.add_argument("--models", help="comma-separated subset of nn,gr,lr,tbba")
    return common


# subcommand -> (handler, help)
COMMANDS = {
    "gen-stochastic": (gen_stochastic, "generate stochastic cells and write them as dataset CSV"),
    "run-stochastic": (run_stochastic, "per-cell train/validate/test benchmark"),
    "run-generalization": (run_generalization_cmd, "train on pooled cells, test on other cells"),
    "run-external": (run_external_cmd, "learning pipeline on a dataset CSV"),
    "eval-tbba": (eval_tbba, "training-free threshold rule over generated cells"),
    "inspect-model": (inspect_model, "print the header of a saved model file"),
}


def build_parser() -> CliParser:
    parser = CliParser(prog=PROG, description="Dual-band (cmWave/mmWave) band-assignment simulator and learners")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    common = _common_flags()
    parsers = {name: sub.add_parser(name, parents=[common], help=help_text)
               for name, (_, help_text) in COMMANDS.items()}
    for name, (handler, _) in COMMANDS.items():
        parsers[name].set_defaults(handler=handler)

    parsers["run-generalization"].add_argument("--groups", type=int, default=None, help="number of cell groups")
    parsers["run-external"].add_argument("--data", help="dataset CSV")
    parsers["run-external"].add_argument("--models-dir", help="save every refit model into this directory")
    parsers["run-external"].add_argument("--splits", type=int, default=1,
                                         help="independent random splits to average over")
    parsers["eval-tbba"].add_argument("--gamma-t", type=float, default=None, help="probability threshold")
    parsers["eval-tbba"].add_argument("--pathloss-offset-db", type=float, default=0.0,
                                      help="error in the path loss the rule assumes, dB")
    parsers["eval-tbba"].add_argument("--series", help="also write the error-vs-threshold CSV here")
    parsers["inspect-model"].add_argument("--model", help="model file")
    return parser


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse and run one subcommand. 0 success, 1 usage error, 2 runtime failure."""
    parser = build_parser()
    argv: List[str] = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        return err.exit_code
    except SystemExit as done:
        # --help
        return int(done.code or 0)
    for flag in ("cells", "workers", "groups", "splits"):
        value = getattr(args, flag, None)
        if value is not None and value < 1:
            print(f"{PROG}: error: --{flag} must be >= 1", file=sys.stderr)
            return 1
    if args.log_level:
        logging.getLogger().setLevel(args.log_level)
    return args.handler(args)
