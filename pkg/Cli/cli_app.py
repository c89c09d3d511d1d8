# ============================================================================
# cli_app.py - Command-line front end for LosaTAL
#
# Verbs: generate, train, eval, ablate, gradcheck, memreport. Each verb loads
# the run config (JSON file, LOSA_SEED, then flags; flags win), drives the
# matching generator backend in Cli/app.py and logs every status line.
#
# Exit codes: 0 ok, 1 failed check, 2 config error, 3 I/O error,
#             4 audit failure, 5 checkpoint/config mismatch.
# ============================================================================

import argparse
import sys

from Cli.app import (AXES, CommandResult, cmd_ablate, cmd_eval, cmd_generate, cmd_gradcheck, cmd_memreport,
                     cmd_train, load_run_config)
from Core import constants as C
from Core.config import EvalConfig, load_config
from Core.errors import (AuditError, CheckpointError, CheckpointMismatchError, ConfigError, DatasetIOError,
                         LosaError)
from Core.log_utils import log, warn


def _layer_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a comma-separated list of layer indices") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="losa", description="LoSA adapters for temporal action localization")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--seed", type=int, help="root random seed (overrides LOSA_SEED and the config)")
    common.add_argument("--output-dir", dest="output_dir", help="directory for every file this run writes")
    common.add_argument("--train-dir", dest="train_dir", help="training dataset directory")
    common.add_argument("--test-dir", dest="test_dir", help="test dataset directory")

    sub = parser.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("generate", parents=[common], help="generate the synthetic dataset")
    gen.add_argument("--num-videos", dest="num_videos", type=int, help="training videos to generate")
    gen.add_argument("--num-test-videos", dest="num_test_videos", type=int, help="test videos to generate")
    gen.add_argument("--num-classes", dest="num_classes", type=int, help="number of action classes")
    gen.add_argument("--probe", action="store_true", help="run the long-range separability probe")

    train = sub.add_parser("train", parents=[common], help="train a model")
    train.add_argument("--mode", choices=C.TRAIN_MODES)
    train.add_argument("--gate-init", dest="gate_init", choices=C.GATE_STRATEGIES)
    train.add_argument("--layers", type=_layer_list, help="adapted layers, e.g. 2,3")
    train.add_argument("--epochs", type=int, help="total training epochs")
    train.add_argument("--no-augment", dest="no_augment", action="store_true")

    ev = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--split", choices=("train", "test"), default="test")
    ev.add_argument("--preset", choices=("thumos", "anet"), help="tIoU threshold preset")

    ab = sub.add_parser("ablate", parents=[common], help="run an ablation sweep")
    ab.add_argument("--axis", choices=AXES, required=True)
    ab.add_argument("--epochs", type=int, help="total training epochs per variant")

    sub.add_parser("gradcheck", parents=[common], help="run the finite-difference suite")
    sub.add_parser("memreport", parents=[common], help="compare tape usage across training modes")
    return parser


def _overrides(args):
    get = vars(args).get
    overrides = {
        "seed": get("seed"),
        "paths.output_dir": get("output_dir"),
        "paths.train_dir": get("train_dir"),
        "paths.test_dir": get("test_dir"),
        "generator.num_videos": get("num_videos"),
        "generator.num_test_videos": get("num_test_videos"),
        "adapters.gate_init": get("gate_init"),
        "adapters.layers": get("layers"),
        "optim.total_epochs": get("epochs"),
        "train.mode": get("mode"),
    }
    if get("num_classes") is not None:
        overrides["generator.num_classes"] = overrides["head.num_classes"] = args.num_classes
    if get("seed") is not None:
        overrides["generator.seed"] = args.seed
    if get("no_augment"):
        overrides["train.augment"] = False
    if get("preset"):
        overrides["eval.tiou_thresholds"] = EvalConfig.preset(args.preset).tiou_thresholds
    return overrides


def _drive(backend):
    result = CommandResult()
    for item in backend:
        if isinstance(item, CommandResult):
            result = item
        else:
            log(item)
    return result


def run(args):
    overrides = _overrides(args)
    if args.verb == "eval":
        cfg = load_run_config(args.checkpoint, args.config, overrides)
        return _drive(cmd_eval(cfg, args.checkpoint, split=args.split))
    cfg = load_config(args.config, overrides)
    if args.verb == "generate":
        return _drive(cmd_generate(cfg, probe=args.probe))
    if args.verb == "train":
        return _drive(cmd_train(cfg))
    if args.verb == "ablate":
        return _drive(cmd_ablate(cfg, args.axis))
    if args.verb == "gradcheck":
        return _drive(cmd_gradcheck(cfg))
    return _drive(cmd_memreport(cfg))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        result = run(args)
    except ConfigError as e:
        warn(f"Config error: {e}")
        return C.EXIT_CONFIG
    except CheckpointMismatchError as e:
        warn(f"Checkpoint does not match config: {e}")
        return C.EXIT_MISMATCH
    except AuditError as e:
        warn(f"Audit failed: {e}")
        return C.EXIT_AUDIT
    except (DatasetIOError, CheckpointError, OSError) as e:
        warn(f"I/O error: {e}")
        return C.EXIT_IO
    except LosaError as e:
        warn(f"Failed {args.verb}: {e}")
        return C.EXIT_CHECK_FAILED
    if not result.passed:
        warn(f"{args.verb} failed: {result.failed_check}")
        return C.EXIT_CHECK_FAILED
    return C.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
