# ============================================================================
# app.py - Command backends for LosaTAL
#
# Every cmd_* function is a generator: it yields human-readable status lines
# while it works and finally yields a CommandResult. The command-line front end
# (Cli/cli_app.py) logs the lines and turns the result or any raised LosaError
# into an exit code. No argument parsing or process exit happens here.
# ============================================================================

import copy
import os
from dataclasses import dataclass, field

from Core import constants as C
from Core.checkpoint import restore, save_checkpoint
from Core.config import load_config, save_config
from Core.data import generate, generate_video, load, save
from Core.errors import CheckpointError, InputError
from Core.gradcheck import run_suite
from Core.log_utils import log, setup_logging
from Core.metrics import metrics_rows
from Core.model import LosaModel
from Core.probes import run_probe
from Core.reports import (ABLATION_COLUMNS, EVAL_COLUMNS, GATE_COLUMNS, METRICS_COLUMNS, PROBE_COLUMNS,
                          detections_document, summarize_ablation, write_csv, write_json)
from Core.rng import make_rng
from Core.train import TrainingResult, evaluate, iter_training, memory_counts

AXES = ("components", "gating", "layers")


@dataclass
class CommandResult:
    passed: bool = True
    summary: dict = field(default_factory=dict)
    failed_check: str = None


def _out(cfg, name):
    return os.path.join(cfg.paths.output_dir, name)


def _load_split(cfg, split):
    directory = cfg.paths.split_dir(split)
    dataset = load(directory)
    return dataset


# ----------------------------------------------------------------------------
# generate
# ----------------------------------------------------------------------------

def cmd_generate(cfg, probe=False):
    setup_logging(cfg.paths.output_dir)
    summary = {}
    for split, count in (("train", cfg.generator.num_videos), ("test", cfg.generator.num_test_videos)):
        yield f"Generating {count} {split} videos (seed {cfg.generator.seed})..."
        dataset = generate(cfg.generator, split=split, num_videos=count)
        save(dataset, cfg.paths.split_dir(split))
        summary[f"{split}_videos"] = len(dataset)
        if split == "train" and probe:
            yield "Running long-range probe on the training split..."
            report = run_probe(dataset, cfg.generator, cfg.seed)
            write_csv([report.to_dict()], _out(cfg, C.PROBE_REPORT_NAME), PROBE_COLUMNS)
            summary["probe"] = report.to_dict()
            yield (f"Probe: clip accuracy {report.clip_accuracy:.3f}, sequence accuracy "
                   f"{report.sequence_accuracy:.3f}, gap {report.gap:.3f}")
    yield CommandResult(summary=summary)


# ----------------------------------------------------------------------------
# train
# ----------------------------------------------------------------------------

def save_run(cfg, result, output_dir):
    os.makedirs(output_dir, exist_ok=True)
    save_checkpoint(result.model, os.path.join(output_dir, C.CHECKPOINT_NAME), cfg.seed)
    run_cfg = copy.deepcopy(cfg)
    run_cfg.train.mode = result.model.mode
    save_config(run_cfg, os.path.join(output_dir, C.CONFIG_NAME))
    write_json(result.audit.to_dict(), os.path.join(output_dir, C.AUDIT_NAME))
    write_csv(result.history, os.path.join(output_dir, C.METRICS_NAME), METRICS_COLUMNS)
    write_csv(result.gate_rows, os.path.join(output_dir, C.GATE_REPORT_NAME), GATE_COLUMNS)


def _train(cfg, mode, train_set, test_set):
    result = None
    for item in iter_training(cfg, train_set, test_set, mode=mode):
        if isinstance(item, TrainingResult):
            result = item
        else:
            yield item
    return result


def cmd_train(cfg, mode=None):
    setup_logging(cfg.paths.output_dir)
    mode = mode or cfg.train.mode
    train_set = _load_split(cfg, "train")
    test_set = _load_split(cfg, "test")
    yield f"Loaded {len(train_set)} train and {len(test_set)} test videos"
    result = yield from _train(cfg, mode, train_set, test_set)
    save_run(cfg, result, cfg.paths.output_dir)
    audit = result.audit
    yield (f"Audit: learnable {audit.learnable_params} / frozen {audit.frozen_params} "
           f"(fraction {audit.learnable_fraction:.4f}), tape nodes head_only {audit.tape_nodes_head_only}, "
           f"losa {audit.tape_nodes_losa}, in-backbone {audit.tape_nodes_in_backbone}, "
           f"full {audit.tape_nodes_fullbackbone}, "
           f"backbone grad buffers {audit.backbone_grad_buffers}")
    yield CommandResult(summary={"mode": mode, "audit": audit.to_dict(), "history": result.history})


# ----------------------------------------------------------------------------
# eval
# ----------------------------------------------------------------------------

def cmd_eval(cfg, checkpoint_path, split="test"):
    setup_logging(cfg.paths.output_dir)
    if not os.path.isfile(checkpoint_path):
        raise CheckpointError(f"Checkpoint not found: {checkpoint_path}")
    model = LosaModel(cfg, mode=cfg.train.mode)
    restore(model, checkpoint_path)
    dataset = _load_split(cfg, split)
    yield f"Evaluating {model.mode} checkpoint on {len(dataset)} {split} videos..."
    result = evaluate(model, dataset, cfg.eval)
    if result.map_result is None:
        raise InputError(f"The {split} split has no ground-truth segments to evaluate against")
    for t, m in zip(result.map_result.thresholds, result.map_result.per_threshold):
        yield f"mAP@{t:g}: {m:.4f}"
    yield f"Avg mAP: {result.avg_map:.4f}"
    write_csv(metrics_rows(result.map_result), _out(cfg, C.EVAL_METRICS_NAME), EVAL_COLUMNS)
    write_json(detections_document(result.detections), _out(cfg, C.DETECTIONS_NAME))
    yield CommandResult(summary={"avg_mAP": result.avg_map, "per_threshold": result.map_result.per_threshold})


def load_run_config(checkpoint_path, config_path=None, overrides=None):
    # The run's config.json sits next to its checkpoint unless one is given explicitly.
    path = config_path or os.path.join(os.path.dirname(os.path.abspath(checkpoint_path)), C.CONFIG_NAME)
    if not os.path.isfile(path):
        raise CheckpointError(f"No run config found at {path}")
    return load_config(path, overrides)


# ----------------------------------------------------------------------------
# ablate
# ----------------------------------------------------------------------------

def ablation_variants(axis, num_layers):
    # -> list of (variant name, {dotted config key: value})
    if axis == "components":
        return [("full", {}), ("no_long", {"adapters.use_long": False}),
                ("no_short", {"adapters.use_short": False}), ("no_fusion", {"adapters.gated_fusion": False})]
    if axis == "gating":
        return [(s, {"adapters.gate_init": s}) for s in C.GATE_STRATEGIES]
    if axis == "layers":
        inner = list(range(1, num_layers))
        half = max(1, (len(inner) + 1) // 2)
        return [("all", {"adapters.layers": None}), ("deep", {"adapters.layers": inner[-half:]}),
                ("shallow", {"adapters.layers": inner[:half]})]
    raise InputError(f"Unknown ablation axis '{axis}', expected one of {', '.join(AXES)}")


def _variant_config(cfg, seed, changes):
    variant = copy.deepcopy(cfg)
    variant.seed = seed
    for dotted, value in changes.items():
        section, key = dotted.split(".")
        setattr(getattr(variant, section), key, value)
    return variant.validate()


def cmd_ablate(cfg, axis):
    setup_logging(cfg.paths.output_dir)
    variants = ablation_variants(axis, cfg.backbone.num_layers)
    train_set = _load_split(cfg, "train")
    test_set = _load_split(cfg, "test")
    rows = []
    for name, changes in variants:
        for seed in cfg.ablation_seeds:
            yield f"[{axis}] variant {name}, seed {seed}: training..."
            variant = _variant_config(cfg, seed, changes)
            result = yield from _train(variant, "losa", train_set, None)
            avg = evaluate(result.model, test_set, variant.eval).avg_map
            rows.append({"axis": axis, "variant": name, "seed": seed, "avg_mAP": avg})
            yield f"[{axis}] variant {name}, seed {seed}: test Avg mAP {avg:.4f}"
    write_csv(rows, _out(cfg, C.ABLATION_NAME.format(axis=axis)), ABLATION_COLUMNS)
    summary = summarize_ablation(rows)
    summary.to_csv(_out(cfg, C.ABLATION_SUMMARY_NAME.format(axis=axis)), index=False, float_format="%.10g")
    for rec in summary.to_dict("records"):
        yield f"[{axis}] {rec['variant']}: mean Avg mAP {rec['mean_avg_mAP']:.4f} over {rec['seeds']} seeds"
    yield CommandResult(summary={"rows": rows})


# ----------------------------------------------------------------------------
# gradcheck / memreport
# ----------------------------------------------------------------------------

def cmd_gradcheck(cfg):
    setup_logging(cfg.paths.output_dir)
    rows, failed = [], None
    for res in run_suite(cfg.seed):
        rows.append({"check": res.name, "rel_err": res.rel_err, "passed": res.passed})
        yield f"{'PASS' if res.passed else 'FAIL'} {res.name}: rel err {res.rel_err:.3e}"
        if not res.passed and failed is None:
            failed = res.name
    write_csv(rows, _out(cfg, C.GRADCHECK_NAME), ["check", "rel_err", "passed"])
    yield CommandResult(passed=failed is None, summary={"checks": len(rows)}, failed_check=failed)


def memory_check(counts):
    # -> name of the first violated ordering, or None
    nodes = {mode: n for mode, (n, _) in counts.items()}
    floats = {mode: f for mode, (_, f) in counts.items()}
    if not nodes["head_only"] <= nodes["losa"]:
        return "nodes(head_only) <= nodes(losa)"
    if not nodes["losa"] < nodes["full_backbone"]:
        return "nodes(losa) < nodes(full_backbone)"
    if not 2 * nodes["losa"] <= nodes["full_backbone"]:
        return "nodes(losa) <= 0.5 * nodes(full_backbone)"
    if not nodes["losa"] < nodes["in_backbone"]:
        return "nodes(losa) < nodes(in_backbone)"
    if not floats["losa"] < floats["in_backbone"]:
        return "floats(losa) < floats(in_backbone)"
    return None


def cmd_memreport(cfg):
    setup_logging(cfg.paths.output_dir)
    gen = copy.deepcopy(cfg.generator)
    gen.length_min = gen.length_max = C.MEMREPORT_LENGTH
    sample = generate_video(make_rng(cfg.seed, "data", 2), gen, "memreport")
    yield f"Counting tape nodes on one {sample.video.length}-frame video..."
    counts = memory_counts(cfg, sample)
    rows = [{"mode": mode, "tape_nodes": n, "tape_floats": f} for mode, (n, f) in counts.items()]
    for row in rows:
        yield f"{row['mode']}: {row['tape_nodes']} tape nodes, {row['tape_floats']} activation floats"
    failed = memory_check(counts)
    write_csv(rows, _out(cfg, C.MEMREPORT_NAME), ["mode", "tape_nodes", "tape_floats"])
    if failed is None:
        yield "Memory checks hold: " + ", ".join(f"{mode} {counts[mode][0]}" for mode in C.MEMREPORT_MODES)
        log("Memory report passed")
    yield CommandResult(passed=failed is None, summary={"counts": counts}, failed_check=failed)
