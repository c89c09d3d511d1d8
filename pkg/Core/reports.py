# reports.py - CSV and JSON report writers for LosaTAL
# Every tabular artifact (metrics, gate report, eval metrics, ablation and
# probe reports) goes through pandas so column order and float formatting
# are identical across commands.

import json
import os

import pandas as pd

from Core.log_utils import log

METRICS_COLUMNS = ["epoch", "split", "loss", "avg_mAP"]
GATE_COLUMNS = ["range", "layer", "value"]
EVAL_COLUMNS = ["threshold", "class", "ap"]
ABLATION_COLUMNS = ["axis", "variant", "seed", "avg_mAP"]
PROBE_COLUMNS = ["samples", "folds", "clip_accuracy", "sequence_accuracy", "gap"]


def write_csv(rows, path, columns):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, float_format="%.10g")
    log(f"Wrote {len(frame)} rows to {path}")
    return frame


def read_csv(path):
    return pd.read_csv(path)


def write_json(obj, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
    log(f"Wrote {path}")


def detections_document(dets_by_video):
    return {vid: [d.to_dict() for d in dets] for vid, dets in sorted(dets_by_video.items())}


def summarize_ablation(rows):
    # mean and std of Avg mAP per variant, in first-seen variant order
    frame = pd.DataFrame(rows, columns=ABLATION_COLUMNS)
    summary = frame.groupby(["axis", "variant"], sort=False)["avg_mAP"].agg(["mean", "std", "count"])
    summary = summary.reset_index().rename(columns={"mean": "mean_avg_mAP", "std": "std_avg_mAP",
                                                    "count": "seeds"})
    summary["std_avg_mAP"] = summary["std_avg_mAP"].fillna(0.0)
    return summary
