import pytest

from Core.head import Detection
from Core.reports import GATE_COLUMNS, detections_document, read_csv, summarize_ablation, write_csv


def test_write_csv_keeps_column_order(tmp_path):
    path = tmp_path / "sub" / "gates.csv"
    write_csv([{"value": 0.25, "layer": 1, "range": "short"}], str(path), GATE_COLUMNS)
    frame = read_csv(path)
    assert list(frame.columns) == GATE_COLUMNS
    assert frame.iloc[0]["value"] == 0.25


def test_summarize_ablation_keeps_variant_order():
    rows = [
        {"axis": "gating", "variant": "zero", "seed": 0, "avg_mAP": 0.4},
        {"axis": "gating", "variant": "ones", "seed": 0, "avg_mAP": 0.2},
        {"axis": "gating", "variant": "zero", "seed": 1, "avg_mAP": 0.6},
        {"axis": "gating", "variant": "ones", "seed": 1, "avg_mAP": 0.2},
    ]
    summary = summarize_ablation(rows)
    assert list(summary["variant"]) == ["zero", "ones"]
    assert list(summary["mean_avg_mAP"]) == pytest.approx([0.5, 0.2])
    assert list(summary["std_avg_mAP"]) == pytest.approx([0.1414213562, 0.0])
    assert list(summary["seeds"]) == [2, 2]


def test_single_seed_std_is_zero():
    summary = summarize_ablation([{"axis": "layers", "variant": "all", "seed": 0, "avg_mAP": 0.3}])
    assert summary.iloc[0]["std_avg_mAP"] == 0.0


def test_detections_document_is_sorted_by_video():
    doc = detections_document({"b": [Detection(1.0, 2.0, 0, 0.5)], "a": []})
    assert list(doc) == ["a", "b"]
    assert doc["b"] == [{"start": 1.0, "end": 2.0, "class": 0, "score": 0.5}]
