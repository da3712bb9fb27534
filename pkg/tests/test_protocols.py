"""Evaluation protocols: oracle scoring, detector files, report rendering."""

import json

import numpy as np
import pytest

from depthseg.data.synthetic import generate_synthetic_scene
from depthseg.errors import ContractViolation, DetectorFileError
from depthseg.evaluation.clicks import ClickProtocolConfig
from depthseg.evaluation.oracle import OracleModel
from depthseg.evaluation.protocols import (
    eval_box_prompted,
    eval_point_prompted,
    read_detector_file,
    write_report,
)


@pytest.fixture(scope="module")
def corpus(tiny_scene_config):
    return [generate_synthetic_scene(tiny_scene_config, seed=s) for s in range(40, 44)]


def test_oracle_scores_perfect_miou(corpus):
    protocol = ClickProtocolConfig(click_counts=(1, 3))
    report = eval_point_prompted(OracleModel(corpus), corpus, protocol)
    for key, value in report.miou_overall.items():
        assert value == 1.0, f"{key}-click mIoU {value}"
    for per in report.miou_buckets.values():
        for bucket, value in per.items():
            if value is not None:
                assert value == 1.0, f"bucket {bucket}"


def test_oracle_scores_perfect_boxes(corpus):
    report = eval_box_prompted(OracleModel(corpus), corpus, boxes="ground_truth")
    assert report.miou_overall["box"] == 1.0
    assert report.mode == "boxes_gt"


def test_oracle_rejects_unknown_image(corpus, tiny_scene_config):
    other = generate_synthetic_scene(tiny_scene_config, seed=999)
    model = OracleModel(corpus)
    with pytest.raises(ContractViolation):
        model.set_image(other.image, other.depth)


def test_point_report_counts_instances(corpus):
    protocol = ClickProtocolConfig(click_counts=(1,))
    report = eval_point_prompted(OracleModel(corpus), corpus, protocol)
    assert report.instances == sum(len(r.masks) for r in corpus)
    assert sum(report.bucket_counts.values()) == report.instances
    assert report.mode == "points"


def test_point_report_fingerprint_is_stable(corpus):
    protocol = ClickProtocolConfig(click_counts=(1,))
    a = eval_point_prompted(OracleModel(corpus), corpus, protocol)
    b = eval_point_prompted(OracleModel(corpus), corpus, protocol)
    assert a.fingerprint == b.fingerprint
    assert len(a.fingerprint) == 16


def test_detector_file_round_trip(tmp_path, corpus):
    path = tmp_path / "det.txt"
    lines = ["# comment", ""]
    for record in corpus[:2]:
        x0, y0, x1, y1 = record.masks[0].bbox
        lines.append(f"{record.id} {x0} {y0} {x1} {y1} 0.9")
    path.write_text("\n".join(lines) + "\n")
    boxes = read_detector_file(path, {r.id for r in corpus})
    assert len(boxes) == 2
    assert boxes[0].line_number == 3
    assert boxes[0].score == 0.9


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("img_0 1 2 3", "expected 6 fields"),
        ("img_0 1 2 3 4 x", "non-numeric"),
        ("nope 1 2 3 4 0.5", "unknown image id"),
        ("img_0 5 2 3 4 0.5", "degenerate box"),
    ],
)
def test_detector_file_errors_carry_line_numbers(tmp_path, line, fragment):
    path = tmp_path / "det.txt"
    path.write_text("# header\n" + line + "\n")
    with pytest.raises(DetectorFileError) as err:
        read_detector_file(path, {"img_0"})
    assert err.value.line_number == 2
    assert fragment in str(err.value)


def test_detector_eval_scores_oracle_perfectly(tmp_path, corpus):
    path = tmp_path / "det.txt"
    rows = []
    for record in corpus:
        for mask in record.masks:
            x0, y0, x1, y1 = mask.bbox
            rows.append(f"{record.id} {x0} {y0} {x1} {y1} 0.8")
    path.write_text("\n".join(rows) + "\n")
    report = eval_box_prompted(OracleModel(corpus), corpus, boxes=path)
    assert report.mode == "boxes_detector"
    assert report.map_overall == 1.0


def test_detector_boxes_are_clamped_to_image(tmp_path, corpus):
    record = corpus[0]
    x0, y0, x1, y1 = record.masks[0].bbox
    path = tmp_path / "det.txt"
    path.write_text(f"{record.id} {x0 - 50} {y0 - 50} {x1 + 50} {y1 + 50} 0.7\n")
    report = eval_box_prompted(OracleModel(corpus), corpus, boxes=path)
    assert report.map_overall is not None  # would raise on out-of-range crops


def test_write_report_emits_text_and_json_sidecar(tmp_path, corpus):
    protocol = ClickProtocolConfig(click_counts=(1,))
    report = eval_point_prompted(OracleModel(corpus), corpus, protocol)
    out = tmp_path / "report.txt"
    text = write_report(report, out)
    assert out.read_text().rstrip("\n") == text
    payload = json.loads((tmp_path / "report.txt.json").read_text())
    assert payload["fingerprint"] == report.fingerprint
    assert payload["miou_overall"]["1"] == 1.0
    assert "mode: points" in text
    assert "bucket counts:" in text


def test_trained_model_report_schema(depth_model, tiny_dataset):
    protocol = ClickProtocolConfig(click_counts=(1, 3))
    report = eval_point_prompted(depth_model, tiny_dataset, protocol)
    assert set(report.miou_overall) == {"1", "3"}
    for value in report.miou_overall.values():
        assert 0.0 <= value <= 1.0
    assert set(report.bucket_counts) == {"S", "M", "L"}
