"""Point- and box-prompted evaluation protocols and their report format."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.types import DatasetRecord, EmptyMask, InstanceMask
from ..errors import DetectorFileError
from ..models.decoder import binarize
from ..models.prompts import PromptSet
from .clicks import ClickProtocolConfig, simulate_clicks
from .metrics import (
    BUCKETS,
    Detection,
    GroundTruthInstance,
    compute_iou,
    mean_average_precision,
    size_bucket,
)


@dataclass
class EvalReport:
    mode: str                                   # points | boxes_gt | boxes_detector
    miou_overall: dict = field(default_factory=dict)
    miou_buckets: dict = field(default_factory=dict)
    bucket_counts: dict = field(default_factory=dict)
    map_overall: float | None = None
    map_buckets: dict = field(default_factory=dict)
    instances: int = 0
    fingerprint: str = ""

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "miou_overall": self.miou_overall,
            "miou_buckets": self.miou_buckets,
            "bucket_counts": self.bucket_counts,
            "map_overall": self.map_overall,
            "map_buckets": self.map_buckets,
            "instances": self.instances,
            "fingerprint": self.fingerprint,
        }

    def to_text(self) -> str:
        lines = [f"mode: {self.mode}   instances: {self.instances}"]
        counts = " ".join(f"{b}={self.bucket_counts.get(b, 0)}" for b in BUCKETS)
        lines.append(f"bucket counts: {counts}")
        if self.miou_overall:
            lines.append(f"{'prompt':>8} {'mIoU':>8} {'mIoU_S':>8} {'mIoU_M':>8} {'mIoU_L':>8}")
            for key in self.miou_overall:
                per = self.miou_buckets.get(key, {})

                def cell(b):
                    v = per.get(b)
                    return f"{v:8.4f}" if v is not None else f"{'-':>8}"

                lines.append(
                    f"{key:>8} {self.miou_overall[key]:8.4f} "
                    f"{cell('S')} {cell('M')} {cell('L')}")
        if self.map_overall is not None:
            lines.append(f"{'mAP':>8} {'mAP_S':>8} {'mAP_M':>8} {'mAP_L':>8}")

            def mcell(b):
                v = self.map_buckets.get(b)
                return f"{v:8.4f}" if v is not None and not np.isnan(v) else f"{'-':>8}"

            lines.append(
                f"{self.map_overall:8.4f} {mcell('S')} {mcell('M')} {mcell('L')}")
        lines.append(f"fingerprint: {self.fingerprint}")
        return "\n".join(lines)


def _fingerprint(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _aggregate_miou(rows: list[tuple[str, float]], key: str,
                    report: EvalReport) -> None:
    """rows: (bucket, iou) for one prompt key."""
    ious = [iou for _, iou in rows]
    report.miou_overall[key] = float(np.mean(ious)) if ious else float("nan")
    per_bucket = {}
    for b in BUCKETS:
        sub = [iou for bk, iou in rows if bk == b]
        per_bucket[b] = float(np.mean(sub)) if sub else None
    report.miou_buckets[key] = per_bucket


def eval_point_prompted(model, dataset: list[DatasetRecord],
                        protocol: ClickProtocolConfig) -> EvalReport:
    """Iterative click -> predict -> click loop per instance."""
    protocol.validate()
    max_clicks = max(protocol.click_counts)
    per_count: dict[int, list[tuple[str, float]]] = {c: [] for c in protocol.click_counts}
    bucket_counts = {b: 0 for b in BUCKETS}
    n_instances = 0

    for record in dataset:
        model.set_image(record.image, record.depth)
        for gt in record.masks:
            n_instances += 1
            bucket = size_bucket(gt.area)
            bucket_counts[bucket] += 1
            points: list[tuple[float, float, int]] = []
            pred = EmptyMask(height=gt.height, width=gt.width)
            for k in range(1, max_clicks + 1):
                click = simulate_clicks(gt, pred, len(points))
                if click is not None:
                    points.append(click)
                    pred = binarize(model.predict(PromptSet(points=list(points))))
                if k in per_count:
                    per_count[k].append((bucket, compute_iou(pred, gt)))

    report = EvalReport(mode="points", bucket_counts=bucket_counts,
                        instances=n_instances)
    for count in protocol.click_counts:
        _aggregate_miou(per_count[count], str(count), report)
    report.fingerprint = _fingerprint({
        "mode": "points", "clicks": list(protocol.click_counts),
        "seed": protocol.seed, "instances": n_instances})
    return report


@dataclass
class DetectorBox:
    image_id: str
    box: tuple[float, float, float, float]
    score: float
    line_number: int


def read_detector_file(path: Path, known_ids: set[str]) -> list[DetectorBox]:
    """Parse whitespace-separated lines: image_id x0 y0 x1 y1 score."""
    boxes = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise DetectorFileError(lineno, f"expected 6 fields, got {len(parts)}")
        image_id = parts[0]
        try:
            x0, y0, x1, y1, score = (float(v) for v in parts[1:])
        except ValueError as exc:
            raise DetectorFileError(lineno, f"non-numeric field: {exc}") from None
        if image_id not in known_ids:
            raise DetectorFileError(lineno, f"unknown image id {image_id!r}")
        if not (x0 < x1 and y0 < y1):
            raise DetectorFileError(lineno, f"degenerate box {(x0, y0, x1, y1)}")
        boxes.append(DetectorBox(image_id, (x0, y0, x1, y1), score, lineno))
    return boxes


def _clamp_box(box, height, width):
    x0, y0, x1, y1 = box
    return (max(0.0, x0), max(0.0, y0), min(float(width), x1), min(float(height), y1))


def eval_box_prompted(model, dataset: list[DatasetRecord],
                      boxes: str | Path = "ground_truth") -> EvalReport:
    """One box prompt per instance (gt boxes) or per detector line."""
    bucket_counts = {b: 0 for b in BUCKETS}
    n_instances = sum(len(r.masks) for r in dataset)
    for r in dataset:
        for gt in r.masks:
            bucket_counts[size_bucket(gt.area)] += 1

    if boxes == "ground_truth":
        rows = []
        for record in dataset:
            model.set_image(record.image, record.depth)
            for gt in record.masks:
                pred = binarize(model.predict(PromptSet(boxes=[gt.bbox])))
                rows.append((size_bucket(gt.area), compute_iou(pred, gt)))
        report = EvalReport(mode="boxes_gt", bucket_counts=bucket_counts,
                            instances=n_instances)
        _aggregate_miou(rows, "box", report)
        report.fingerprint = _fingerprint({"mode": "boxes_gt", "instances": n_instances})
        return report

    detector_boxes = read_detector_file(Path(boxes), {r.id for r in dataset})
    by_image: dict[str, list[DetectorBox]] = {}
    for db in detector_boxes:
        by_image.setdefault(db.image_id, []).append(db)

    detections: list[Detection] = []
    gts: list[GroundTruthInstance] = []
    for record in dataset:
        for gt in record.masks:
            gts.append(GroundTruthInstance(record.id, gt))
        if record.id not in by_image:
            continue
        model.set_image(record.image, record.depth)
        h, w = record.image.height, record.image.width
        for db in by_image[record.id]:
            out = model.predict(PromptSet(boxes=[_clamp_box(db.box, h, w)]))
            detections.append(
                Detection(record.id, binarize(out), float(out.predicted_iou)))

    report = EvalReport(mode="boxes_detector", bucket_counts=bucket_counts,
                        instances=n_instances)
    report.map_overall = mean_average_precision(detections, gts)
    report.map_buckets = {
        b: mean_average_precision(detections, gts, bucket=b) for b in BUCKETS}
    report.fingerprint = _fingerprint({
        "mode": "boxes_detector", "instances": n_instances,
        "detections": len(detections)})
    return report


def write_report(report: EvalReport, out_path: Path | None) -> str:
    """Render the text table; also write it plus a JSON sidecar if given."""
    text = report.to_text()
    if out_path is not None:
        out_path = Path(out_path)
        out_path.write_text(text + "\n")
        sidecar = out_path.with_suffix(out_path.suffix + ".json")
        sidecar.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    return text
