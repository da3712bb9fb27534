from .metrics import (
    BUCKETS,
    MAP_THRESHOLDS,
    Detection,
    GroundTruthInstance,
    average_precision,
    compute_iou,
    mean_average_precision,
    size_bucket,
)
from .clicks import ClickProtocolConfig, interior_point, simulate_clicks
from .protocols import (
    DetectorBox,
    EvalReport,
    eval_box_prompted,
    eval_point_prompted,
    read_detector_file,
    write_report,
)
from .benchmark import BenchReport, benchmark_throughput, run_benchmark
from .figures import emit_comparison_figure, overlay_mask
from .oracle import OracleModel

__all__ = [
    "BUCKETS",
    "MAP_THRESHOLDS",
    "Detection",
    "GroundTruthInstance",
    "average_precision",
    "compute_iou",
    "mean_average_precision",
    "size_bucket",
    "ClickProtocolConfig",
    "interior_point",
    "simulate_clicks",
    "DetectorBox",
    "EvalReport",
    "eval_box_prompted",
    "eval_point_prompted",
    "read_detector_file",
    "write_report",
    "BenchReport",
    "benchmark_throughput",
    "run_benchmark",
    "emit_comparison_figure",
    "overlay_mask",
    "OracleModel",
]
