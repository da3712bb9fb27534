"""Command-line entry points for the full lifecycle.

Every command exits 0 on success; on failure it prints one JSON line to
stderr ({"error": <type>, "message": <text>}) and exits nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .data.io import load_dataset, load_depth_file, write_dataset
from .data.rle import encode_rle, rle_to_string
from .data.synthetic import generate_synthetic_scene
from .data.types import DEPTH_SOURCE_EXTERNAL, DepthMap, RgbImage, mask_bitmap
from .errors import DepthSegError
from .evaluation.benchmark import run_benchmark
from .evaluation.clicks import ClickProtocolConfig
from .evaluation.protocols import eval_box_prompted, eval_point_prompted
from .models.decoder import binarize
from .models.prompts import PromptSet
from .models.segmenter import Segmenter, SegmenterConfig, build_segmenter
from .training import Trainer


def load_model_checkpoint(path: Path) -> Segmenter:
    """Rebuild a model from a training checkpoint."""
    payload = Trainer.read_checkpoint(path)
    config = SegmenterConfig.from_dict(payload["model_config"])
    model = build_segmenter(config, seed=0)
    model.load_state_dict(payload["model"])
    model.eval()
    return model


def _parse_points(text: str | None) -> list[tuple[float, float, int]]:
    if not text:
        return []
    points = []
    for chunk in text.split(";"):
        x, y, label = chunk.split(",")
        points.append((float(x), float(y), int(label)))
    return points


def _parse_boxes(text: str | None) -> list[tuple[float, float, float, float]]:
    if not text:
        return []
    boxes = []
    for chunk in text.split(";"):
        x0, y0, x1, y1 = (float(v) for v in chunk.split(","))
        boxes.append((x0, y0, x1, y1))
    return boxes


def cmd_gen_data(args) -> int:
    config = load_config(args.config)
    data_cfg = dataclasses.replace(config.data, seed=args.seed)
    data_cfg.validate()
    records = [generate_synthetic_scene(data_cfg, i) for i in range(args.count)]
    write_dataset(Path(args.out), records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config)
    dataset = load_dataset(Path(args.data))
    model = build_segmenter(config.model.segmenter_config(), seed=args.seed)
    train_cfg = dataclasses.replace(config.train, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log_path = out.with_suffix(out.suffix + ".log.jsonl")
    log_path.unlink(missing_ok=True)
    trainer = Trainer(model, dataset, train_cfg, log_path=log_path)
    trainer.train()
    trainer.save_checkpoint(out)
    last = trainer.history[-1]["loss"] if trainer.history else float("nan")
    print(f"trained {trainer.global_step} steps "
          f"({model.config.variant}); final loss {last:.4f}; saved {out}")
    return 0


def cmd_eval_points(args) -> int:
    model = load_model_checkpoint(Path(args.model))
    dataset = load_dataset(Path(args.data))
    clicks = tuple(int(c) for c in args.clicks.split(","))
    protocol = ClickProtocolConfig(click_counts=clicks, seed=args.seed)
    report = eval_point_prompted(model, dataset, protocol)
    print(report.to_text())
    print(json.dumps(report.to_json(), sort_keys=True))
    return 0


def cmd_eval_boxes(args) -> int:
    model = load_model_checkpoint(Path(args.model))
    dataset = load_dataset(Path(args.data))
    source = "ground_truth" if args.boxes == "gt" else Path(args.boxes)
    report = eval_box_prompted(model, dataset, source)
    print(report.to_text())
    print(json.dumps(report.to_json(), sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    from .models.encoder import _load_presets

    if args.model in _load_presets():
        preset = args.model
    else:
        payload = Trainer.read_checkpoint(Path(args.model))
        preset = payload["model_config"]["encoder"]["preset"]
    report = run_benchmark(preset, seed=args.seed)
    print(report.to_text())
    print(json.dumps(report.to_json(), sort_keys=True))
    return 0


def cmd_infer(args) -> int:
    from PIL import Image

    model = load_model_checkpoint(Path(args.model))
    pixels = np.asarray(Image.open(args.image).convert("RGB")).astype(np.float32) / 255.0
    image = RgbImage(pixels=pixels)
    depth = None
    if args.depth:
        depth = DepthMap(values=load_depth_file(Path(args.depth)),
                         source=DEPTH_SOURCE_EXTERNAL)
    prompts = PromptSet(points=_parse_points(args.points),
                        boxes=_parse_boxes(args.boxes))
    model.set_image(image, depth)
    pred = model.predict(prompts)
    mask = binarize(pred)
    bitmap = mask_bitmap(mask)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix == ".png":
        Image.fromarray(bitmap.astype(np.uint8) * 255, mode="L").save(out)
    else:
        out.write_text(json.dumps({
            "rle": rle_to_string(encode_rle(bitmap)),
            "height": image.height,
            "width": image.width,
            "predicted_iou": pred.predicted_iou,
        }, sort_keys=True) + "\n")
    print(f"mask area {int(bitmap.sum())}, predicted IoU "
          f"{pred.predicted_iou:.4f}, saved {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    depth_model = load_model_checkpoint(Path(args.model))
    rgb_model = load_model_checkpoint(Path(args.rgb_only_model))
    static_dir = Path(args.static) if args.static else None
    if static_dir is not None and not static_dir.is_dir():
        raise FileNotFoundError(f"static directory {static_dir} does not exist")
    app = create_app({"default": {"depth_aware": depth_model, "rgb_only": rgb_model}},
                     static_dir=static_dir)
    config = load_config(args.config) if args.config else load_config()
    port = args.port if args.port is not None else config.serve.port
    uvicorn.run(app, host=config.serve.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthseg",
        description="Depth-aware promptable segmentation: data, training, "
                    "evaluation, inference, serving.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        p.set_defaults(func=func)
        return p

    p = add("gen-data", cmd_gen_data, help="generate a synthetic RGB-D dataset")
    p.add_argument("--config", default=None, help="TOML config file")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--count", type=int, required=True, help="number of scenes")

    p = add("train", cmd_train, help="run two-stage training")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="checkpoint output path")

    p = add("eval-points", cmd_eval_points, help="point-prompted evaluation")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True)
    p.add_argument("--clicks", default="1,3,5", help="comma-separated click counts")

    p = add("eval-boxes", cmd_eval_boxes, help="box-prompted evaluation")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--boxes", default="gt",
                   help="'gt' for ground-truth boxes or a detector box file")

    p = add("bench", cmd_bench, help="throughput and structure comparison")
    p.add_argument("--model", required=True, help="checkpoint path or preset name")

    p = add("infer", cmd_infer, help="segment one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True, help="input image (PNG)")
    p.add_argument("--depth", default=None, help="depth map (.npy or 16-bit PNG)")
    p.add_argument("--points", default=None, help="x,y,label;x,y,label;...")
    p.add_argument("--boxes", default=None, help="x0,y0,x1,y1;...")
    p.add_argument("--out", required=True, help="output mask (.png or .json)")

    p = add("serve", cmd_serve, help="start the HTTP inference service")
    p.add_argument("--model", required=True, help="depth-aware checkpoint")
    p.add_argument("--rgb-only-model", required=True, help="RGB-only checkpoint")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--static", default=None,
                   help="directory with the browser UI to serve at /")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DepthSegError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
