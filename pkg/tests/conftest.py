from __future__ import annotations

import dataclasses

import pytest
import torch

from depthseg.data.synthetic import generate_synthetic_scene
from depthseg.data.types import SyntheticSceneConfig
from depthseg.models.encoder import EncoderConfig
from depthseg.models.segmenter import SegmenterConfig, build_segmenter
from depthseg.training import TrainConfig, Trainer

torch.set_num_threads(1)

TINY_SCENES = SyntheticSceneConfig(
    height=64, width=64, min_objects=2, max_objects=3,
    size_range=(10, 36), texture_noise=0.2, seed=13,
)


@pytest.fixture(scope="session")
def tiny_scene_config() -> SyntheticSceneConfig:
    return TINY_SCENES


@pytest.fixture(scope="session")
def tiny_dataset(tiny_scene_config):
    return [generate_synthetic_scene(tiny_scene_config, i) for i in range(3)]


@pytest.fixture(scope="session")
def toy_encoder_config() -> EncoderConfig:
    return EncoderConfig.from_preset("toy")


@pytest.fixture(scope="session")
def depth_model(toy_encoder_config):
    model = build_segmenter(
        SegmenterConfig(encoder=toy_encoder_config, use_depth=True), seed=0)
    model.eval()
    return model


@pytest.fixture(scope="session")
def rgb_model(toy_encoder_config):
    model = build_segmenter(
        SegmenterConfig(encoder=toy_encoder_config, use_depth=False), seed=0)
    model.eval()
    return model


@pytest.fixture(scope="session")
def quick_train_config() -> TrainConfig:
    return TrainConfig(stage1_epochs=1, stage2_epochs=1, batch_size=2,
                       masks_per_image=2)


@pytest.fixture(scope="session")
def trained_checkpoints(tmp_path_factory, tiny_dataset, toy_encoder_config,
                        quick_train_config):
    """Briefly trained depth-aware and RGB-only checkpoints on tiny scenes."""
    out = tmp_path_factory.mktemp("ckpt")
    paths = {}
    for use_depth, name in ((True, "depth.pt"), (False, "rgb.pt")):
        model = build_segmenter(
            SegmenterConfig(encoder=toy_encoder_config, use_depth=use_depth),
            seed=0)
        trainer = Trainer(model, tiny_dataset, quick_train_config)
        trainer.train()
        path = out / name
        trainer.save_checkpoint(path)
        paths[model.config.variant] = path
    return paths


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory, tiny_dataset):
    from depthseg.data.io import write_dataset

    root = tmp_path_factory.mktemp("data") / "tiny"
    write_dataset(root, tiny_dataset)
    return root
