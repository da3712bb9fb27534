"""Two-stage trainer: freezing contract, optimizer semantics, checkpoints."""

import dataclasses
import hashlib

import pytest
import torch

from depthseg.errors import (
    CheckpointVersionError,
    ContractViolation,
    TrainingDiverged,
)
from depthseg.losses import LossWeights
from depthseg.models.segmenter import SegmenterConfig, build_segmenter
from depthseg.training import TrainConfig, Trainer, ZeroGradAdamW


def _module_hash(module) -> str:
    h = hashlib.sha256()
    for name, p in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(p.detach().numpy().tobytes())
    return h.hexdigest()


def _fresh_trainer(tiny_dataset, toy_encoder_config, use_depth=True, **overrides):
    cfg = SegmenterConfig(encoder=toy_encoder_config, use_depth=use_depth)
    model = build_segmenter(cfg, seed=0)
    train_cfg = TrainConfig(batch_size=2, masks_per_image=2, **overrides)
    return Trainer(model, tiny_dataset, train_cfg)


def test_stage1_touches_only_the_depth_branch(tiny_dataset, toy_encoder_config):
    trainer = _fresh_trainer(tiny_dataset, toy_encoder_config)
    model = trainer.model
    before = {
        "rgb": _module_hash(model.rgb_encoder),
        "depth": _module_hash(model.depth_encoder),
        "prompt": _module_hash(model.prompt_encoder),
        "decoder": _module_hash(model.decoder),
        "alpha": model.fusion.value,
    }
    trainer.train_steps(stage=1, n_steps=2)
    assert _module_hash(model.rgb_encoder) == before["rgb"]
    assert _module_hash(model.prompt_encoder) == before["prompt"]
    assert _module_hash(model.decoder) == before["decoder"]
    assert model.fusion.value == before["alpha"]
    assert _module_hash(model.depth_encoder) != before["depth"]


def test_stage2_moves_alpha(tiny_dataset, toy_encoder_config):
    trainer = _fresh_trainer(tiny_dataset, toy_encoder_config)
    alpha0 = trainer.model.fusion.value
    trainer.train_steps(stage=2, n_steps=1)
    assert trainer.model.fusion.value != alpha0


def test_stage1_rejected_for_rgb_only_model(tiny_dataset, toy_encoder_config):
    trainer = _fresh_trainer(tiny_dataset, toy_encoder_config, use_depth=False)
    with pytest.raises(ContractViolation):
        trainer.train_steps(stage=1, n_steps=1)


def test_train_skips_stage1_for_rgb_only(tiny_dataset, toy_encoder_config):
    trainer = _fresh_trainer(
        tiny_dataset, toy_encoder_config, use_depth=False,
        stage1_epochs=1, stage2_epochs=1)
    trainer.train()
    stages = {e["stage"] for e in trainer.history}
    assert stages == {2}
    assert all(e["alpha"] is None for e in trainer.history)


def test_history_entry_schema(tiny_dataset, toy_encoder_config):
    trainer = _fresh_trainer(tiny_dataset, toy_encoder_config)
    entry = trainer.train_steps(stage=2, n_steps=1)[0]
    expected = {"stage", "step", "epoch", "loss", "loss_mask", "loss_dice",
                "loss_iou", "loss_direct", "loss_aux", "alpha"}
    assert expected == set(entry)
    assert entry["step"] == 0 and entry["stage"] == 2


def test_empty_dataset_rejected(toy_encoder_config):
    cfg = SegmenterConfig(encoder=toy_encoder_config, use_depth=True)
    model = build_segmenter(cfg, seed=0)
    with pytest.raises(ContractViolation):
        Trainer(model, [], TrainConfig())


def test_mixed_image_sizes_rejected(tiny_dataset, tiny_scene_config, toy_encoder_config):
    from depthseg.data.synthetic import generate_synthetic_scene
    other_cfg = dataclasses.replace(
        tiny_scene_config, height=96, width=96, size_range=(10, 40))
    mixed = tiny_dataset + [generate_synthetic_scene(other_cfg, seed=77)]
    cfg = SegmenterConfig(encoder=toy_encoder_config, use_depth=True)
    model = build_segmenter(cfg, seed=0)
    with pytest.raises(ContractViolation):
        Trainer(model, mixed, TrainConfig())


def test_divergence_guard_raises(tiny_dataset, toy_encoder_config):
    trainer = _fresh_trainer(tiny_dataset, toy_encoder_config)
    with torch.no_grad():
        for p in trainer.model.decoder.parameters():
            p.fill_(float("nan"))
    with pytest.raises(TrainingDiverged):
        trainer.train_steps(stage=2, n_steps=1)


def test_zerograd_adamw_decays_gradless_params():
    a = torch.nn.Parameter(torch.tensor([1.0]))
    b = torch.nn.Parameter(torch.tensor([2.0]))
    opt = ZeroGradAdamW([a, b], lr=0.1, weight_decay=0.5)
    (a * 3.0).sum().backward()
    opt.step()
    # b received no gradient; decoupled decay must still shrink it.
    assert b.item() == pytest.approx(2.0 * (1.0 - 0.1 * 0.5))
    assert a.item() < 1.0


def test_checkpoint_roundtrip_resumes_identically(tiny_dataset, toy_encoder_config, tmp_path):
    torch.manual_seed(0)
    trainer = _fresh_trainer(tiny_dataset, toy_encoder_config)
    trainer.train_steps(stage=2, n_steps=2)
    path = tmp_path / "ckpt.pt"
    trainer.save_checkpoint(path)
    ahead = [e["loss"] for e in trainer.train_steps(stage=2, n_steps=3)]

    cfg = SegmenterConfig(encoder=toy_encoder_config, use_depth=True)
    fresh = build_segmenter(cfg, seed=123)  # overwritten by the checkpoint
    resumed = Trainer.from_checkpoint(path, fresh, tiny_dataset)
    assert resumed.global_step == 2
    replay = [e["loss"] for e in resumed.train_steps(stage=2, n_steps=3)]
    for x, y in zip(ahead, replay):
        assert abs(x - y) <= 1e-12


def test_checkpoint_version_gate(tiny_dataset, toy_encoder_config, tmp_path):
    trainer = _fresh_trainer(tiny_dataset, toy_encoder_config)
    trainer.train_steps(stage=2, n_steps=1)
    path = tmp_path / "ckpt.pt"
    trainer.save_checkpoint(path)
    payload = torch.load(path, map_location="cpu", weights_only=False)
    payload["version"] = 999
    torch.save(payload, path)
    with pytest.raises(CheckpointVersionError):
        Trainer.read_checkpoint(path)


def test_zeroed_aux_weights_match_original_objective(tiny_dataset, toy_encoder_config):
    """Stage-2 trajectories coincide bitwise when the three auxiliary
    weights are zero, whichever code path computes the loss."""
    zeroed = LossWeights(lam_iou=0.0, lam_direct=0.0, lam_aux=0.0)

    def run(objective):
        torch.manual_seed(0)
        cfg = SegmenterConfig(encoder=toy_encoder_config, use_depth=True)
        model = build_segmenter(cfg, seed=0)
        trainer = Trainer(model, tiny_dataset, TrainConfig(
            batch_size=2, masks_per_image=2, objective=objective, weights=zeroed))
        losses = [e["loss"] for e in trainer.train_steps(stage=2, n_steps=2)]
        return losses, [p.detach().clone() for p in model.parameters()]

    full_losses, full_params = run("full")
    orig_losses, orig_params = run("original")
    assert full_losses == orig_losses
    for x, y in zip(full_params, orig_params):
        assert torch.equal(x, y)
