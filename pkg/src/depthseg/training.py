"""Two-stage training loop, optimizer contract, checkpointing.

Stage 1 trains the depth encoder alone: its embedding is routed through
the frozen head and optimized under the two-term mask+dice objective.
Stage 2 unfreezes everything (including the fusion scalar) and trains
end-to-end under the full five-term objective.

Prompts are sampled to match deployment: half boxes, half click
sequences whose later clicks are corrections of the model's own live
predictions (see `_resolve_plans`), the same rule the interactive
evaluation protocol applies.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data.depth import prepare_depth
from .data.types import DatasetRecord, EmptyMask, InstanceMask
from .errors import CheckpointVersionError, ContractViolation, TrainingDiverged
from .evaluation.clicks import simulate_clicks
from .losses import (
    LossWeights,
    boundary_aux_loss,
    combine_terms,
    dice_loss,
    direct_supervision_loss,
    iou_regression_loss,
    mask_bce_loss,
    original_loss,
)
from .models.prompts import FOREGROUND, PromptSet
from .models.segmenter import Segmenter

CHECKPOINT_VERSION = 1
BOX_JITTER_FRACTION = 0.05


@dataclass
class _PromptPlan:
    """One training prompt mid-construction.

    Box prompts are complete at creation.  Click prompts start from their
    first click and are extended with prediction-driven correction clicks
    until they reach `clicks_wanted` or the prediction is already exact
    (`settled`).
    """

    points: list[tuple[int, int, int]] | None = None
    boxes: list[tuple[float, float, float, float]] | None = None
    clicks_wanted: int = 0
    settled: bool = False

    def to_prompts(self) -> PromptSet:
        if self.boxes is not None:
            return PromptSet(boxes=list(self.boxes))
        return PromptSet(points=list(self.points))


@dataclass
class TrainConfig:
    stage1_epochs: int = 2
    stage2_epochs: int = 2
    batch_size: int = 4
    masks_per_image: int = 4
    lr: float = 1e-4
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    grad_clip: float = 1.0
    seed: int = 0
    objective: str = "full"          # "full" (five terms) or "original" (two)
    weights: LossWeights = field(default_factory=LossWeights)

    def validate(self) -> None:
        problems = []
        if self.stage1_epochs < 0 or self.stage2_epochs < 0:
            problems.append("epochs must be >= 0")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.masks_per_image < 1:
            problems.append("masks_per_image must be >= 1")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            problems.append(f"betas must lie in (0, 1), got ({self.beta1}, {self.beta2})")
        if self.objective not in ("full", "original"):
            problems.append(f"objective must be 'full' or 'original', got {self.objective!r}")
        if problems:
            raise ContractViolation("; ".join(problems))

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class ZeroGradAdamW(torch.optim.AdamW):
    """AdamW that decays parameters even when backward left them gradless.

    Plain AdamW skips parameters whose .grad is None, so decoupled weight
    decay would silently not apply to branches outside the current loss.
    Materializing zero gradients first keeps decay semantics uniform.
    """

    @torch.no_grad()
    def step(self, closure=None):
        for group in self.param_groups:
            for p in group["params"]:
                if p.grad is None:
                    p.grad = torch.zeros_like(p)
        return super().step(closure)


def make_optimizer(params, config: TrainConfig) -> ZeroGradAdamW:
    return ZeroGradAdamW(
        params, lr=config.lr, betas=(config.beta1, config.beta2),
        weight_decay=config.weight_decay)


def _record_tensors(record: DatasetRecord) -> tuple[torch.Tensor, torch.Tensor]:
    img = torch.from_numpy(record.image.pixels.transpose(2, 0, 1).copy())
    prepared, _ = prepare_depth(record.depth)
    dep = torch.from_numpy(prepared.transpose(2, 0, 1).copy())
    return img, dep


class Trainer:
    def __init__(self, model: Segmenter, dataset: list[DatasetRecord],
                 config: TrainConfig, log_path: Path | None = None):
        config.validate()
        if not dataset:
            raise ContractViolation("training dataset is empty")
        sizes = {(r.image.height, r.image.width) for r in dataset}
        if len(sizes) != 1:
            raise ContractViolation(f"mixed image sizes in dataset: {sizes}")
        self.model = model
        self.dataset = dataset
        self.config = config
        self.log_path = Path(log_path) if log_path else None
        self.rng = np.random.default_rng(config.seed)
        self.history: list[dict] = []

        (h, w) = next(iter(sizes))
        if h % model.config.encoder.downsample or w % model.config.encoder.downsample:
            raise ContractViolation(
                f"image size {(h, w)} not divisible by encoder downsample")
        self.image_size = (h, w)
        self._tensors = [_record_tensors(r) for r in dataset]

        self.stage = 0
        self.epoch_in_stage = 0
        self.step_in_epoch = 0
        self.global_step = 0
        self._epoch_order: np.ndarray | None = None
        self.optimizer: ZeroGradAdamW | None = None

    # ---- stage management ----

    def _depth_branch_params(self) -> list[torch.nn.Parameter]:
        return list(self.model.depth_encoder.parameters()) + \
            list(self.model.depth_direct_head.parameters())

    def _enter_stage(self, stage: int) -> None:
        if stage == self.stage:
            return
        self.stage = stage
        self.epoch_in_stage = 0
        self.step_in_epoch = 0
        self._epoch_order = None
        if stage == 1:
            if not self.model.config.use_depth:
                raise ContractViolation("stage 1 requires a depth-aware model")
            for p in self.model.parameters():
                p.requires_grad_(False)
            for p in self._depth_branch_params():
                p.requires_grad_(True)
            self.optimizer = make_optimizer(self._depth_branch_params(), self.config)
        else:
            for p in self.model.parameters():
                p.requires_grad_(True)
            self.optimizer = make_optimizer(self.model.parameters(), self.config)

    # ---- sampling ----

    def _plan_prompt(self, mask: InstanceMask) -> "_PromptPlan":
        """Draw the random part of one training prompt.

        Click counts and first-click placement come from the RNG here; the
        later corrective clicks are resolved against live predictions in
        `_resolve_plans`, which consumes no randomness.  Keeping every RNG
        draw in this method makes the draw sequence independent of model
        state, so equal seeds give equal prompts across objective variants.
        """
        h, w = self.image_size
        if self.rng.uniform() < 0.5:
            # Half the first clicks follow the interactive-evaluation rule
            # (interior-most foreground pixel), half are uniform over the
            # object so off-center user clicks stay in distribution.
            if self.rng.uniform() < 0.5:
                first = simulate_clicks(mask, None, 0)
            else:
                ys, xs = np.nonzero(mask.bitmap)
                i = int(self.rng.integers(len(ys)))
                first = (int(xs[i]), int(ys[i]), FOREGROUND)
            wanted = 1 + int(self.rng.integers(0, 5))
            return _PromptPlan(points=[first], clicks_wanted=wanted)
        x0, y0, x1, y1 = mask.bbox
        bw, bh = x1 - x0, y1 - y0
        jit = self.rng.uniform(-BOX_JITTER_FRACTION, BOX_JITTER_FRACTION, size=4)
        box = (max(0.0, x0 + jit[0] * bw), max(0.0, y0 + jit[1] * bh),
               min(float(w), x1 + jit[2] * bw), min(float(h), y1 + jit[3] * bh))
        if not (box[0] < box[2] and box[1] < box[3]):
            box = (float(x0), float(y0), float(x1), float(y1))
        return _PromptPlan(boxes=[box], settled=True)

    def _resolve_plans(self, samples: list, grid: torch.Tensor) -> None:
        """Grow click prompts the way interactive evaluation does: decode the
        clicks so far (no grad), then click the interior of the largest error
        component.  The model thus trains on its own correction traffic.

        All unsettled plans hold the same click count at each round, so each
        round is a single batched decode.
        """
        h, w = self.image_size
        while True:
            active = [si for si, (_, _, plan) in enumerate(samples)
                      if not plan.settled and len(plan.points) < plan.clicks_wanted]
            if not active:
                return
            toks = torch.stack([
                self.model.tokenize(samples[si][2].to_prompts(), self.image_size)
                for si in active])
            pos = torch.tensor([samples[si][0] for si in active])
            with torch.no_grad():
                logits, _, _ = self.model.decode_batch(grid[pos], toks, self.image_size)
            for j, si in enumerate(active):
                _, mask, plan = samples[si]
                bm = (logits[j] > 0).numpy()
                pred = (InstanceMask(bitmap=bm) if bm.any()
                        else EmptyMask(height=h, width=w))
                nxt = simulate_clicks(mask, pred, len(plan.points))
                if nxt is None:
                    plan.settled = True
                else:
                    plan.points.append(nxt)

    def _next_batch(self) -> np.ndarray:
        n = len(self.dataset)
        steps_per_epoch = (n + self.config.batch_size - 1) // self.config.batch_size
        if self._epoch_order is None:
            self._epoch_order = self.rng.permutation(n)
        start = self.step_in_epoch * self.config.batch_size
        batch = self._epoch_order[start:start + self.config.batch_size]
        self.step_in_epoch += 1
        if self.step_in_epoch >= steps_per_epoch:
            self.step_in_epoch = 0
            self.epoch_in_stage += 1
            self._epoch_order = None
        return batch

    # ---- the step ----

    def _run_step(self) -> dict:
        cfg = self.config
        batch = self._next_batch()
        images = torch.stack([self._tensors[i][0] for i in batch])
        depths = torch.stack([self._tensors[i][1] for i in batch])

        samples = []  # (batch_pos, mask, plan)
        for pos, idx in enumerate(batch):
            masks = self.dataset[idx].masks
            replace = len(masks) < cfg.masks_per_image
            chosen = self.rng.choice(len(masks), size=cfg.masks_per_image, replace=replace)
            for mi in chosen:
                samples.append((pos, masks[int(mi)], self._plan_prompt(masks[int(mi)])))

        self.model.train()
        grid = self.model.embed_batch(
            images, depths if self.model.config.use_depth else None,
            depth_only=(self.stage == 1))
        self._resolve_plans(samples, grid)

        # Group by prompt token count so each group decodes in one call.
        groups: dict[int, list[int]] = {}
        tokens_per_sample = []
        for si, (_, _, plan) in enumerate(samples):
            t = self.model.tokenize(plan.to_prompts(), self.image_size)
            tokens_per_sample.append(t)
            groups.setdefault(t.shape[0], []).append(si)

        use_full = self.stage == 2 and cfg.objective == "full"
        total = torch.zeros(())
        sums = {"mask": 0.0, "dice": 0.0, "iou": 0.0, "direct": 0.0, "aux": 0.0}
        for t_count in sorted(groups):
            idxs = groups[t_count]
            tok = torch.stack([tokens_per_sample[i] for i in idxs])
            grid_sel = grid[torch.tensor([samples[i][0] for i in idxs])]
            logits, iou_pred, direct = self.model.decode_batch(
                grid_sel, tok, self.image_size)
            for j, si in enumerate(idxs):
                gt = samples[si][1]
                if use_full:
                    m = mask_bce_loss(logits[j], gt)
                    d = dice_loss(logits[j], gt)
                    i = iou_regression_loss(iou_pred[j], logits[j], gt)
                    dr = direct_supervision_loss([direct[j]], gt)
                    a = boundary_aux_loss(logits[j], gt)
                    loss = (cfg.weights.lam_mask * m + cfg.weights.lam_dice * d
                            + cfg.weights.lam_iou * i + cfg.weights.lam_direct * dr
                            + cfg.weights.lam_aux * a)
                    for key, val in zip(sums, (m, d, i, dr, a)):
                        sums[key] += float(val.detach())
                else:
                    loss = original_loss(logits[j], gt, cfg.weights)
                    sums["mask"] += float(mask_bce_loss(logits[j], gt).detach())
                    sums["dice"] += float(dice_loss(logits[j], gt).detach())
                total = total + loss
        total = total / len(samples)

        if not torch.isfinite(total.detach()):
            raise TrainingDiverged(
                f"non-finite loss {float(total.detach())} at step {self.global_step}")

        self.optimizer.zero_grad(set_to_none=True)
        total.backward()
        params = [p for g in self.optimizer.param_groups for p in g["params"]]
        # Materialize zero grads before clipping so the norm is computed over
        # the same tensor list whether or not a branch took part in the loss;
        # otherwise a weight set to 0.0 and a branch left out of the graph
        # clip (and hence update) differently in the last bit.
        for p in params:
            if p.grad is None:
                p.grad = torch.zeros_like(p)
        torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
        self.optimizer.step()

        n = len(samples)
        means = {k: v / n for k, v in sums.items()}
        entry = {
            "stage": self.stage,
            "step": self.global_step,
            "epoch": self.epoch_in_stage,
            "loss": float(total.detach()),
            **{f"loss_{k}": v for k, v in means.items()},
            "alpha": self.model.fusion.value if self.model.config.use_depth else None,
        }
        self.global_step += 1
        self.history.append(entry)
        if self.log_path is not None:
            with self.log_path.open("a") as f:
                f.write(json.dumps(entry) + "\n")
        return entry

    # ---- public driving API ----

    def train_steps(self, stage: int, n_steps: int) -> list[dict]:
        self._enter_stage(stage)
        return [self._run_step() for _ in range(n_steps)]

    def train_stage1(self) -> None:
        if self.config.stage1_epochs == 0:
            return
        self._enter_stage(1)
        while self.epoch_in_stage < self.config.stage1_epochs:
            self._run_step()

    def train_stage2(self) -> None:
        if self.config.stage2_epochs == 0:
            return
        self._enter_stage(2)
        while self.epoch_in_stage < self.config.stage2_epochs:
            self._run_step()

    def train(self) -> None:
        if self.model.config.use_depth:
            self.train_stage1()
        self.train_stage2()

    # ---- checkpointing ----

    def save_checkpoint(self, path: Path) -> None:
        payload = {
            "version": CHECKPOINT_VERSION,
            "model": self.model.state_dict(),
            "optimizer": self.optimizer.state_dict() if self.optimizer else None,
            "trainer": {
                "stage": self.stage,
                "epoch_in_stage": self.epoch_in_stage,
                "step_in_epoch": self.step_in_epoch,
                "global_step": self.global_step,
                "epoch_order": None if self._epoch_order is None
                               else self._epoch_order.tolist(),
                "rng_state": self.rng.bit_generator.state,
                "torch_rng_state": torch.random.get_rng_state(),
            },
            "config": asdict(self.config),
            "config_fingerprint": self.config.fingerprint(),
            "model_config": self.model.config.to_dict(),
        }
        torch.save(payload, path)

    @staticmethod
    def read_checkpoint(path: Path) -> dict:
        payload = torch.load(path, map_location="cpu", weights_only=False)
        version = payload.get("version")
        if version != CHECKPOINT_VERSION:
            raise CheckpointVersionError(version, CHECKPOINT_VERSION)
        return payload

    @classmethod
    def from_checkpoint(cls, path: Path, model: Segmenter,
                        dataset: list[DatasetRecord],
                        log_path: Path | None = None) -> "Trainer":
        payload = cls.read_checkpoint(path)
        cfg_dict = dict(payload["config"])
        cfg_dict["weights"] = LossWeights(**cfg_dict["weights"])
        config = TrainConfig(**cfg_dict)
        trainer = cls(model, dataset, config, log_path=log_path)
        model.load_state_dict(payload["model"])
        state = payload["trainer"]
        stage = state["stage"]
        if stage:
            trainer._enter_stage(stage)
            if payload["optimizer"] is not None:
                trainer.optimizer.load_state_dict(payload["optimizer"])
        trainer.epoch_in_stage = state["epoch_in_stage"]
        trainer.step_in_epoch = state["step_in_epoch"]
        trainer.global_step = state["global_step"]
        trainer._epoch_order = None if state["epoch_order"] is None \
            else np.array(state["epoch_order"])
        trainer.rng.bit_generator.state = state["rng_state"]
        torch.random.set_rng_state(state["torch_rng_state"])
        return trainer
