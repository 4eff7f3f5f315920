from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from ..codec import PAD, SeamSequence, canonical_sort, decode, encode, snap_to_bins
from ..mesh import TriMesh
from ..sampling import ConditionCloud, sample_condition
from .config import ModelConfig, TrainConfig
from .model import SeamModel

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    def __init__(self, step: int, message: str = "loss is not finite"):
        self.step = step
        super().__init__(f"step {step}: {message}")


@dataclass
class Example:
    points: np.ndarray  # (N, 3)
    tags: np.ndarray  # (N,)
    tokens: list[int]

    @property
    def n_segments(self) -> int:
        return (len(self.tokens) - 2) // 6


def make_example(mesh: TriMesh, seam: SeamSequence, cfg: ModelConfig,
                 cloud: ConditionCloud | None = None) -> Example:
    """Pair a normalized mesh's condition cloud with its encoded seam."""
    if cloud is None:
        cloud = sample_condition(mesh, cfg.point_budget)
    tokens = encode(seam, max_segments=cfg.max_segments, n_bins=cfg.n_bins)
    return Example(cloud.points, cloud.tags, tokens)


def rotation_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def augment(example: Example, scale: float, angle: float, jitter: float,
            rng: np.random.Generator, cfg: ModelConfig) -> Example:
    """Scale and rotate cloud and seam together, refit into the unit cube, jitter the cloud.

    The seam is re-quantized and re-sorted after the transform so the target
    stream stays canonical.
    """
    R = rotation_y(angle) * scale
    pts = example.points @ R.T
    seg = decode(example.tokens, n_bins=cfg.n_bins).as_array().reshape(-1, 3) @ R.T
    fit = max(1.0, float(np.abs(pts).max()), float(np.abs(seg).max()))
    pts = pts / fit
    seg = seg / fit
    if jitter > 0.0:
        pts = pts + rng.normal(scale=jitter, size=pts.shape)
    seam = canonical_sort(snap_to_bins(seg.reshape(-1, 2, 3), cfg.n_bins), drop_degenerate=True)
    return Example(pts, example.tags, encode(seam, cfg.max_segments, cfg.n_bins))


def collate(examples: list[Example], cfg: ModelConfig, dtype=torch.float32):
    T = max(len(e.tokens) for e in examples)
    toks = torch.full((len(examples), T), PAD, dtype=torch.long)
    for i, e in enumerate(examples):
        toks[i, : len(e.tokens)] = torch.tensor(e.tokens)
    pts = torch.tensor(np.stack([e.points for e in examples]), dtype=dtype)
    tags = torch.tensor(np.stack([e.tags for e in examples]), dtype=torch.long)
    bucket = torch.tensor([cfg.bucket_of(e.n_segments) for e in examples], dtype=torch.long)
    return pts, tags, bucket, toks


@dataclass
class TrainResult:
    model: SeamModel
    optimizer: torch.optim.Optimizer
    history: list[tuple[int, float, float]] = field(default_factory=list)

    def save_curve(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "ce_loss", "kl_loss"])
            for step, ce, kl in self.history:
                w.writerow([step, f"{ce:.8g}", f"{kl:.8g}"])


def train(dataset: list[Example], cfg: ModelConfig, hyper: TrainConfig | None = None,
          model: SeamModel | None = None, stop_when=None) -> TrainResult:
    """Teacher-forced training with cross-entropy plus ``cfg.kl_weight`` times KL.

    ``stop_when(step, model)`` may end training early by returning True.
    """
    hyper = hyper or TrainConfig()
    if not dataset:
        raise ValueError("dataset is empty")
    for e in dataset:
        if len(e.tokens) > cfg.max_positions:
            raise ValueError(f"stream of {len(e.tokens)} tokens exceeds {cfg.max_positions}")
    torch.manual_seed(hyper.seed)
    rng = np.random.default_rng(hyper.seed)
    gen = torch.Generator().manual_seed(hyper.seed)
    if model is None:
        model = SeamModel(cfg)
    opt = torch.optim.Adam(model.parameters(), lr=hyper.lr, weight_decay=0.0)
    warm = max(hyper.warmup_steps, 0)
    sched = torch.optim.lr_scheduler.LambdaLR(
        opt, lambda s: min(1.0, (s + 1) / warm) if warm else 1.0)
    result = TrainResult(model, opt)
    order = rng.permutation(len(dataset))
    cursor = 0
    for step in range(hyper.steps):
        batch = []
        for _ in range(hyper.batch_size):
            if cursor == len(order):
                order, cursor = rng.permutation(len(dataset)), 0
            ex = dataset[order[cursor]]
            cursor += 1
            if hyper.augment:
                ex = augment(ex, rng.uniform(*hyper.scale_range),
                             rng.uniform(0, 2 * math.pi) if hyper.rotate else 0.0,
                             hyper.jitter, rng, cfg)
            batch.append(ex)
        dtype = next(model.parameters()).dtype
        pts, tags, bucket, toks = collate(batch, cfg, dtype)
        model.train()
        loss, ce, kl, _ = model.loss(pts, tags, bucket, toks, generator=gen)
        if not torch.isfinite(loss):
            raise TrainingError(step)
        opt.zero_grad(set_to_none=True)
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), hyper.grad_clip)
        opt.step()
        sched.step()
        result.history.append((step, ce.item(), kl.item()))
        if hyper.log_every and step % hyper.log_every == 0:
            log.info("step %d ce %.4f kl %.4f", step, ce.item(), kl.item())
        if stop_when is not None and stop_when(step, model):
            break
    return result


@torch.no_grad()
def teacher_forced_accuracy(model: SeamModel, examples: list[Example]) -> float:
    """Fraction of target tokens predicted exactly by argmax in inference mode."""
    model.eval()
    cfg = model.cfg
    hits = total = 0
    for ex in examples:
        pts, tags, bucket, toks = collate([ex], cfg, next(model.parameters()).dtype)
        emb = model.encode_shape(pts, tags, bucket)
        pred = model(toks[:, :-1], emb).argmax(-1)
        hits += int((pred == toks[:, 1:]).sum())
        total += toks.shape[1] - 1
    return hits / total
