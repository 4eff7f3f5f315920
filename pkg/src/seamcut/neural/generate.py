from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..codec import BOS, EOS, SeamSequence, decode
from ..sampling import ConditionCloud
from .config import GenerationConfig
from .model import SeamModel, legal_mask


@dataclass
class GenerationResult:
    seam: SeamSequence
    tokens: list[int]
    truncated: bool
    bucket: int
    target_segments: int


def target_bucket(model: SeamModel, gen: GenerationConfig, n_vertices: int) -> tuple[int, int]:
    """Bucket for ``R * n_vertices`` segments, unless ``gen.bucket`` overrides it."""
    target = max(1, int(round(gen.ratio * n_vertices)))
    if gen.bucket is not None:
        if not 0 <= gen.bucket < model.cfg.n_buckets:
            raise ValueError(f"bucket {gen.bucket} outside [0, {model.cfg.n_buckets})")
        return gen.bucket, target
    return model.cfg.bucket_of(target), target


def _pick(logits: torch.Tensor, gen: GenerationConfig, rng: torch.Generator) -> int:
    if gen.temperature <= 0.0:
        return int(torch.argmax(logits))
    logits = logits / gen.temperature
    if gen.top_k > 0:
        k = min(gen.top_k, int(torch.isfinite(logits).sum()))
        kth = torch.topk(logits, k).values[-1]
        logits = logits.masked_fill(logits < kth, float("-inf"))
    probs = torch.softmax(logits.double(), dim=-1)
    return int(torch.multinomial(probs, 1, generator=rng))


@torch.no_grad()
def generate(model: SeamModel, cloud: ConditionCloud, gen: GenerationConfig,
             n_vertices: int) -> GenerationResult:
    """Sample a seam token by token from BOS.

    Illegal tokens (control tokens mid-segment, PAD, a second BOS) are masked
    before sampling. Generation stops at EOS; if the segment limit is reached
    first the stream is closed with EOS and flagged as truncated.
    """
    if len(cloud.points) == 0:
        raise ValueError("condition cloud is empty")
    model.eval()
    cfg = model.cfg
    dtype = next(model.parameters()).dtype
    bucket, target = target_bucket(model, gen, n_vertices)
    limit = cfg.max_segments if gen.max_segments is None else min(gen.max_segments, cfg.max_segments)
    pts = torch.as_tensor(np.asarray(cloud.points), dtype=dtype)[None]
    tags = torch.as_tensor(np.asarray(cloud.tags), dtype=torch.long)[None]
    emb = model.encode_shape(pts, tags, torch.tensor([bucket]))
    rng = torch.Generator().manual_seed(int(gen.seed))

    tokens = [BOS]
    truncated = False
    while True:
        n_coords = len(tokens) - 1
        if n_coords == 6 * limit:
            truncated = True
            tokens.append(EOS)
            break
        logits = model(torch.tensor([tokens]), emb)[0, -1]
        allowed = legal_mask(len(tokens), cfg, logits.shape[-1])
        logits = logits.masked_fill(~allowed, float("-inf"))
        tok = _pick(logits, gen, rng)
        tokens.append(tok)
        if tok == EOS:
            break
    seam = decode(tokens, n_bins=cfg.n_bins)
    return GenerationResult(seam, tokens, truncated, bucket, target)
