from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ..codec import N_BINS, VOCAB_SIZE


def _as_depth(depth) -> tuple:
    outer_pre, (fine, middle, coarse), outer_post = depth
    return (int(outer_pre), (int(fine), int(middle), int(coarse)), int(outer_post))


@dataclass
class ModelConfig:
    """Architecture and data constants.

    ``depth`` is ``(coordinate_pre, (vertex_pre, edge, vertex_post), coordinate_post)``
    block counts. ``max_tokens`` counts coordinate tokens only; BOS and EOS add two
    positions on top.
    """

    width: int = 128
    n_heads: int = 4
    head_dim: int = 32
    depth: tuple = (1, (1, 2, 1), 1)
    vocab_size: int = VOCAB_SIZE
    max_tokens: int = 1536
    latent_tokens: int = 16
    latent_dim: int = 64
    encoder_layers: int = 1
    point_frequencies: int = 6
    n_buckets: int = 16
    kl_weight: float = 1e-4
    n_bins: int = N_BINS
    mlp_ratio: int = 4
    point_budget: int = 4096

    def __post_init__(self):
        self.depth = _as_depth(self.depth)
        if self.max_tokens % 6:
            raise ValueError("max_tokens must be divisible by 6")
        if self.width % self.n_heads:
            raise ValueError("width must be divisible by n_heads")
        outer_pre, inner, outer_post = self.depth
        if min(outer_pre, outer_post, *inner) < 1:
            raise ValueError("every depth entry must be >= 1")
        if self.point_budget % 2:
            raise ValueError("point_budget must be even")

    @property
    def max_segments(self) -> int:
        return self.max_tokens // 6

    @property
    def max_positions(self) -> int:
        return self.max_tokens + 2

    @classmethod
    def paper_scale(cls) -> "ModelConfig":
        return cls(width=1536, n_heads=16, head_dim=64, depth=(2, (4, 12, 4), 2),
                   max_tokens=36_864, latent_tokens=3072, latent_dim=1024,
                   encoder_layers=8, point_budget=61_440)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["depth"] = [self.depth[0], list(self.depth[1]), self.depth[2]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    # length buckets -------------------------------------------------------

    def bucket_of(self, n_segments: int) -> int:
        n = min(max(int(n_segments), 1), self.max_segments)
        return min(self.n_buckets - 1, (n - 1) * self.n_buckets // self.max_segments)

    def bucket_range(self, bucket: int) -> tuple[int, int]:
        """Inclusive segment-count range ``(lo, hi)`` mapped to ``bucket``."""
        lo = math.ceil(bucket * self.max_segments / self.n_buckets) + 1
        hi = math.ceil((bucket + 1) * self.max_segments / self.n_buckets)
        return lo, min(hi, self.max_segments)


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 8
    lr: float = 1e-4
    grad_clip: float = 0.5
    warmup_steps: int = 0
    seed: int = 0
    augment: bool = True
    scale_range: tuple = (0.95, 1.05)
    rotate: bool = True
    jitter: float = 0.01
    log_every: int = 50


ADVISORY_RATIO = (0.1, 0.35)


@dataclass
class GenerationConfig:
    ratio: float = 0.2
    temperature: float = 1.0
    top_k: int = 0
    seed: int = 0
    max_segments: int | None = None
    bucket: int | None = None  # overrides the ratio-derived bucket

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie in (0, 1)")

    @property
    def ratio_advisory(self) -> str | None:
        lo, hi = ADVISORY_RATIO
        if not lo <= self.ratio <= hi:
            return f"ratio {self.ratio} is outside the advisory range [{lo}, {hi}]"
        return None

