"""Point-cloud encoder and hourglass causal decoder over coordinate tokens.

Level structure of the decoder (``T`` input positions, position 0 is BOS)::

    coordinate blocks      length T
      shorten x3           length (T - 1) // 3     one vector per vertex
      vertex blocks
        shorten x2         length Lv // 2          one vector per segment
        edge blocks
        upsample x2 (+ residual)
      vertex blocks
      upsample x3 (+ residual)
    coordinate blocks
    vocabulary head

Shortening keeps the last position of each group, so a coarse vector has seen
exactly its own group and everything before it. Upsampling hands coarse vector
``g`` only to fine positions at or after the end of group ``g``; positions
before the first complete group receive a learned null vector. Groups are
aligned after stripping BOS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..codec import BOS, EOS, PAD
from .config import ModelConfig


class NonFiniteError(FloatingPointError):
    pass


INIT_LOGVAR = -6.0


def level_lengths(n_positions: int) -> tuple[int, int, int]:
    """Sequence lengths at the coordinate, vertex and edge levels."""
    lv = max(n_positions - 1, 0) // 3
    return n_positions, lv, lv // 2


class Attention(nn.Module):
    def __init__(self, dim: int, n_heads: int, head_dim: int, kv_dim: int | None = None):
        super().__init__()
        kv_dim = kv_dim or dim
        inner = n_heads * head_dim
        self.n_heads, self.head_dim = n_heads, head_dim
        self.q = nn.Linear(dim, inner)
        self.k = nn.Linear(kv_dim, inner)
        self.v = nn.Linear(kv_dim, inner)
        self.out = nn.Linear(inner, dim)

    def forward(self, x, context=None, causal: bool = False):
        ctx = x if context is None else context
        B, T, _ = x.shape
        S = ctx.shape[1]
        q = self.q(x).view(B, T, self.n_heads, self.head_dim).transpose(1, 2)
        k = self.k(ctx).view(B, S, self.n_heads, self.head_dim).transpose(1, 2)
        v = self.v(ctx).view(B, S, self.n_heads, self.head_dim).transpose(1, 2)
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        if causal:
            mask = torch.ones(T, S, dtype=torch.bool, device=x.device).triu(1)
            scores = scores.masked_fill(mask, float("-inf"))
        att = scores.softmax(dim=-1)
        y = (att @ v).transpose(1, 2).reshape(B, T, self.n_heads * self.head_dim)
        return self.out(y)


class MLP(nn.Sequential):
    def __init__(self, dim: int, ratio: int):
        super().__init__(nn.Linear(dim, dim * ratio), nn.GELU(), nn.Linear(dim * ratio, dim))


class Block(nn.Module):
    """Pre-norm block: (causal) self-attention, cross-attention to the condition, MLP."""

    def __init__(self, dim, n_heads, head_dim, cond_dim=None, causal=True, mlp_ratio=4):
        super().__init__()
        self.causal = causal
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, n_heads, head_dim)
        self.cross = None
        if cond_dim is not None:
            self.norm_c = nn.LayerNorm(dim)
            self.cross = Attention(dim, n_heads, head_dim, kv_dim=cond_dim)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = MLP(dim, mlp_ratio)

    def forward(self, x, cond=None):
        x = x + self.attn(self.norm1(x), causal=self.causal)
        if self.cross is not None:
            x = x + self.cross(self.norm_c(x), cond)
        return x + self.mlp(self.norm2(x))


def fourier_features(xyz: torch.Tensor, n_freq: int) -> torch.Tensor:
    freqs = (2.0 ** torch.arange(n_freq, dtype=xyz.dtype, device=xyz.device)) * math.pi
    ang = xyz[..., None] * freqs  # (B, N, 3, F)
    feats = torch.cat([ang.sin(), ang.cos()], dim=-1).flatten(-2)
    return torch.cat([xyz, feats], dim=-1)


@dataclass
class ShapeEmbedding:
    tokens: torch.Tensor  # (B, L + 1, latent_dim); last token is the length bucket
    mu: torch.Tensor
    logvar: torch.Tensor

    def kl(self) -> torch.Tensor:
        """Mean KL divergence to the unit Gaussian per latent element."""
        return 0.5 * (self.mu.pow(2) + self.logvar.exp() - 1.0 - self.logvar).mean()


class PointEncoder(nn.Module):
    """Learned queries cross-attend to point features, then self-attend.

    A variational head gives per-element mean and log-variance; a sample is
    drawn in training mode and the mean is used otherwise.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.latent_dim
        heads = max(1, min(cfg.n_heads, d // 8))
        self.cfg = cfg
        in_dim = 3 + 6 * cfg.point_frequencies
        self.point_proj = nn.Linear(in_dim, d)
        self.tag_emb = nn.Embedding(3, d)
        self.queries = nn.Parameter(torch.zeros(cfg.latent_tokens, d))
        self.cross_attn = Attention(d, heads, d // heads)
        self.cross_norm_q = nn.LayerNorm(d)
        self.cross_norm_kv = nn.LayerNorm(d)
        self.layers = nn.ModuleList(
            Block(d, heads, d // heads, causal=False, mlp_ratio=cfg.mlp_ratio)
            for _ in range(cfg.encoder_layers))
        self.to_mu = nn.Linear(d, d)
        self.to_logvar = nn.Linear(d, d)
        self.bucket_emb = nn.Embedding(cfg.n_buckets, d)

    def forward(self, points, tags, bucket, generator=None) -> ShapeEmbedding:
        feats = self.point_proj(fourier_features(points, self.cfg.point_frequencies))
        feats = feats + self.tag_emb(tags.long())
        q = self.queries.unsqueeze(0).expand(points.shape[0], -1, -1)
        h = q + self.cross_attn(self.cross_norm_q(q), self.cross_norm_kv(feats))
        for layer in self.layers:
            h = layer(h)
        mu = self.to_mu(h)
        logvar = self.to_logvar(h)
        if self.training:
            eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
            z = mu + (0.5 * logvar).exp() * eps
        else:
            z = mu
        length_tok = self.bucket_emb(bucket.long()).unsqueeze(1)
        tokens = torch.cat([z, length_tok], dim=1)
        if not torch.isfinite(tokens).all():
            raise NonFiniteError("shape embedding contains non-finite values")
        return ShapeEmbedding(tokens, mu, logvar)


def shorten(x: torch.Tensor, factor: int, offset: int) -> torch.Tensor:
    """Last position of each complete group; group ``g`` spans ``offset + g*factor ...``."""
    n = max(x.shape[1] - offset, 0) // factor
    idx = offset + factor * torch.arange(n, device=x.device) + factor - 1
    return x[:, idx]


def upsample(coarse: torch.Tensor, null: torch.Tensor, length: int, factor: int,
             offset: int) -> torch.Tensor:
    """Give fine position ``i`` the latest coarse group that ended at or before ``i``."""
    i = torch.arange(length, device=coarse.device)
    g = torch.div(i - offset - (factor - 1), factor, rounding_mode="floor")
    valid = (g >= 0) & (g < coarse.shape[1])
    gathered = coarse[:, g.clamp(0, max(coarse.shape[1] - 1, 0))] if coarse.shape[1] else \
        null.expand(coarse.shape[0], length, -1)
    return torch.where(valid[None, :, None], gathered, null.expand(coarse.shape[0], length, -1))


class HourglassDecoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.width
        self.tok_emb = nn.Embedding(cfg.vocab_size, w)
        self.pos_emb = nn.Embedding(cfg.max_positions, w)
        self.slot_emb = nn.Embedding(7, w)  # BOS slot + x/y/z of head/tail
        self.vertex_pos = nn.Embedding(cfg.max_positions // 3 + 1, w)
        self.edge_pos = nn.Embedding(cfg.max_positions // 6 + 1, w)
        self.down_v = nn.Linear(w, w)
        self.down_e = nn.Linear(w, w)
        self.up_e = nn.Linear(w, w)
        self.up_v = nn.Linear(w, w)
        self.null_e = nn.Parameter(torch.zeros(w))
        self.null_v = nn.Parameter(torch.zeros(w))

        def stack(n):
            return nn.ModuleList(Block(w, cfg.n_heads, cfg.head_dim, cond_dim=cfg.latent_dim,
                                       mlp_ratio=cfg.mlp_ratio) for _ in range(n))

        pre, (v_pre, edge, v_post), post = cfg.depth
        self.coord_pre, self.vertex_pre = stack(pre), stack(v_pre)
        self.edge_blocks = stack(edge)
        self.vertex_post, self.coord_post = stack(v_post), stack(post)
        self.norm = nn.LayerNorm(w)
        self.head = nn.Linear(w, cfg.vocab_size)

    def forward(self, tokens: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        B, T = tokens.shape
        if T > self.cfg.max_positions:
            raise ValueError(f"sequence of {T} positions exceeds {self.cfg.max_positions}")
        pos = torch.arange(T, device=tokens.device)
        slot = torch.where(pos == 0, torch.zeros_like(pos), 1 + (pos - 1) % 6)
        h = self.tok_emb(tokens) + self.pos_emb(pos) + self.slot_emb(slot)
        for blk in self.coord_pre:
            h = blk(h, cond)

        hv = self.down_v(shorten(h, 3, offset=1))
        Lv = hv.shape[1]
        hv = hv + self.vertex_pos(torch.arange(Lv, device=h.device))
        for blk in self.vertex_pre:
            hv = blk(hv, cond)

        he = self.down_e(shorten(hv, 2, offset=0))
        he = he + self.edge_pos(torch.arange(he.shape[1], device=h.device))
        for blk in self.edge_blocks:
            he = blk(he, cond)

        hv = hv + upsample(self.up_e(he), self.null_e, Lv, 2, offset=0)
        for blk in self.vertex_post:
            hv = blk(hv, cond)

        h = h + upsample(self.up_v(hv), self.null_v, T, 3, offset=1)
        for blk in self.coord_post:
            h = blk(h, cond)
        return self.head(self.norm(h))


class SeamModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = PointEncoder(cfg)
        self.decoder = HourglassDecoder(cfg)
        self.reset_parameters()

    def reset_parameters(self):
        n_layers = sum(1 for m in self.modules() if isinstance(m, Block))
        std = 0.02 / math.sqrt(2 * max(n_layers, 1))
        for m in self.modules():
            if isinstance(m, nn.Linear):
                nn.init.normal_(m.weight, std=std)
                nn.init.zeros_(m.bias)
            elif isinstance(m, nn.Embedding):
                nn.init.normal_(m.weight, std=0.02)
        nn.init.normal_(self.encoder.queries, std=0.02)
        # start with a nearly deterministic latent; unit variance would drown the small initial means
        nn.init.constant_(self.encoder.to_logvar.bias, INIT_LOGVAR)

    def encode_shape(self, points, tags, bucket, generator=None) -> ShapeEmbedding:
        return self.encoder(points, tags, bucket, generator=generator)

    def forward(self, tokens, cond: ShapeEmbedding | torch.Tensor):
        c = cond.tokens if isinstance(cond, ShapeEmbedding) else cond
        return self.decoder(tokens, c)

    def loss(self, points, tags, bucket, tokens, generator=None, kl_weight=None):
        """Teacher-forced cross-entropy (PAD ignored) plus weighted KL.

        ``tokens`` are full padded streams ``(B, T)``; returns
        ``(total, ce, kl, logits)``.
        """
        beta = self.cfg.kl_weight if kl_weight is None else kl_weight
        emb = self.encode_shape(points, tags, bucket, generator=generator)
        inp, tgt = tokens[:, :-1], tokens[:, 1:]
        logits = self(inp, emb)
        ce = F.cross_entropy(logits.reshape(-1, logits.shape[-1]), tgt.reshape(-1), ignore_index=PAD)
        kl = emb.kl()
        total = ce + beta * kl
        return total, ce, kl, logits


def legal_mask(position: int, cfg: ModelConfig, vocab: int) -> torch.Tensor:
    """Tokens allowed at stream index ``position`` (>= 1) of a generated stream."""
    allowed = torch.zeros(vocab, dtype=torch.bool)
    n_coords = position - 1
    if n_coords >= cfg.max_tokens:
        allowed[EOS] = True
        return allowed
    allowed[: cfg.n_bins] = True
    if n_coords % 6 == 0 and n_coords > 0:
        allowed[EOS] = True
    allowed[BOS] = allowed[PAD] = False
    return allowed
