"""Seam sequences and their coordinate-token encoding.

A seam is a set of 3D line segments in normalized ``[-1, 1]^3`` coordinates.
Sequences are kept canonical: endpoints are quantized to 1024 bins per axis,
each segment stores its lower endpoint first under ``(y, z, x)`` comparison,
and segments are sorted by ``(head, tail)`` under the same key.

Token layout of a stream::

    BOS, x_h, y_h, z_h, x_t, y_t, z_t, ..., EOS

with coordinate tokens in ``[0, 1023]`` and BOS/EOS/PAD = 1024/1025/1026.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

N_BINS = 1024
BOS = 1024
EOS = 1025
PAD = 1026
VOCAB_SIZE = 1027
DEFAULT_MAX_SEGMENTS = 1024
CLAMP_SLACK = 1e-9


class CodecError(ValueError):
    pass


class MalformedStreamError(CodecError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"token {position}: {message}")


def quantize(coord, n_bins: int = N_BINS):
    """Map coordinates in ``[-1, 1]`` to integer bins ``floor((c + 1) / 2 * n_bins)``.

    Accepts scalars or arrays. Values outside the interval by at most 1e-9 are
    clamped; anything further out, or non-finite, raises.
    """
    c = np.asarray(coord, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        raise CodecError("cannot quantize non-finite coordinate")
    if np.any(np.abs(c) > 1.0 + CLAMP_SLACK):
        raise CodecError(f"coordinate outside [-1, 1]: {c[np.abs(c) > 1.0 + CLAMP_SLACK].ravel()[0]!r}")
    b = np.floor((np.clip(c, -1.0, 1.0) + 1.0) / 2.0 * n_bins).astype(np.int64)
    b = np.clip(b, 0, n_bins - 1)
    return int(b) if b.ndim == 0 else b


def dequantize(bins, n_bins: int = N_BINS):
    """Bin centers ``-1 + (b + 0.5) * 2 / n_bins``."""
    b = np.asarray(bins)
    if not np.issubdtype(b.dtype, np.integer):
        if not np.all(b == np.floor(b)):
            raise CodecError("bin indices must be integers")
        b = b.astype(np.int64)
    if np.any((b < 0) | (b >= n_bins)):
        raise CodecError(f"bin index out of range [0, {n_bins - 1}]")
    c = -1.0 + (b + 0.5) * (2.0 / n_bins)
    return float(c) if c.ndim == 0 else c


def yzx_key(p) -> tuple:
    return (p[1], p[2], p[0])


@dataclass(frozen=True, order=True)
class SeamSegment:
    head: tuple[float, float, float]
    tail: tuple[float, float, float]

    def __post_init__(self):
        h = tuple(float(x) for x in self.head)
        t = tuple(float(x) for x in self.tail)
        if len(h) != 3 or len(t) != 3:
            raise CodecError("segment endpoints must be 3D")
        if h == t:
            raise CodecError("zero-length segment")
        object.__setattr__(self, "head", h)
        object.__setattr__(self, "tail", t)

    def canonical(self) -> "SeamSegment":
        if yzx_key(self.tail) < yzx_key(self.head):
            return SeamSegment(self.tail, self.head)
        return self

    def sort_key(self) -> tuple:
        return yzx_key(self.head) + yzx_key(self.tail)


@dataclass(frozen=True)
class SeamSequence:
    """Canonical ordered seam. Build with :func:`canonical_sort`."""

    segments: tuple[SeamSegment, ...]

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def as_array(self) -> np.ndarray:
        """Segments as ``(N, 2, 3)`` float array."""
        if not self.segments:
            return np.zeros((0, 2, 3))
        return np.array([[s.head, s.tail] for s in self.segments], dtype=np.float64)

    def to_json(self) -> dict:
        return {"normalized": True,
                "segments": [[list(s.head), list(s.tail)] for s in self.segments]}

    @classmethod
    def from_json(cls, obj: dict) -> "SeamSequence":
        if not obj.get("normalized", True):
            raise CodecError("seam JSON must hold normalized coordinates")
        segs = obj.get("segments", [])
        if not segs:
            return cls(())
        return canonical_sort(snap_to_bins(np.asarray(segs, dtype=np.float64)), drop_degenerate=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "SeamSequence":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def snap_to_bins(points: np.ndarray, n_bins: int = N_BINS) -> np.ndarray:
    """Quantize then dequantize, moving every coordinate onto its bin center."""
    return dequantize(quantize(points, n_bins), n_bins)


def canonical_sort(segments, drop_degenerate: bool = False) -> SeamSequence:
    """Canonicalize endpoint order within segments, sort, and remove duplicates.

    ``segments`` may be :class:`SeamSegment` objects or an ``(N, 2, 3)`` array.
    With ``drop_degenerate`` zero-length input segments are skipped instead of
    raising; an input with no usable segment raises either way.
    """
    items: list[SeamSegment] = []
    if isinstance(segments, np.ndarray):
        arr = segments.reshape(-1, 2, 3)
        for h, t in arr:
            if np.array_equal(h, t):
                if drop_degenerate:
                    continue
                raise CodecError("zero-length segment")
            items.append(SeamSegment(tuple(h), tuple(t)))
    else:
        items = list(segments)
    if not items:
        raise CodecError("no non-degenerate segments to sort")
    canon = {s.canonical() for s in items}
    return SeamSequence(tuple(sorted(canon, key=SeamSegment.sort_key)))


def seam_from_edges(vertices: np.ndarray, edges: Iterable[Sequence[int]],
                    n_bins: int = N_BINS) -> SeamSequence:
    """Build a canonical quantized seam from mesh edges (vertices already normalized)."""
    edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return SeamSequence(())
    pts = snap_to_bins(np.asarray(vertices)[edges], n_bins)
    return canonical_sort(pts, drop_degenerate=True)


def encode(seq: SeamSequence, max_segments: int = DEFAULT_MAX_SEGMENTS,
           n_bins: int = N_BINS) -> list[int]:
    """Token stream ``[BOS, 6 coords per segment..., EOS]``."""
    if seq.n_segments == 0:
        raise CodecError("cannot encode an empty seam")
    if seq.n_segments > max_segments:
        raise CodecError(f"{seq.n_segments} segments exceed the maximum of {max_segments}")
    coords = quantize(seq.as_array().reshape(-1), n_bins)
    return [BOS, *coords.tolist(), EOS]


def validate_stream(tokens: Sequence[int], require_eos: bool = True) -> int:
    """Check stream structure; returns the number of coordinate tokens."""
    toks = list(tokens)
    if not toks or toks[0] != BOS:
        raise MalformedStreamError("stream must begin with BOS", 0)
    eos = next((i for i in range(1, len(toks)) if toks[i] == EOS), None)
    if eos is not None:
        for i in range(eos + 1, len(toks)):
            if toks[i] != PAD:
                raise MalformedStreamError("non-PAD token after EOS", i)
        body_end = eos
    else:
        body_end = len(toks)
        while body_end > 1 and toks[body_end - 1] == PAD:
            body_end -= 1
        if require_eos:
            raise MalformedStreamError("stream is missing EOS", body_end)
    for i in range(1, body_end):
        t = toks[i]
        if not 0 <= t < N_BINS:
            raise MalformedStreamError(f"unexpected token {t} inside coordinate run", i)
    n = body_end - 1
    if n % 6:
        raise MalformedStreamError(f"truncated segment ({n % 6} dangling coordinates)", body_end - (n % 6))
    return n


def decode(tokens: Sequence[int], require_eos: bool = True,
           n_bins: int = N_BINS) -> SeamSequence:
    """Inverse of :func:`encode`. Segments collapsing to a point are dropped."""
    n = validate_stream(tokens, require_eos=require_eos)
    body = np.asarray(list(tokens)[1:1 + n], dtype=np.int64).reshape(-1, 2, 3)
    if len(body) == 0:
        return SeamSequence(())
    keep = ~np.all(body[:, 0] == body[:, 1], axis=1)
    if not keep.any():
        return SeamSequence(())
    return canonical_sort(dequantize(body[keep], n_bins))


def save_tokens(tokens: Sequence[int], path, binary: bool = False) -> None:
    if binary:
        np.asarray(tokens, dtype="<u2").tofile(path)
    else:
        with open(path, "w") as fh:
            json.dump([int(t) for t in tokens], fh)


def load_tokens(path, binary: bool = False) -> list[int]:
    if binary:
        return np.fromfile(path, dtype="<u2").astype(np.int64).tolist()
    with open(path) as fh:
        return [int(t) for t in json.load(fh)]

