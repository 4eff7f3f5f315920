"""Patch-based part labels: each seam-bounded patch takes its majority face label."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh


class LabelError(ValueError):
    pass


@dataclass
class PatchLabeling:
    patch_labels: list[int]
    counts: list[dict[int, int]]
    face_labels: np.ndarray

    def to_json(self) -> dict:
        return {
            "labels": self.face_labels.tolist(),
            "patch_labels": self.patch_labels,
            "patch_counts": [{str(k): v for k, v in sorted(c.items())} for c in self.counts],
        }


def load_labels(path) -> np.ndarray:
    with open(path) as fh:
        obj = json.load(fh)
    if "labels" not in obj:
        raise LabelError("label file has no 'labels' array")
    labels = np.asarray(obj["labels"])
    if labels.ndim != 1 or (labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0)):
        raise LabelError("labels must be a flat list of nonnegative integers")
    return labels.astype(np.int64)


def refine_labels(charts, labels) -> PatchLabeling:
    """Assign every patch the most frequent label among its faces.

    Ties go to the smallest label id. ``charts`` must partition the faces
    ``0 .. len(labels) - 1``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    seen = np.zeros(n, dtype=np.int64)
    for patch in charts:
        idx = np.asarray(patch, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise LabelError("patch references a face without a label")
        np.add.at(seen, idx, 1)
    if np.any(seen != 1):
        missing = int(np.sum(seen == 0))
        raise LabelError(f"patches do not partition the faces ({missing} uncovered, "
                         f"{int(np.sum(seen > 1))} repeated)")
    refined = np.empty(n, dtype=np.int64)
    patch_labels, counts = [], []
    for patch in charts:
        idx = np.asarray(patch, dtype=np.int64)
        ids, cnt = np.unique(labels[idx], return_counts=True)
        best = int(ids[np.argmax(cnt)])  # ids ascending, argmax takes the first maximum
        patch_labels.append(best)
        counts.append({int(i): int(c) for i, c in zip(ids, cnt)})
        refined[idx] = best
    return PatchLabeling(patch_labels, counts, refined)


def boundary_cleanliness(face_labels, charts, mesh: TriMesh) -> float:
    """Fraction of label-transition edges that lie on patch borders.

    Returns 1.0 when no interior edge separates different labels.
    """
    if isinstance(face_labels, PatchLabeling):
        face_labels = face_labels.face_labels
    face_labels = np.asarray(face_labels)
    patch_of = np.empty(mesh.n_faces, dtype=np.int64)
    for k, patch in enumerate(charts):
        patch_of[np.asarray(patch, dtype=np.int64)] = k
    transitions = on_seam = 0
    for fs in mesh.edge_faces:
        if len(fs) < 2:
            continue
        labs = face_labels[fs]
        if np.all(labs == labs[0]):
            continue
        transitions += 1
        if len(set(patch_of[fs].tolist())) > 1:
            on_seam += 1
    return 1.0 if transitions == 0 else on_seam / transitions
