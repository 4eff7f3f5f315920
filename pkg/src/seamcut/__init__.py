"""Seam tokenization, mesh cutting, conformal flattening and patch segmentation.

The neural generator lives in :mod:`seamcut.neural` and is imported lazily so
the geometry pipeline works without loading torch.
"""

from .codec import BOS, EOS, N_BINS, PAD, SeamSequence, decode, encode
from .cutting import CutResult, apply_seams, cut_along_edges
from .extract import SeamEdgeSet, extract_seams, validate_uv_layout
from .flatten import UVAtlas, conformal_energy, flatten_chart, pack_charts, unwrap_cut
from .mesh import TriMesh, load_obj, normalize_to_unit_cube, save_obj, topology
from .sampling import ConditionCloud, sample_condition
from .segmentation import boundary_cleanliness, refine_labels

__version__ = "0.1.0"

__all__ = [
    "BOS", "EOS", "N_BINS", "PAD", "ConditionCloud", "CutResult", "SeamEdgeSet", "SeamSequence",
    "TriMesh", "UVAtlas", "apply_seams", "boundary_cleanliness", "conformal_energy",
    "cut_along_edges", "decode", "encode", "extract_seams", "flatten_chart", "load_obj",
    "normalize_to_unit_cube", "pack_charts", "refine_labels", "sample_condition", "save_obj",
    "topology", "unwrap_cut", "validate_uv_layout",
]
