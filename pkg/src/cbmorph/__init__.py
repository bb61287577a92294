"""Parametric Craig-Bampton surrogates with conditioning-aware region detection."""
from .craig_bampton import CBReduced, cb_reduce, cb_transform, cb_transform_for
from .errors import CbmorphError
from .models import ModelParams, Substructure, build_lattice, build_resonator_cell, generator_for
from .projection import CommonBasis, cb_reduce_common, common_basis, diagnostics
from .regions import ParameterSpace, label_samples, tag_regions

__version__ = "0.1.0"

__all__ = [
    "CBReduced", "cb_reduce", "cb_transform", "cb_transform_for", "CbmorphError", "ModelParams",
    "Substructure", "build_lattice", "build_resonator_cell", "generator_for", "CommonBasis",
    "cb_reduce_common", "common_basis", "diagnostics", "ParameterSpace", "label_samples",
    "tag_regions",
]
