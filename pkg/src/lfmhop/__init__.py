"""Equivalent solutions of binary latent feature models.

Sample integer transforms U with ZU binary, enumerate them exactly for small
Z, and hop between equivalent factorizations (ZU, U^{-1} W) toward the one a
prior prefers.
"""

__version__ = "0.1.0"

from .baseline import BaselineConfig, fit
from .binarity import build_geometry, defect, defect_column
from .core import (
    LfmInstance,
    hamming_error,
    map_objective,
    regularizer_metric,
    residual,
    solve_w_given_z,
)
from .hopper import EquivalenceHopper, HopperConfig, hop
from .oracle import bias_transform_family, enumerate_equivalents, pdc_transform
from .pdc import detect_pdc, read_multilabel, survey
from .sampler import SamplerConfig, sample_candidates
from .synthgen import GeneratorSpec, gen_instance, gen_z, make_inverted_solution

__all__ = [
    "BaselineConfig",
    "EquivalenceHopper",
    "GeneratorSpec",
    "HopperConfig",
    "LfmInstance",
    "SamplerConfig",
    "bias_transform_family",
    "build_geometry",
    "defect",
    "defect_column",
    "detect_pdc",
    "enumerate_equivalents",
    "fit",
    "gen_instance",
    "gen_z",
    "hamming_error",
    "hop",
    "make_inverted_solution",
    "map_objective",
    "pdc_transform",
    "read_multilabel",
    "regularizer_metric",
    "residual",
    "sample_candidates",
    "solve_w_given_z",
    "survey",
]
