"""Rational n-quasigroups: exact and sampled reducibility, and their webs."""

from .errors import (
    InvalidStructure,
    NoRootsFound,
    NotAQuasigroup,
    NotReducibleBlock,
    SingularPoint,
)
from .funcs import UnivariateFunction, derivative, eval_jet, linear_slope, poly
from .jets import GenericMap, Jet2, jet_eval
from .quasigroup import (
    RationalQuasigroup,
    linear_ramp,
    evaluate,
    first_partial,
    isotopy_normalize,
    mixed_second_partial,
    solvability_check,
    spheres,
    to_generic_map,
)
from .reducibility import (
    Classification,
    ConditionTriple,
    SamplerConfig,
    Structure,
    check_structure,
    classify,
    conditions_for,
    cross_validate,
    emit_reduction,
    eq16_residual,
    residual,
)
from .web import corollary_check, export_web, level_set_sample, normal_vector, sphere_constants

__version__ = "0.1.0"
