"""Half-lightlike submanifolds of flat semi-Euclidean space.

Frames, induced objects, curvature identities and classification for
parametric immersions of an m-manifold into R^{m+2} with a diagonal
indefinite metric.
"""

from .semi_euclidean import AmbientSpace, inner, gram, null_kernel, gram_schmidt_signed
from .expr import parse, pretty, eval_jet, eval_value
from .framing import (
    ImmersionSpec,
    FramePoint,
    FrameError,
    GeometricDegeneracy,
    NotHalfLightlike,
    build_frame,
    frame_invariants,
    frame_field_derivatives,
)
from .gauss_weingarten import InducedObjects, induced_objects, induced_derivatives, gauge_rescale
from .curvature import induced_curvature, prop31_residuals, identity_residuals, cartan_sum, theorem41_residual
from .classify import ClassificationReport, classify, principal_curvatures
from . import fixtures

__version__ = "0.1.0"

__all__ = [
    "AmbientSpace", "inner", "gram", "null_kernel", "gram_schmidt_signed",
    "parse", "pretty", "eval_jet", "eval_value",
    "ImmersionSpec", "FramePoint", "FrameError", "GeometricDegeneracy", "NotHalfLightlike",
    "build_frame", "frame_invariants", "frame_field_derivatives",
    "InducedObjects", "induced_objects", "induced_derivatives", "gauge_rescale",
    "induced_curvature", "prop31_residuals", "identity_residuals", "cartan_sum", "theorem41_residual",
    "ClassificationReport", "classify", "principal_curvatures",
    "fixtures",
]
