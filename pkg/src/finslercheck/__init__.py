"""finslercheck: numerical verification of Finsler metric changes.

Computes the fundamental tensors of a Finsler space from its metric
function by exact truncated Taylor arithmetic, applies the Kropina-type
change driven by an h-vector, and checks the resulting tensor identities
pointwise against independently computed values.
"""

from .finsler import (
    BaseGeometry,
    DegenerateMetricError,
    FinslerError,
    FundamentalTensors,
    InadmissiblePointError,
    MetricSpec,
    fundamental_tensors,
    h_covariant,
    landsberg_tensor,
    sample_admissible,
    spray_and_connections,
    v_covariant,
)
from .hfield import ConstrainedSlots, HVectorSpec, SlotPlan, evaluate, hvector_residuals
from .hypersurface import HypersurfaceSpec, classify, induced_geometry, starred_geometry
from .jets import (
    CapOverflowError,
    Jet,
    JetDomainError,
    JetSpace,
    MultiIndex,
    PointState,
    jet_space,
    lift,
    partial,
)
from .kropina import ChangedPoint, ChangedSpace
from .registry import list_registry
from .scenario import load_scenario, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BaseGeometry",
    "CapOverflowError",
    "ChangedPoint",
    "ChangedSpace",
    "ConstrainedSlots",
    "DegenerateMetricError",
    "FinslerError",
    "FundamentalTensors",
    "HVectorSpec",
    "HypersurfaceSpec",
    "InadmissiblePointError",
    "Jet",
    "JetDomainError",
    "JetSpace",
    "MetricSpec",
    "MultiIndex",
    "PointState",
    "SlotPlan",
    "classify",
    "evaluate",
    "fundamental_tensors",
    "h_covariant",
    "hvector_residuals",
    "induced_geometry",
    "jet_space",
    "landsberg_tensor",
    "lift",
    "list_registry",
    "load_scenario",
    "partial",
    "run_scenario",
    "sample_admissible",
    "spray_and_connections",
    "starred_geometry",
    "v_covariant",
    "__version__",
]
