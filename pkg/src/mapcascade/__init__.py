"""mapcascade: samplers and numerics for a ring-decorated planar map model.

The hot sampling loops (perimeter walks and stable-excursion cascades) are
implemented twice: a compiled Cython kernel and a pure-Python fallback that
consumes the random stream identically.  The compiled backend is selected at
import when available; ``KERNEL_AVAILABLE`` records which one is active.
"""

try:
    from . import _kernel  # noqa: F401

    KERNEL_AVAILABLE = True
except ImportError:
    _kernel = None
    KERNEL_AVAILABLE = False

from .weights import (  # noqa: E402
    AdmissibilityError,
    CoverageError,
    DegenerateDistributionError,
    ModelConfig,
    OffspringDistribution,
    PowerTail,
    WeightSequence,
    beta_from_charge,
    c_tail_max,
    classify,
    from_weights,
    make_default_critical_mu,
    mu_from_weights,
    size_bias,
    solve_partition_point,
    tilt_subcritical,
    weights_from_mu,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_AVAILABLE",
    "AdmissibilityError",
    "CoverageError",
    "DegenerateDistributionError",
    "ModelConfig",
    "OffspringDistribution",
    "PowerTail",
    "WeightSequence",
    "beta_from_charge",
    "c_tail_max",
    "classify",
    "from_weights",
    "make_default_critical_mu",
    "mu_from_weights",
    "size_bias",
    "solve_partition_point",
    "tilt_subcritical",
    "weights_from_mu",
    "__version__",
]
