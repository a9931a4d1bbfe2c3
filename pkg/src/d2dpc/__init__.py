"""Device-to-device coded caching with demand privacy.

Protocol library and deterministic simulator: private placement with
per-file piece permutations, virtual-user XOR multicast delivery,
peeling and GF(2)-elimination decoders, an exact/sampled privacy
auditor, uncoded and shared-link baselines, and rate analysis.
"""

from .errors import (
    SchemeError,
    InvalidParameter,
    DivisibilityError,
    InstanceTooLarge,
    ProtocolViolation,
    BudgetExceeded,
)
from .placement import SchemeParams, validate_params

__all__ = [
    "SchemeError",
    "InvalidParameter",
    "DivisibilityError",
    "InstanceTooLarge",
    "ProtocolViolation",
    "BudgetExceeded",
    "SchemeParams",
    "validate_params",
]

__version__ = "0.1.0"
