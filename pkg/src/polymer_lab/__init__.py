"""Discrete-time directed polymers and last-passage paths on tilted lattices."""

__version__ = "0.1.0"

from .kernels import LANE as KERNEL_LANE  # noqa: F401
from .shape import (DominationReport, ShapeCurve,  # noqa: F401
                    alpha_beta_concavity, convexity_report,
                    derivative_consistency, domination_check, estimate_shape)
