"""Policy adaptation for distribution shift: surrogate training, certified
residual bounds, and convex per-step action adaptation."""

from shiftguard._core import (  # noqa: F401
    AdaptResult,
    BoundResult,
    ReluNetwork,
    bound_residual_fixed_action,
    chi_square_quantile,
    confidence_ellipsoid_shape,
    load_network,
    pso_minimize,
    save_network,
    solve_adaptation,
)

__all__ = [
    "AdaptResult",
    "BoundResult",
    "ReluNetwork",
    "bound_residual_fixed_action",
    "chi_square_quantile",
    "confidence_ellipsoid_shape",
    "load_network",
    "pso_minimize",
    "save_network",
    "solve_adaptation",
]
