"""warpspec: first Dirichlet eigenvalues of geodesic balls in rotationally
symmetric manifolds, with the sharp pi^2/16 lower-bound pipeline."""

from .errors import DomainError, InvariantViolation, NumericalError, UnsupportedError
from .warped_geometry import (
    AvrEstimate,
    CurvatureReport,
    RotSymManifold,
    WarpingFunction,
    avr_estimate,
    curvature_report,
    kristaly_bound,
    sphere_surface_area,
    unit_ball_volume,
    volume_ball,
)
from .radial_spectrum import (
    EigenSolution,
    RadialDirichletProblem,
    bessel_j,
    bessel_root,
    solve_fd,
    solve_shoot,
    sphere_family_lambda,
)

__version__ = "0.1.0"

__all__ = [
    "AvrEstimate", "CurvatureReport", "RotSymManifold", "WarpingFunction",
    "avr_estimate", "curvature_report", "kristaly_bound",
    "sphere_surface_area", "unit_ball_volume", "volume_ball",
    "EigenSolution", "RadialDirichletProblem", "bessel_j", "bessel_root",
    "solve_fd", "solve_shoot", "sphere_family_lambda",
    "DomainError", "InvariantViolation", "NumericalError", "UnsupportedError",
    "__version__",
]
