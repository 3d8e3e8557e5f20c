"""Formal power-series solutions of analytic first-order PDE systems.

Linear systems dy_r/dx_u + sum_s f_rsu(x) y_s = 0 are solved through
propagator matrices built from the covariant derivative; polynomial
nonlinear systems are reduced to linear ones over monomials of y.
"""

from .linear import (
    IntegrabilityError,
    LinearSystem,
    check_integrable,
    curvature,
    propagators,
    radius_estimate,
    solve_linear,
)
from .nonlinear import (
    LaurentWindow,
    NonlinearSystem,
    WindowEscapeError,
    check_identities,
    is_integrable_nonlinear,
    lift,
    solve_nonlinear,
)
from .oracle import cross_validate, path_integrate, residual_linear, residual_nonlinear, taylor_oracle
from .series import FLOAT, RATIONAL, PowerSeries, UsageError, parse_polynomial
from .specfile import load_spec

__all__ = [
    "FLOAT",
    "RATIONAL",
    "IntegrabilityError",
    "LaurentWindow",
    "LinearSystem",
    "NonlinearSystem",
    "PowerSeries",
    "UsageError",
    "WindowEscapeError",
    "check_identities",
    "check_integrable",
    "cross_validate",
    "curvature",
    "is_integrable_nonlinear",
    "lift",
    "load_spec",
    "parse_polynomial",
    "path_integrate",
    "propagators",
    "radius_estimate",
    "residual_linear",
    "residual_nonlinear",
    "solve_linear",
    "solve_nonlinear",
    "taylor_oracle",
]
