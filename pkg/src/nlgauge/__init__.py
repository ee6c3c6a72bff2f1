"""Nonlocal gauge construction for antisymmetric potentials on a 1D grid."""

__version__ = "0.1.0"

from .grid import Field, Geometry, GridSpec, OdForm, make_grid  # noqa: E402
from .calculus import d_s, div_s, frac_laplacian, odform_dot  # noqa: E402
from .hodge import HodgeParts, hodge_decompose, solve_frac_poisson  # noqa: E402
from .gauge import GaugeConfig, GaugeResult, build_gauge, coulomb_rotation_gauge  # noqa: E402
from .system import conservation_residual, solve_system  # noqa: E402
from .cutoff import loglog_cutoff  # noqa: E402
from .localize import localize  # noqa: E402

__all__ = [
    "Field", "Geometry", "GridSpec", "OdForm", "make_grid",
    "d_s", "div_s", "frac_laplacian", "odform_dot",
    "HodgeParts", "hodge_decompose", "solve_frac_poisson",
    "GaugeConfig", "GaugeResult", "build_gauge", "coulomb_rotation_gauge",
    "conservation_residual", "solve_system",
    "loglog_cutoff", "localize",
]
