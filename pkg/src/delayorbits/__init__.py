"""Families of 1-periodic delay orbits of planar vector fields.

The field is built from an angular function f on the circle and a radial
function g with g(0) = 0. This package enumerates the field's 1-periodic
orbits, continues the associated delay-orbit families in the delay parameter,
glues families across degenerate contacts, certifies cusps of the
representing planar curves, and verifies everything independently (delay
equation residuals, method-of-steps integration, monodromy).
"""

from .atlas import (
    LevelPoint,
    OrbitClassification,
    OrbitStatus,
    PointKind,
    classify_orbit,
    enumerate_periodic_orbits,
    scan_levels,
)
from .branch import (
    Branch,
    BranchKind,
    DelayFamily,
    Side,
    Terminal,
    TerminalKind,
    assemble_family,
    orbit_at,
    trace_angular,
    trace_radial,
)
from .expr import Jet2, ScalarFunction, eval_jet2, g_tilde, parse
from .field import FieldSpec, PlanarPoint, eval_field, eval_field_polar, make_field_spec

__version__ = "0.1.0"
