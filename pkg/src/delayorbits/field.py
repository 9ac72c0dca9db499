"""The planar vector field built from an angular function f and a radial function g.

In Cartesian form the field is  g(|z|) z/|z| + f(arg(z)/2pi - t) 2pi i z,
extended by 0 at the origin; in polar coordinates (r, theta in turns) it reads
(dr/dt, dtheta/dt) = (g(r), f(theta - t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import DomainError, InvalidGError
from .expr import RatioFunction, ScalarFunction, g_tilde, parse

__all__ = ["PlanarPoint", "FieldSpec", "make_field_spec", "eval_field", "eval_field_polar"]

TWO_PI = 2.0 * math.pi


class PlanarPoint(NamedTuple):
    """A point of the plane, identified with the complex number x + iy."""

    x: float
    y: float

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class FieldSpec:
    """The pair (f, g) plus the derived ratio gt = g/r and a radial scan cutoff."""

    f: ScalarFunction
    g: ScalarFunction
    gt: RatioFunction
    r_max: float = 10.0


def make_field_spec(f_source: str, g_source: str, r_max: float = 10.0) -> FieldSpec:
    """Parse formula text for f (variable ``theta``, 1-periodic) and g (variable ``r``).

    Raises :class:`InvalidGError` if g(0) != 0 within tolerance.
    """
    f = parse(f_source, "theta", period=1.0)
    g = parse(g_source, "r")
    try:
        g0 = g.ast.eval(0.0)
    except DomainError as exc:
        raise InvalidGError(f"g cannot be evaluated at r = 0: {exc}") from exc
    if abs(g0) > 1e-12:
        raise InvalidGError(f"g(0) = {g0!r} violates the required g(0) = 0")
    return FieldSpec(f=f, g=g, gt=g_tilde(g), r_max=r_max)


def arg_turns(x: float, y: float) -> float:
    """arg(z) in turns, mapped into [0, 1); branch cut on the positive x-axis."""
    a = math.atan2(y, x) / TWO_PI
    if a < 0.0:
        a += 1.0
    return a if a < 1.0 else 0.0


def eval_field(spec: FieldSpec, t: float, z: PlanarPoint) -> PlanarPoint:
    """Evaluate the field at time t and point z; returns (0, 0) at the origin."""
    x, y = z
    r = math.hypot(x, y)
    if r == 0.0:
        return PlanarPoint(0.0, 0.0)
    theta = arg_turns(x, y)
    gr = spec.g.value(r)
    fv = spec.f.value(theta - t)
    # radial part g(r) z/|z|  +  angular part f(...) 2 pi i z
    return PlanarPoint(
        gr * x / r - fv * TWO_PI * y,
        gr * y / r + fv * TWO_PI * x,
    )


def eval_field_polar(spec: FieldSpec, t: float, r: float, theta: float) -> tuple[float, float]:
    """Polar form (dr/dt, dtheta/dt) = (g(r), f(theta - t)); requires r > 0."""
    if r <= 0.0:
        raise DomainError("polar form requires r > 0", r)
    return (spec.g.value(r), spec.f.value(theta - t))
