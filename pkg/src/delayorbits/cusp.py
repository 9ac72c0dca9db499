"""Detection and certification of cusps on the representing planar curves.

On a smooth family, the curve tau -> r e^{2 pi i (t + tau)} can only be
singular on the quarter-integer lattice tau* in (1/4 + Z) u (3/4 + Z), and
there exactly when the radius vanishes or the angular slope f'(t) equals
+2 pi (at 1/4 + Z) resp. -2 pi (at 3/4 + Z). Every such singularity is a cusp:
the normalized tangent reverses by 180 degrees.

Zero-radius passes where the radial map has a corner (gt'(0) = 0, so the
radius crosses zero linearly) keep a positive curve speed but still reverse
the tangent; they are reported as zero-radius cusp records as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .atlas import DERIV_TOL
from .branch import R_FLOOR, DelayFamily, _sane_slopes
from .errors import DomainError, NotACuspError, PropertyViolationError, UnclassifiedSingularityError
from .field import TWO_PI, PlanarPoint

__all__ = [
    "CuspCondition",
    "CuspRecord",
    "CountReport",
    "detect_cusps",
    "certify_reversal",
    "count_check",
]

SPEED_REL_TOL = 1e-4
ANGLE_TOL = 1e-3
SLOPE_REL_TOL = 1e-3
MIN_SAMPLES = 32
COSET_WINDOW_STEPS = 2.0  # tau* must sit within this many dtau of a quarter coset


class CuspCondition(Enum):
    RADIUS_ZERO = "radius_zero"
    ANGULAR_SLOPE_2PI = "angular_slope_+2pi"
    ANGULAR_SLOPE_MINUS_2PI = "angular_slope_-2pi"


@dataclass(frozen=True)
class CuspRecord:
    tau_star: float
    condition: CuspCondition
    tangent_in: PlanarPoint
    tangent_out: PlanarPoint
    reversal_angle: float
    second_deriv_norm: float


@dataclass(frozen=True)
class CountReport:
    n_cusps: int
    conditions: tuple[CuspCondition, ...]
    smooth: bool
    applicable: bool


class _CurveEval:
    """Interpolated curve data (t, r and their delay derivatives) on a family."""

    def __init__(self, family: DelayFamily):
        self.family = family
        ang, rad = family.angular, family.radial
        self.t_lo = float(family.tau[0])
        self.t_hi = float(family.tau[-1])
        self.period = self.t_hi - self.t_lo if family.closed_loop else None
        self._ang_d = _sane_slopes(ang.tau, ang.values, ang.d_values)
        self._rad_d = _sane_slopes(rad.tau, rad.values, rad.d_values)

    def _fold(self, tau: float) -> float:
        if self.period is not None:
            while tau > self.t_hi:
                tau -= self.period
            while tau < self.t_lo:
                tau += self.period
        return min(max(tau, self.t_lo), self.t_hi)

    def state(self, tau: float):
        tau = self._fold(tau)
        fam = self.family
        t = fam.angular.value_at(tau)
        r = fam.radial.value_at(tau)
        dt = fam.angular.slope_at(tau)
        dr = fam.radial.slope_at(tau)
        return t, r, dt, dr

    def velocity(self, tau: float) -> complex:
        t, r, dt, dr = self.state(tau)
        amp = complex(dr, TWO_PI * r * (dt + 1.0))
        return amp * complex(math.cos(TWO_PI * (t + tau)), math.sin(TWO_PI * (t + tau)))

    def speed(self, tau: float) -> float:
        return abs(self.velocity(tau))


def _nearest_coset(tau: float) -> float:
    # quarter-integer lattice (1/4 + Z) u (3/4 + Z), i.e. 1/4 + Z/2
    return 0.25 + 0.5 * round((tau - 0.25) / 0.5)


def _golden_min(f, a: float, b: float, tol: float = 1e-10) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def _sample_speeds(family: DelayFamily) -> np.ndarray:
    ang, rad = family.angular, family.radial
    dt = _sane_slopes(ang.tau, ang.values, ang.d_values)
    dr = _sane_slopes(rad.tau, rad.values, rad.d_values)
    return np.hypot(dr, TWO_PI * rad.values * (dt + 1.0))


def _reversal(ev: _CurveEval, tau_star: float, eps: float) -> tuple[PlanarPoint, PlanarPoint, float]:
    def unit(v: complex) -> PlanarPoint:
        n = abs(v)
        if n == 0.0:
            return PlanarPoint(0.0, 0.0)
        return PlanarPoint(v.real / n, v.imag / n)

    def angle(e: float) -> float:
        ti = unit(ev.velocity(tau_star - e))
        to = unit(ev.velocity(tau_star + e))
        dot = max(-1.0, min(1.0, ti.x * to.x + ti.y * to.y))
        return math.acos(dot)

    a1 = angle(eps)
    a2 = angle(2.0 * eps)
    extrapolated = 2.0 * a1 - a2  # cancels the O(eps) tangent rotation
    return unit(ev.velocity(tau_star - eps)), unit(ev.velocity(tau_star + eps)), extrapolated


def _second_derivative(family: DelayFamily, ev: _CurveEval, tau_star: float, eps: float) -> float:
    """|gamma''(tau*)| from the analytic expressions, or a finite-difference
    proxy where the radial map has a corner (zero radius with gt'(0) = 0)."""
    t, r, dt, dr = ev.state(tau_star)
    f = family.angular.fn
    gt = family.radial.fn
    try:
        jf = f.jet(t)
        jg = gt.jet(r)
    except DomainError:
        jf = jg = None
    if jf is not None and jg is not None and abs(jg.d1) > DERIV_TOL and abs(jf.d1) > DERIV_TOL:
        s, c = math.sin(TWO_PI * tau_star), math.cos(TWO_PI * tau_star)
        r2 = (
            8.0 * math.pi**3 * s / jg.d1
            + 4.0 * math.pi**2 * c * jg.d2 * dr / (jg.d1 * jg.d1)
        )
        t2 = (-4.0 * math.pi**2 * c * jf.d1 + TWO_PI * s * jf.d2 * dt) / (jf.d1 * jf.d1)
        amp = complex(r2, TWO_PI * (dr * (dt + 1.0) + r * t2))
        return abs(amp)
    v_in = ev.velocity(tau_star - eps)
    v_out = ev.velocity(tau_star + eps)
    return abs(v_out - v_in) / (2.0 * eps)


def detect_cusps(family: DelayFamily, speed_rel_tol: float = SPEED_REL_TOL) -> list[CuspRecord]:
    """Locate and classify all singular points of the family's curve.

    Candidates come from two detectors: samples where the curve speed drops
    below ``speed_rel_tol`` times the family maximum, refined by golden-section
    minimization of the speed, and zero-radius samples (interior ones, or the
    seam of a closed loop). Every candidate must sit on the quarter-integer
    lattice and satisfy the zero-radius or the +-2 pi slope condition;
    anything else raises :class:`UnclassifiedSingularityError`.
    """
    if len(family.tau) < MIN_SAMPLES:
        raise ValueError(f"family has {len(family.tau)} samples; need at least {MIN_SAMPLES}")
    ev = _CurveEval(family)
    tau = family.tau
    dtau = family.angular.dtau
    speeds = _sample_speeds(family)
    vmax = float(np.max(speeds))
    if vmax == 0.0:
        return []
    tol = speed_rel_tol * vmax

    candidates: list[float] = []

    # slow points of the curve
    low = speeds < tol
    i = 0
    n = len(tau)
    while i < n:
        if not low[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and low[j + 1]:
            j += 1
        k = i + int(np.argmin(speeds[i : j + 1]))
        a = tau[max(k - 1, 0)]
        b = tau[min(k + 1, n - 1)]
        candidates.append(_golden_min(ev.speed, float(a), float(b)))
        i = j + 1

    # zero-radius passes (interior, or the seam of a closed loop)
    rvals = family.radial.values
    zero_tol = max(R_FLOOR, 1e-8)
    for k in np.flatnonzero(rvals <= zero_tol):
        interior = 0 < k < n - 1
        if not interior and not family.closed_loop:
            continue
        candidates.append(float(tau[k]))

    # merge candidates closer than the coset window
    candidates.sort()
    merged: list[float] = []
    for c in candidates:
        if merged and abs(c - merged[-1]) <= COSET_WINDOW_STEPS * dtau:
            continue
        merged.append(c)

    records: list[CuspRecord] = []
    eps = 4.0 * dtau
    for tau_star in merged:
        coset = _nearest_coset(tau_star)
        if abs(tau_star - coset) > COSET_WINDOW_STEPS * dtau:
            raise UnclassifiedSingularityError(
                f"near-singular point at tau = {tau_star!r} lies off the quarter-integer lattice"
            )
        tau_star = coset if abs(tau_star - coset) <= COSET_WINDOW_STEPS * dtau else tau_star
        t, r, _, _ = ev.state(tau_star)
        if r <= max(R_FLOOR, 1e-7 * (1.0 + float(np.max(rvals)))):
            condition = CuspCondition.RADIUS_ZERO
        else:
            slope = family.angular.fn.jet(t).d1
            on_quarter = abs((tau_star - 0.25) - round(tau_star - 0.25)) < 0.25
            want = TWO_PI if on_quarter else -TWO_PI
            if abs(slope - want) <= SLOPE_REL_TOL * TWO_PI:
                condition = (
                    CuspCondition.ANGULAR_SLOPE_2PI if want > 0 else CuspCondition.ANGULAR_SLOPE_MINUS_2PI
                )
            else:
                raise UnclassifiedSingularityError(
                    f"singular point at tau = {tau_star!r}: radius {r!r} is nonzero and "
                    f"f'(t) = {slope!r} is not {want!r}"
                )
        t_in, t_out, ang = _reversal(ev, tau_star, eps)
        records.append(
            CuspRecord(
                tau_star=tau_star,
                condition=condition,
                tangent_in=t_in,
                tangent_out=t_out,
                reversal_angle=ang,
                second_deriv_norm=_second_derivative(family, ev, tau_star, eps),
            )
        )
    return records


def certify_reversal(family: DelayFamily, tau_star: float) -> tuple[float, PlanarPoint]:
    """Richardson-extrapolated tangent reversal angle and gamma'' at a cusp.

    Raises :class:`NotACuspError` when the curve speed at tau_star is not
    small and the radius does not vanish there (zero-radius corner passes are
    singular even though the radial kink keeps the speed positive).
    """
    ev = _CurveEval(family)
    speeds = _sample_speeds(family)
    tol = SPEED_REL_TOL * float(np.max(speeds))
    _, r, _, _ = ev.state(tau_star)
    if ev.speed(tau_star) > tol and r > max(R_FLOOR, 1e-8):
        raise NotACuspError(f"curve speed at tau = {tau_star!r} exceeds {tol!r}")
    eps = 4.0 * family.angular.dtau
    _, _, angle = _reversal(ev, tau_star, eps)
    t, rr, dt, dr = ev.state(tau_star)
    norm = _second_derivative(family, ev, tau_star, eps)
    phase = TWO_PI * (t + tau_star)
    if norm > 0.0:
        second = PlanarPoint(norm * math.cos(phase), norm * math.sin(phase))
    else:
        second = PlanarPoint(0.0, 0.0)
    return angle, second


def _is_smooth(family: DelayFamily) -> bool:
    """f' and gt' nonvanishing along the traversed ranges (zero-radius samples excluded)."""
    f = family.angular.fn
    gt = family.radial.fn
    try:
        for t in family.angular.values:
            if abs(f.jet(float(t)).d1) <= DERIV_TOL:
                return False
        for r in family.radial.values:
            if float(r) <= R_FLOOR:
                continue
            if abs(gt.jet(float(r)).d1) <= DERIV_TOL:
                return False
    except DomainError:
        return False
    return True


def count_check(family: DelayFamily) -> CountReport:
    """Check the cusp-count bound on a circle family: at most two cusps, and
    with two present exactly one zero-radius and one slope condition.

    Returns a report; raises :class:`PropertyViolationError` with diagnostics
    when the bound fails on a family where it must hold (smooth circle
    family). Families that are not smooth are reported as not applicable.
    """
    if not family.is_circle_family:
        raise ValueError("count_check requires a circle family (1-periodic in the delay)")
    cusps = family.cusps if family.cusps else detect_cusps(family)
    conditions = tuple(c.condition for c in cusps)
    smooth = _is_smooth(family)
    report = CountReport(
        n_cusps=len(cusps), conditions=conditions, smooth=smooth, applicable=smooth
    )
    if not smooth:
        return report
    if len(cusps) > 2:
        raise PropertyViolationError(
            f"smooth circle family has {len(cusps)} cusps at "
            f"{[c.tau_star for c in cusps]!r}; at most two are possible"
        )
    if len(cusps) == 2:
        kinds = {c.condition is CuspCondition.RADIUS_ZERO for c in cusps}
        if kinds != {True, False}:
            raise PropertyViolationError(
                f"two cusps must satisfy one zero-radius and one slope condition; "
                f"got {conditions!r} at {[c.tau_star for c in cusps]!r}"
            )
    return report
