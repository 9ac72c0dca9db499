"""Continuation of the two scalar orbit equations over the delay parameter.

The angular branch solves  f(t) = cos(2 pi tau)  and the radial branch solves
gt(r) = -2 pi sin(2 pi tau)  (the radial orbit equation divided by r), each
along one fixed local inverse of f resp. gt. Tracing is an Euler predictor
with the implicit-function slope followed by a Newton corrector at fixed tau.
A branch ends when the requested range is exhausted, when it runs into an
extremum of the defining function (the hand-off point for side switching), or
when the radius runs out at zero.

Paired angular/radial branches assemble into a family of delay orbits,
represented without loss by the planar curve tau -> r e^{2 pi i (t + tau)}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .atlas import DERIV_TOL, LevelPoint, PointKind, classify_kind
from .errors import (
    DomainError,
    EmptyOverlapError,
    OutOfRangeError,
    SeedNotOnLevelError,
    StepRejectedError,
)
from .field import TWO_PI, PlanarPoint

__all__ = [
    "Side",
    "BranchKind",
    "TerminalKind",
    "Terminal",
    "Branch",
    "DelayFamily",
    "trace_angular",
    "trace_radial",
    "assemble_family",
    "orbit_at",
]

R_FLOOR = 1e-9
RESIDUAL_TOL = 1e-12
COSET_LEVEL_TOL = 1e-9
MAX_HALVINGS = 8
PERIOD_CLOSE_TOL = 1e-8


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"
    TRANSVERSE = "transverse"


class BranchKind(Enum):
    ANGULAR = "angular"
    RADIAL = "radial"


class TerminalKind(Enum):
    RAN_OUT = "ran_out"
    HIT_EXTREMUM = "hit_extremum"
    HIT_ZERO_RADIUS = "hit_zero_radius"
    PERIODIC = "periodic"
    ISOLATED = "isolated"


@dataclass(frozen=True)
class Terminal:
    kind: TerminalKind
    contact: LevelPoint | None = None
    at_tau: float | None = None


@dataclass
class Branch:
    """A tau-parameterized sampled solution of one scalar orbit equation.

    ``values`` holds the continuous lift (angular t is not reduced mod 1), so
    glued solutions can wind. ``d_values`` holds the implicit-function slope
    at each sample; at extremum contacts the finite one-sided limit is stored
    when it exists. ``terminal`` describes the +tau end, ``start_terminal``
    the -tau end.
    """

    kind: BranchKind
    seed: LevelPoint
    side: Side
    tau: np.ndarray
    values: np.ndarray
    d_values: np.ndarray
    terminal: Terminal
    start_terminal: Terminal = Terminal(TerminalKind.RAN_OUT)
    direction: int = 1
    fn: object = field(default=None, repr=False)
    anchor: float = 0.0
    dtau: float = 1e-3

    @property
    def tau_min(self) -> float:
        return float(self.tau[0])

    @property
    def tau_max(self) -> float:
        return float(self.tau[-1])

    def value_at(self, t: float) -> float:
        return _hermite_eval(self.tau, self.values, self.d_values, t)

    def slope_at(self, t: float) -> float:
        return _hermite_eval_slope(self.tau, self.values, self.d_values, t)


@dataclass
class DelayFamily:
    """Paired angular and radial branches with the representing planar curve.

    ``closed_loop`` marks a family whose first and last samples are the same
    delay orbit (integer tau separation, matching radius, angle matching mod
    1); its seam counts as an interior point of the loop.
    """

    angular: Branch
    radial: Branch
    tau: np.ndarray
    curve: np.ndarray  # shape (n, 2)
    cusps: list = field(default_factory=list)
    is_circle_family: bool = False
    closed_loop: bool = False
    resampled: bool = False
    glue_events: list = field(default_factory=list)
    tau_period: float | None = None
    label: str = ""


# ---------------------------------------------------------------------------
# Driving oscillations cos(2 pi tau) and -2 pi sin(2 pi tau)
# ---------------------------------------------------------------------------


class _AngularDrive:
    coset_offset = 0.0  # s' vanishes on Z/2

    @staticmethod
    def s(tau):
        return math.cos(TWO_PI * tau)

    @staticmethod
    def s1(tau):
        return -TWO_PI * math.sin(TWO_PI * tau)

    @staticmethod
    def s2(tau):
        return -TWO_PI * TWO_PI * math.cos(TWO_PI * tau)

    @staticmethod
    def tau0_for_level(level):
        if abs(level - 1.0) <= 1e-6:
            return 0.0
        if abs(level + 1.0) <= 1e-6:
            return 0.5
        return None


class _RadialDrive:
    coset_offset = 0.25  # s' vanishes on 1/4 + Z/2

    @staticmethod
    def s(tau):
        return -TWO_PI * math.sin(TWO_PI * tau)

    @staticmethod
    def s1(tau):
        return -TWO_PI * TWO_PI * math.cos(TWO_PI * tau)

    @staticmethod
    def s2(tau):
        return TWO_PI * TWO_PI * TWO_PI * math.sin(TWO_PI * tau)

    @staticmethod
    def tau0_for_level(level):
        if abs(level) <= 1e-6:
            return 0.0
        if abs(level + TWO_PI) <= 1e-6:
            return 0.25
        if abs(level - TWO_PI) <= 1e-6:
            return 0.75
        return None


_ANGULAR = _AngularDrive()
_RADIAL = _RadialDrive()


def _drive_for(kind: BranchKind):
    return _ANGULAR if kind is BranchKind.ANGULAR else _RADIAL


# ---------------------------------------------------------------------------
# Cubic Hermite interpolation on stored samples
# ---------------------------------------------------------------------------


def _sane_slopes(tau: np.ndarray, y: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Replace non-finite stored slopes by secants so interpolation stays usable."""
    out = np.array(d, dtype=float, copy=True)
    bad = ~np.isfinite(out)
    if bad.any():
        sec = np.gradient(y, tau) if len(tau) > 1 else np.zeros_like(y)
        out[bad] = sec[bad]
    return out


def _hermite_pieces(tau, t):
    i = int(np.searchsorted(tau, t, side="right")) - 1
    i = min(max(i, 0), len(tau) - 2)
    h = tau[i + 1] - tau[i]
    u = (t - tau[i]) / h
    return i, h, u


def _hermite_eval(tau: np.ndarray, y: np.ndarray, d: np.ndarray, t: float) -> float:
    if len(tau) == 1:
        return float(y[0])
    d = _sane_slopes(tau, y, d)
    i, h, u = _hermite_pieces(tau, t)
    h00 = (1 + 2 * u) * (1 - u) ** 2
    h10 = u * (1 - u) ** 2
    h01 = u * u * (3 - 2 * u)
    h11 = u * u * (u - 1)
    return float(h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1])


def _hermite_eval_slope(tau: np.ndarray, y: np.ndarray, d: np.ndarray, t: float) -> float:
    if len(tau) == 1:
        return float(d[0])
    d = _sane_slopes(tau, y, d)
    i, h, u = _hermite_pieces(tau, t)
    dh00 = 6 * u * (u - 1)
    dh10 = (1 - u) * (1 - 3 * u)
    dh11 = u * (3 * u - 2)
    return float((dh00 * y[i] - dh00 * y[i + 1]) / h + dh10 * d[i] + dh11 * d[i + 1])


# ---------------------------------------------------------------------------
# Scalar solvers
# ---------------------------------------------------------------------------


def _newton(fn, target: float, y_start: float, guard: float, y_ref: float):
    """Newton for fn(y) = target from y_start, confined to |y - y_ref| <= guard.

    Returns (converged, y, d1).
    """
    y = y_start
    for _ in range(30):
        try:
            j = fn.jet(y)
        except DomainError:
            return False, y, 0.0
        h = j.value - target
        if abs(h) <= RESIDUAL_TOL:
            return True, y, j.d1
        if j.d1 == 0.0 or not math.isfinite(j.d1):
            return False, y, j.d1
        dy = -h / j.d1
        if not math.isfinite(dy) or abs(dy) > 1.0:
            return False, y, j.d1
        y_new = y + dy
        if abs(y_new - y_ref) > guard:
            return False, y_new, j.d1
        if y_new == y:
            break
        y = y_new
    try:
        j = fn.jet(y)
    except DomainError:
        return False, y, 0.0
    return abs(j.value - target) <= 10 * RESIDUAL_TOL, y, j.d1


def _bisect(h, a: float, b: float, tol: float = 1e-14, maxit: int = 200) -> float:
    ha = h(a)
    if ha == 0.0:
        return a
    for _ in range(maxit):
        m = 0.5 * (a + b)
        if abs(b - a) <= tol * (1.0 + abs(m)):
            return m
        hm = h(m)
        if hm == 0.0:
            return m
        if (ha > 0) != (hm > 0):
            b = m
        else:
            a, ha = m, hm
    return 0.5 * (a + b)


def _locate_extremum(fn, y_from: float, motion: float, scale: float, max_span: float):
    """Nearest critical point of fn beyond y_from in the given direction, or None."""
    try:
        s0 = fn.jet(y_from).d1
    except DomainError:
        return None
    if s0 == 0.0:
        return y_from
    delta = max(scale, 1e-12)
    y_a = y_from
    y_star = None
    for _ in range(80):
        y_b = y_from + motion * delta
        if abs(y_b - y_from) > max_span:
            return None
        try:
            s_b = fn.jet(y_b).d1
        except DomainError:
            return None
        if s_b == 0.0:
            y_star = y_b
            break
        if (s_b > 0) != (s0 > 0):
            lo, hi = (y_a, y_b) if y_a < y_b else (y_b, y_a)
            y_star = _bisect(lambda y: fn.jet(y).d1, lo, hi)
            break
        y_a = y_b
        delta *= 2.0
    if y_star is None:
        return None
    try:
        for _ in range(4):
            j = fn.jet(y_star)
            if j.d2 == 0.0 or not math.isfinite(j.d2) or j.d1 == 0.0:
                break
            y_star -= j.d1 / j.d2
    except DomainError:
        pass
    return y_star


def _next_coset(drive, tau_from: float, direction: int) -> float:
    """First tau at or beyond tau_from (direction sense) with s'(tau) = 0."""
    u = (tau_from - drive.coset_offset) / 0.5
    k = math.ceil(u - 1e-9) if direction > 0 else math.floor(u + 1e-9)
    return drive.coset_offset + 0.5 * k


def _contact_slope(drive, fn, tau_star: float, y_star: float, motion: float) -> float:
    """One-sided limit of dy/dtau at a coset extremum contact.

    The quadratic contact F''/2 (dy)^2 = s''/2 (dtau)^2 gives |dy/dtau| =
    sqrt(s''/F''); the sign follows the incoming y motion. Falls back to
    +-inf at non-coset contacts, where the slope genuinely blows up.
    """
    try:
        f2 = fn.jet(y_star).d2
    except DomainError:
        return math.copysign(math.inf, motion)
    ratio = drive.s2(tau_star) / f2 if f2 != 0.0 else math.inf
    if not math.isfinite(ratio) or ratio <= 0.0:
        return math.copysign(math.inf, motion)
    return math.copysign(math.sqrt(ratio), motion)


def _implicit_slope(drive, tau: float, d1: float) -> float:
    if d1 == 0.0 or not math.isfinite(d1):
        return math.inf
    return drive.s1(tau) / d1


# ---------------------------------------------------------------------------
# Single-direction tracer
# ---------------------------------------------------------------------------


@dataclass
class _TraceResult:
    tau: list
    values: list
    d_values: list
    terminal: Terminal


def _trace_direction(
    kind: BranchKind,
    fn,
    tau0: float,
    y0: float,
    direction: int,
    tau_limit: float,
    dtau: float,
    anchor: float,
    branch_sign: float,
    slope0: float,
    quad_side: float | None,
    step_guard: float = 0.05,
) -> _TraceResult:
    """March from (tau0, y0) toward tau_limit; returns samples past the seed.

    ``branch_sign`` is the sign of fn' on the traced monotone piece (0.0 lets
    the first accepted sample decide). ``quad_side`` carries the side sign for
    a start at an extremum of fn, where the linear predictor is unavailable.
    """
    drive = _drive_for(kind)
    radial = kind is BranchKind.RADIAL
    taus: list[float] = []
    ys: list[float] = []
    ds: list[float] = []

    tau_prev, y_prev, slope_prev = tau0, y0, slope0
    step_frac = 1.0
    halvings = 0
    first = True
    level0 = None
    if quad_side is not None:
        level0 = fn.jet(y0).value

    def grid_target(t_prev: float) -> float:
        u = (t_prev - anchor) / dtau * direction
        k = math.floor(u + 1e-9) + 1
        t = anchor + direction * k * dtau
        return min(t, tau_limit) if direction > 0 else max(t, tau_limit)

    def finish(term: Terminal) -> _TraceResult:
        return _TraceResult(taus, ys, ds, term)

    while True:
        if step_frac >= 1.0:
            tau_next = grid_target(tau_prev)
        else:
            tau_next = tau_prev + direction * dtau * step_frac
            tau_next = min(tau_next, tau_limit) if direction > 0 else max(tau_next, tau_limit)
        if tau_next == tau_prev:
            return finish(Terminal(TerminalKind.RAN_OUT, at_tau=tau_prev))

        s_next = drive.s(tau_next)

        if first and quad_side is not None:
            d2 = fn.jet(y0).d2
            arg = 2.0 * (s_next - level0) / d2 if d2 != 0.0 else 0.0
            y_pred = y0 + math.copysign(math.sqrt(arg), quad_side) if arg > 0.0 else y0
        else:
            sl = slope_prev if math.isfinite(slope_prev) else 0.0
            y_pred = y_prev + sl * (tau_next - tau_prev)

        guard = max(step_guard, 8.0 * abs(y_pred - y_prev))
        ok, y_new, d1 = _newton(fn, s_next, y_pred, guard, y_prev)

        if ok and radial and y_new < -1e-12:
            ok = False
        if ok and abs(d1) > DERIV_TOL and branch_sign != 0.0 and (d1 > 0) != (branch_sign > 0):
            ok = False  # corrector jumped to another monotone piece

        if ok:
            if radial and y_new < 0.0:
                y_new = 0.0
            if abs(d1) <= DERIV_TOL:
                contact = _refine_contact(kind, fn, drive, tau_prev, tau_next, y_prev, y_new, direction, dtau)
                if contact is not None:
                    t_star, y_star, slope_star, cpoint = contact
                    taus.append(t_star)
                    ys.append(y_star)
                    ds.append(slope_star)
                    return finish(Terminal(TerminalKind.HIT_EXTREMUM, cpoint, t_star))
            slope_new = _implicit_slope(drive, tau_next, d1)
            taus.append(tau_next)
            ys.append(y_new)
            ds.append(slope_new)
            if branch_sign == 0.0 and abs(d1) > DERIV_TOL:
                branch_sign = math.copysign(1.0, d1)
            tau_prev, y_prev, slope_prev = tau_next, y_new, slope_new
            first = False
            halvings = 0
            step_frac = 1.0
            continue

        # ---- failed step: contact, zero radius, or halving --------------------
        motion = _motion_sign(ys, y0, slope_prev, quad_side, direction)
        hit = _failure_contact(
            kind, fn, drive, tau_prev, tau_next, y_prev, motion, direction, dtau, slope_prev
        )
        if hit is not None:
            t_star, y_star, slope_star, cpoint, term_kind = hit
            beyond = (t_star - tau_prev) * direction > 1e-15
            if beyond:
                taus.append(t_star)
                ys.append(y_star)
                ds.append(slope_star)
                return finish(Terminal(term_kind, cpoint, t_star))
            if taus and abs(t_star - taus[-1]) <= 1e-12 and abs(y_star - ys[-1]) <= 1e-6:
                # the corrector had already converged next to the contact:
                # upgrade the last sample to the exact contact point
                ys[-1] = y_star
                ds[-1] = slope_star
            return finish(Terminal(term_kind, cpoint, tau_prev))

        halvings += 1
        step_frac = (step_frac if step_frac < 1.0 else 1.0) / 2.0
        if halvings > MAX_HALVINGS:
            raise StepRejectedError(tau_next)


def _motion_sign(ys, y0, slope_prev, quad_side, direction) -> float:
    if len(ys) >= 2 and ys[-1] != ys[-2]:
        return math.copysign(1.0, ys[-1] - ys[-2])
    if len(ys) == 1 and ys[-1] != y0:
        return math.copysign(1.0, ys[-1] - y0)
    if quad_side is not None:
        return math.copysign(1.0, quad_side)
    if math.isfinite(slope_prev) and slope_prev != 0.0:
        return math.copysign(1.0, slope_prev * direction)
    return 1.0


def _refine_contact(kind, fn, drive, tau_prev, tau_next, y_prev, y_new, direction, dtau):
    """Refine an extremum contact after the corrector landed on fn' ~ 0."""
    motion = math.copysign(1.0, y_new - y_prev) if y_new != y_prev else 1.0
    scale = max(abs(y_new - y_prev), 1e-9)
    y_star = _locate_extremum(fn, y_prev, motion, scale, max_span=4.0 * abs(y_new - y_prev) + 1.0)
    if y_star is None:
        y_star = y_new
    if kind is BranchKind.RADIAL and y_star < 0.0:
        y_star = 0.0
    try:
        j = fn.jet(y_star)
    except DomainError:
        return None
    tau_star = _contact_tau(drive, j.value, tau_prev, tau_next, direction, dtau)
    if tau_star is None:
        tau_star = tau_next
    slope_star = _contact_slope(drive, fn, tau_star, y_star, motion)
    cpoint = LevelPoint(y_star, j.value, classify_kind(j.d1, j.d2), j.d1, j.d2)
    return tau_star, y_star, slope_star, cpoint


def _contact_tau(drive, level, tau_prev, tau_next, direction, dtau):
    """The delay at which the drive reaches the contact level within this step.

    A coset (drive-extremum) matching the level within tolerance takes
    precedence over bisection: near a tangential touch the refined extremum
    level carries O(eps) error, and bisecting the noisy sign change would
    land arbitrarily close to, but not on, the coset.
    """
    coset = _next_coset(drive, tau_prev + direction * 1e-12, direction)
    near = abs(coset - tau_prev) <= 2.0 * dtau + 2.0 * abs(tau_next - tau_prev)
    if near and abs(drive.s(coset) - level) <= COSET_LEVEL_TOL:
        return coset
    h = lambda t: drive.s(t) - level
    ha, hb = h(tau_prev), h(tau_next)
    if ha == 0.0:
        return tau_prev
    if (ha > 0) != (hb > 0):
        lo, hi = (tau_prev, tau_next) if tau_prev < tau_next else (tau_next, tau_prev)
        return _bisect(h, lo, hi)
    return None


def _failure_contact(kind, fn, drive, tau_prev, tau_next, y_prev, motion, direction, dtau, slope_prev):
    """Classify a failed step as an extremum contact or a zero-radius hit.

    Returns (tau*, y*, slope*, contact, terminal_kind) or None to request a
    halved step.
    """
    radial = kind is BranchKind.RADIAL
    scale = max(dtau * 1e-3, 1e-12)
    max_span = 2.0 if not radial else max(2.0, abs(y_prev) + 1.0)
    y_star = _locate_extremum(fn, y_prev, motion, scale, max_span)

    near_zero = radial and motion < 0.0 and y_prev <= max(
        0.05, 50.0 * dtau * (1.0 + (abs(slope_prev) if math.isfinite(slope_prev) else 1.0))
    )
    if near_zero and (y_star is None or y_star < -R_FLOOR):
        # the radius runs out before any critical point: solve s(tau) = gt(0)
        try:
            j0 = fn.jet(0.0)
        except DomainError:
            return None
        t_star = _contact_tau(drive, j0.value, tau_prev, tau_next, direction, dtau)
        if t_star is None:
            return None
        slope_star = _implicit_slope(drive, t_star, j0.d1)
        cpoint = LevelPoint(0.0, j0.value, classify_kind(j0.d1, j0.d2), j0.d1, j0.d2)
        return t_star, 0.0, slope_star, cpoint, TerminalKind.HIT_ZERO_RADIUS

    if y_star is None:
        return None
    if radial and y_star < 0.0:
        if abs(y_star) > R_FLOOR:
            return None
        y_star = 0.0

    try:
        j = fn.jet(y_star)
    except DomainError:
        return None
    t_star = _contact_tau(drive, j.value, tau_prev, tau_next, direction, dtau)
    if t_star is None:
        return None
    slope_star = _contact_slope(drive, fn, t_star, y_star, motion)
    cpoint = LevelPoint(y_star, j.value, classify_kind(j.d1, j.d2), j.d1, j.d2)
    return t_star, y_star, slope_star, cpoint, TerminalKind.HIT_EXTREMUM


# ---------------------------------------------------------------------------
# Public tracing API
# ---------------------------------------------------------------------------


def _trace_branch(
    kind: BranchKind,
    fn,
    seed: LevelPoint,
    side: Side,
    tau_range: tuple[float, float],
    dtau: float,
    tau0: float | None = None,
    directions: tuple[int, ...] | None = None,
    anchor: float | None = None,
    side_back: Side | None = None,
) -> Branch:
    """Shared implementation of trace_angular / trace_radial.

    ``side_back`` optionally assigns a different local-inverse side to the
    backward (-tau) direction; the default uses ``side`` for both, which at an
    extremum seed yields the single-inverse (kinked) solution.
    """
    drive = _drive_for(kind)
    if dtau <= 0 or dtau > 1e-2:
        raise ValueError("dtau must lie in (0, 1e-2]")
    lo, hi = tau_range
    if hi <= lo:
        raise ValueError("empty tau range")
    if tau0 is None:
        tau0 = drive.tau0_for_level(seed.level)
        if tau0 is None:
            raise SeedNotOnLevelError(f"seed level {seed.level!r} matches no start delay")
        if not (lo <= tau0 <= hi):
            tau0 += math.ceil(lo - tau0)  # the drive has period 1
        if not (lo <= tau0 <= hi):
            raise OutOfRangeError(f"start delay {tau0!r} outside range {tau_range!r}")
    if anchor is None:
        anchor = tau0

    try:
        j0 = fn.jet(seed.location)
    except DomainError as exc:
        raise SeedNotOnLevelError(str(exc)) from exc
    if abs(j0.value - drive.s(tau0)) > 1e-9:
        raise SeedNotOnLevelError(
            f"seed value {j0.value!r} does not satisfy the orbit equation at tau = {tau0!r}"
        )

    extremum_start = abs(j0.d1) <= DERIV_TOL
    if extremum_start and side is Side.TRANSVERSE:
        raise SeedNotOnLevelError("an extremum seed requires an explicit Left or Right side")
    if side_back is None:
        side_back = side

    if directions is None:
        directions = (1, -1)
    if extremum_start:
        directions = tuple(d for d in directions if d in _one_sided_dirs(drive, j0, tau0, dtau))

    results: dict[int, _TraceResult] = {}
    for direction in directions:
        limit = hi if direction > 0 else lo
        this_side = side if direction > 0 else side_back
        if extremum_start:
            side_sign = 1.0 if this_side is Side.RIGHT else -1.0
            branch_sign = side_sign * math.copysign(1.0, j0.d2) if j0.d2 != 0.0 else 0.0
            slope0 = math.inf
            quad = side_sign
        else:
            branch_sign = math.copysign(1.0, j0.d1)
            slope0 = _implicit_slope(drive, tau0, j0.d1)
            quad = None
        results[direction] = _trace_direction(
            kind, fn, tau0, seed.location, direction, limit, dtau, anchor,
            branch_sign, slope0, quad,
        )

    fwd = results.get(1, _TraceResult([], [], [], Terminal(TerminalKind.RAN_OUT, at_tau=tau0)))
    bwd = results.get(-1, _TraceResult([], [], [], Terminal(TerminalKind.RAN_OUT, at_tau=tau0)))

    if extremum_start:
        side_sign = 1.0 if side is Side.RIGHT else -1.0
        seed_slope = _contact_slope(drive, fn, tau0, seed.location, side_sign)
        if not fwd.tau and bwd.tau:
            back_sign = 1.0 if side_back is Side.RIGHT else -1.0
            seed_slope = _contact_slope(drive, fn, tau0, seed.location, -back_sign)
    else:
        seed_slope = _implicit_slope(drive, tau0, j0.d1)

    taus = list(reversed(bwd.tau)) + [tau0] + fwd.tau
    vals = list(reversed(bwd.values)) + [seed.location] + fwd.values
    dvs = list(reversed(bwd.d_values)) + [seed_slope] + fwd.d_values

    terminal = fwd.terminal
    start_terminal = bwd.terminal
    if extremum_start and not fwd.tau and not bwd.tau:
        terminal = Terminal(TerminalKind.ISOLATED, seed, tau0)
        start_terminal = terminal

    branch = Branch(
        kind=kind,
        seed=seed,
        side=side,
        tau=np.asarray(taus, dtype=float),
        values=np.asarray(vals, dtype=float),
        d_values=np.asarray(dvs, dtype=float),
        terminal=terminal,
        start_terminal=start_terminal,
        direction=1,
        fn=fn,
        anchor=anchor,
        dtau=dtau,
    )
    _mark_periodic(branch, tau0)
    return branch


def _one_sided_dirs(drive, j0, tau0: float, dtau: float) -> tuple[int, ...]:
    """Delay directions with solutions near an extremum seed (sign of s - level must match f'')."""
    if j0.d2 == 0.0:
        return (1, -1)
    dirs = []
    for direction in (1, -1):
        ds = drive.s(tau0 + direction * min(dtau, 1e-4)) - j0.value
        if ds == 0.0 or (ds > 0) == (j0.d2 > 0):
            dirs.append(direction)
    return tuple(dirs)


def _mark_periodic(branch: Branch, tau0: float) -> None:
    if branch.terminal.kind is not TerminalKind.RAN_OUT:
        return
    tau, vals = branch.tau, branch.values
    i0 = int(np.argmin(np.abs(tau - tau0)))
    for target in (tau0 + 1.0, tau0 - 1.0):
        k = int(np.argmin(np.abs(tau - target)))
        if abs(tau[k] - target) < branch.dtau / 4 and abs(vals[k] - vals[i0]) <= PERIOD_CLOSE_TOL:
            branch.terminal = Terminal(TerminalKind.PERIODIC, at_tau=float(tau[-1]))
            if branch.start_terminal.kind is TerminalKind.RAN_OUT:
                branch.start_terminal = Terminal(TerminalKind.PERIODIC, at_tau=float(tau[0]))
            return


def trace_angular(
    f,
    seed: LevelPoint,
    side: Side,
    tau_range: tuple[float, float],
    dtau: float = 1e-3,
    tau0: float | None = None,
    directions: tuple[int, ...] | None = None,
    anchor: float | None = None,
    side_back: Side | None = None,
) -> Branch:
    """Trace t(tau) solving f(t) = cos(2 pi tau) from a seed with f(seed) = +-1.

    Seeds on level +1 start at tau = 0, seeds on level -1 at tau = 1/2 (so a
    gluing chain can begin mid-family at a minimum of f).
    """
    return _trace_branch(
        BranchKind.ANGULAR, f, seed, side, tau_range, dtau, tau0, directions, anchor, side_back
    )


def trace_radial(
    gt,
    seed: LevelPoint,
    side: Side,
    tau_range: tuple[float, float],
    dtau: float = 1e-3,
    tau0: float | None = None,
    directions: tuple[int, ...] | None = None,
    anchor: float | None = None,
    side_back: Side | None = None,
) -> Branch:
    """Trace r(tau) solving gt(r) = -2 pi sin(2 pi tau); gt(seed) must lie in {0, +-2 pi}."""
    return _trace_branch(
        BranchKind.RADIAL, gt, seed, side, tau_range, dtau, tau0, directions, anchor, side_back
    )


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


def _common_grid(a: Branch, b: Branch):
    lo = max(a.tau_min, b.tau_min)
    hi = min(a.tau_max, b.tau_max)
    if hi <= lo:
        raise EmptyOverlapError(
            f"branch ranges [{a.tau_min}, {a.tau_max}] and [{b.tau_min}, {b.tau_max}] are disjoint"
        )
    ma = (a.tau >= lo - 1e-12) & (a.tau <= hi + 1e-12)
    mb = (b.tau >= lo - 1e-12) & (b.tau <= hi + 1e-12)
    ta, tb = a.tau[ma], b.tau[mb]
    if len(ta) == len(tb) and len(ta) > 0 and np.allclose(ta, tb, rtol=0.0, atol=1e-12):
        return ta, ma, mb, False
    grid = np.unique(np.concatenate([ta, tb]))
    return grid, None, None, True


def _restrict(branch: Branch, grid: np.ndarray, mask, resample: bool) -> Branch:
    if not resample:
        return replace(
            branch,
            tau=branch.tau[mask],
            values=branch.values[mask],
            d_values=branch.d_values[mask],
        )
    vals = np.array([branch.value_at(t) for t in grid])
    dvs = np.array([branch.slope_at(t) for t in grid])
    return replace(branch, tau=grid.copy(), values=vals, d_values=dvs)


def assemble_family(angular: Branch, radial: Branch) -> DelayFamily:
    """Pair an angular and a radial branch into a family on a shared tau grid.

    The curve samples are r e^{2 pi i (t + tau)}. When the grids differ the
    branches are resampled onto the union grid inside the overlap (monotone
    cubic interpolation on the stored slopes) and the family is flagged.
    """
    grid, ma, mb, resample = _common_grid(angular, radial)
    ang = _restrict(angular, grid, ma, resample)
    rad = _restrict(radial, grid, mb, resample)
    phase = TWO_PI * (ang.values + ang.tau)
    curve = np.column_stack([rad.values * np.cos(phase), rad.values * np.sin(phase)])
    is_circle = (
        angular.terminal.kind is TerminalKind.PERIODIC
        and radial.terminal.kind is TerminalKind.PERIODIC
    )
    family = DelayFamily(
        angular=ang,
        radial=rad,
        tau=ang.tau,
        curve=curve,
        is_circle_family=is_circle,
        resampled=resample,
    )
    _detect_closure(family)
    return family


def _detect_closure(family: DelayFamily) -> None:
    tau = family.tau
    if len(tau) < 3:
        return
    span = float(tau[-1] - tau[0])
    period = round(span)
    if period < 1 or abs(span - period) > 1e-9:
        return
    dr = abs(float(family.radial.values[-1] - family.radial.values[0]))
    dt = float(family.angular.values[-1] - family.angular.values[0])
    if dr <= PERIOD_CLOSE_TOL and abs(dt - round(dt)) <= PERIOD_CLOSE_TOL:
        family.closed_loop = True
        if family.tau_period is None:
            family.tau_period = float(period)
        if period == 1:
            family.is_circle_family = True


def orbit_at(family: DelayFamily, tau: float, t: float) -> PlanarPoint:
    """The family's delay orbit at delay tau, evaluated at time t."""
    if tau < family.tau[0] - 1e-12 or tau > family.tau[-1] + 1e-12:
        raise OutOfRangeError(f"tau = {tau!r} outside [{family.tau[0]!r}, {family.tau[-1]!r}]")
    tv = family.angular.value_at(tau)
    rv = family.radial.value_at(tau)
    phase = TWO_PI * (tv + tau + t)
    return PlanarPoint(rv * math.cos(phase), rv * math.sin(phase))
