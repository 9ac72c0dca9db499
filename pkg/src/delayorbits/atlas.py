"""Level-set enumeration and non-degeneracy classification of 1-periodic orbits.

The 1-periodic orbits of the field are exactly rho * e^{2 pi i (alpha + t)}
for alpha in f^{-1}(1) and rho in {g = 0}, plus the constant orbit at the
origin. An orbit is non-degenerate precisely when f'(alpha) != 0 and
g'(rho) != 0, which this module checks directly from the exact jets.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError, GridTooCoarseWarning
from .field import FieldSpec

__all__ = [
    "ROOT_TOL",
    "DERIV_TOL",
    "CONTACT_TOL",
    "PointKind",
    "LevelPoint",
    "OrbitStatus",
    "OrbitClassification",
    "classify_kind",
    "scan_levels",
    "classify_orbit",
    "enumerate_periodic_orbits",
]

ROOT_TOL = 1e-12
DERIV_TOL = 1e-8
CONTACT_TOL = 1e-8
DEFAULT_N_GRID = 2048


class PointKind(Enum):
    TRANSVERSE = "transverse"
    LOCAL_MAX = "local_max"
    LOCAL_MIN = "local_min"
    SADDLE = "saddle"


@dataclass(frozen=True)
class LevelPoint:
    """A point where a scalar function attains a prescribed level."""

    location: float
    level: float
    kind: PointKind
    d1: float
    d2: float


class OrbitStatus(Enum):
    NONDEGENERATE = "nondegenerate"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class OrbitClassification:
    """One 1-periodic orbit (alpha, rho) with its non-degeneracy verdict.

    ``alpha`` is None for the constant orbit at the origin.
    """

    alpha: LevelPoint | None
    rho: LevelPoint
    status: OrbitStatus
    reasons: tuple[str, ...] = ()


def classify_kind(d1: float, d2: float, deriv_tol: float = DERIV_TOL) -> PointKind:
    if abs(d1) > deriv_tol:
        return PointKind.TRANSVERSE
    if d2 < -deriv_tol:
        return PointKind.LOCAL_MAX
    if d2 > deriv_tol:
        return PointKind.LOCAL_MIN
    return PointKind.SADDLE


def _refine_root(fn, level: float, a: float, b: float, fa: float, fb: float) -> float:
    """Bisection-safeguarded Newton for fn(x) = level on a sign-change bracket."""
    x = 0.5 * (a + b)
    for _ in range(100):
        try:
            j = fn.jet(x)
        except DomainError:
            j = None
        if j is not None and math.isfinite(j.d1) and j.d1 != 0.0:
            h = j.value - level
            if abs(h) <= ROOT_TOL:
                return x
            step = -h / j.d1
            x_new = x + step
            if a < x_new < b:
                # keep the bracket current
                if (h > 0) == (fa > 0):
                    a, fa = x, h
                else:
                    b, fb = x, h
                x = x_new
                continue
        # fall back to bisection
        h = fn.value(x) - level
        if h == 0.0:
            return x
        if (h > 0) == (fa > 0):
            a, fa = x, h
        else:
            b, fb = x, h
        x = 0.5 * (a + b)
        if abs(b - a) <= 1e-16 * (1.0 + abs(x)):
            return x
    return x


def _refine_critical(fn, a: float, b: float, da: float, db: float) -> float:
    """Root of fn' on a sign-change bracket, polished with one second-order step."""
    x = 0.5 * (a + b)
    for _ in range(100):
        j = fn.jet(x)
        if math.isfinite(j.d2) and j.d2 != 0.0:
            if abs(j.d1) <= 1e-15 * (1.0 + abs(j.d2)):
                return x
            x_new = x - j.d1 / j.d2
            if a < x_new < b:
                if (j.d1 > 0) == (da > 0):
                    a, da = x, j.d1
                else:
                    b, db = x, j.d1
                x = x_new
                continue
        d = fn.jet(x).d1
        if d == 0.0:
            return x
        if (d > 0) == (da > 0):
            a, da = x, d
        else:
            b, db = x, d
        x = 0.5 * (a + b)
        if abs(b - a) <= 1e-16 * (1.0 + abs(x)):
            return x
    return x


def _wrap_into(x: float, lo: float, span: float) -> float:
    y = (x - lo) % span
    return lo + y


class _RawView:
    """Evaluate a parsed function without its argument fold."""

    def __init__(self, fn):
        self._fn = fn

    def value(self, x: float) -> float:
        return self._fn.ast.eval(x)

    def jet(self, x: float):
        from .expr import Jet2

        return Jet2(*self._fn.ast.jet(x))


def scan_levels(
    fn,
    level: float,
    domain: tuple[float, float],
    n_grid: int = DEFAULT_N_GRID,
) -> list[LevelPoint]:
    """All simple roots and tangential contacts of fn = level on the domain.

    Transverse roots come from sign-change brackets refined by safeguarded
    Newton to |fn - level| <= 1e-12. Tangential contacts (double roots) come
    from critical points of fn whose value lies within CONTACT_TOL of the
    level. For a 1-periodic fn whose source formula passed the periodicity
    check, the grid wraps across the seam.
    """
    if n_grid < 16:
        raise ValueError("n_grid must be at least 16")
    lo, hi = domain
    if hi <= lo:
        raise ValueError("empty scan domain")
    span = hi - lo
    periodic_fn = getattr(fn, "period", None) is not None and abs(span - fn.period) < 1e-12
    wrap = periodic_fn and getattr(fn, "periodic_source", False)
    if periodic_fn and not wrap:
        # formula only periodic by restriction: scan the raw expression so the
        # argument fold does not fabricate a jump at the seam
        fn = _RawView(fn)

    xs = [lo + span * i / n_grid for i in range(n_grid + 1)]
    if wrap:
        xs = xs[:-1]  # the seam bracket closes the circle

    vals = []
    d1s = []
    for x in xs:
        try:
            j = fn.jet(x)
            vals.append(j.value - level)
            d1s.append(j.d1)
        except DomainError:
            vals.append(math.nan)
            d1s.append(math.nan)

    n = len(xs)
    roots: list[float] = []
    criticals: list[float] = []
    pairs = range(n if wrap else n - 1)
    for i in pairs:
        k = (i + 1) % n
        a, b = xs[i], xs[i] + span / n_grid
        fa, fb = vals[i], vals[k]
        da, db = d1s[i], d1s[k]
        if math.isnan(fa) or math.isnan(fb):
            continue
        if fa == 0.0:
            roots.append(a)
        elif (fa > 0) != (fb > 0):
            roots.append(_refine_root(fn, level, a, b, fa, fb))
        if da == 0.0:
            criticals.append(a)
        elif (da > 0) != (db > 0):
            criticals.append(_refine_critical(fn, a, b, da, db))

    points: list[LevelPoint] = []
    for x in roots:
        if wrap:
            x = _wrap_into(x, lo, span)
        j = fn.jet(x)
        points.append(LevelPoint(x, level, classify_kind(j.d1, j.d2), j.d1, j.d2))
    for x in criticals:
        if wrap:
            x = _wrap_into(x, lo, span)
        j = fn.jet(x)
        if abs(j.value - level) <= CONTACT_TOL and abs(j.d1) <= DERIV_TOL:
            points.append(LevelPoint(x, level, classify_kind(j.d1, j.d2), j.d1, j.d2))

    points.sort(key=lambda p: p.location)
    cell = span / n_grid
    out: list[LevelPoint] = []
    for p in points:
        if out and abs(p.location - out[-1].location) < cell:
            same_point = (
                abs(p.location - out[-1].location) <= 1e-9 * (1.0 + abs(p.location))
                or out[-1].kind is not PointKind.TRANSVERSE
                or p.kind is not PointKind.TRANSVERSE
            )
            if not same_point:
                warnings.warn(
                    f"two roots of the level {level!r} scan within one grid cell near "
                    f"{p.location!r}; increase n_grid",
                    GridTooCoarseWarning,
                    stacklevel=2,
                )
            # prefer the tangential representative when kinds differ
            if out[-1].kind is PointKind.TRANSVERSE and p.kind is not PointKind.TRANSVERSE:
                out[-1] = p
            continue
        out.append(p)
    if wrap and len(out) >= 2 and abs((out[0].location + span) - out[-1].location) < cell:
        out.pop()
    return out


def classify_orbit(spec: FieldSpec, alpha: LevelPoint, rho: LevelPoint) -> OrbitClassification:
    """Non-degeneracy verdict for the orbit through (alpha, rho): f' and g' must not vanish."""
    f1 = spec.f.jet(alpha.location).d1
    g1 = spec.g.jet(rho.location).d1
    reasons = []
    if abs(f1) <= DERIV_TOL:
        reasons.append(f"f'(alpha) = {f1:.3e} vanishes within {DERIV_TOL:g}")
    if abs(g1) <= DERIV_TOL:
        reasons.append(f"g'(rho) = {g1:.3e} vanishes within {DERIV_TOL:g}")
    status = OrbitStatus.NONDEGENERATE if not reasons else OrbitStatus.DEGENERATE
    return OrbitClassification(alpha=alpha, rho=rho, status=status, reasons=tuple(reasons))


def enumerate_periodic_orbits(spec: FieldSpec, n_grid: int = DEFAULT_N_GRID) -> list[OrbitClassification]:
    """Every 1-periodic orbit of the field: the (alpha, rho) cross product plus the constant orbit."""
    alphas = scan_levels(spec.f, 1.0, (0.0, 1.0), n_grid)
    rhos = scan_levels(spec.gt, 0.0, (1e-6, spec.r_max), n_grid)
    out: list[OrbitClassification] = []
    gj = spec.g.jet(0.0)
    origin = LevelPoint(0.0, 0.0, classify_kind(gj.d1, gj.d2), gj.d1, gj.d2)
    out.append(
        OrbitClassification(
            alpha=None,
            rho=origin,
            status=OrbitStatus.DEGENERATE,
            reasons=("constant orbit z = 0",),
        )
    )
    for alpha in alphas:
        for rho in rhos:
            out.append(classify_orbit(spec, alpha, rho))
    return out
