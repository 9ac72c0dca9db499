"""Continuation of branches through degenerate contacts and family stitching.

A branch of t(tau) or r(tau) ends where the defining function reaches an
extremum. When the contacted extremum value coincides with the extreme value
of the driving oscillation (1 or -1 for cos, -+2 pi for the radial side), the
contact sits on a quarter-integer delay and the branch continues in the same
tau direction on the other local-inverse side; switching sides there produces
the smooth glued families, keeping the side reproduces the kinked ones. Any
other contact is a fold in tau and cannot be continued.

The family graph traces chains from every scanned seed, stitches the pieces,
deduplicates chains that are integer tau-shifts of each other, and pairs
angular with radial chains into delay-orbit families.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .atlas import DERIV_TOL, LevelPoint, PointKind, scan_levels
from .branch import (
    Branch,
    BranchKind,
    DelayFamily,
    R_FLOOR,
    Side,
    Terminal,
    TerminalKind,
    _drive_for,
    _trace_branch,
    assemble_family,
)
from .errors import (
    DegenerateContactError,
    EmptyOverlapError,
    NonContinuableContactError,
)
from .field import TWO_PI, FieldSpec

__all__ = [
    "GluePolicy",
    "GlueKind",
    "GlueEvent",
    "FamilyGraph",
    "extend_through",
    "build_family_graph",
    "closed_form_oracle",
]

COSET_LEVEL_TOL = 1e-9
SHIFT_MATCH_TOL = 1e-7
MIN_SHIFT_OVERLAP = 0.5  # half a period of the driving oscillation
PERIOD_TOL = 1e-8


class GluePolicy(Enum):
    SWITCH_SIDES = "switch"
    REFLECT = "reflect"


class GlueKind(Enum):
    ANGULAR_MAX = "angular_max"  # f-max contact, level +1, tau* in Z
    ANGULAR_MIN = "angular_min"  # f-min contact, level -1, tau* in 1/2 + Z
    RADIAL_MIN = "radial_min"  # gt-min contact, level -2 pi, tau* in 1/4 + Z
    RADIAL_MAX = "radial_max"  # gt-max contact, level +2 pi, tau* in 3/4 + Z


@dataclass(frozen=True)
class GlueEvent:
    at_tau: float
    contact: LevelPoint
    from_side: Side
    to_side: Side
    kind: GlueKind


@dataclass
class FamilyGraph:
    nodes: list[Branch] = field(default_factory=list)
    edges: list[GlueEvent] = field(default_factory=list)
    maximal_families: list[DelayFamily] = field(default_factory=list)
    isolated_orbits: list[LevelPoint] = field(default_factory=list)
    angular_chains: list[Branch] = field(default_factory=list)
    radial_chains: list[Branch] = field(default_factory=list)


def _required_level(kind: BranchKind, contact: LevelPoint) -> float | None:
    if contact.kind is PointKind.LOCAL_MAX:
        return 1.0 if kind is BranchKind.ANGULAR else TWO_PI
    if contact.kind is PointKind.LOCAL_MIN:
        return -1.0 if kind is BranchKind.ANGULAR else -TWO_PI
    return None


def _glue_kind(kind: BranchKind, contact: LevelPoint) -> GlueKind:
    if kind is BranchKind.ANGULAR:
        return GlueKind.ANGULAR_MAX if contact.kind is PointKind.LOCAL_MAX else GlueKind.ANGULAR_MIN
    return GlueKind.RADIAL_MAX if contact.kind is PointKind.LOCAL_MAX else GlueKind.RADIAL_MIN


def extend_through(
    branch: Branch,
    event_policy: GluePolicy = GluePolicy.SWITCH_SIDES,
    end: str = "forward",
    tau_limit: float | None = None,
) -> tuple[Branch, GlueEvent]:
    """Continue a branch through its extremum contact, switching or keeping the side.

    Raises :class:`DegenerateContactError` when the contacted extremum has a
    vanishing second derivative, and :class:`NonContinuableContactError` when
    the contact level is not the extreme value of the driving oscillation (a
    fold in tau, which admits no same-direction continuation). Zero-radius
    contacts continue on the positive side regardless of policy.
    """
    term = branch.terminal if end == "forward" else branch.start_terminal
    if term.kind not in (TerminalKind.HIT_EXTREMUM, TerminalKind.ISOLATED):
        raise NonContinuableContactError(f"terminal {term.kind.value!r} is not an extremum contact")
    contact = term.contact
    if contact is None:
        raise NonContinuableContactError("terminal carries no contact point")
    if abs(contact.d2) <= DERIV_TOL:
        raise DegenerateContactError(
            f"contact at {contact.location!r} has |second derivative| <= {DERIV_TOL:g}"
        )
    required = _required_level(branch.kind, contact)
    if required is None or abs(contact.level - required) > COSET_LEVEL_TOL:
        raise NonContinuableContactError(
            f"contact level {contact.level!r} is not the driving extreme value "
            f"{required!r}; the family folds here"
        )

    direction = 1 if end == "forward" else -1
    if tau_limit is None:
        tau_limit = term.at_tau + direction * 1.0

    # incoming side of the contact: first interior sample clearly off the contact
    vals = branch.values
    order = range(len(vals) - 2, -1, -1) if end == "forward" else range(1, len(vals))
    y_in = None
    for i in order:
        if abs(float(vals[i]) - contact.location) > 1e-9:
            y_in = float(vals[i])
            break
    from_side = Side.LEFT if (y_in is not None and y_in < contact.location) else Side.RIGHT

    zero_contact = branch.kind is BranchKind.RADIAL and contact.location <= R_FLOOR
    if zero_contact:
        to_side = Side.RIGHT  # r >= 0 leaves no other side
    elif event_policy is GluePolicy.SWITCH_SIDES:
        to_side = Side.RIGHT if from_side is Side.LEFT else Side.LEFT
    else:
        to_side = from_side

    span = (min(term.at_tau, tau_limit), max(term.at_tau, tau_limit))
    cont = _trace_branch(
        branch.kind,
        branch.fn,
        contact,
        to_side,
        span,
        branch.dtau,
        tau0=term.at_tau,
        directions=(direction,),
        anchor=branch.anchor,
    )
    event = GlueEvent(
        at_tau=term.at_tau,
        contact=contact,
        from_side=from_side,
        to_side=to_side,
        kind=_glue_kind(branch.kind, contact),
    )
    return cont, event


# ---------------------------------------------------------------------------
# Chains: a maximal sequence of branches glued end to end
# ---------------------------------------------------------------------------


@dataclass
class _Chain:
    pieces: list[Branch]
    events: list[GlueEvent]
    seed: LevelPoint
    orientation: str


def _build_chain(
    kind: BranchKind,
    fn,
    seed: LevelPoint,
    fwd_side: Side,
    back_side: Side,
    tau_span: tuple[float, float],
    dtau: float,
    policy: GluePolicy,
    orientation: str,
    max_pieces: int = 64,
) -> _Chain:
    root = _trace_branch(
        kind, fn, seed, fwd_side, tau_span, dtau, side_back=back_side
    )
    pieces = [root]
    events: list[GlueEvent] = []

    def extendable(term: Terminal, room: float) -> bool:
        if term.kind is not TerminalKind.HIT_EXTREMUM or term.at_tau is None:
            return False
        if room < dtau / 2:
            return False
        # the graph treats a zero-radius endpoint as a family boundary: the
        # constant orbit sits at the end, and continuing through it would
        # merge the left-to-right and right-to-left radial solutions
        if (
            kind is BranchKind.RADIAL
            and term.contact is not None
            and term.contact.location <= R_FLOOR
        ):
            return False
        return True

    cur = root
    while len(pieces) < max_pieces:
        at = cur.terminal.at_tau
        if at is None or not extendable(cur.terminal, tau_span[1] - at):
            break
        try:
            nxt, ev = extend_through(cur, policy, end="forward", tau_limit=tau_span[1])
        except (DegenerateContactError, NonContinuableContactError):
            break
        events.append(ev)
        if len(nxt.tau) <= 1:
            break
        pieces.append(nxt)
        cur = nxt

    cur = root
    while len(pieces) < max_pieces:
        at = cur.start_terminal.at_tau
        if at is None or not extendable(cur.start_terminal, at - tau_span[0]):
            break
        try:
            nxt, ev = extend_through(cur, policy, end="backward", tau_limit=tau_span[0])
        except (DegenerateContactError, NonContinuableContactError):
            break
        events.append(ev)
        if len(nxt.tau) <= 1:
            break
        pieces.insert(0, nxt)
        cur = nxt

    return _Chain(pieces=pieces, events=events, seed=seed, orientation=orientation)


def _stitch(chain: _Chain) -> Branch:
    """Concatenate chain pieces into one branch; junction samples appear once.

    At a SwitchSides junction the one-sided slopes agree and the stored
    analytic limit is kept; a Reflect junction keeps the incoming limit and is
    a genuine kink.
    """
    pieces = sorted(chain.pieces, key=lambda b: b.tau_min)
    taus = [pieces[0].tau]
    vals = [pieces[0].values]
    dvs = [pieces[0].d_values]
    for piece in pieces[1:]:
        t, v, d = piece.tau, piece.values, piece.d_values
        if len(t) and taus[-1].size and abs(t[0] - taus[-1][-1]) <= 1e-12:
            t, v, d = t[1:], v[1:], d[1:]
        taus.append(t)
        vals.append(v)
        dvs.append(d)
    first, last = pieces[0], pieces[-1]
    out = Branch(
        kind=first.kind,
        seed=chain.seed,
        side=first.side,
        tau=np.concatenate(taus),
        values=np.concatenate(vals),
        d_values=np.concatenate(dvs),
        terminal=last.terminal,
        start_terminal=first.start_terminal,
        direction=1,
        fn=first.fn,
        anchor=first.anchor,
        dtau=first.dtau,
    )
    return out


# ---------------------------------------------------------------------------
# Shift-duplicate detection and periodicity of stitched chains
# ---------------------------------------------------------------------------


def _grid_series(branch: Branch) -> dict[int, float]:
    """Samples that sit on the canonical grid, keyed by their grid index."""
    idx = np.round((branch.tau - branch.anchor) / branch.dtau)
    on_grid = np.abs(branch.tau - (branch.anchor + idx * branch.dtau)) <= 1e-9
    return {int(i): float(v) for i, v in zip(idx[on_grid], branch.values[on_grid])}


def _is_shift_duplicate(a: dict[int, float], b: dict[int, float], dtau: float, span: float) -> bool:
    """True when b(tau) == a(tau + m) for some integer m on enough overlap."""
    per = int(round(1.0 / dtau))
    need = max(int(MIN_SHIFT_OVERLAP / dtau), 2)
    max_m = int(math.ceil(span)) + 1
    a_keys = set(a.keys())
    for m in range(-max_m, max_m + 1):
        shift = m * per
        common = [k for k in b.keys() if k + shift in a_keys]
        if len(common) < need:
            continue
        if all(abs(b[k] - a[k + shift]) <= SHIFT_MATCH_TOL for k in common):
            return True
    return False


def _integer_period(branch: Branch, span: float) -> int | None:
    series = _grid_series(branch)
    per = int(round(1.0 / branch.dtau))
    need = max(int(MIN_SHIFT_OVERLAP / branch.dtau), 2)
    keys = set(series.keys())
    for p in range(1, int(math.floor(span)) + 1):
        shift = p * per
        common = [k for k in keys if k + shift in keys]
        if len(common) < need:
            continue
        if all(abs(series[k] - series[k + shift]) <= PERIOD_TOL for k in common):
            return p
    return None


# ---------------------------------------------------------------------------
# Family graph
# ---------------------------------------------------------------------------


def _angular_chain_starts(alpha: LevelPoint) -> list[tuple[Side, Side, str]]:
    if alpha.kind is PointKind.TRANSVERSE:
        return [(Side.TRANSVERSE, Side.TRANSVERSE, "osc")]
    if alpha.kind is PointKind.LOCAL_MAX:
        return [(Side.RIGHT, Side.LEFT, "lr"), (Side.LEFT, Side.RIGHT, "rl")]
    return []  # minima on the +1 level are isolated; saddles are out of scope


def _radial_chain_starts(rho: LevelPoint) -> list[tuple[Side, Side, str]]:
    if rho.kind is PointKind.TRANSVERSE:
        return [(Side.TRANSVERSE, Side.TRANSVERSE, "osc")]
    if rho.kind in (PointKind.LOCAL_MAX, PointKind.LOCAL_MIN):
        # one-sided in tau; left and right inverses give two meeting families
        return [(Side.LEFT, Side.LEFT, "left"), (Side.RIGHT, Side.RIGHT, "right")]
    return []


def build_family_graph(
    spec: FieldSpec,
    tau_span: tuple[float, float] = (-0.25, 1.75),
    dtau: float = 1e-3,
    policy: GluePolicy = GluePolicy.SWITCH_SIDES,
    focus: tuple[float, float] | None = None,
    n_grid: int = 2048,
) -> FamilyGraph:
    """Trace, glue, deduplicate, and pair all delay-orbit families of the field.

    ``focus`` restricts the graph to the chains seeded nearest one
    (alpha, rho) pair. Partial graphs (non-continuable ends, cut radii) are
    valid output.
    """
    graph = FamilyGraph()
    span_len = tau_span[1] - tau_span[0]

    alphas = scan_levels(spec.f, 1.0, (0.0, 1.0), n_grid)
    rhos = scan_levels(spec.gt, 0.0, (1e-6, spec.r_max), n_grid)
    if focus is not None:
        if alphas:
            alphas = [min(alphas, key=lambda p: abs(p.location - focus[0]))]
        if rhos:
            rhos = [min(rhos, key=lambda p: abs(p.location - focus[1]))]

    def collect(kind, fn, seeds, starts_fn):
        chains: list[_Chain] = []
        for seed in seeds:
            if kind is BranchKind.ANGULAR and seed.kind is PointKind.LOCAL_MIN:
                graph.isolated_orbits.append(seed)
                continue
            for fwd, back, orientation in starts_fn(seed):
                chain = _build_chain(kind, fn, seed, fwd, back, tau_span, dtau, policy, orientation)
                chains.append(chain)
        # deduplicate integer tau-shifts; keep the smallest seed (canonical start)
        chains.sort(key=lambda c: (c.seed.location, c.orientation))
        kept: list[tuple[_Chain, Branch, dict]] = []
        for chain in chains:
            stitched = _stitch(chain)
            series = _grid_series(stitched)
            if any(_is_shift_duplicate(s0, series, dtau, span_len) for _, _, s0 in kept):
                continue
            kept.append((chain, stitched, series))
        return kept

    ang = collect(BranchKind.ANGULAR, spec.f, alphas, _angular_chain_starts)
    rad = collect(BranchKind.RADIAL, spec.gt, rhos, _radial_chain_starts)

    for chain, stitched, _ in ang:
        graph.nodes.extend(chain.pieces)
        graph.edges.extend(chain.events)
        graph.angular_chains.append(stitched)
    for chain, stitched, _ in rad:
        graph.nodes.extend(chain.pieces)
        graph.edges.extend(chain.events)
        graph.radial_chains.append(stitched)

    for a_chain, a_branch, _ in ang:
        for r_chain, r_branch, _ in rad:
            try:
                family = assemble_family(a_branch, r_branch)
            except EmptyOverlapError:
                continue
            if len(family.tau) < 2:
                continue
            pa = _integer_period(a_branch, span_len)
            pr = _integer_period(r_branch, span_len)
            if pa == 1 and pr == 1:
                family.is_circle_family = True
            if pa is not None and pr is not None:
                family.tau_period = float(math.lcm(pa, pr))
            lo, hi = family.tau[0], family.tau[-1]
            family.glue_events = sorted(
                (
                    ev
                    for ev in a_chain.events + r_chain.events
                    if lo - 1e-9 <= ev.at_tau <= hi + 1e-9
                ),
                key=lambda e: e.at_tau,
            )
            family.label = (
                f"alpha={a_chain.seed.location:.6f}:{a_chain.orientation}"
                f"/rho={r_chain.seed.location:.6f}:{r_chain.orientation}"
            )
            graph.maximal_families.append(family)

    return graph


# ---------------------------------------------------------------------------
# Closed forms of the two worked gluing constructions, for differential tests
# ---------------------------------------------------------------------------

_TRIG_RE = re.compile(r"^trig(\d+)(?::(lr|rl)-(lr|rl))?$")


def closed_form_oracle(name: str, tau: float) -> tuple[float, float]:
    """Explicit glued solutions of the two reference constructions.

    Names: ``trig{k}:{a}-{b}`` with a = angular lr/rl and b = radial lr/rl
    (default lr-lr), or ``poly``. Returns (t, r) at the given delay. The
    radial trig values continue through zero as |tau + 1/4| resp. |3/4 - tau|.
    """
    m = _TRIG_RE.match(name)
    if m:
        k = int(m.group(1))
        ang = m.group(2) or "lr"
        rad = m.group(3) or "lr"
        t = (tau + 0.25) / k if ang == "lr" else (0.25 - tau) / k
        r = abs(tau + 0.25) if rad == "lr" else abs(0.75 - tau)
        return (t, r)
    if name == "poly":
        u = tau % 4.0
        root = math.sqrt(max(0.0, 1.0 - math.cos(math.pi * u))) / 4.0
        t = 0.5 - root if u <= 2.0 else 0.5 + root
        r = 1.0 - math.sin(TWO_PI * tau)
        return (t, r)
    raise ValueError(f"unknown oracle fixture {name!r}")
