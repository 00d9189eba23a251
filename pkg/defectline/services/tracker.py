"""
Defect Line Tracker
Marches a field through time, links defects between snapshots into lines,
localises creation/annihilation events by bisection in t, and measures the
lifetime of quaternionic transients of 2x2 matrices.

Also hosts the eigenvalue (vortex) velocity formulas.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from defectline.config import Settings, get_settings
from defectline.errors import DegenerateEigenvalueError, InvalidArgumentError, UnstableDefectError
from defectline.services.algebra import group_reduce, vertex_legal
from defectline.services.linalg_core import adjugate, as_matrix
from defectline.services.rootfind import (
    Box4,
    PlaneZero,
    SearchWindow,
    find_quaternion_roots,
    line_circle_discriminant,
    line_circle_geometry,
    search_phase_critical_points,
    search_plane_zeros,
)
from defectline.services.topology import Defect, Species, classify, totals
from defectline.services.wavefield import PlaneField

logger = logging.getLogger(__name__)

_NO_MATCH = 1e12
_EXTREMA = (Species.MAXIMUM, Species.MINIMUM)


@dataclass
class Snapshot:
    t: float
    defects: list[Defect]
    suspects: list[PlaneZero] = field(default_factory=list)

    @property
    def positions(self) -> np.ndarray:
        return np.array([[d.x, d.y] for d in self.defects]).reshape(-1, 2)

    @property
    def seeds(self) -> list[complex]:
        return [complex(d.x, d.y) for d in self.defects]


@dataclass(frozen=True)
class Reversal:
    """Saddle/extremum change along a line; before/after follow the sample order."""

    t: float
    x: float
    y: float
    before: str
    after: str
    event: Optional[int] = None


@dataclass
class DefectLine:
    """
    A defect line as a curve in (x, y, t).

    Samples run along the curve: monotone in t between reversals, and a line
    that turns back in t carries one reversal per turning point. birth_event and
    death_event are the events at the first and last sample.
    """

    id: int
    samples: list[Defect] = field(default_factory=list)
    birth_event: Optional[int] = None
    death_event: Optional[int] = None
    enters_window: bool = False
    leaves_window: bool = False
    reversals: list[Reversal] = field(default_factory=list)
    closed: bool = False
    merged_into: Optional[int] = None

    @property
    def species(self):
        return self.samples[-1].species

    @property
    def t_start(self) -> float:
        return min(d.t for d in self.samples)

    @property
    def t_end(self) -> float:
        return max(d.t for d in self.samples)

    def reverse(self) -> None:
        self.samples.reverse()
        self.reversals = [Reversal(r.t, r.x, r.y, r.after, r.before, r.event) for r in reversed(self.reversals)]
        self.birth_event, self.death_event = self.death_event, self.birth_event
        self.enters_window, self.leaves_window = self.leaves_window, self.enters_window


class _End(NamedTuple):
    """Live end of a line; a front end grows at samples[0]."""

    line: int
    front: bool = False


@dataclass
class TopologicalEvent:
    id: int
    t: float
    x: float
    y: float
    incoming: tuple[str, ...]
    outgoing: tuple[str, ...]
    legal: bool
    kind: str
    lines_in: tuple[int, ...] = ()
    lines_out: tuple[int, ...] = ()

    @property
    def turning(self) -> bool:
        """Saddle/extremum pair: one defect line reversing its direction in t."""
        members = Counter(self.incoming) + Counter(self.outgoing)
        return members == Counter({"s": 1, "e": 1})


@dataclass(frozen=True)
class NearApproach:
    line_a: int
    line_b: int
    t: float
    distance: float


@dataclass
class ConservationReport:
    steps: list[tuple[float, int, int, int]] = field(default_factory=list)
    boundary_crossings: int = 0
    illegal_events: int = 0
    unexplained_changes: int = 0
    suspects: int = 0
    ambiguous_matches: int = 0
    late_defects: int = 0

    @property
    def violations(self) -> int:
        return self.illegal_events + self.unexplained_changes


@dataclass
class TrackResult:
    lines: list[DefectLine]
    events: list[TopologicalEvent]
    report: ConservationReport
    near_approaches: list[NearApproach] = field(default_factory=list)

    def __iter__(self) -> Iterator:
        # unpacks as (lines, events)
        return iter((self.lines, self.events))


@dataclass(frozen=True)
class LifetimeRecord:
    t_birth: float
    t_death: float
    t_max: float
    sigma: float
    clipped: bool = False
    verified: Optional[bool] = None  # None: not checked


def snapshot(
    field: PlaneField,
    t: float,
    window: SearchWindow,
    warm: Sequence[complex] = (),
    settings: Optional[Settings] = None,
) -> Snapshot:
    """All classified defects in the window at time t."""
    settings = settings or get_settings()
    zeros = search_plane_zeros(field, t, window, warm=warm, settings=settings)
    crit = search_phase_critical_points(field, t, window, warm=warm, settings=settings)
    points = zeros.roots + crit.roots
    everything = [(p.x, p.y) for p in points]
    defects, unstable = [], []
    for p in points:
        try:
            defects.append(classify(field, p, t, neighbours=everything, settings=settings))
        except UnstableDefectError as exc:
            logger.debug("skipping unstable point: %s", exc)
            unstable.append(p)
    return Snapshot(t=t, defects=defects, suspects=zeros.suspects + crit.suspects + unstable)


def _flippable(a: Species, b: Species) -> bool:
    return (a is Species.SADDLE and b in _EXTREMA) or (a in _EXTREMA and b is Species.SADDLE)


class _Tracker:
    def __init__(self, field: PlaneField, window: SearchWindow, dt: float, settings: Settings):
        self.field = field
        self.window = window
        self.dt = dt
        self.dt_min = dt / settings.DT_MIN_DIVISOR
        # unbalanced clusters may be bisected below dt_min down to here
        self.dt_floor = self.dt_min / settings.REFINE_DIVISOR
        self.settings = settings
        self.v_est = 0.0
        self.lines: list[DefectLine] = []
        self.events: list[TopologicalEvent] = []
        self.report = ConservationReport()
        self.near: dict[tuple[int, int], NearApproach] = {}
        self._flux = [0, 0]
        self._step_max_speed = 0.0

    @property
    def match_radius(self) -> float:
        return max(5 * self.dt * self.v_est, self.settings.MATCH_RADIUS_FLOOR)

    @property
    def event_radius(self) -> float:
        return 2 * self.match_radius

    def snap(self, t: float, warm: Sequence[complex] = ()) -> Snapshot:
        s = snapshot(self.field, t, self.window, warm=warm, settings=self.settings)
        self.report.suspects += len(s.suspects)
        return s

    def _new_line(self, d: Defect) -> int:
        line = DefectLine(id=len(self.lines), samples=[d])
        self.lines.append(line)
        return line.id

    def _extend(self, end: _End, d: Defect) -> None:
        samples = self.lines[end.line].samples
        if end.front:
            samples.insert(0, d)
        else:
            samples.append(d)

    def root(self, line_id: int) -> int:
        while self.lines[line_id].merged_into is not None:
            line_id = self.lines[line_id].merged_into
        return line_id

    def _match(self, a: Snapshot, b: Snapshot, radius: float):
        """
        Assignment of a's defects to b's within radius, minimising total displacement.

        Same-species links are preferred; a saddle may continue as an extremum (or
        the reverse) at the cost of one extra radius. Returns
        (pairs, flips, unmatched in a, unmatched in b).
        """
        na, nb = len(a.defects), len(b.defects)
        if na == 0 or nb == 0:
            return [], [], list(range(na)), list(range(nb))
        pa, pb = a.positions, b.positions
        dist = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
        same = np.array([[da.species == db.species for db in b.defects] for da in a.defects])
        flip = np.array([[_flippable(da.species, db.species) for db in b.defects] for da in a.defects])
        within = dist <= radius
        cost = np.full(dist.shape, _NO_MATCH)
        cost[flip & within] = dist[flip & within] + radius
        cost[same & within] = dist[same & within]
        rows, cols = linear_sum_assignment(cost)
        kept = [(i, j) for i, j in zip(rows, cols) if cost[i, j] < _NO_MATCH]
        self._count_ties(cost, kept)
        ma = {i for i, _ in kept}
        mb = {j for _, j in kept}
        pairs = [(i, j) for i, j in kept if same[i, j]]
        flips = [(i, j) for i, j in kept if not same[i, j]]
        return pairs, flips, [i for i in range(na) if i not in ma], [j for j in range(nb) if j not in mb]

    def _count_ties(self, cost: np.ndarray, kept: list[tuple[int, int]]) -> None:
        tol = self.settings.TIE_TOL
        for i, j in kept:
            others = np.delete(cost[i], j)
            others = others[others < _NO_MATCH]
            if others.size and np.min(np.abs(others - cost[i, j])) <= tol * max(cost[i, j], 1.0):
                self.report.ambiguous_matches += 1
                logger.debug("tie within %.3g for defect %d; kept the minimal total displacement", tol, i)

    def _bisect(self, a: Snapshot, act_a: dict[int, _End], b: Snapshot) -> dict[int, _End]:
        mid = self.snap(0.5 * (a.t + b.t), warm=a.seeds + b.seeds)
        act_mid = self.advance(a, act_a, mid)
        return self.advance(mid, act_mid, b)

    def advance(self, a: Snapshot, act_a: dict[int, _End], b: Snapshot) -> dict[int, _End]:
        """Link a -> b, bisecting in t while defects appear, disappear or change species."""
        pairs, flips, ua, ub = self._match(a, b, self.match_radius)
        step = b.t - a.t
        if (ua or ub or flips) and step > self.dt_min:
            return self._bisect(a, act_a, b)

        if ua and ub:
            # leftovers at the finest step are fast continuations
            sub_a = Snapshot(a.t, [a.defects[i] for i in ua])
            sub_b = Snapshot(b.t, [b.defects[j] for j in ub])
            extra, extra_flips, ua2, ub2 = self._match(sub_a, sub_b, self.event_radius)
            pairs += [(ua[i], ub[j]) for i, j in extra]
            flips += [(ua[i], ub[j]) for i, j in extra_flips]
            ua, ub = [ua[i] for i in ua2], [ub[j] for j in ub2]

        if (ua or ub or flips) and step > self.dt_floor and self._unbalanced(a, b, ua, ub, flips):
            return self._bisect(a, act_a, b)

        act_b: dict[int, _End] = {}
        for i, j in pairs + flips:
            self._extend(act_a[i], b.defects[j])
            act_b[j] = act_a[i]
            if step > 0:
                speed = float(np.hypot(b.defects[j].x - a.defects[i].x, b.defects[j].y - a.defects[i].y)) / step
                self._step_max_speed = max(self._step_max_speed, speed)
        if ua or ub or flips:
            self._resolve_events(a, act_a, b, act_b, ua, ub, flips)
        return act_b

    def _on_edge(self, d: Defect) -> bool:
        return self.window.distance_to_edge(d.x, d.y) < self.event_radius

    def _ends(self, a: Snapshot, b: Snapshot, ua, ub, flips) -> list:
        ends = [("in", i, a.defects[i]) for i in ua if not self._on_edge(a.defects[i])]
        ends += [("out", j, b.defects[j]) for j in ub if not self._on_edge(b.defects[j])]
        ends += [("through", (i, j), b.defects[j]) for i, j in flips]
        return ends

    def _groups(self, ends: list) -> list[list]:
        if not ends:
            return []
        pts = np.array([[d.x, d.y] for _, _, d in ends])
        pairs = cKDTree(pts).query_pairs(self.event_radius, output_type="ndarray")
        n = len(ends)
        graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
        _, labels = connected_components(graph, directed=False)
        return [[ends[k] for k in np.flatnonzero(labels == label)] for label in np.unique(labels)]

    @staticmethod
    def _symbols(a: Snapshot, group: list) -> tuple[tuple[str, ...], tuple[str, ...]]:
        incoming = sorted(
            (a.defects[idx[0]] if side == "through" else d).species.symbol for side, idx, d in group if side != "out"
        )
        outgoing = sorted(d.species.symbol for side, _, d in group if side != "in")
        return tuple(incoming), tuple(outgoing)

    def _unbalanced(self, a: Snapshot, b: Snapshot, ua, ub, flips) -> bool:
        return any(not vertex_legal(*self._symbols(a, g)) for g in self._groups(self._ends(a, b, ua, ub, flips)))

    def _missed(self, snap: Snapshot, centre: np.ndarray, warm: list[complex]) -> list[Defect]:
        """Defects near centre found by a search over a small local window but absent from snap."""
        r = 2 * self.event_radius
        w = self.window
        x0, x1 = max(w.x_min, centre[0] - r), min(w.x_max, centre[0] + r)
        y0, y1 = max(w.y_min, centre[1] - r), min(w.y_max, centre[1] + r)
        if not (x0 < x1 and y0 < y1):
            return []
        local = SearchWindow(x0, x1, y0, y1, grid_density=w.grid_density)
        found = [d for d in snapshot(self.field, snap.t, local, warm=warm, settings=self.settings).defects if not self._on_edge(d)]
        if not found or not snap.defects:
            return found
        gap, _ = cKDTree(snap.positions).query(np.array([[d.x, d.y] for d in found]))
        return [d for d, g in zip(found, gap) if g > 10 * self.settings.DEDUP_TOL]

    def _local_ends(self, a: Snapshot, act_a: dict[int, _End], b: Snapshot, group: list) -> list:
        centre = np.mean([[d.x, d.y] for _, _, d in group], axis=0)
        warm = [complex(d.x, d.y) for _, _, d in group]
        found_b = self._missed(b, centre, warm)
        late_a = []
        for d in self._missed(a, centre, warm):
            twin = next(
                (e for e in found_b if e.species is d.species and math.hypot(e.x - d.x, e.y - d.y) <= self.event_radius),
                None,
            )
            # missed on both sides: the line runs straight through
            if twin is None:
                late_a.append(d)
            else:
                found_b.remove(twin)

        extra = []
        for d in late_a:
            a.defects.append(d)
            idx = len(a.defects) - 1
            act_a[idx] = _End(self._new_line(d))
            # counted as present before a.t
            self._flux[0] += d.m
            self._flux[1] += d.n_index
            extra.append(("in", idx, d))
        for d in found_b:
            b.defects.append(d)
            extra.append(("out", len(b.defects) - 1, d))
        if extra:
            self.report.late_defects += len(extra)
            logger.info("local search near (%.4g, %.4g) at t=%.6g added %d defect(s)", centre[0], centre[1], b.t, len(extra))
        return extra

    def _resolve_events(self, a, act_a, b, act_b, ua: list[int], ub: list[int], flips: list[tuple[int, int]]) -> None:
        for i in ua:
            d = a.defects[i]
            if self._on_edge(d):
                end = act_a[i]
                if end.front:
                    self.lines[end.line].enters_window = True
                else:
                    self.lines[end.line].leaves_window = True
                self.report.boundary_crossings += 1
                self._flux[0] -= d.m
                self._flux[1] -= d.n_index
        for j in ub:
            d = b.defects[j]
            if self._on_edge(d):
                line_id = self._new_line(d)
                self.lines[line_id].enters_window = True
                act_b[j] = _End(line_id)
                self.report.boundary_crossings += 1
                self._flux[0] += d.m
                self._flux[1] += d.n_index

        t_event = 0.5 * (a.t + b.t)
        for group in self._groups(self._ends(a, b, ua, ub, flips)):
            incoming, outgoing = self._symbols(a, group)
            if not vertex_legal(incoming, outgoing):
                extra = self._local_ends(a, act_a, b, group)
                if extra:
                    group = group + extra
                    incoming, outgoing = self._symbols(a, group)
            self._record_event(t_event, act_a, act_b, a, group, incoming, outgoing)

    def _record_event(self, t_event, act_a, act_b, a, group, incoming, outgoing) -> None:
        event_id = len(self.events)
        legal = vertex_legal(incoming, outgoing)
        xy = np.mean([[d.x, d.y] for _, _, d in group], axis=0)
        kind = "creation" if not incoming else "annihilation" if not outgoing else "interaction"
        turning = Counter(incoming) + Counter(outgoing) == Counter({"s": 1, "e": 1})
        if turning:
            kind = "turning"

        if turning and len(group) == 2 and group[0][0] == group[1][0] != "through":
            lines_in, lines_out = self._join(t_event, xy, event_id, act_a, act_b, group)
        else:
            lines_in, lines_out = [], []
            for side, idx, d in group:
                if side == "in":
                    end = act_a[idx]
                    if end.front:
                        self.lines[end.line].birth_event = event_id
                    else:
                        self.lines[end.line].death_event = event_id
                    lines_in.append(end.line)
                elif side == "out":
                    line_id = self._new_line(d)
                    self.lines[line_id].birth_event = event_id
                    act_b[idx] = _End(line_id)
                    lines_out.append(line_id)
                else:
                    end = act_b[idx[1]]
                    self._flip(end, a.defects[idx[0]], d, t_event, event_id)
                    lines_in.append(end.line)
                    lines_out.append(end.line)

        event = TopologicalEvent(
            id=event_id,
            t=t_event,
            x=float(xy[0]),
            y=float(xy[1]),
            incoming=incoming,
            outgoing=outgoing,
            legal=legal,
            kind=kind,
            lines_in=tuple(lines_in),
            lines_out=tuple(lines_out),
        )
        if not legal:
            self.report.illegal_events += 1
            logger.warning("illegal event at t=%.6g (%.4g, %.4g): %s -> %s", t_event, xy[0], xy[1], incoming, outgoing)
        else:
            logger.info("%s at t=%.6g (%.4g, %.4g): %s -> %s", kind, t_event, xy[0], xy[1], incoming or "0", outgoing or "0")
        self.events.append(event)

    def _flip(self, end: _End, before: Defect, after: Defect, t: float, event_id: int) -> None:
        line = self.lines[end.line]
        if end.front:
            line.reversals.insert(0, Reversal(t, after.x, after.y, after.species.symbol, before.species.symbol, event_id))
        else:
            line.reversals.append(Reversal(t, after.x, after.y, before.species.symbol, after.species.symbol, event_id))

    def _join(self, t: float, xy, event_id: int, act_a, act_b, group) -> tuple[list[int], list[int]]:
        """One line turning back in t through a saddle/extremum pair event."""
        x, y = float(xy[0]), float(xy[1])
        (side, k1, d1), (_, k2, d2) = group
        if side == "out":
            line = DefectLine(
                id=len(self.lines),
                samples=[d1, d2],
                reversals=[Reversal(t, x, y, d1.species.symbol, d2.species.symbol, event_id)],
            )
            self.lines.append(line)
            act_b[k1] = _End(line.id, front=True)
            act_b[k2] = _End(line.id)
            return [], [line.id]

        e1, e2 = act_a[k1], act_a[k2]
        first, second = self.lines[e1.line], self.lines[e2.line]
        if first is second:
            first.closed = True
            first.reversals.append(Reversal(t, x, y, first.samples[-1].species.symbol, first.samples[0].species.symbol, event_id))
            return [first.id], []

        # orient so the two meeting ends touch: first ends here, second starts here
        if e1.front:
            first.reverse()
        if not e2.front:
            second.reverse()
        first.reversals.append(Reversal(t, x, y, first.samples[-1].species.symbol, second.samples[0].species.symbol, event_id))
        first.samples += second.samples
        first.reversals += second.reversals
        first.death_event = second.death_event
        first.leaves_window = second.leaves_window
        second.samples, second.reversals = [], []
        second.merged_into = first.id

        for ev in self.events:
            ev.lines_in = tuple(first.id if k == second.id else k for k in ev.lines_in)
            ev.lines_out = tuple(first.id if k == second.id else k for k in ev.lines_out)
        # remaining live ends: first's at the front, second's at the back
        for act in (act_a, act_b):
            for k, end in act.items():
                if end.line == first.id:
                    act[k] = _End(first.id, front=True)
                elif end.line == second.id:
                    act[k] = _End(first.id)
        return [first.id], []

    def record_near_approaches(self, snap: Snapshot, act: dict[int, _End]) -> None:
        nodal = [k for k, d in enumerate(snap.defects) if d.species.is_nodal and k in act]
        if len(nodal) < 2:
            return
        pts = snap.positions[nodal]
        for i, j in cKDTree(pts).query_pairs(self.event_radius):
            la, lb = sorted((act[nodal[i]].line, act[nodal[j]].line))
            if la == lb:
                continue
            dist = float(np.linalg.norm(pts[i] - pts[j]))
            prev = self.near.get((la, lb))
            if prev is None or dist < prev.distance:
                self.near[(la, lb)] = NearApproach(la, lb, snap.t, dist)


def track(
    field: PlaneField,
    t_start: float,
    t_end: float,
    dt: float,
    window: SearchWindow,
    settings: Optional[Settings] = None,
) -> TrackResult:
    """
    Defect lines and topological events of `field` over [t_start, t_end].

    Unpacks as (lines, events); the full result also carries the per-step
    conservation report and the closest approaches between nodal lines.
    """
    settings = settings or get_settings()
    if not t_start < t_end:
        raise InvalidArgumentError(f"need t_start < t_end, got [{t_start}, {t_end}]")
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")

    steps = int(math.ceil((t_end - t_start) / dt - 1e-9))
    times = [min(t_start + k * dt, t_end) for k in range(steps + 1)]
    tr = _Tracker(field, window, dt, settings)

    prev = tr.snap(times[0])
    act = {k: _End(tr._new_line(d)) for k, d in enumerate(prev.defects)}
    w, chi = totals(prev.defects)
    tr.report.steps.append((prev.t, w, chi, len(prev.defects)))

    for t in times[1:]:
        cur = tr.snap(t, warm=prev.seeds)
        tr._flux = [0, 0]
        tr._step_max_speed = 0.0
        event_count = len(tr.events)
        act = tr.advance(prev, act, cur)

        w_new, chi_new = totals(cur.defects)
        event_delta = [0, 0]
        for ev in tr.events[event_count:]:
            if not ev.legal:
                before = _vector(ev.incoming)
                after = _vector(ev.outgoing)
                event_delta[0] += after[0] - before[0]
                event_delta[1] += after[1] - before[1]
        expected = (w + tr._flux[0] + event_delta[0], chi + tr._flux[1] + event_delta[1])
        if expected != (w_new, chi_new):
            tr.report.unexplained_changes += 1
            logger.warning("totals changed without an event at t=%.6g: %s -> %s", t, (w, chi), (w_new, chi_new))
        w, chi = w_new, chi_new
        tr.report.steps.append((cur.t, w, chi, len(cur.defects)))
        tr.record_near_approaches(cur, act)
        tr.v_est = tr._step_max_speed
        prev = cur

    lines = [line for line in tr.lines if line.merged_into is None]
    near: dict[tuple[int, int], NearApproach] = {}
    for n in tr.near.values():
        la, lb = sorted((tr.root(n.line_a), tr.root(n.line_b)))
        if la == lb or _share_event(tr.lines[la], tr.lines[lb]):
            continue
        if (la, lb) not in near or n.distance < near[(la, lb)].distance:
            near[(la, lb)] = NearApproach(la, lb, n.t, n.distance)
    logger.info(
        "tracked %d lines, %d events, %d violations over [%g, %g]",
        len(lines), len(tr.events), tr.report.violations, t_start, t_end,
    )
    return TrackResult(lines=lines, events=tr.events, report=tr.report, near_approaches=[near[k] for k in sorted(near)])


def _vector(symbols: Sequence[str]) -> tuple[int, int]:
    return group_reduce(symbols).vector


def _share_event(a: DefectLine, b: DefectLine) -> bool:
    return (a.death_event is not None and a.death_event == b.death_event) or (
        a.birth_event is not None and a.birth_event == b.birth_event
    )




# Eigenvalue velocities

def velocity_closed_form_n2(m0, s: complex, tol: float = 1e-14) -> tuple[complex, complex]:
    """
    First-order eigenvalue velocities of M0 + t diag(s, -s).

    Returned in the order of lambda_+- = (a + d +- sqrt(D)) / 2 with the
    principal root of D = (a - d)^2 + 4bc; each equals +-(a - d) s / sqrt(D).
    """
    m = as_matrix(m0, 2)
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    disc = (a - d) ** 2 + 4 * b * c
    scale = max(abs(a) + abs(d), abs(b * c) ** 0.5, 1.0) ** 2
    if abs(disc) < tol * scale:
        raise DegenerateEigenvalueError(f"repeated eigenvalue: discriminant {disc:.3g}")
    root = np.sqrt(complex(disc))
    v = (a - d) * s / root
    return complex(v), complex(-v)


def eigenvalues_n2(m0) -> tuple[complex, complex]:
    m = as_matrix(m0, 2)
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    root = np.sqrt(complex((a - d) ** 2 + 4 * b * c))
    return complex((a + d + root) / 2), complex((a + d - root) / 2)


def velocity_closed_form_n3(m0, s: complex, lambda0: complex, tol: float = 1e-14) -> complex:
    """First-order velocity of the eigenvalue lambda0 of M0 + t diag(s, 0, -s)."""
    m = as_matrix(m0, 3)
    (a, b, c), (d, e, f), (g, h, k) = m
    lam = complex(lambda0)
    numerator = (a * e + f * h - e * k - b * d + (k - a) * lam) * s
    denominator = b * d - a * e + c * g + f * h - a * k - e * k + 2 * lam * (a + e + k) - 3 * lam * lam
    scale = max(float(np.abs(m).max()), abs(lam), 1.0) ** 2
    if abs(denominator) < tol * scale:
        raise DegenerateEigenvalueError(f"lambda0={lam} is not a simple eigenvalue")
    return complex(numerator / denominator)


def velocity_general(m, mdot, lambda_j: complex, tol: float = 1e-10) -> complex:
    """tr(Mdot adj(M - lambda I)) / prod_{k != j}(lambda_k - lambda) at lambda = lambda_j."""
    m = as_matrix(m)
    mdot = as_matrix(mdot, m.shape[0])
    lam = complex(lambda_j)
    eig = np.linalg.eigvals(m)
    j = int(np.argmin(np.abs(eig - lam)))
    others = np.delete(eig, j)
    scale = max(float(np.abs(eig).max()), 1.0)
    if others.size and np.min(np.abs(others - lam)) < tol * scale:
        raise DegenerateEigenvalueError(f"eigenvalue {lam} is repeated")
    envelope = np.prod(others - lam) if others.size else 1.0
    numerator = np.trace(mdot @ adjugate(m - lam * np.eye(m.shape[0])))
    return complex(numerator / envelope)


# Quaternionic transient lifetimes

def _coefficients_over_t(m0: np.ndarray, s: complex, ts: np.ndarray):
    a = m0[0, 0] + s * ts
    d = m0[1, 1] - s * ts
    b, c = m0[0, 1], m0[1, 0]
    k = a * d - b * c
    quadratic = (1.0, 1.0, 0.0, -(a.real + d.real), d.imag - a.imag, k.real)
    linear = (a.real - d.real, -(a.imag + d.imag), k.imag)
    return quadratic, linear


def transient_discriminant(m0, s: complex, ts) -> np.ndarray:
    """Line/circle discriminant of the xi = 1 field of M0 + t diag(s, -s); negative while transient."""
    m = as_matrix(m0, 2)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    return line_circle_discriminant(*_coefficients_over_t(m, complex(s), ts))


def _verify_transient(m0: np.ndarray, s: complex, t: float, settings: Settings) -> bool:
    quadratic, linear = _coefficients_over_t(m0, s, np.array([t]))
    cx, cy, r2, nx, ny, c = (float(np.ravel(v)[0]) for v in line_circle_geometry(quadratic, linear))
    norm2 = nx * nx + ny * ny
    if norm2 > 0:
        off = (nx * cx + ny * cy + c) / norm2
        cx, cy = cx - off * nx, cy - off * ny
    deficit = -float(transient_discriminant(m0, s, [t])[0])
    half = 2 * math.sqrt(max(deficit, 0.0)) + 1.0
    box = Box4.cube(half, center=(cx, cy, 0.0, 0.0), grid_density=6)
    roots = find_quaternion_roots(m0 + t * np.diag([s, -s]), box, settings)
    off_plane = [q for q in roots if not q.is_planar(settings.DEDUP_TOL)]
    tol = 1e-6 * max(1.0, half)
    for q in off_plane:
        if any(abs(q.z + p.z) < tol and abs(q.w + p.w) < tol and abs(q.x - p.x) < tol for p in off_plane if p is not q):
            return True
    return False


def measure_lifetime(
    m0,
    s: complex,
    t_range: tuple[float, float],
    dt: float,
    sigma: Optional[float] = None,
    verify: bool = True,
    settings: Optional[Settings] = None,
) -> list[LifetimeRecord]:
    """
    Every interval of t in which the xi = 1 field of M0 + t diag(s, -s) has no
    plane zeros. Endpoints are refined by root bracketing on the discriminant;
    intervals touching the ends of t_range are returned with clipped=True.
    An empty list means no transient in range.
    """
    settings = settings or get_settings()
    m = as_matrix(m0, 2)
    s = complex(s)
    t0, t1 = map(float, t_range)
    if not (t0 < t1 and dt > 0):
        raise InvalidArgumentError(f"invalid lifetime scan [{t0}, {t1}] with dt={dt}")
    if sigma is None:
        sigma = float(np.linalg.norm(m)) / math.sqrt(8)
    dt_min = dt / settings.DT_MIN_DIVISOR

    ts = np.linspace(t0, t1, int(math.ceil((t1 - t0) / dt)) + 1)
    disc = transient_discriminant(m, s, ts)
    inside = disc < 0
    if not np.any(inside):
        return []

    def f(t: float) -> float:
        return float(transient_discriminant(m, s, [t])[0])

    def edge(lo: float, hi: float) -> float:
        try:
            return brentq(f, lo, hi, xtol=min(dt_min, 1e-12))
        except ValueError:
            return 0.5 * (lo + hi)

    records = []
    padded = np.concatenate([[False], inside, [False]])
    starts = np.flatnonzero(~padded[:-1] & padded[1:])
    stops = np.flatnonzero(padded[:-1] & ~padded[1:]) - 1
    for i0, i1 in zip(starts, stops):
        clipped = i0 == 0 or i1 == len(ts) - 1
        birth = ts[0] if i0 == 0 else edge(ts[i0 - 1], ts[i0])
        death = ts[-1] if i1 == len(ts) - 1 else edge(ts[i1], ts[i1 + 1])
        if death <= birth:
            continue
        verified = _verify_transient(m, s, 0.5 * (birth + death), settings) if verify else None
        if verified is False:
            logger.warning("transient [%.6g, %.6g] has no off-plane root pair", birth, death)
        records.append(
            LifetimeRecord(
                t_birth=float(birth),
                t_death=float(death),
                t_max=float(death - birth),
                sigma=float(sigma),
                clipped=bool(clipped),
                verified=verified,
            )
        )
    return records
