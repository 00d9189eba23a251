import math
from collections import Counter

import numpy as np
import pytest

from defectline.errors import DegenerateEigenvalueError, InvalidArgumentError
from defectline.services.builtin_fields import AppendixCField, AppendixDField, BubbleField
from defectline.services.linalg_core import EvolutionLaw, deformation_matrix, ginibre_standard
from defectline.services.rootfind import SearchWindow, default_window, find_plane_zeros, find_quaternion_roots
from defectline.services.topology import Defect, Species
from defectline.services.tracker import (
    Snapshot,
    _End,
    _Tracker,
    eigenvalues_n2,
    measure_lifetime,
    snapshot,
    track,
    transient_discriminant,
    velocity_closed_form_n2,
    velocity_closed_form_n3,
    velocity_general,
)
from defectline.services.wavefield import WaveField
from tests.conftest import random_complex

TRANSIENT = np.array([[-1, 0.5], [-0.5, 1]], dtype=complex)


def _fd_velocity(m0, s, lam, h=1e-6):
    n = m0.shape[0]
    plus = np.linalg.eigvals(m0 + h * deformation_matrix(n, s))
    minus = np.linalg.eigvals(m0 - h * deformation_matrix(n, s))
    return (plus[np.argmin(np.abs(plus - lam))] - minus[np.argmin(np.abs(minus - lam))]) / (2 * h)


class TestVelocities:
    def test_two_by_two_example(self):
        assert velocity_closed_form_n2(np.diag([0.0, 2.0]), 1.0) == (-1, 1)

    def test_three_by_three_example(self):
        m0 = np.diag([1.0, 2.0, 3.0])
        assert velocity_closed_form_n3(m0, 1.0, 1.0) == pytest.approx(1.0)
        assert velocity_closed_form_n3(m0, 1.0, 2.0) == pytest.approx(0.0, abs=1e-15)

    def test_closed_forms_agree_with_general_formula(self, rng):
        for _ in range(200):
            s = complex(*rng.standard_normal(2))
            m2 = random_complex(rng, 2)
            for lam, v in zip(eigenvalues_n2(m2), velocity_closed_form_n2(m2, s)):
                assert velocity_general(m2, deformation_matrix(2, s), lam) == pytest.approx(v, rel=1e-9, abs=1e-12)
            m3 = random_complex(rng, 3)
            for lam in np.linalg.eigvals(m3):
                v3 = velocity_closed_form_n3(m3, s, lam)
                assert velocity_general(m3, deformation_matrix(3, s), lam) == pytest.approx(v3, rel=1e-9, abs=1e-12)

    def test_general_formula_matches_finite_differences(self):
        for seed in range(50):
            m0 = ginibre_standard(4, seed)
            eig = np.linalg.eigvals(m0)
            gaps = np.abs(eig[:, None] - eig[None, :]) + np.eye(4)
            if gaps.min() < 0.05:
                continue
            for lam in eig:
                v = velocity_general(m0, deformation_matrix(4, 1.0), lam)
                assert v == pytest.approx(_fd_velocity(m0, 1.0, lam), rel=1e-5, abs=1e-7)

    def test_repeated_eigenvalue(self):
        with pytest.raises(DegenerateEigenvalueError):
            velocity_closed_form_n2(np.eye(2), 1.0)
        with pytest.raises(DegenerateEigenvalueError):
            velocity_general(np.eye(3), deformation_matrix(3, 1.0), 1.0)


class TestLifetime:
    def test_known_transient(self):
        records = measure_lifetime(TRANSIENT, 1.0, (-2.0, 4.0), 0.01, verify=True)
        assert len(records) == 1
        rec = records[0]
        assert rec.t_birth == pytest.approx(0.5, abs=1e-9)
        assert rec.t_death == pytest.approx(1.5, abs=1e-9)
        assert rec.t_max == pytest.approx(1.0, abs=1e-9)
        assert rec.verified and not rec.clipped

    def test_quaternion_pair_during_transient(self):
        roots = find_quaternion_roots(TRANSIENT + 1.0 * np.diag([1, -1]))
        assert [tuple(np.round(r.as_array(), 9)) for r in roots] == [(0, 0, -0.5, 0), (0, 0, 0.5, 0)]

    def test_off_plane_norm_shrinks_towards_birth(self):
        norms = []
        for gap in (1e-1, 1e-2, 1e-3, 1e-5):
            t = 0.5 + gap
            roots = find_quaternion_roots(TRANSIENT + t * np.diag([1, -1]))
            off = [abs(r.z) + abs(r.w) for r in roots if not r.is_planar(1e-6)]
            assert len(off) == 2
            norms.append(max(off))
        assert norms == sorted(norms, reverse=True)
        assert norms[-1] < 1e-2

    def test_no_transient_when_the_line_crosses_the_centre(self):
        assert measure_lifetime(np.diag([1, 2 + 1j]), 1.0, (-5, 5), 0.01) == []

    def test_clipped_at_the_range_edge(self):
        records = measure_lifetime(TRANSIENT, 1.0, (1.0, 3.0), 0.01, verify=False)
        assert len(records) == 1 and records[0].clipped
        assert records[0].t_birth == 1.0

    def test_discriminant_sign(self):
        disc = transient_discriminant(TRANSIENT, 1.0, [0.0, 1.0, 2.0])
        assert disc[0] >= 0 and disc[1] < 0 and disc[2] >= 0

    def test_rescaling(self):
        base = measure_lifetime(TRANSIENT, 1.0, (-2, 4), 0.01, verify=False)[0]
        scaled = measure_lifetime(3 * TRANSIENT, 1.0, (-6, 12), 0.03, verify=False)[0]
        assert scaled.t_max == pytest.approx(3 * base.t_max, rel=1e-9)

    def test_rejects_bad_scan(self):
        with pytest.raises(InvalidArgumentError):
            measure_lifetime(TRANSIENT, 1.0, (1.0, 0.0), 0.01)


class TestTracking:
    def test_snapshot_counts(self, fast_settings):
        field = WaveField(EvolutionLaw(np.diag([0.0, 1.0, 3.0])), 3)
        snap = snapshot(field, 0.0, SearchWindow(-1, 4, -2, 2), settings=fast_settings)
        counts = Counter(d.species for d in snap.defects)
        assert counts == {Species.VORTEX: 3, Species.SADDLE: 2}

    def test_all_lambda_slots_have_no_events(self, fast_settings):
        field = WaveField(EvolutionLaw(ginibre_standard(3, 4), 1.0), 3)
        window = default_window(field, np.linspace(0, 0.3, 4), grid_density=16)
        result = track(field, 0.0, 0.3, 0.05, window, settings=fast_settings)
        lines, events = result
        assert events == []
        assert result.report.violations == 0
        vortex_lines = [line for line in lines if line.species is Species.VORTEX]
        assert len(vortex_lines) == 3
        assert all(line.t_start == 0.0 and line.t_end == pytest.approx(0.3) for line in vortex_lines)

    def test_vortex_lines_follow_eigenvalue_velocity(self, fast_settings):
        m0 = ginibre_standard(3, 9)
        field = WaveField(EvolutionLaw(m0, 1.0), 3)
        window = default_window(field, [0.0, 0.02], grid_density=16)
        lines, _ = track(field, 0.0, 0.02, 0.01, window, settings=fast_settings)
        for line in (ln for ln in lines if ln.species is Species.VORTEX):
            a, b = line.samples[0], line.samples[1]
            lam = complex(a.x, a.y)
            v = velocity_general(m0, deformation_matrix(3, 1.0), lam)
            slope = complex(b.x - a.x, b.y - a.y) / (b.t - a.t)
            assert slope == pytest.approx(v, rel=0.05, abs=0.05)

    def test_appendix_d_pair_creation(self, fast_settings):
        result = track(AppendixDField(), -0.31, 0.29, 0.05, SearchWindow.square(3.0, grid_density=16), settings=fast_settings)
        assert result.report.violations == 0
        assert result.events, "expected a topological event near eps = 0"
        assert all(ev.legal for ev in result.events)
        assert any(abs(ev.t) < 0.1 for ev in result.events)

    def test_rejects_bad_interval(self, fast_settings):
        with pytest.raises(InvalidArgumentError):
            track(BubbleField(1.0), 1.0, 0.0, 0.1, SearchWindow.square(2.0), settings=fast_settings)

    @pytest.mark.slow
    def test_bubble_nucleates_and_annihilates(self, fast_settings):
        dt = 0.01
        result = track(BubbleField(1.0), -1.5, 1.5, dt, SearchWindow.square(2.0, grid_density=16), settings=fast_settings)
        assert result.report.violations == 0
        births = [ev for ev in result.events if not ev.incoming]
        deaths = [ev for ev in result.events if not ev.outgoing]
        assert len(births) == 1 and len(deaths) == 1
        assert births[0].t == pytest.approx(-1.0, abs=2 * dt)
        assert deaths[0].t == pytest.approx(1.0, abs=2 * dt)
        assert Counter(births[0].outgoing) == Counter({"v": 1, "v*": 1, "s": 2})
        assert Counter(deaths[0].incoming) == Counter({"v": 1, "v*": 1, "s": 2})

    @pytest.mark.slow
    def test_conservation_suite(self, fast_settings):
        for seed in range(20):
            for xi in (2, 3, 4):
                field = WaveField(EvolutionLaw(ginibre_standard(4, seed), 1.0), xi)
                window = default_window(field, np.linspace(0, 3, 7), grid_density=16)
                result = track(field, 0.0, 3.0, 0.05, window, settings=fast_settings)
                assert result.report.violations == 0, (seed, xi)
                assert all(ev.legal for ev in result.events)


def _snap(t, *defects):
    return Snapshot(t, [Defect.of(species, x, y, t) for species, x, y in defects])


def _start(tr, snap):
    return {k: _End(tr._new_line(d)) for k, d in enumerate(snap.defects)}


class TestLinking:
    @pytest.fixture
    def tr(self, fast_settings):
        return _Tracker(BubbleField(1.0), SearchWindow.square(2.0), 1.0, fast_settings)

    def test_saddle_may_continue_as_extremum(self, tr):
        a = _snap(0.0, (Species.SADDLE, 0.0, 0.0))
        b = _snap(1e-4, (Species.MAXIMUM, 0.01, 0.0))
        assert tr._match(a, b, 0.05) == ([], [(0, 0)], [], [])

    def test_same_species_is_preferred(self, tr):
        a = _snap(0.0, (Species.SADDLE, 0.0, 0.0))
        b = _snap(1e-4, (Species.MAXIMUM, 0.001, 0.0), (Species.SADDLE, 0.02, 0.0))
        assert tr._match(a, b, 0.05) == ([(0, 1)], [], [], [0])

    def test_ties_are_counted(self, tr):
        a = _snap(0.0, (Species.VORTEX, 0.0, 0.0))
        b = _snap(1e-4, (Species.VORTEX, 0.01, 0.0), (Species.VORTEX, -0.01, 0.0))
        pairs, flips, ua, ub = tr._match(a, b, 0.05)
        assert len(pairs) == 1 and len(ub) == 1 and not flips and not ua
        assert tr.report.ambiguous_matches == 1

    def test_saddle_absorbing_a_pair_stays_one_line(self, tr):
        a = _snap(0.0, (Species.VORTEX, -0.01, 0.0), (Species.ANTI_VORTEX, 0.01, 0.0), (Species.SADDLE, 0.0, 0.005))
        b = _snap(1e-4, (Species.MAXIMUM, 0.0, 0.001))
        act_b = tr.advance(a, _start(tr, a), b)
        assert act_b == {0: _End(2)}
        (event,) = tr.events
        assert event.legal and event.kind == "interaction"
        assert event.incoming == ("s", "v", "v*") and event.outgoing == ("e",)
        assert event.lines_out == (2,) and 2 in event.lines_in
        line = tr.lines[2]
        assert [d.species for d in line.samples] == [Species.SADDLE, Species.MAXIMUM]
        assert [(r.before, r.after, r.event) for r in line.reversals] == [("s", "e", 0)]
        assert tr.report.illegal_events == 0

    def test_saddle_extremum_annihilation_joins_two_lines(self, tr):
        a = _snap(0.0, (Species.SADDLE, -0.01, 0.0), (Species.MAXIMUM, 0.01, 0.0))
        assert tr.advance(a, _start(tr, a), _snap(1e-4)) == {}
        (event,) = tr.events
        assert event.kind == "turning" and event.legal
        assert event.lines_in == (0,) and event.lines_out == ()
        assert tr.lines[1].merged_into == 0
        assert [d.species for d in tr.lines[0].samples] == [Species.SADDLE, Species.MAXIMUM]
        assert [(r.before, r.after) for r in tr.lines[0].reversals] == [("s", "e")]

    def test_created_and_annihilated_pair_closes_a_loop(self, tr):
        b = _snap(1e-4, (Species.SADDLE, -0.01, 0.0), (Species.MINIMUM, 0.01, 0.0))
        act_b = tr.advance(_snap(0.0), {}, b)
        assert act_b == {0: _End(0, front=True), 1: _End(0)}
        tr.advance(b, act_b, _snap(2e-4))
        (line,) = tr.lines
        assert line.closed
        assert [(r.before, r.after) for r in line.reversals] == [("s", "e"), ("e", "s")]
        assert [ev.kind for ev in tr.events] == ["turning", "turning"]
        assert tr.report.illegal_events == 0

    def test_local_search_completes_an_unbalanced_cluster(self, fast_settings):
        field = AppendixDField(0.5)
        window = SearchWindow.square(3.0)
        tr = _Tracker(field, window, 1.0, fast_settings)
        a = snapshot(field, 0.0, window, settings=fast_settings)
        assert any(d.species.is_nodal and d.x > 0 for d in a.defects)
        # the right-hand zero is left out of the later snapshot
        b = Snapshot(1e-6, [Defect.of(d.species, d.x, d.y, 1e-6) for d in a.defects if not (d.species.is_nodal and d.x > 0)])
        tr.advance(a, _start(tr, a), b)
        assert tr.report.illegal_events == 0
        assert tr.report.late_defects == 1
        assert len(b.defects) == len(a.defects)
        assert all(ev.legal for ev in tr.events)


class TestTurningLines:
    def test_saddle_maximum_pair_is_one_turning_line(self, fast_settings):
        result = track(AppendixCField(), -0.2, 0.2, 0.05, SearchWindow.square(1.0, grid_density=16), settings=fast_settings)
        assert result.report.violations == 0
        turns = [ev for ev in result.events if ev.kind == "turning"]
        assert len(turns) == 1 and turns[0].legal
        assert turns[0].incoming == () and len(turns[0].lines_out) == 1
        assert abs(turns[0].t) < 0.05
        line = next(ln for ln in result.lines if ln.id == turns[0].lines_out[0])
        assert {d.species for d in line.samples} == {Species.SADDLE, Species.MAXIMUM}
        assert len(line.reversals) == 1 and {line.reversals[0].before, line.reversals[0].after} == {"s", "e"}
        assert line.t_start >= turns[0].t

    def test_halving_dt_keeps_event_multisets(self, fast_settings):
        window = SearchWindow.square(3.0, grid_density=16)
        coarse = track(AppendixDField(), -0.31, 0.29, 0.05, window, settings=fast_settings)
        fine = track(AppendixDField(), -0.31, 0.29, 0.025, window, settings=fast_settings)
        assert coarse.events and len(coarse.events) == len(fine.events)
        for a, b in zip(sorted(coarse.events, key=lambda e: e.t), sorted(fine.events, key=lambda e: e.t)):
            assert (a.incoming, a.outgoing) == (b.incoming, b.outgoing)
            assert abs(a.t - b.t) < 0.05
            assert math.hypot(a.x - b.x, a.y - b.y) < 0.05


@pytest.mark.slow
class TestTenByTen:
    def test_half_filled_run_has_no_illegal_events(self, fast_settings):
        field = WaveField(EvolutionLaw(ginibre_standard(10, 0), 1.0), 5)
        window = default_window(field, np.linspace(0, 1, 11), grid_density=16)
        result = track(field, 0.0, 1.0, 0.05, window, settings=fast_settings)
        assert result.report.illegal_events == 0
        assert all(ev.legal for ev in result.events)

    def test_seven_lambda_slots_keep_their_winding(self, fast_settings):
        field = WaveField(EvolutionLaw(ginibre_standard(10, 1), 1.0), 7)
        window = default_window(field, np.linspace(0, 1, 11), grid_density=16)
        result = track(field, 0.0, 1.0, 0.05, window, settings=fast_settings)
        assert result.report.violations == 0
        if result.report.boundary_crossings == 0:
            assert {w for _, w, _, _ in result.report.steps} == {4}
        for ev in result.events:
            legs = Counter(ev.incoming + ev.outgoing)
            assert legs["v"] == legs["v*"] or not ev.incoming or not ev.outgoing

    def test_half_filled_fields_create_pairs_and_full_ones_do_not(self, fast_settings):
        ts = np.linspace(0.0, 1.0, 21)
        changing = []
        for seed in range(50):
            m0 = ginibre_standard(10, seed)
            full = WaveField(EvolutionLaw(m0, 1.0), 10)
            window = default_window(full, ts, grid_density=16)
            assert all(len(find_plane_zeros(full, t, window, settings=fast_settings)) == 10 for t in ts), seed
            half = WaveField(EvolutionLaw(m0, 1.0), 5)
            counts = [len(find_plane_zeros(half, t, window, settings=fast_settings)) for t in ts]
            if len(set(counts)) > 1:
                changing.append(seed)
        assert changing
        field = WaveField(EvolutionLaw(ginibre_standard(10, changing[0]), 1.0), 5)
        result = track(field, 0.0, 1.0, 0.05, default_window(field, ts, grid_density=16), settings=fast_settings)
        assert any("v" in ev.incoming + ev.outgoing and "v*" in ev.incoming + ev.outgoing for ev in result.events)
