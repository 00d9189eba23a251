import json

import numpy as np
import pytest

from defectline.config import Settings
from defectline.schemas.defect import ConservationRow, DefectRow, EventRecord, PhaseRow, TrackSummary, TrajectoryRow
from defectline.schemas.ensemble import FitSummary, SweepRow
from defectline.services.builtin_fields import AppendixDField, BubbleField
from defectline.services.export import (
    defect_rows,
    read_json,
    read_rows,
    write_json,
    write_phase_grid,
    write_rows,
    write_sweep,
    write_track,
)
from defectline.services.rootfind import SearchWindow
from defectline.services.topology import Defect, Species
from defectline.services.tracker import track
from defectline.services.wavefield import phase_grid


@pytest.fixture(scope="module")
def appendix_d_track():
    settings = Settings(GRID_DENSITY_2D=16, GRID_DENSITY_4D=8, CONTOUR_SAMPLES=128)
    return track(AppendixDField(), -0.31, 0.29, 0.05, SearchWindow.square(3.0, grid_density=16), settings=settings)


def test_defect_rows_carry_symbols_and_charges(tmp_path):
    defects = [Defect.of(Species.ANTI_VORTEX, -1.0, 0.0, 0.0), Defect.of(Species.SADDLE, 0.0, 0.5, 0.0)]
    path = write_rows(tmp_path / "defects.csv", defect_rows(defects), DefectRow)
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "t,x,y,m,n,species"
    back = read_rows(path, DefectRow)
    assert [(r.species, r.m, r.n) for r in back] == [("AntiVortex", -1, 1), ("Saddle", 0, -1)]


def test_phase_grid_file(tmp_path):
    xs = np.linspace(-2, 2, 5)
    gx, gy, phi = phase_grid(BubbleField(1.0), xs, xs, 0.0)
    back = read_rows(write_phase_grid(tmp_path / "phase.csv", gx, gy, phi), PhaseRow)
    assert len(back) == 25
    assert all(-np.pi < r.phi <= np.pi for r in back)
    assert back[1].x == pytest.approx(-1.0) and back[1].y == pytest.approx(-2.0)


def test_missing_optionals_are_empty_cells(tmp_path):
    rows = [SweepRow(sigma=1.0, n_trials=5), SweepRow(sigma=2.0, mean_t_max=3.1, n_transients=2, stderr=0.1, n_trials=5)]
    files = write_sweep(tmp_path, rows, None)
    assert "fit" not in files
    assert files["sweep"].read_text(encoding="utf-8").splitlines()[1].startswith("1.0,,")
    assert read_rows(files["sweep"], SweepRow) == rows


def test_sweep_fit_json(tmp_path):
    fit = FitSummary(intercept=0.1, slope=1.6, r2=0.99, n_points=10, uncertainty=1.01)
    files = write_sweep(tmp_path / "nested", [SweepRow(sigma=1.0)], fit)
    assert json.loads(files["fit"].read_text(encoding="utf-8"))["slope"] == 1.6
    assert read_json(files["fit"], FitSummary) == fit


def test_write_track(tmp_path, appendix_d_track):
    files = write_track(tmp_path, appendix_d_track)
    assert set(files) == {"trajectories", "events", "conservation", "summary"}

    events = read_json(files["events"], list[EventRecord])
    assert len(events) == len(appendix_d_track.events)
    assert all(ev.legal for ev in events)

    steps = read_rows(files["conservation"], ConservationRow)
    assert steps[0].t == pytest.approx(-0.31)

    summary = read_json(files["summary"], TrackSummary)
    assert summary.lines == len(appendix_d_track.lines)
    assert summary.violations == 0
    assert summary.reversals == sum(len(line.reversals) for line in appendix_d_track.lines)
    assert summary.final_totals == (steps[-1].w, steps[-1].chi)

    traj = read_rows(files["trajectories"], TrajectoryRow)
    assert {r.line_id for r in traj} == {line.id for line in appendix_d_track.lines}


def test_write_json_plain_payload(tmp_path):
    path = write_json(tmp_path / "plain.json", {"a": [1, 2]})
    assert path.read_text(encoding="utf-8").endswith("\n")
    assert read_json(path, dict[str, list[int]]) == {"a": [1, 2]}
