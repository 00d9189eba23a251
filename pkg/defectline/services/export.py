"""
Export Engine
UTF-8 CSV (header row) and JSON writers for phase grids, defect lists,
trajectories, events, conservation steps and sweep results, with readers that
parse the files back into the same row models.
"""

import csv
import json
import logging
from pathlib import Path
import types
from typing import Iterable, Optional, Sequence, Type, TypeVar

import numpy as np
from pydantic import BaseModel, TypeAdapter

from defectline.schemas.defect import (
    ConservationRow,
    DefectRow,
    EventRecord,
    NearApproachRow,
    PhaseRow,
    TrackSummary,
    TrajectoryRow,
)
from defectline.schemas.ensemble import FitSummary, SweepRow
from defectline.services.topology import Defect
from defectline.services.tracker import TrackResult

logger = logging.getLogger(__name__)

Row = TypeVar("Row", bound=BaseModel)


def _prepare(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_rows(path, rows: Iterable[BaseModel], model: Type[BaseModel]) -> Path:
    path = _prepare(path)
    columns = list(model.model_fields)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        count = 0
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.model_dump().items()})
            count += 1
    logger.info("wrote %d rows to %s", count, path)
    return path


def read_rows(path, model: Type[Row]) -> list[Row]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        # empty cells are missing optionals
        return [model.model_validate({k: v for k, v in rec.items() if v != ""}) for rec in reader]


def write_json(path, payload) -> Path:
    """Models and lists of models keep their field order."""
    path = _prepare(path)
    if isinstance(payload, BaseModel):
        data = payload.model_dump(mode="json")
    elif isinstance(payload, list):
        data = [p.model_dump(mode="json") if isinstance(p, BaseModel) else p for p in payload]
    else:
        data = payload
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def read_json(path, model):
    """`model` is a BaseModel subclass or a type such as list[EventRecord]."""
    text = Path(path).read_text(encoding="utf-8")
    if isinstance(model, type) and not isinstance(model, types.GenericAlias) and issubclass(model, BaseModel):
        return model.model_validate_json(text)
    return TypeAdapter(model).validate_json(text)


# Row conversions

def defect_rows(defects: Iterable[Defect]) -> list[DefectRow]:
    return [
        DefectRow(t=d.t, x=d.x, y=d.y, m=d.m, n=d.n_index, species=d.species.value)
        for d in defects
    ]


def phase_rows(gx: np.ndarray, gy: np.ndarray, phi: np.ndarray) -> Iterable[PhaseRow]:
    for x, y, p in zip(gx.ravel(), gy.ravel(), np.asarray(phi).ravel()):
        yield PhaseRow(x=float(x), y=float(y), phi=float(p))


def trajectory_rows(result: TrackResult) -> list[TrajectoryRow]:
    rows = []
    for line in result.lines:
        for d in line.samples:
            rows.append(
                TrajectoryRow(line_id=line.id, t=d.t, x=d.x, y=d.y, species=d.species.value, m=d.m, n=d.n_index)
            )
    return rows


def event_records(result: TrackResult) -> list[EventRecord]:
    return [
        EventRecord(
            id=ev.id,
            t=ev.t,
            x=ev.x,
            y=ev.y,
            incoming=list(ev.incoming),
            outgoing=list(ev.outgoing),
            legal=ev.legal,
            kind=ev.kind,
            lines_in=list(ev.lines_in),
            lines_out=list(ev.lines_out),
        )
        for ev in result.events
    ]


def conservation_rows(result: TrackResult) -> list[ConservationRow]:
    return [ConservationRow(t=t, w=w, chi=chi, n_defects=k) for t, w, chi, k in result.report.steps]


def track_summary(result: TrackResult) -> TrackSummary:
    report = result.report
    final = report.steps[-1][1:3] if report.steps else None
    return TrackSummary(
        lines=len(result.lines),
        events=len(result.events),
        boundary_crossings=report.boundary_crossings,
        illegal_events=report.illegal_events,
        unexplained_changes=report.unexplained_changes,
        violations=report.violations,
        suspects=report.suspects,
        ambiguous_matches=report.ambiguous_matches,
        late_defects=report.late_defects,
        reversals=sum(len(line.reversals) for line in result.lines),
        near_approaches=[
            NearApproachRow(line_a=n.line_a, line_b=n.line_b, t=n.t, distance=n.distance)
            for n in result.near_approaches
        ],
        final_totals=final,
    )


def write_track(out_dir, result: TrackResult) -> dict[str, Path]:
    out = Path(out_dir)
    return {
        "trajectories": write_rows(out / "trajectories.csv", trajectory_rows(result), TrajectoryRow),
        "events": write_json(out / "events.json", event_records(result)),
        "conservation": write_rows(out / "conservation.csv", conservation_rows(result), ConservationRow),
        "summary": write_json(out / "summary.json", track_summary(result)),
    }


def write_phase_grid(path, gx: np.ndarray, gy: np.ndarray, phi: np.ndarray) -> Path:
    return write_rows(path, phase_rows(gx, gy, phi), PhaseRow)


def write_sweep(out_dir, rows: Sequence[SweepRow], fit: Optional[FitSummary]) -> dict[str, Path]:
    out = Path(out_dir)
    files = {"sweep": write_rows(out / "sweep.csv", rows, SweepRow)}
    if fit is not None:
        files["fit"] = write_json(out / "fit.json", fit)
    return files
