from pydantic import BaseModel
from typing import Optional


class DefectRow(BaseModel):
    t: float
    x: float
    y: float
    m: int
    n: int
    species: str


class TrajectoryRow(BaseModel):
    line_id: int
    t: float
    x: float
    y: float
    species: str
    m: int
    n: int


class EventRecord(BaseModel):
    id: int
    t: float
    x: float
    y: float
    incoming: list[str]
    outgoing: list[str]
    legal: bool
    kind: str
    lines_in: list[int] = []
    lines_out: list[int] = []


class ConservationRow(BaseModel):
    t: float
    w: int
    chi: int
    n_defects: int


class PhaseRow(BaseModel):
    x: float
    y: float
    phi: float


class NearApproachRow(BaseModel):
    line_a: int
    line_b: int
    t: float
    distance: float


class TrackSummary(BaseModel):
    lines: int
    events: int
    boundary_crossings: int
    illegal_events: int
    unexplained_changes: int
    violations: int
    suspects: int
    ambiguous_matches: int = 0
    late_defects: int = 0
    reversals: int = 0
    near_approaches: list[NearApproachRow] = []
    final_totals: Optional[tuple[int, int]] = None
