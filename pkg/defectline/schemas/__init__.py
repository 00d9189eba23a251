from defectline.schemas.algebra import MultipletRow, MultipletTable, ReactionRequest, ReactionResponse
from defectline.schemas.defect import (
    ConservationRow,
    DefectRow,
    EventRecord,
    NearApproachRow,
    PhaseRow,
    TrackSummary,
    TrajectoryRow,
)
from defectline.schemas.ensemble import FitSummary, SweepConfig, SweepResult, SweepRow
from defectline.schemas.fields import SnapshotRequest, SnapshotResponse
from defectline.schemas.matrix import MatrixPayload
from defectline.schemas.run_config import AlgebraSpec, FieldSpec, Mode, RunConfig, SweepSpec, TimeGrid, WindowSpec
