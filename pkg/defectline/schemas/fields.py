from pydantic import BaseModel
from typing import Optional

from defectline.schemas.defect import DefectRow
from defectline.schemas.run_config import FieldSpec, WindowSpec


class SnapshotRequest(BaseModel):
    wavefield: FieldSpec = FieldSpec()
    t: float = 0.0
    window: Optional[WindowSpec] = None
    seed: int = 0


class SnapshotResponse(BaseModel):
    t: float
    defects: list[DefectRow]
    w: int
    chi: int
    suspects: int
