from fastapi import APIRouter, HTTPException

from defectline.config import get_settings
from defectline.schemas.fields import SnapshotRequest, SnapshotResponse
from defectline.services.export import defect_rows
from defectline.services.factory import build_field, build_window
from defectline.services.topology import totals
from defectline.services.tracker import snapshot

router = APIRouter(prefix="/fields", tags=["Fields"])

MAX_N = 16


@router.post("/snapshot", response_model=SnapshotResponse)
def take_snapshot(data: SnapshotRequest):
    # plain def: FastAPI runs it in the threadpool
    if data.wavefield.builtin is None and data.wavefield.n > MAX_N:
        raise HTTPException(status_code=400, detail=f"matrix size is limited to {MAX_N}")
    settings = get_settings()
    field = build_field(data.wavefield, data.seed)
    window = build_window(data.window, field, [data.t], settings)
    snap = snapshot(field, data.t, window, settings=settings)
    w, chi = totals(snap.defects)
    return SnapshotResponse(t=data.t, defects=defect_rows(snap.defects), w=w, chi=chi, suspects=len(snap.suspects))
