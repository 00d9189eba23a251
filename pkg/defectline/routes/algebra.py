from fastapi import APIRouter, HTTPException

from defectline.schemas.algebra import MultipletRow, MultipletTable, ReactionRequest, ReactionResponse
from defectline.services.algebra import check_reaction, enumerate_multiplet

router = APIRouter(prefix="/algebra", tags=["Algebra"])

# C(p + 3, 3) rows; keep responses small
MAX_MULTIPLET = 12


@router.get("/multiplets/{p}", response_model=MultipletTable)
async def get_multiplet(p: int):
    if p > MAX_MULTIPLET:
        raise HTTPException(status_code=400, detail=f"multiplet size is limited to {MAX_MULTIPLET}")
    rows = [
        MultipletRow(w=c.w, chi=c.chi, p=c.p, members=list(c.members), species_count=c.species_count)
        for c in enumerate_multiplet(p)
    ]
    return MultipletTable(p=p, count=len(rows), rows=rows)


@router.post("/check", response_model=ReactionResponse)
async def check(data: ReactionRequest):
    result = check_reaction(data.reaction)
    return ReactionResponse(
        reaction=data.reaction,
        incoming=[leg.effective for leg in result.incoming],
        outgoing=[leg.effective for leg in result.outgoing],
        before=result.before,
        after=result.after,
        legal=result.legal,
    )
