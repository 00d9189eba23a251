from pydantic import BaseModel, Field


class MultipletRow(BaseModel):
    w: int
    chi: int
    p: int
    members: list[str]
    species_count: int


class MultipletTable(BaseModel):
    p: int
    count: int
    rows: list[MultipletRow]


class ReactionRequest(BaseModel):
    reaction: str = Field(min_length=1, max_length=500)


class ReactionResponse(BaseModel):
    reaction: str
    incoming: list[str]
    outgoing: list[str]
    before: tuple[int, int]
    after: tuple[int, int]
    legal: bool
