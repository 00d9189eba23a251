from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from defectline.schemas.matrix import MatrixPayload


class Mode(str, Enum):
    SIMULATE = "simulate"
    TRACK = "track"
    LIFETIMES = "lifetimes"
    ALGEBRA = "algebra"


class FieldSpec(BaseModel):
    n: int = Field(ge=1, default=4)
    xi: Optional[int] = None  # None -> n
    sigma: Optional[float] = Field(gt=0, default=None)  # None -> 1/sqrt(2n)
    matrix: Optional[MatrixPayload] = None
    s_re: float = 1.0
    s_im: float = 0.0
    # built-in fields: bubble, appendix-c, appendix-d
    builtin: Optional[str] = None
    T: float = Field(gt=0, default=1.0)
    epsilon: Optional[float] = None  # None -> follows t

    @model_validator(mode="after")
    def _check(self):
        if self.matrix is not None and self.matrix.n != self.n:
            self.n = self.matrix.n
        if self.xi is not None and not 0 <= self.xi <= self.n:
            raise ValueError(f"xi must lie in [0, {self.n}], got {self.xi}")
        return self

    @property
    def s(self) -> complex:
        return complex(self.s_re, self.s_im)

    @property
    def slots(self) -> int:
        return self.n if self.xi is None else self.xi


class WindowSpec(BaseModel):
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    grid_density: int = Field(ge=8, default=32)


class TimeGrid(BaseModel):
    t0: float = 0.0
    t1: float = 1.0
    dt: float = Field(gt=0, default=0.01)
    # simulate: snapshot times; empty -> [t0]
    snapshots: list[float] = []
    resolution: int = Field(ge=2, default=200)  # phase-grid points per axis


class SweepSpec(BaseModel):
    sigmas: list[float] = [2.0 * k for k in range(1, 11)]
    trials: Optional[int] = Field(ge=1, default=None)  # None -> desk or paper scale
    paper_scale: bool = False
    dt: float = Field(gt=0, default=0.01)
    workers: int = Field(ge=1, default=1)
    scaling_check: bool = False


class AlgebraSpec(BaseModel):
    multiplet: Optional[int] = Field(ge=1, default=None)
    checks: list[str] = []


class RunConfig(BaseModel):
    mode: Mode = Mode.SIMULATE
    wavefield: FieldSpec = FieldSpec()
    window: Optional[WindowSpec] = None
    time: TimeGrid = TimeGrid()
    sweep: SweepSpec = SweepSpec()
    algebra: AlgebraSpec = AlgebraSpec()
    seed: int = 0
    out: str = "out"
    strict: bool = False

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.model_validate_json(text)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))
