from pydantic import BaseModel, Field, field_validator
from typing import Optional


class SweepConfig(BaseModel):
    sigmas: list[float]
    trials_per_sigma: int = Field(ge=1, default=1000)
    s_re: float = 1.0
    s_im: float = 0.0
    # None -> [-(4 sigma + 4), 4 sigma + 4] per sigma
    t_range: Optional[tuple[float, float]] = None
    # half-range in units of sigma; overrides the default when set
    t_half_per_sigma: Optional[float] = Field(gt=0, default=None)
    dt: float = Field(gt=0, default=0.01)  # in units of sigma
    base_seed: int = 0
    paired: bool = False  # same unit normals at every sigma
    # every k-th trial is checked for the off-plane root pair; 0 turns it off
    verify_every: int = Field(ge=0, default=10)
    workers: int = Field(ge=1, default=1)

    @field_validator("sigmas")
    @classmethod
    def _sigmas_sorted_positive(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("sigmas must be nonempty")
        if any(not s > 0 for s in v):
            raise ValueError("sigmas must be positive")
        if any(b < a for a, b in zip(v, v[1:])):
            raise ValueError("sigmas must be sorted")
        return v

    @field_validator("t_range")
    @classmethod
    def _ordered_range(cls, v):
        if v is not None and not v[0] < v[1]:
            raise ValueError("t_range must satisfy t0 < t1")
        return v

    @property
    def s(self) -> complex:
        return complex(self.s_re, self.s_im)

    def t_range_for(self, sigma: float) -> tuple[float, float]:
        if self.t_range is not None:
            return self.t_range
        if self.t_half_per_sigma is not None:
            return -self.t_half_per_sigma * sigma, self.t_half_per_sigma * sigma
        t_max = 4 * sigma + 4
        return -t_max, t_max


class SweepRow(BaseModel):
    sigma: float
    mean_t_max: Optional[float] = None
    n_transients: int = 0
    stderr: float = 0.0
    n_clipped: int = 0
    n_trials: int = 0
    n_verified: int = 0
    n_failed_checks: int = 0


class FitSummary(BaseModel):
    intercept: float
    slope: float
    r2: float
    n_points: int
    uncertainty: Optional[float] = None


class SweepResult(BaseModel):
    per_sigma: list[SweepRow]
    fit: Optional[FitSummary] = None
    config: Optional[SweepConfig] = None
