from pydantic import BaseModel, Field, model_validator

import numpy as np


class MatrixPayload(BaseModel):
    """Square complex matrix as row-major real and imaginary parts."""

    n: int = Field(ge=1)
    re: list[float]
    im: list[float]

    @model_validator(mode="after")
    def _check_size(self):
        if len(self.re) != self.n * self.n or len(self.im) != self.n * self.n:
            raise ValueError(f"expected {self.n * self.n} entries in re and im")
        return self

    def to_array(self) -> np.ndarray:
        return (np.array(self.re) + 1j * np.array(self.im)).reshape(self.n, self.n)

    @classmethod
    def from_array(cls, m) -> "MatrixPayload":
        m = np.asarray(m, dtype=complex)
        return cls(n=m.shape[0], re=m.real.ravel().tolist(), im=m.imag.ravel().tolist())
