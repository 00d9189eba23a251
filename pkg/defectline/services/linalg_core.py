"""
Linear Algebra Core
Ginibre sampling, the deformation law M(t) = M0 + t*S, matrix reconstruction
by conjugation, the 2x2 coefficient-update cycle and quaternion arithmetic.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from defectline.config import Settings, get_settings
from defectline.errors import (
    IllConditionedError,
    InvalidArgumentError,
    StepTooLargeError,
)

logger = logging.getLogger(__name__)

_SEED_MASK = (1 << 64) - 1


def as_matrix(m, n: Optional[int] = None) -> np.ndarray:
    """Coerce to a finite square complex128 array, optionally of size n."""
    arr = np.array(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise InvalidArgumentError(f"expected a square matrix, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise InvalidArgumentError(f"expected a {n}x{n} matrix, got {arr.shape[0]}x{arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("matrix has non-finite entries")
    return arr


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 seeded through SeedSequence; negative seeds wrap to 64 bits."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & _SEED_MASK)))


def sample_ginibre(n: int, sigma: float, seed: int) -> np.ndarray:
    """
    n x n complex Gaussian matrix.

    Real and imaginary parts are iid Normal(0, sigma^2). The generator draws
    unit normals (real block first, then imaginary) and scales them, so the
    same seed at two sigmas gives proportional matrices.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if not sigma > 0 or not math.isfinite(sigma):
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    rng = make_rng(seed)
    re = rng.standard_normal((n, n))
    im = rng.standard_normal((n, n))
    return sigma * (re + 1j * im)


def ginibre_standard(n: int, seed: int) -> np.ndarray:
    return sample_ginibre(n, 1.0 / math.sqrt(2 * n), seed)


def deformation_matrix(n: int, s: complex) -> np.ndarray:
    """diag(s,..,s,-s,..,-s) for even n; diag(s, 0, .., 0, -s) for odd n."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    diag = np.zeros(n, dtype=np.complex128)
    if n % 2 == 0:
        diag[: n // 2] = s
        diag[n // 2 :] = -s
    elif n == 1:
        diag[0] = s
    else:
        diag[0] = s
        diag[-1] = -s
    return np.diag(diag)


@dataclass(frozen=True, eq=False)
class EvolutionLaw:
    m0: np.ndarray
    s: complex = 1.0
    deformation: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m0 = as_matrix(self.m0)
        m0.setflags(write=False)
        s = complex(self.s)
        if not (math.isfinite(s.real) and math.isfinite(s.imag)):
            raise InvalidArgumentError("deformation parameter s must be finite")
        deformation = deformation_matrix(m0.shape[0], s)
        deformation.setflags(write=False)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "deformation", deformation)

    @property
    def n(self) -> int:
        return self.m0.shape[0]

    def evolve(self, t: float) -> np.ndarray:
        return self.m0 + t * self.deformation

    def rescaled(self, factor: float) -> "EvolutionLaw":
        return EvolutionLaw(self.m0 * factor, self.s)


def evolve(law: EvolutionLaw, t: float) -> np.ndarray:
    if not math.isfinite(t):
        raise InvalidArgumentError(f"t must be finite, got {t}")
    return law.evolve(t)


def reconstruct_matrix(
    zeros: Sequence[complex], conj, settings: Optional[Settings] = None
) -> np.ndarray:
    """Q diag(zeros) Q^-1, refusing conjugators whose condition number exceeds the cap."""
    settings = settings or get_settings()
    z = np.asarray(zeros, dtype=np.complex128).ravel()
    q = as_matrix(conj)
    if q.shape[0] != z.size:
        raise InvalidArgumentError(f"{z.size} zeros but a {q.shape[0]}x{q.shape[0]} conjugator")
    cond = np.linalg.cond(q)
    if not np.isfinite(cond) or cond > settings.CONDITION_CAP:
        raise IllConditionedError(f"conjugator condition number {cond:.3g} exceeds {settings.CONDITION_CAP:.3g}")
    # X Q = Q D  <=>  Q^T X^T = (Q D)^T
    return np.linalg.solve(q.T, (q * z).T).T


def charpoly_coefficients(m) -> np.ndarray:
    """Monic coefficients of det(lambda I - M), highest power first."""
    return np.poly(as_matrix(m))


def translation_step_coefficients(m0, t: float) -> tuple[complex, complex]:
    """
    First-order (k1, k2) after applying 1 - i t (d/dx + d/dy) to the
    characteristic polynomial of a 2x2 matrix.

    The operator shifts every eigenvalue by (1 - i) t, so
    k1 = a + d - 2(1 - i)t and k2 = ad - bc - (1 - i)t(a + d).
    """
    m = as_matrix(m0, 2)
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    tau = (1 - 1j) * t
    return complex(a + d - 2 * tau), complex(a * d - b * c - tau * (a + d))


def translation_step_matrix(m0, t: float) -> np.ndarray:
    m = as_matrix(m0)
    return m - (1 - 1j) * t * np.eye(m.shape[0])


def _diagonal_from_coefficients(k1: complex, k2: complex, b1: complex, c1: complex, a0: complex, d0: complex):
    disc = np.sqrt(complex(k1 * k1 - 4 * (k2 + b1 * c1)))
    r1 = (k1 + disc) / 2
    r2 = (k1 - disc) / 2
    if abs(r1 - a0) ** 2 + abs(r2 - d0) ** 2 <= abs(r2 - a0) ** 2 + abs(r1 - d0) ** 2:
        a1 = r1
    else:
        a1 = r2
    return a1, k1 - a1


def evolve_2x2_cycle(
    m0,
    k1: complex,
    k2: complex,
    delta_t: float,
    settings: Optional[Settings] = None,
) -> np.ndarray:
    """
    Find M1 with trace k1 and determinant k2 as close as possible to m0.

    The off-diagonal entries move by (beta, gamma), the diagonal follows from
    the two coefficient equations, and (beta, gamma) is chosen by least
    squares on the Frobenius distance starting from zero.
    """
    settings = settings or get_settings()
    m = as_matrix(m0, 2)
    k1, k2 = complex(k1), complex(k2)
    a0, b0, c0, d0 = m[0, 0], m[0, 1], m[1, 0], m[1, 1]

    def build(p: np.ndarray) -> np.ndarray:
        b1 = b0 + complex(p[0], p[1])
        c1 = c0 + complex(p[2], p[3])
        a1, d1 = _diagonal_from_coefficients(k1, k2, b1, c1, a0, d0)
        return np.array([[a1, b1], [c1, d1]], dtype=np.complex128)

    def residual(p: np.ndarray) -> np.ndarray:
        diff = (build(p) - m).ravel()
        return np.concatenate([diff.real, diff.imag])

    fit = least_squares(residual, np.zeros(4), method="lm", xtol=1e-15, ftol=1e-15)
    m1 = build(fit.x)
    start = build(np.zeros(4))
    if np.linalg.norm(start - m) <= np.linalg.norm(m1 - m):
        m1 = start

    distance = float(np.linalg.norm(m1 - m))
    limit = settings.STEP_FACTOR * abs(delta_t)
    if distance > max(limit, settings.ZERO_TOL):
        raise StepTooLargeError(
            f"closest matrix is {distance:.3g} away from m0, allowed {limit:.3g} for delta_t={delta_t}"
        )
    logger.debug("evolve_2x2_cycle moved %.3g (delta_t=%g)", distance, delta_t)
    return m1


@dataclass(frozen=True)
class Quaternion:
    """q0 + q1 i + q2 j + q3 k."""

    q0: float = 0.0
    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0

    @classmethod
    def from_complex(cls, z: complex) -> "Quaternion":
        z = complex(z)
        return cls(z.real, z.imag, 0.0, 0.0)

    @classmethod
    def from_matrix(cls, m) -> "Quaternion":
        m = np.asarray(m, dtype=np.complex128)
        alpha, beta = m[0, 0], m[0, 1]
        return cls(alpha.real, alpha.imag, beta.real, beta.imag)

    def __iter__(self):
        return iter((self.q0, self.q1, self.q2, self.q3))

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(*(p + q for p, q in zip(self, other)))

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(*(p - q for p, q in zip(self, other)))

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.q0, -self.q1, -self.q2, -self.q3)

    def __mul__(self, other):
        if not isinstance(other, Quaternion):
            return Quaternion(*(p * other for p in self))
        w0, x0, y0, z0 = self
        w1, x1, y1, z1 = other
        return Quaternion(
            w0 * w1 - x0 * x1 - y0 * y1 - z0 * z1,
            w0 * x1 + x0 * w1 + y0 * z1 - z0 * y1,
            w0 * y1 - x0 * z1 + y0 * w1 + z0 * x1,
            w0 * z1 + x0 * y1 - y0 * x1 + z0 * w1,
        )

    def __rmul__(self, other) -> "Quaternion":
        return Quaternion(*(p * other for p in self))

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.q0, -self.q1, -self.q2, -self.q3)

    def hat(self) -> "Quaternion":
        """Modified conjugate x - iy + jz - kw (flips the i and k parts only)."""
        return Quaternion(self.q0, -self.q1, self.q2, -self.q3)

    def norm(self) -> float:
        return math.sqrt(sum(p * p for p in self))

    def to_matrix(self) -> np.ndarray:
        alpha = complex(self.q0, self.q1)
        beta = complex(self.q2, self.q3)
        return np.array([[alpha, beta], [-beta.conjugate(), alpha.conjugate()]], dtype=np.complex128)

    def to_array(self) -> np.ndarray:
        return np.array([self.q0, self.q1, self.q2, self.q3])


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    return a * b


def adjugate(a) -> np.ndarray:
    """Classical adjoint; cofactors for n <= 3, an SVD product otherwise (finite for singular a)."""
    a = as_matrix(a)
    n = a.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=np.complex128)
    if n <= 3:
        cof = np.empty_like(a)
        for i in range(n):
            for j in range(n):
                minor = np.delete(np.delete(a, i, axis=0), j, axis=1)
                det = minor[0, 0] if minor.shape[0] == 1 else minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0]
                cof[i, j] = (-1) ** (i + j) * det
        return cof.T
    u, s, vh = np.linalg.svd(a)
    phase = np.linalg.det(u) * np.linalg.det(vh)
    others = np.array([np.prod(np.delete(s, i)) for i in range(n)])
    return phase * (vh.conj().T * others) @ u.conj().T
