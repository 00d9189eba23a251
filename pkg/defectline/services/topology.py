"""
Topology Engine
Phase winding and phase-gradient index on small contours, classification of
nodal and critical points into defect species, and conserved totals.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from defectline.config import Settings, get_settings
from defectline.errors import ContourUnsafeError, InvalidArgumentError, UnstableDefectError
from defectline.services.rootfind import PlaneZero
from defectline.services.wavefield import PlaneField

logger = logging.getLogger(__name__)

# a per-sample phase jump above this is treated as an unresolved contour
_MAX_JUMP = 0.5 * math.pi


class Species(str, Enum):
    VORTEX = "Vortex"
    ANTI_VORTEX = "AntiVortex"
    MAXIMUM = "Maximum"
    MINIMUM = "Minimum"
    SADDLE = "Saddle"

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]

    @property
    def charges(self) -> tuple[int, int]:
        return _CHARGES[self]

    @property
    def is_nodal(self) -> bool:
        return self in (Species.VORTEX, Species.ANTI_VORTEX)


_SYMBOLS = {
    Species.VORTEX: "v",
    Species.ANTI_VORTEX: "v*",
    Species.MAXIMUM: "e",
    Species.MINIMUM: "e",
    Species.SADDLE: "s",
}

_CHARGES = {
    Species.VORTEX: (1, 1),
    Species.ANTI_VORTEX: (-1, 1),
    Species.MAXIMUM: (0, 1),
    Species.MINIMUM: (0, 1),
    Species.SADDLE: (0, -1),
}


@dataclass(frozen=True)
class Defect:
    x: float
    y: float
    t: float
    m: int
    n_index: int
    species: Species

    @classmethod
    def of(cls, species: Species, x: float, y: float, t: float) -> "Defect":
        m, n = species.charges
        return cls(x=float(x), y=float(y), t=float(t), m=m, n_index=n, species=species)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


def _wrap(d: np.ndarray) -> np.ndarray:
    return (d + np.pi) % (2 * np.pi) - np.pi


def _circle(center, radius: float, samples: int):
    theta = 2 * np.pi * np.arange(samples) / samples
    return center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)


def _winding_of_angles(angles: np.ndarray) -> tuple[int, float]:
    steps = _wrap(np.diff(np.append(angles, angles[0])))
    total = steps.sum() / (2 * np.pi)
    return int(round(total)), float(np.max(np.abs(steps)))


def _banded_winding(angle_fn, center, radius: float, samples: int, band: float, what: str) -> int:
    if not radius > 0:
        raise InvalidArgumentError(f"contour radius must be positive, got {radius}")
    if samples < 64:
        raise InvalidArgumentError(f"need at least 64 contour samples, got {samples}")
    results = []
    for r in (radius * (1 - band), radius, radius * (1 + band)):
        xs, ys = _circle(center, r, samples)
        angles = angle_fn(xs, ys)
        if not np.all(np.isfinite(angles)):
            raise ContourUnsafeError(f"{what} undefined on contour r={r:.3g} around {tuple(center)}")
        k, jump = _winding_of_angles(angles)
        if jump >= _MAX_JUMP:
            raise ContourUnsafeError(f"{what} jumps {jump:.3g} rad between samples on r={r:.3g} around {tuple(center)}")
        results.append(k)
    if len(set(results)) != 1:
        raise ContourUnsafeError(f"{what} changes across the band around r={radius:.3g} at {tuple(center)}: {results}")
    return results[0]


def winding_number(
    field: PlaneField,
    center,
    radius: float,
    t: float,
    samples: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> int:
    """Net phase winding of Psi around the circle, in units of 2 pi."""
    settings = settings or get_settings()
    samples = samples or settings.CONTOUR_SAMPLES

    def angles(xs, ys):
        p = np.asarray(field.psi(xs, ys, t))
        rel = np.abs(p) / field.scale(xs, ys, t)
        a = np.angle(p)
        a[rel < settings.ZERO_TOL] = np.nan
        return a

    return _banded_winding(angles, center, radius, samples, settings.CONTOUR_BAND, "phase")


def grad_num_batch(field: PlaneField, xs: np.ndarray, ys: np.ndarray, t: float):
    p, px, py, scale = field.jet_batch(xs, ys, t)
    pc = np.conj(p)
    return (pc * px).imag, (pc * py).imag, np.abs(p) / scale


def index_number(
    field: PlaneField,
    center,
    radius: float,
    t: float,
    samples: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> int:
    """Winding of the direction of Im(conj(Psi) grad Psi) around the circle."""
    settings = settings or get_settings()
    samples = samples or settings.CONTOUR_SAMPLES

    def angles(xs, ys):
        gx, gy, rel = grad_num_batch(field, xs, ys, t)
        a = np.arctan2(gy, gx)
        a[(rel < settings.ZERO_TOL) | (np.hypot(gx, gy) == 0)] = np.nan
        return a

    return _banded_winding(angles, center, radius, samples, settings.CONTOUR_BAND, "phase gradient")


def nodal_jacobian(field: PlaneField, x: float, y: float, t: float) -> float:
    """det d(Re Psi, Im Psi)/d(x, y); positive at vortices."""
    _, px, py = field.jet(x, y, t)
    return float(px.real * py.imag - px.imag * py.real)


def phase_laplacian(field: PlaneField, x: float, y: float, t: float, h: float) -> float:
    """5-point Laplacian of Phi on wrapped differences."""
    xs = np.array([x, x + h, x - h, x, x])
    ys = np.array([y, y, y, y + h, y - h])
    phi = np.angle(np.asarray(field.psi(xs, ys, t)))
    return float(_wrap(phi[1:] - phi[0]).sum() / (h * h))


def contour_radius(point, neighbours: Iterable, settings: Optional[Settings] = None) -> float:
    """Half the distance to the nearest other defect, capped."""
    settings = settings or get_settings()
    px, py = point
    best = math.inf
    for q in neighbours:
        d = math.hypot(q[0] - px, q[1] - py)
        if d > settings.DEDUP_TOL:
            best = min(best, d)
    return min(0.5 * best, settings.CONTOUR_RADIUS_CAP)


def classify(
    field: PlaneField,
    point: PlaneZero,
    t: float,
    neighbours: Sequence = (),
    radius: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> Defect:
    """
    Species and (m, n) of a converged nodal zero or phase critical point.

    Nodal zeros are told apart by |Psi| relative to the field scale; their sign
    comes from the Jacobian and is cross-checked by the phase winding.
    Critical points use the gradient index, then the phase Laplacian to split
    maxima from minima.
    """
    settings = settings or get_settings()
    x, y = point.x, point.y
    r = radius if radius is not None else contour_radius((x, y), neighbours, settings)
    rel = abs(complex(field.psi(x, y, t))) / float(field.scale(x, y, t))

    if rel < settings.ZERO_TOL:
        jac = nodal_jacobian(field, x, y, t)
        if abs(jac) < settings.DEGENERATE_JACOBIAN:
            raise UnstableDefectError(f"degenerate nodal point at ({x:.6g}, {y:.6g}, t={t:.6g}): J={jac:.3g}")
        species = Species.VORTEX if jac > 0 else Species.ANTI_VORTEX
        try:
            w = winding_number(field, (x, y), r, t, settings=settings)
        except ContourUnsafeError as exc:
            logger.debug("winding cross-check skipped: %s", exc)
        else:
            if w != species.charges[0]:
                logger.warning("Jacobian sign and winding %d disagree at (%.6g, %.6g, t=%.6g)", w, x, y, t)
        return Defect.of(species, x, y, t)

    try:
        n_index = index_number(field, (x, y), r, t, settings=settings)
    except ContourUnsafeError as exc:
        det = float(np.linalg.det(field.phase_hessian(x, y, t)))
        logger.info("index contour unsafe (%s); falling back to Hessian determinant %.3g", exc, det)
        if abs(det) < settings.DEGENERATE_JACOBIAN:
            raise UnstableDefectError(f"degenerate critical point at ({x:.6g}, {y:.6g}, t={t:.6g})") from exc
        n_index = 1 if det > 0 else -1

    if n_index == -1:
        return Defect.of(Species.SADDLE, x, y, t)
    if n_index != 1:
        raise UnstableDefectError(f"critical point with index {n_index} at ({x:.6g}, {y:.6g}, t={t:.6g})")

    lap = phase_laplacian(field, x, y, t, r / 8)
    if abs(lap) < settings.DEGENERATE_JACOBIAN:
        lap = float(np.trace(field.phase_hessian(x, y, t)))
    return Defect.of(Species.MAXIMUM if lap < 0 else Species.MINIMUM, x, y, t)


def classify_all(
    field: PlaneField,
    zeros: Sequence[PlaneZero],
    criticals: Sequence[PlaneZero],
    t: float,
    settings: Optional[Settings] = None,
) -> list[Defect]:
    settings = settings or get_settings()
    everything = [(p.x, p.y) for p in list(zeros) + list(criticals)]
    return [classify(field, p, t, neighbours=everything, settings=settings) for p in list(zeros) + list(criticals)]


def totals(defects: Iterable[Defect]) -> tuple[int, int]:
    """(w, chi) = (sum of m, sum of n)."""
    w = chi = 0
    for d in defects:
        w += d.m
        chi += d.n_index
    return w, chi
