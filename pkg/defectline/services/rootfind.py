"""
Root Finding Engine
Zeros of Psi and critical points of its phase on a search window, and the
four-component quaternionic determinant system of a 2x2 matrix.

Newton runs on every grid seed at once (numpy batches); ill-conditioned
Jacobians fall back to a damped (Levenberg-Marquardt) step and every step is
halved until the residual stops growing. Seeds that end close to, but not
at, a root are kept as suspects instead of being dropped.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from defectline.config import Settings, get_settings
from defectline.errors import InvalidArgumentError
from defectline.services.linalg_core import as_matrix
from defectline.services.wavefield import PlaneField, WaveField, coeffs_from_matrix

logger = logging.getLogger(__name__)

_RESEED_RADII = (0.01, 0.05)
_RESEED_ANGLES = 6
_BACKTRACK = 6


@dataclass(frozen=True)
class SearchWindow:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    grid_density: int = 32

    def __post_init__(self):
        vals = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgumentError(f"window bounds must be finite, got {vals}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidArgumentError(f"degenerate window {vals}")
        if self.grid_density < 8:
            raise InvalidArgumentError(f"grid_density must be >= 8, got {self.grid_density}")

    @classmethod
    def parse(cls, text: str, grid_density: int = 32) -> "SearchWindow":
        """From "xmin,xmax,ymin,ymax"."""
        try:
            parts = [float(p) for p in text.split(",")]
        except ValueError:
            raise InvalidArgumentError(f"window must be four comma-separated numbers, got {text!r}") from None
        if len(parts) != 4:
            raise InvalidArgumentError(f"window must be four comma-separated numbers, got {text!r}")
        return cls(*parts, grid_density=grid_density)

    @classmethod
    def square(cls, half_width: float, grid_density: int = 32) -> "SearchWindow":
        return cls(-half_width, half_width, -half_width, half_width, grid_density)

    def as_text(self) -> str:
        return f"{self.x_min},{self.x_max},{self.y_min},{self.y_max}"

    @property
    def diameter(self) -> float:
        return math.hypot(self.x_max - self.x_min, self.y_max - self.y_min)

    def contains(self, x, y, margin: float = 0.0):
        return (
            (x >= self.x_min + margin)
            & (x <= self.x_max - margin)
            & (y >= self.y_min + margin)
            & (y <= self.y_max - margin)
        )

    def distance_to_edge(self, x: float, y: float) -> float:
        return min(x - self.x_min, self.x_max - x, y - self.y_min, self.y_max - y)

    def seeds(self, density: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        d = density or self.grid_density
        hx = (self.x_max - self.x_min) / d
        hy = (self.y_max - self.y_min) / d
        xs = self.x_min + hx * (np.arange(d) + 0.5)
        ys = self.y_min + hy * (np.arange(d) + 0.5)
        gx, gy = np.meshgrid(xs, ys)
        return gx.ravel(), gy.ravel()

    def with_density(self, density: int) -> "SearchWindow":
        return SearchWindow(self.x_min, self.x_max, self.y_min, self.y_max, density)


@dataclass(frozen=True)
class PlaneZero:
    x: float
    y: float
    residual: float

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class QuaternionRoot:
    x: float
    y: float
    z: float
    w: float
    residual: float

    def is_planar(self, tol: float) -> bool:
        return abs(self.z) < tol and abs(self.w) < tol

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w])


@dataclass
class RootSearch:
    roots: list[PlaneZero] = field(default_factory=list)
    suspects: list[PlaneZero] = field(default_factory=list)


@dataclass(frozen=True)
class Box4:
    lo: tuple[float, float, float, float]
    hi: tuple[float, float, float, float]
    grid_density: int = 12

    @classmethod
    def cube(cls, half_width: float, center=(0.0, 0.0, 0.0, 0.0), grid_density: int = 12) -> "Box4":
        return cls(
            tuple(c - half_width for c in center),
            tuple(c + half_width for c in center),
            grid_density,
        )

    def seeds(self) -> np.ndarray:
        d = self.grid_density
        axes = [lo + (hi - lo) * (np.arange(d) + 0.5) / d for lo, hi in zip(self.lo, self.hi)]
        return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return np.all((pts >= np.array(self.lo)) & (pts <= np.array(self.hi)), axis=1)


def default_window4(sigma: float, n: int, s: complex, t: float, grid_density: int = 12) -> Box4:
    """[-L, L]^4 with L = 3 sigma sqrt(N) + |s t| + 1."""
    return Box4.cube(3 * sigma * math.sqrt(n) + abs(s * t) + 1, grid_density=grid_density)


def default_window(field: PlaneField, times: Sequence[float], grid_density: int = 32) -> SearchWindow:
    """Square window covering the eigenvalue support of a determinantal field over the given times."""
    if isinstance(field, WaveField):
        reach = max(float(np.max(np.abs(field.eigenvalues(t)))) for t in times)
        return SearchWindow.square(reach + 1.0, grid_density)
    return SearchWindow.square(3.0, grid_density)


# Batched Newton

def _solve_steps(f: np.ndarray, jac: np.ndarray, cond_limit: float) -> np.ndarray:
    """Newton steps J^-1 f, damped where cond(J) exceeds the limit."""
    k, d = f.shape
    steps = np.zeros_like(f)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(jac)
    good = np.isfinite(cond) & (cond < cond_limit)
    if np.any(good):
        steps[good] = np.linalg.solve(jac[good], f[good][..., None])[..., 0]
    bad = ~good
    if np.any(bad):
        jb = jac[bad]
        jt = np.swapaxes(jb, 1, 2)
        normal = jt @ jb
        mu = 1e-6 * np.trace(normal, axis1=1, axis2=2) + 1e-300
        normal = normal + mu[:, None, None] * np.eye(d)
        steps[bad] = np.linalg.solve(normal, (jt @ f[bad][..., None]))[..., 0]
    return steps


def _batched_newton(
    system: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]],
    points: np.ndarray,
    tol: float,
    settings: Settings,
    max_step: float,
    bounds: tuple[np.ndarray, np.ndarray],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Drive every row of `points` towards a root of `system`.

    `system(P)` returns (F, J, residual) for the rows of P. Returns the final
    points, their residuals and a converged mask.
    """
    pts = np.array(points, dtype=float)
    k = pts.shape[0]
    res = np.full(k, np.inf)
    converged = np.zeros(k, dtype=bool)
    alive = np.ones(k, dtype=bool)
    lo, hi = bounds
    if k == 0:
        return pts, res, converged

    f, jac, r = system(pts)
    res[:] = r
    for _ in range(settings.NEWTON_MAX_ITER):
        converged = res < tol
        active = alive & ~converged & np.isfinite(res)
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        steps = _solve_steps(f[idx], jac[idx], settings.JACOBIAN_COND_LIMIT)
        norms = np.linalg.norm(steps, axis=1)
        over = norms > max_step
        steps[over] *= (max_step / norms[over])[:, None]
        steps[~np.isfinite(steps)] = 0.0

        scale = np.ones(idx.size)
        trial = pts[idx] - steps
        tf, tj, tr = system(trial)
        for _ in range(_BACKTRACK):
            worse = ~(tr <= res[idx]) & (scale > 2.0 ** -_BACKTRACK)
            if not np.any(worse):
                break
            scale[worse] *= 0.5
            w = np.flatnonzero(worse)
            trial[w] = pts[idx[w]] - scale[w, None] * steps[w]
            wf, wj, wr = system(trial[w])
            tf[w], tj[w], tr[w] = wf, wj, wr

        pts[idx], f[idx], jac[idx], res[idx] = trial, tf, tj, tr
        outside = np.any((pts[idx] < lo) | (pts[idx] > hi), axis=1)
        alive[idx[outside]] = False
    converged = res < tol
    return pts, res, converged


def _dedup(pts: np.ndarray, res: np.ndarray, tol: float) -> np.ndarray:
    """
    Indices of one representative (lowest residual) per cluster within tol (max-norm).

    Points are bucketed on a tol/4 lattice before the pairwise neighbour search;
    only the best point of each bucket takes part in it.
    """
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=int)
    by_res = np.argsort(res, kind="stable")
    keys = np.floor(pts[by_res] / (0.25 * tol)).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    cand = by_res[first]

    order = cand[np.lexsort(pts[cand].T[::-1])]
    cpts, cres = pts[order], res[order]
    pairs = cKDTree(cpts).query_pairs(tol, p=np.inf, output_type="ndarray")
    n = cpts.shape[0]
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    _, labels = connected_components(graph, directed=False)
    keep = []
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        keep.append(members[np.argmin(cres[members])])
    return order[np.array(sorted(keep), dtype=int)]


def _sorted_zeros(rows: Iterable[PlaneZero]) -> list[PlaneZero]:
    return sorted(rows, key=lambda p: (round(p.x, 9), round(p.y, 9)))


# Nodal zeros

def _nodal_system(field: PlaneField, t: float):
    def system(p: np.ndarray):
        v, vx, vy, scale = field.jet_batch(p[:, 0], p[:, 1], t)
        f = np.stack([v.real, v.imag], axis=1)
        jac = np.stack(
            [np.stack([vx.real, vy.real], axis=1), np.stack([vx.imag, vy.imag], axis=1)],
            axis=1,
        )
        with np.errstate(all="ignore"):
            res = np.abs(v) / scale
        return f, jac, np.where(np.isfinite(res), res, np.inf)

    return system


def _seed_array(window: SearchWindow, extra: Iterable[complex]) -> np.ndarray:
    gx, gy = window.seeds()
    extra = np.array([complex(z) for z in extra], dtype=np.complex128)
    extra = extra[np.isfinite(extra)]
    return np.concatenate([np.stack([gx, gy], axis=1), np.stack([extra.real, extra.imag], axis=1)])


def _bounds(window: SearchWindow, pad: float = 0.5):
    wx = (window.x_max - window.x_min) * pad
    wy = (window.y_max - window.y_min) * pad
    return (
        np.array([window.x_min - wx, window.y_min - wy]),
        np.array([window.x_max + wx, window.y_max + wy]),
    )


def _newton_zeros(field: PlaneField, t: float, window: SearchWindow, seeds: np.ndarray, settings: Settings):
    max_step = 0.25 * max(window.x_max - window.x_min, window.y_max - window.y_min)
    pts, res, ok = _batched_newton(_nodal_system(field, t), seeds, settings.ZERO_TOL, settings, max_step, _bounds(window))
    return pts, res, ok


def search_plane_zeros(
    field: PlaneField,
    t: float,
    window: SearchWindow,
    warm: Iterable[complex] = (),
    settings: Optional[Settings] = None,
) -> RootSearch:
    """Zeros and suspects of Psi inside the window."""
    settings = settings or get_settings()
    if isinstance(field, WaveField) and field.n == 2 and field.xi == 1:
        return RootSearch(roots=_line_circle_zeros(field, t, window, settings))

    seeds = _seed_array(window, list(field.zero_seeds(t)) + list(warm))
    pts, res, ok = _newton_zeros(field, t, window, seeds, settings)

    # Re-seed on small rings around each root so a close partner is not
    # swallowed by the basin of the first.
    found = pts[ok]
    if found.shape[0]:
        angles = 2 * np.pi * np.arange(_RESEED_ANGLES) / _RESEED_ANGLES
        ring = np.concatenate([np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1) for r in _RESEED_RADII])
        rings = (found[:, None, :] + ring[None, :, :]).reshape(-1, 2)
        p2, r2, ok2 = _newton_zeros(field, t, window, rings, settings)
        pts, res, ok = np.concatenate([pts, p2]), np.concatenate([res, r2]), np.concatenate([ok, ok2])

    inside = window.contains(pts[:, 0], pts[:, 1])
    roots = _collect(pts, res, ok & inside, settings.DEDUP_TOL)
    near = ~ok & inside & (res < settings.SUSPECT_TOL)
    suspects = [z for z in _collect(pts, res, near, settings.DEDUP_TOL) if not _close_to_any(z, roots, settings.DEDUP_TOL * 10)]

    if field.max_zeros is not None and len(roots) > field.max_zeros:
        logger.warning("found %d zeros for a field with at most %d at t=%g", len(roots), field.max_zeros, t)
    if suspects:
        logger.info("%d unconverged suspect zero(s) at t=%g", len(suspects), t)
    return RootSearch(roots=roots, suspects=suspects)


def find_plane_zeros(
    field: PlaneField,
    t: float,
    window: SearchWindow,
    warm: Iterable[complex] = (),
    settings: Optional[Settings] = None,
) -> list[PlaneZero]:
    return search_plane_zeros(field, t, window, warm, settings).roots


def _collect(pts: np.ndarray, res: np.ndarray, mask: np.ndarray, tol: float) -> list[PlaneZero]:
    sel_pts, sel_res = pts[mask], res[mask]
    keep = _dedup(sel_pts, sel_res, tol)
    return _sorted_zeros(PlaneZero(float(sel_pts[i, 0]), float(sel_pts[i, 1]), float(sel_res[i])) for i in keep)


def _close_to_any(z: PlaneZero, others: Sequence[PlaneZero], tol: float) -> bool:
    return any(max(abs(z.x - o.x), abs(z.y - o.y)) < tol for o in others)


# Closed-form 2x2, xi = 1

def line_circle_geometry(quadratic, linear):
    """
    Circle centre, squared radius, line normal and offset of the 2x2 system.

    Returns (cx, cy, r2, nx, ny, c) with the line nx*x + ny*y + c = 0.
    Works element-wise on arrays.
    """
    _, _, _, qx, qy, qc = quadratic
    ly, lx, lc = linear
    cx = -np.asarray(qx) / 2
    cy = -np.asarray(qy) / 2
    r2 = cx * cx + cy * cy - np.asarray(qc)
    return cx, cy, r2, np.asarray(lx), np.asarray(ly), np.asarray(lc)


def line_circle_discriminant(quadratic, linear):
    """r^2 - dist(centre, line)^2; plane zeros exist iff this is >= 0."""
    cx, cy, r2, nx, ny, c = line_circle_geometry(quadratic, linear)
    norm2 = nx * nx + ny * ny
    with np.errstate(all="ignore"):
        dist2 = np.where(norm2 > 0, (nx * cx + ny * cy + c) ** 2 / norm2, np.where(c == 0, 0.0, np.inf))
    return r2 - dist2


def _line_circle_zeros(field: WaveField, t: float, window: SearchWindow, settings: Settings) -> list[PlaneZero]:
    quadratic, linear = coeffs_from_matrix(field.law.evolve(t))
    cx, cy, r2, nx, ny, c = (float(v) for v in line_circle_geometry(quadratic, linear))
    norm2 = nx * nx + ny * ny
    if norm2 < settings.ZERO_TOL ** 2:
        if abs(c) < settings.ZERO_TOL and r2 >= 0:
            logger.warning("nodal set is the whole circle at t=%g (domain wall); not reported as point defects", t)
        return []
    offset = (nx * cx + ny * cy + c) / norm2
    h2 = r2 - offset * offset * norm2
    if h2 < 0:
        return []
    px, py = cx - offset * nx, cy - offset * ny
    h = math.sqrt(h2)
    ux, uy = -ny / math.sqrt(norm2), nx / math.sqrt(norm2)
    cand = [(px + h * ux, py + h * uy), (px - h * ux, py - h * uy)]
    if h < settings.DEDUP_TOL:
        cand = [(px, py)]
    out = []
    for x, y in cand:
        if not window.contains(x, y):
            continue
        res = abs(field.psi(x, y, t)) / float(field.scale(x, y, t))
        out.append(PlaneZero(x, y, float(res)))
    return _sorted_zeros(out)


# Phase critical points

def _critical_system(field: PlaneField, t: float, zero_tol: float):
    def system(p: np.ndarray):
        lj, rel = field.log_jet_batch(p[:, 0], p[:, 1], t)
        g = lj[:, :2].imag
        h = np.stack(
            [np.stack([lj[:, 2].imag, lj[:, 3].imag], axis=1), np.stack([lj[:, 3].imag, lj[:, 4].imag], axis=1)],
            axis=1,
        )
        with np.errstate(all="ignore"):
            hn = np.abs(h).max(axis=(1, 2))
            res = np.abs(g).max(axis=1) / (1.0 + hn)
        bad = ~np.isfinite(res) | (rel < zero_tol)
        res[bad] = np.inf
        g[~np.isfinite(g)] = 0.0
        h[~np.isfinite(h)] = 0.0
        return g, h, res

    return system


def search_phase_critical_points(
    field: PlaneField,
    t: float,
    window: SearchWindow,
    warm: Iterable[complex] = (),
    settings: Optional[Settings] = None,
) -> RootSearch:
    settings = settings or get_settings()
    seeds = _seed_array(window, list(field.critical_seeds(t)) + list(warm))
    max_step = 0.25 * max(window.x_max - window.x_min, window.y_max - window.y_min)
    system = _critical_system(field, t, settings.ZERO_TOL)
    pts, res, ok = _batched_newton(system, seeds, settings.ZERO_TOL, settings, max_step, _bounds(window))
    inside = window.contains(pts[:, 0], pts[:, 1])
    roots = _collect(pts, res, ok & inside, settings.DEDUP_TOL)
    near = ~ok & inside & (res < settings.SUSPECT_TOL)
    suspects = [z for z in _collect(pts, res, near, settings.DEDUP_TOL) if not _close_to_any(z, roots, settings.DEDUP_TOL * 10)]
    return RootSearch(roots=roots, suspects=suspects)


def find_phase_critical_points(
    field: PlaneField,
    t: float,
    window: SearchWindow,
    warm: Iterable[complex] = (),
    settings: Optional[Settings] = None,
) -> list[PlaneZero]:
    """Stationary points of Phi (grad Phi = 0 away from the nodal set)."""
    return search_phase_critical_points(field, t, window, warm, settings).roots


# Quaternionic 2x2 system

def quaternion_components(m, pts: np.ndarray) -> np.ndarray:
    """
    Real, i, j and k parts of (a - q)(d - q_hat) - bc for q = x + iy + jz + kw,
    evaluated on rows of pts (K, 4).
    """
    m = as_matrix(m, 2)
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    k = a * d - b * c
    x, y, z, w = (np.asarray(pts)[:, i] for i in range(4))
    ar, ai, dr, di = a.real, a.imag, d.real, d.imag
    qr = k.real + x * x + y * y - z * z + w * w - ar * x - ai * y - dr * x + di * y
    qi = k.imag - 2 * w * z - ai * x + ar * y - di * x - dr * y
    qj = 2 * x * z - ar * z - ai * w - dr * z - di * w
    qk = 2 * y * z - ai * z + ar * w + di * z - dr * w
    return np.stack([qr, qi, qj, qk], axis=1)


def quaternion_jacobian(m, pts: np.ndarray) -> np.ndarray:
    m = as_matrix(m, 2)
    a, d = m[0, 0], m[1, 1]
    ar, ai, dr, di = a.real, a.imag, d.real, d.imag
    x, y, z, w = (np.asarray(pts)[:, i] for i in range(4))
    zeros = np.zeros_like(x)
    ones = np.ones_like(x)
    rows = [
        [2 * x - ar - dr, 2 * y - ai + di, -2 * z, 2 * w],
        [(-ai - di) * ones, (ar - dr) * ones, -2 * w, -2 * z],
        [2 * z, zeros, 2 * x - ar - dr, (-ai - di) * ones],
        [zeros, 2 * z, 2 * y - ai + di, (ar - dr) * ones],
    ]
    return np.stack([np.stack(r, axis=1) for r in rows], axis=1)


def find_quaternion_roots(
    m,
    window4: Optional[Box4] = None,
    settings: Optional[Settings] = None,
) -> list[QuaternionRoot]:
    """All distinct roots in R^4 of the quaternionic characteristic system of a 2x2 matrix."""
    settings = settings or get_settings()
    m = as_matrix(m, 2)
    if window4 is None:
        sigma = float(np.linalg.norm(m)) / math.sqrt(8)
        window4 = Box4.cube(3 * sigma * math.sqrt(2) + 1, grid_density=settings.GRID_DENSITY_4D)
    lo, hi = np.array(window4.lo, dtype=float), np.array(window4.hi, dtype=float)
    if not np.all(lo < hi):
        raise InvalidArgumentError(f"degenerate 4D window {window4}")

    def system(p: np.ndarray):
        f = quaternion_components(m, p)
        return f, quaternion_jacobian(m, p), np.abs(f).max(axis=1)

    pad = 0.5 * (hi - lo)
    pts, res, ok = _batched_newton(
        system,
        window4.seeds(),
        settings.ZERO_TOL,
        settings,
        0.25 * float(np.max(hi - lo)),
        (lo - pad, hi + pad),
    )
    mask = ok & window4.contains(pts)
    sel, sel_res = pts[mask], res[mask]
    # Symmetric branches approach z = w = 0 from both sides; snap them.
    planar = (np.abs(sel[:, 2]) < settings.DEDUP_TOL) & (np.abs(sel[:, 3]) < settings.DEDUP_TOL)
    sel[planar, 2:] = 0.0
    keep = _dedup(sel, sel_res, settings.DEDUP_TOL)
    roots = [QuaternionRoot(*(float(v) for v in sel[i]), residual=float(sel_res[i])) for i in keep]
    return sorted(roots, key=lambda q: (round(q.x, 9), round(q.y, 9), round(q.z, 9), round(q.w, 9)))
