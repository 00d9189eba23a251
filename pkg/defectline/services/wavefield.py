"""
Wave Field Engine
Determinantal wave functions Psi(x, y; t) = det(M(t) - Lambda_xi), their phase
and analytic derivatives, plus the common interface shared with the built-in
example fields.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from defectline.errors import InvalidArgumentError
from defectline.services.linalg_core import EvolutionLaw

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FieldSample:
    psi: complex
    phase: float
    grad_num: tuple[float, float]


class PlaneField:
    """
    A complex field on the (x, y) plane that depends on a time parameter t.

    Subclasses provide `psi` (vectorised) and either `jet2` (value plus first
    and second partials at one point) or its vectorised form `jet2_batch`;
    each default is written in terms of the other. Phase derivatives come from the
    logarithmic derivative l = log Psi, so grad(Phi) = Im grad(l).
    The batch methods are what the root finders call.
    """

    name = "field"

    def psi(self, x, y, t: float):
        raise NotImplementedError

    def jet2(self, x: float, y: float, t: float) -> tuple[complex, ...]:
        return tuple(complex(v[0]) for v in self.jet2_batch(np.array([x], dtype=float), np.array([y], dtype=float), t))

    def __call__(self, x, y, t: float):
        return self.psi(x, y, t)

    def jet(self, x: float, y: float, t: float) -> tuple[complex, complex, complex]:
        return self.jet2(x, y, t)[:3]

    def log_jet(self, x: float, y: float, t: float) -> tuple[complex, ...]:
        """(l_x, l_y, l_xx, l_xy, l_yy) of l = log Psi; undefined at zeros."""
        p, px, py, pxx, pxy, pyy = self.jet2(x, y, t)
        lx, ly = px / p, py / p
        return lx, ly, pxx / p - lx * lx, pxy / p - lx * ly, pyy / p - ly * ly

    def scale(self, x, y, t: float):
        """Magnitude against which |Psi| is judged to be zero."""
        return np.ones(np.shape(x))

    def jet2_batch(self, x: np.ndarray, y: np.ndarray, t: float) -> tuple[np.ndarray, ...]:
        """(Psi, Psi_x, Psi_y, Psi_xx, Psi_xy, Psi_yy) as 1-D arrays."""
        x, y = np.ravel(x), np.ravel(y)
        vals = np.array([self.jet2(a, b, t) for a, b in zip(x, y)], dtype=np.complex128).reshape(-1, 6)
        return tuple(vals.T)

    def jet_batch(self, x: np.ndarray, y: np.ndarray, t: float):
        """(Psi, Psi_x, Psi_y, scale) as 1-D arrays."""
        x, y = np.ravel(x), np.ravel(y)
        p, px, py = self.jet2_batch(x, y, t)[:3]
        return p, px, py, self.scale(x, y, t)

    def log_jet_batch(self, x: np.ndarray, y: np.ndarray, t: float):
        """(K, 5) log-jets and the relative modulus |Psi|/scale; NaN rows at zeros."""
        x, y = np.ravel(x), np.ravel(y)
        p, px, py, pxx, pxy, pyy = self.jet2_batch(x, y, t)
        with np.errstate(all="ignore"):
            lx, ly = px / p, py / p
            out = np.stack([lx, ly, pxx / p - lx * lx, pxy / p - lx * ly, pyy / p - ly * ly], axis=1)
        out[~np.all(np.isfinite(out), axis=1)] = np.nan
        return out, np.abs(p) / self.scale(x, y, t)

    def phase_gradient(self, x: float, y: float, t: float) -> np.ndarray:
        lx, ly = self.log_jet(x, y, t)[:2]
        return np.array([lx.imag, ly.imag])

    def phase_hessian(self, x: float, y: float, t: float) -> np.ndarray:
        _, _, lxx, lxy, lyy = self.log_jet(x, y, t)
        return np.array([[lxx.imag, lxy.imag], [lxy.imag, lyy.imag]])

    def zero_seeds(self, t: float) -> list[complex]:
        """Known zero locations, if the field has them in closed form."""
        return []

    def critical_seeds(self, t: float) -> list[complex]:
        return []

    @property
    def max_zeros(self) -> Optional[int]:
        return None


def _leave_one_out(s: np.ndarray) -> np.ndarray:
    # prod_{k != i} s_k along the last axis, without dividing
    ones = np.ones(s.shape[:-1] + (1,))
    pre = np.concatenate([ones, np.cumprod(s[..., :-1], axis=-1)], axis=-1)
    suf = np.concatenate([np.cumprod(s[..., :0:-1], axis=-1)[..., ::-1], ones], axis=-1)
    return pre * suf


class WaveField(PlaneField):
    """Psi_{N, 2xi - N}(x, y; t) = det(M(t) - diag(lambda x xi, conj(lambda) x (N - xi)))."""

    name = "determinant"

    def __init__(self, law: EvolutionLaw, xi: int):
        if not 0 <= xi <= law.n:
            raise InvalidArgumentError(f"xi must lie in [0, {law.n}], got {xi}")
        self.law = law
        self.xi = int(xi)

    @property
    def n(self) -> int:
        return self.law.n

    @property
    def winding_label(self) -> int:
        return 2 * self.xi - self.n

    @property
    def max_zeros(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"WaveField(n={self.n}, xi={self.xi}, s={self.law.s})"

    def _slots(self, lam, t: float) -> np.ndarray:
        lam = np.asarray(lam, dtype=np.complex128)
        m = self.law.evolve(t)
        a = np.broadcast_to(m, lam.shape + m.shape).copy()
        idx = np.arange(self.n)
        a[..., idx[: self.xi], idx[: self.xi]] -= lam[..., None]
        a[..., idx[self.xi :], idx[self.xi :]] -= np.conj(lam)[..., None]
        return a

    def psi(self, x, y, t: float):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.linalg.det(self._slots(x + 1j * y, t))
        return out if out.ndim else complex(out)

    def scale(self, x, y, t: float):
        # Hadamard bound: |det A| <= prod of row norms
        a = self._slots(np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float), t)
        return np.maximum(np.prod(np.linalg.norm(a, axis=-1), axis=-1), np.finfo(float).tiny)

    def jet_batch(self, x: np.ndarray, y: np.ndarray, t: float):
        # Psi_lambda = -sum of the lambda-slot diagonal of adj(A); the adjugate
        # is taken through the SVD so it stays finite where A is singular.
        x, y = np.ravel(np.asarray(x, dtype=float)), np.ravel(np.asarray(y, dtype=float))
        a = self._slots(x + 1j * y, t)
        u, s, vh = np.linalg.svd(a)
        phase = np.linalg.det(u) * np.linalg.det(vh)
        cof = _leave_one_out(s)
        adj_diag = phase[:, None] * np.einsum("kji,kj,kij->ki", vh.conj(), cof, u.conj())
        d_lam = -adj_diag[:, : self.xi].sum(axis=1)
        d_bar = -adj_diag[:, self.xi :].sum(axis=1)
        value = phase * np.prod(s, axis=1)
        scale = np.maximum(np.prod(np.linalg.norm(a, axis=-1), axis=-1), np.finfo(float).tiny)
        return value, d_lam + d_bar, 1j * (d_lam - d_bar), scale

    def jet(self, x: float, y: float, t: float) -> tuple[complex, complex, complex]:
        p, px, py, _ = self.jet_batch(np.array([x]), np.array([y]), t)
        return complex(p[0]), complex(px[0]), complex(py[0])

    def log_jet_batch(self, x: np.ndarray, y: np.ndarray, t: float):
        # Jacobi's formula applied twice with B = A^-1:
        # l_a = -tr(B P_a), l_ab = -tr(B P_a B P_b), P the slot projectors.
        x, y = np.ravel(np.asarray(x, dtype=float)), np.ravel(np.asarray(y, dtype=float))
        a = self._slots(x + 1j * y, t)
        b = _safe_inverse(a)
        k = self.xi
        bb = b * np.swapaxes(b, -1, -2)
        l_lam = -np.trace(b[:, :k, :k], axis1=1, axis2=2)
        l_bar = -np.trace(b[:, k:, k:], axis1=1, axis2=2)
        l_ll = -bb[:, :k, :k].sum(axis=(1, 2))
        l_lb = -bb[:, :k, k:].sum(axis=(1, 2))
        l_bb = -bb[:, k:, k:].sum(axis=(1, 2))
        out = np.stack(
            [
                l_lam + l_bar,
                1j * (l_lam - l_bar),
                l_ll + 2 * l_lb + l_bb,
                1j * (l_ll - l_bb),
                -l_ll + 2 * l_lb - l_bb,
            ],
            axis=1,
        )
        scale = np.maximum(np.prod(np.linalg.norm(a, axis=-1), axis=-1), np.finfo(float).tiny)
        rel = np.abs(np.linalg.det(a)) / scale
        return out, rel

    def log_jet(self, x: float, y: float, t: float) -> tuple[complex, ...]:
        out, _ = self.log_jet_batch(np.array([x]), np.array([y]), t)
        if not np.all(np.isfinite(out[0])):
            raise InvalidArgumentError(f"log-derivative undefined at a zero ({x}, {y})")
        return tuple(complex(v) for v in out[0])

    def jet2(self, x: float, y: float, t: float) -> tuple[complex, ...]:
        p, px, py = self.jet(x, y, t)
        _, _, lxx, lxy, lyy = self.log_jet(x, y, t)
        lx, ly = px / p, py / p
        return p, px, py, p * (lxx + lx * lx), p * (lxy + lx * ly), p * (lyy + ly * ly)

    def eigenvalues(self, t: float) -> np.ndarray:
        return np.linalg.eigvals(self.law.evolve(t))

    def zero_seeds(self, t: float) -> list[complex]:
        if self.xi == self.n:
            return list(self.eigenvalues(t))
        if self.xi == 0:
            return list(np.conj(self.eigenvalues(t)))
        return []

    def critical_seeds(self, t: float) -> list[complex]:
        # xi in {0, N}: Psi is (the conjugate of) an analytic polynomial whose
        # phase is stationary exactly at the roots of its derivative.
        if self.xi not in (0, self.n) or self.n < 2:
            return []
        stationary = np.roots(np.polyder(np.poly(self.law.evolve(t))))
        return list(stationary) if self.xi == self.n else list(np.conj(stationary))


def _safe_inverse(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(a)
    except np.linalg.LinAlgError:
        out = np.full_like(a, np.nan)
        for i in range(a.shape[0]):
            try:
                out[i] = np.linalg.inv(a[i])
            except np.linalg.LinAlgError:
                continue
        return out


def evaluate(field: PlaneField, x: float, y: float, t: float) -> complex:
    return complex(field.psi(x, y, t))


def eval_grad_num(field: PlaneField, x: float, y: float, t: float) -> tuple[float, float]:
    """Im(conj(Psi) grad Psi), which equals |Psi|^2 grad(Phi) and vanishes at zeros."""
    p, px, py = field.jet(x, y, t)
    return float((p.conjugate() * px).imag), float((p.conjugate() * py).imag)


def phase_of(psi):
    """arg in (-pi, pi]."""
    phi = np.angle(psi)
    if np.ndim(phi):
        return np.where(phi <= -math.pi, math.pi, phi)
    return math.pi if phi <= -math.pi else float(phi)


def sample(field: PlaneField, x: float, y: float, t: float) -> FieldSample:
    p = evaluate(field, x, y, t)
    return FieldSample(psi=p, phase=phase_of(p), grad_num=eval_grad_num(field, x, y, t))


def phase_grid(field: PlaneField, xs: np.ndarray, ys: np.ndarray, t: float):
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    return gx, gy, phase_of(field.psi(gx, gy, t))


def coeffs_2x2(field: WaveField, t: float) -> tuple[tuple[float, ...], tuple[float, float, float]]:
    """
    Real and imaginary parts of |lambda|^2 - a conj(lambda) - d lambda + ad - bc.

    quadratic: (x^2, y^2, xy, x, y, const)
    linear:    (y, x, const)
    """
    if not isinstance(field, WaveField) or field.n != 2 or field.xi != 1:
        raise InvalidArgumentError("coeffs_2x2 needs a 2x2 field with xi = 1")
    return coeffs_from_matrix(field.law.evolve(t))


def coeffs_from_matrix(m: np.ndarray):
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    k = a * d - b * c
    quadratic = (1.0, 1.0, 0.0, float(-(a.real + d.real)), float(d.imag - a.imag), float(k.real))
    linear = (float(a.real - d.real), float(-(a.imag + d.imag)), float(k.imag))
    return quadratic, linear


def eval_coeffs(quadratic, linear, x: float, y: float) -> complex:
    qxx, qyy, qxy, qx, qy, qc = quadratic
    ly, lx, lc = linear
    re = qxx * x * x + qyy * y * y + qxy * x * y + qx * x + qy * y + qc
    return complex(re, ly * y + lx * x + lc)
