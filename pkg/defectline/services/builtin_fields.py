"""
Built-in Example Fields
Closed-form phase fields used to exercise defect creation, annihilation and
saddle-extremum collisions.

- bubble:      vortex/anti-vortex pair plus two saddles, alive for |t| < T
- appendix-c:  unit-modulus phase surface eps*x - y^2 - x^3
- appendix-d:  line/ellipse family y - eps + i(x^2 + (y - 1)^2 - 1)
"""

import logging
import math
from typing import Callable, Optional

import numpy as np

from defectline.errors import InvalidArgumentError
from defectline.services.wavefield import PlaneField

logger = logging.getLogger(__name__)


class BubbleField(PlaneField):
    """
    (lambda - X0)(conj(lambda) + X0)(1 - i(x + y)), X0 = sqrt(max(T^2 - t^2, 0)).

    A vortex sits at (X0, 0) and an anti-vortex at (-X0, 0) while |t| < T;
    outside that interval the first factor is strictly positive and the phase
    is the tilted surface -arctan(x + y).
    """

    name = "bubble"

    def __init__(self, T: float):
        if not T > 0:
            raise InvalidArgumentError(f"bubble needs T > 0, got {T}")
        self.T = float(T)

    def __repr__(self) -> str:
        return f"BubbleField(T={self.T})"

    def x0(self, t: float) -> float:
        return math.sqrt(max(self.T * self.T - t * t, 0.0))

    def psi(self, x, y, t: float):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x0 = self.x0(t)
        pair = x * x + y * y - (self.T * self.T - t * t) + 2j * x0 * y
        out = pair * (1 - 1j * (x + y))
        return out if np.ndim(out) else complex(out)

    def jet2_batch(self, x, y, t: float) -> tuple[np.ndarray, ...]:
        x, y = np.ravel(np.asarray(x, dtype=float)), np.ravel(np.asarray(y, dtype=float))
        x0 = self.x0(t)
        p = x * x + y * y - (self.T * self.T - t * t) + 2j * x0 * y
        px, py = (2 * x).astype(np.complex128), 2 * y + 2j * x0
        f = 1 - 1j * (x + y)
        fd = -1j
        return (
            p * f,
            px * f + p * fd,
            py * f + p * fd,
            2 * f + 2 * px * fd,
            (px + py) * fd,
            2 * f + 2 * py * fd,
        )

    def zero_seeds(self, t: float) -> list[complex]:
        x0 = self.x0(t)
        return [complex(x0, 0.0), complex(-x0, 0.0)] if abs(t) < self.T else []

    @property
    def max_zeros(self) -> int:
        return 2


class _EpsilonField(PlaneField):
    """Fields whose control parameter eps is fixed, or follows t when omitted."""

    def __init__(self, epsilon: Optional[float] = None):
        self.epsilon = epsilon

    def eps(self, t: float) -> float:
        return float(t if self.epsilon is None else self.epsilon)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(epsilon={self.epsilon})"


class AppendixCField(_EpsilonField):
    """Psi = exp(i(eps*x - y^2 - x^3)); saddle at (-sqrt(eps/3), 0), maximum at (+sqrt(eps/3), 0)."""

    name = "appendix-c"

    def phase(self, x, y, t: float):
        return self.eps(t) * x - y * y - x ** 3

    def psi(self, x, y, t: float):
        out = np.exp(1j * self.phase(np.asarray(x, dtype=float), np.asarray(y, dtype=float), t))
        return out if np.ndim(out) else complex(out)

    def log_jet(self, x: float, y: float, t: float) -> tuple[complex, ...]:
        return tuple(complex(v[0]) for v in self.log_jet_batch(np.array([x]), np.array([y]), t)[0].T)

    def log_jet_batch(self, x, y, t: float):
        x, y = np.ravel(np.asarray(x, dtype=float)), np.ravel(np.asarray(y, dtype=float))
        out = np.empty((x.size, 5), dtype=np.complex128)
        out[:, 0] = 1j * (self.eps(t) - 3 * x * x)
        out[:, 1] = -2j * y
        out[:, 2] = -6j * x
        out[:, 3] = 0
        out[:, 4] = -2j
        return out, np.ones(x.size)

    def jet2_batch(self, x, y, t: float) -> tuple[np.ndarray, ...]:
        x, y = np.ravel(np.asarray(x, dtype=float)), np.ravel(np.asarray(y, dtype=float))
        p = np.exp(1j * self.phase(x, y, t))
        lx, ly, lxx, lxy, lyy = self.log_jet_batch(x, y, t)[0].T
        return p, p * lx, p * ly, p * (lxx + lx * lx), p * (lxy + lx * ly), p * (lyy + ly * ly)

    def critical_seeds(self, t: float) -> list[complex]:
        e = self.eps(t)
        if e <= 0:
            return []
        r = math.sqrt(e / 3)
        return [complex(-r, 0), complex(r, 0)]

    @property
    def max_zeros(self) -> int:
        return 0


class AppendixDField(_EpsilonField):
    """
    Psi = y - eps + i(x^2 + (y - 1)^2 - 1).

    eps > 0: the line meets the circle at (+-sqrt(2 eps - eps^2), eps).
    eps < 0: no zeros; a phase minimum at (0, eps + sqrt(eps^2 - 2 eps)) and a
    maximum at (0, eps - sqrt(eps^2 - 2 eps)).
    """

    name = "appendix-d"

    def psi(self, x, y, t: float):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = y - self.eps(t) + 1j * (x * x + (y - 1) ** 2 - 1)
        return out if np.ndim(out) else complex(out)

    def jet2_batch(self, x, y, t: float) -> tuple[np.ndarray, ...]:
        x, y = np.ravel(np.asarray(x, dtype=float)), np.ravel(np.asarray(y, dtype=float))
        const = np.full(x.size, 2j)
        return self.psi(x, y, t), 2j * x, 1 + 2j * (y - 1), const, np.zeros(x.size, dtype=np.complex128), const

    def zero_seeds(self, t: float) -> list[complex]:
        e = self.eps(t)
        r2 = 2 * e - e * e
        if r2 <= 0:
            return []
        r = math.sqrt(r2)
        return [complex(-r, e), complex(r, e)]

    def critical_seeds(self, t: float) -> list[complex]:
        e = self.eps(t)
        disc = e * e - 2 * e
        if disc <= 0:
            return []
        r = math.sqrt(disc)
        return [complex(0, e + r), complex(0, e - r)]

    @property
    def max_zeros(self) -> int:
        return 2


def builtin_bubble(T: float) -> BubbleField:
    """Callable (x, y, t) -> Psi for the vacuum bubble."""
    return BubbleField(T)


BUILTINS: dict[str, Callable[..., PlaneField]] = {
    "bubble": lambda T=1.0, epsilon=None: BubbleField(T),
    "appendix-c": lambda T=1.0, epsilon=None: AppendixCField(epsilon),
    "appendix-d": lambda T=1.0, epsilon=None: AppendixDField(epsilon),
}


def make_builtin(name: str, T: float = 1.0, epsilon: Optional[float] = None) -> PlaneField:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown built-in field {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(T=T, epsilon=epsilon)
