import math

import numpy as np
import pytest

from defectline.errors import InvalidArgumentError
from defectline.services.builtin_fields import (
    AppendixCField,
    AppendixDField,
    BubbleField,
    builtin_bubble,
    make_builtin,
)


def _fd_jet2(field, x, y, t, h=1e-4):
    f = lambda a, b: complex(field.psi(a, b, t))  # noqa: E731
    px = (f(x + h, y) - f(x - h, y)) / (2 * h)
    py = (f(x, y + h) - f(x, y - h)) / (2 * h)
    pxx = (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / h**2
    pyy = (f(x, y + h) - 2 * f(x, y) + f(x, y - h)) / h**2
    pxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h)
    return f(x, y), px, py, pxx, pxy, pyy


@pytest.mark.parametrize(
    "field",
    [BubbleField(1.0), AppendixCField(0.4), AppendixDField(0.3), AppendixDField(None)],
    ids=["bubble", "appendix-c", "appendix-d", "appendix-d-follows-t"],
)
def test_jet2_matches_finite_differences(field):
    x, y, t = 0.37, -0.21, 0.45
    np.testing.assert_allclose(field.jet2(x, y, t), _fd_jet2(field, x, y, t), rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize(
    "field",
    [BubbleField(1.0), AppendixCField(0.4), AppendixDField(None)],
    ids=["bubble", "appendix-c", "appendix-d"],
)
def test_batch_jets_are_vectorised_closed_forms(field, rng):
    xs, ys, t = rng.uniform(-2, 2, 50), rng.uniform(-2, 2, 50), 0.3
    batch = np.array(field.jet2_batch(xs, ys, t))
    assert batch.shape == (6, 50)
    for k in (0, 17, 49):
        np.testing.assert_allclose(batch[:, k], _fd_jet2(field, xs[k], ys[k], t), rtol=1e-5, atol=1e-5)
    np.testing.assert_allclose(batch[0], field.psi(xs, ys, t), rtol=1e-13)
    log_jets, rel = field.log_jet_batch(xs, ys, t)
    assert log_jets.shape == (50, 5) and rel.shape == (50,)
    np.testing.assert_allclose(log_jets[:, 0], batch[1] / batch[0], rtol=1e-10)

class TestBubble:
    def test_pair_sits_on_the_x_axis(self):
        bubble = builtin_bubble(1.0)
        assert abs(bubble.psi(1.0, 0.0, 0.0)) < 1e-14
        assert abs(bubble.psi(-1.0, 0.0, 0.0)) < 1e-14
        assert bubble.zero_seeds(0.0) == [1 + 0j, -1 + 0j]

    def test_pair_closes_at_plus_minus_T(self):
        bubble = BubbleField(2.0)
        assert bubble.x0(2.0) == 0.0
        assert bubble.x0(1.2) == pytest.approx(1.6)
        assert bubble.zero_seeds(2.5) == []

    def test_flat_phase_outside_lifetime(self):
        bubble = BubbleField(1.0)
        xs = np.linspace(-2, 2, 9)
        phase = np.angle(bubble.psi(xs, -xs + 0.5, 1.5))
        np.testing.assert_allclose(phase, -math.atan(0.5), atol=1e-12)

    def test_needs_positive_T(self):
        with pytest.raises(InvalidArgumentError):
            BubbleField(0.0)


class TestAppendixC:
    def test_critical_points(self):
        field = AppendixCField(0.3)
        r = math.sqrt(0.1)
        assert field.critical_seeds(0.0) == pytest.approx([complex(-r, 0), complex(r, 0)])
        for z in field.critical_seeds(0.0):
            np.testing.assert_allclose(field.phase_gradient(z.real, z.imag, 0.0), [0, 0], atol=1e-12)

    def test_no_critical_points_for_negative_control(self):
        assert AppendixCField().critical_seeds(-0.2) == []

    def test_unit_modulus(self):
        field = AppendixCField(0.5)
        assert abs(field.psi(0.3, -1.2, 0.0)) == pytest.approx(1.0)
        assert field.max_zeros == 0


class TestAppendixD:
    @pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
    def test_zeros(self, eps):
        field = AppendixDField(eps)
        r = math.sqrt(2 * eps - eps * eps)
        assert field.zero_seeds(0.0) == [complex(-r, eps), complex(r, eps)]
        for z in field.zero_seeds(0.0):
            assert abs(field.psi(z.real, z.imag, 0.0)) < 1e-12

    @pytest.mark.parametrize("eps", [-0.1, -0.5])
    def test_critical_points_without_zeros(self, eps):
        field = AppendixDField(eps)
        assert field.zero_seeds(0.0) == []
        r = math.sqrt(eps * eps - 2 * eps)
        seeds = field.critical_seeds(0.0)
        assert seeds == [complex(0, eps + r), complex(0, eps - r)]
        for z in seeds:
            np.testing.assert_allclose(field.phase_gradient(z.real, z.imag, 0.0), [0, 0], atol=1e-12)

    def test_control_follows_t(self):
        field = AppendixDField()
        assert field.eps(0.25) == 0.25
        assert field.zero_seeds(0.5) == AppendixDField(0.5).zero_seeds(123.0)


def test_registry():
    assert isinstance(make_builtin("bubble", T=2.0), BubbleField)
    assert make_builtin("appendix-d", epsilon=0.2).eps(5.0) == 0.2
    with pytest.raises(InvalidArgumentError):
        make_builtin("appendix-z")
