import math

import numpy as np
import pytest

from levyheat.errors import NumericalError, ValidationError
from levyheat.integral import (IntegrandSpec, deterministic_integral, integrate_compensated,
                               integrate_noncompensated, isometry_rhs)
from levyheat.measure import LevyMeasureSpec, PointCloud, SpaceTimeWindow, atomic, sample_prm

ONE = IntegrandSpec(lambda s, y, h: np.ones_like(s))
UNIT = SpaceTimeWindow(1.0, 0.5)


def test_counting_and_marks():
    w = SpaceTimeWindow(1.0, 1.0)
    cl = PointCloud([0.3, 0.7], [0.0, 0.0], [2.0, -1.0], w)
    assert integrate_noncompensated(ONE, cl, 1.0) == 2
    assert integrate_noncompensated(ONE, cl, 0.5) == 1
    assert integrate_noncompensated(IntegrandSpec(lambda s, y, h: h), cl, 1.0) == 1.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_integrand_reports_event():
    w = SpaceTimeWindow(1.0, 1.0)
    cl = PointCloud([0.3, 0.7], [0.0, 0.5], [2.0, -1.0], w)
    f = IntegrandSpec(lambda s, y, h: 1.0 / (s - 0.7))
    with pytest.raises(NumericalError, match="event 1"):
        integrate_noncompensated(f, cl, 1.0)


def test_isometry_rhs_values():
    nu = atomic((1.0, 2.5))
    assert isometry_rhs(ONE, UNIT, nu, 1.0) == pytest.approx(2.5, rel=1e-10)
    assert isometry_rhs(IntegrandSpec(lambda s, y, h: h), UNIT, atomic((2.0, 1.0)), 1.0) == \
        pytest.approx(4.0, rel=1e-10)
    assert isometry_rhs(IntegrandSpec(lambda s, y, h: s), UNIT, atomic((1.0, 1.0)), 1.0) == \
        pytest.approx(1 / 3, rel=1e-8)


def test_density_compensator():
    nu = LevyMeasureSpec(density=lambda h: np.ones_like(h), support=(0, 1))
    f = IntegrandSpec(lambda s, y, h: s * h)
    # int_0^1 s ds * |A| * int_0^1 h dh = 1/2 * 1 * 1/2
    assert deterministic_integral(f, UNIT, nu, 1.0) == pytest.approx(0.25, rel=1e-8)
    assert deterministic_integral(f, UNIT, nu, 0.0) == 0.0


def test_zero_integrand_and_identity():
    nu = atomic((1.0, 2.5))
    cl = sample_prm(UNIT, nu, 1)
    zero = IntegrandSpec(lambda s, y, h: 0.0 * s)
    assert integrate_compensated(zero, cl, 1.0) == 0.0
    f = IntegrandSpec(lambda s, y, h: np.cos(s) * h)
    comp = deterministic_integral(f, UNIT, nu, 1.0)
    assert integrate_compensated(f, cl, 1.0) == integrate_noncompensated(f, cl, 1.0) - comp


def test_linearity_on_shared_cloud():
    cl = sample_prm(UNIT, atomic((1.0, 5.0), (-0.5, 2.0)), 3)
    f = lambda s, y, h: s * h
    g = lambda s, y, h: np.exp(y) + h ** 2
    lhs = integrate_noncompensated(IntegrandSpec(lambda s, y, h: 2 * f(s, y, h) - 3 * g(s, y, h)),
                                   cl, 1.0)
    rhs = 2 * integrate_noncompensated(IntegrandSpec(f), cl, 1.0) - \
        3 * integrate_noncompensated(IntegrandSpec(g), cl, 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-13)


def test_integrability_check():
    nu = atomic((1.0, 1.0))
    assert IntegrandSpec(lambda s, y, h: s, "H1").check(UNIT, nu) == pytest.approx(0.5, rel=1e-8)
    with pytest.raises(ValidationError):
        IntegrandSpec(lambda s, y, h: s, "H3")


@pytest.mark.parametrize("f", [
    lambda s, y, h: np.ones_like(s),
    lambda s, y, h: s * h,
    lambda s, y, h: np.cos(3 * y) + h,
])
def test_zero_mean_and_isometry(f):
    nu = atomic((1.0, 1.5), (-2.0, 0.5))
    spec = IntegrandSpec(f)
    comp = deterministic_integral(spec, UNIT, nu, 1.0)
    rng = np.random.default_rng(7)
    vals = np.array([integrate_compensated(spec, sample_prm(UNIT, nu, rng), 1.0, comp)
                     for _ in range(20_000)])
    var = isometry_rhs(spec, UNIT, nu, 1.0)
    se = math.sqrt(var / len(vals))
    assert abs(vals.mean()) <= 3 * se
    # sample variance s.e. from the fourth moment
    m4 = np.mean((vals - vals.mean()) ** 4)
    assert abs(vals.var(ddof=1) - var) <= 3 * math.sqrt((m4 - var ** 2) / len(vals))


def test_noncompensated_mean_identity():
    nu = LevyMeasureSpec(density=lambda h: np.ones_like(h), support=(0, 2))
    spec = IntegrandSpec(lambda s, y, h: h * (1 + s))
    expected = deterministic_integral(spec, UNIT, nu, 1.0)
    rng = np.random.default_rng(8)
    vals = np.array([integrate_noncompensated(spec, sample_prm(UNIT, nu, rng), 1.0)
                     for _ in range(20_000)])
    assert abs(vals.mean() - expected) <= 3 * vals.std(ddof=1) / math.sqrt(len(vals))
