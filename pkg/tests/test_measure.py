import math

import numpy as np
import pytest
from scipy import stats

from levyheat.errors import ValidationError
from levyheat.measure import (LevyMeasureSpec, PointCloud, SpaceTimeWindow, atomic, compensator,
                              count_events, read_cloud, rectangle_compensator, sample_prm,
                              write_cloud)


def test_atomic_masses():
    nu = atomic((1.0, 2.0))
    assert nu.total_mass == 2.0 and nu.levy_integral == 2.0
    assert atomic((0.5, 4.0)).levy_integral == pytest.approx(1.0, rel=1e-15)


def test_uniform_density():
    nu = LevyMeasureSpec(density=lambda h: np.ones_like(h), support=(-1, 1))
    assert nu.total_mass == pytest.approx(2.0, rel=1e-10)
    assert nu.levy_integral == pytest.approx(2 / 3, rel=1e-10)


def test_truncated_power_density():
    nu = LevyMeasureSpec(density=lambda h: np.abs(h) ** -1.5, support=(-1, 1), eps=0.01)
    # 2 * int_0.01^1 h^-1.5 dh = 4 (0.01^-0.5 - 1)
    assert nu.total_mass == pytest.approx(4 * (10 - 1), rel=1e-9)
    assert nu.levy_integral == pytest.approx(2 * (1 - 0.01 ** 1.5) / 1.5, rel=1e-9)


def test_measure_rejections():
    with pytest.raises(ValidationError):
        LevyMeasureSpec(density=lambda h: np.abs(h) ** -1.5, support=(-1, 1))  # infinite mass
    with pytest.raises(ValidationError):
        atomic((1.0, 0.0))
    with pytest.raises(ValidationError):
        atomic((1.0, -1.0))
    with pytest.raises(ValidationError):
        LevyMeasureSpec()
    with pytest.raises(ValidationError):
        LevyMeasureSpec(density=lambda h: h * 0 + 1, support=(1, -1))


def test_mass_in_mark_sets():
    nu = atomic((1.0, 3.0), (2.0, 1.0))
    assert nu.mass_in((0.5, 1.5)) == 3.0
    assert nu.mass_in([(0.5, 1.5), (1.5, 2.5)]) == 4.0
    dens = LevyMeasureSpec(density=lambda h: np.ones_like(h), support=(-1, 1))
    assert dens.mass_in((0.0, 0.5)) == pytest.approx(0.5, rel=1e-12)


def test_compensator_examples():
    assert compensator(1.0, 1.0, 2.5) == 2.5
    assert compensator(0.0, 1.0, 2.5) == 0.0
    w = SpaceTimeWindow(2.0, 1.0)
    assert rectangle_compensator(2.0, (-1, 1), (0.5, 1.5), w, atomic((1.0, 3.0))) == 12.0


def test_window_validation():
    with pytest.raises(ValidationError):
        SpaceTimeWindow(0.0, 1.0)
    with pytest.raises(ValidationError):
        SpaceTimeWindow(1.0, 1.0, 0)
    assert SpaceTimeWindow(2.0, 1.5, 2).volume == 2.0 * 9.0


def test_sampler_determinism_and_window():
    w = SpaceTimeWindow(1.0, 2.0)
    nu = LevyMeasureSpec(density=lambda h: np.ones_like(h), support=(-1, 1))
    a, b = sample_prm(w, nu, 5), sample_prm(w, nu, 5)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.marks, b.marks)
    assert np.all(np.diff(a.times) >= 0)
    assert np.all(np.abs(a.y1) <= 2.0) and np.all(np.abs(a.marks) <= 1.0)
    assert not a.times.flags.writeable


def test_unit_volume_mean_count():
    w = SpaceTimeWindow(1.0, 0.5)
    nu = atomic((1.0, 2.5))
    rng = np.random.default_rng(0)
    n = np.array([len(sample_prm(w, nu, rng)) for _ in range(10_000)])
    assert abs(n.mean() - 2.5) <= 3 * math.sqrt(2.5 / len(n))


def test_count_mean_and_variance():
    w = SpaceTimeWindow(2.0, 1.0)
    nu = atomic((1.0, 3.0))
    rng = np.random.default_rng(1)
    n = np.array([len(sample_prm(w, nu, rng)) for _ in range(10_000)])
    assert abs(n.mean() - 12) <= 3 * math.sqrt(12 / len(n))
    # var of the sample variance of a Poisson(m) is about (m + 2 m^2)/N
    assert abs(n.var(ddof=1) - 12) <= 3 * math.sqrt((12 + 2 * 144) / len(n))


def test_tiny_mass_gives_empty_clouds():
    w = SpaceTimeWindow(1.0, 0.5)
    nu = atomic((1.0, 1e-9))
    rng = np.random.default_rng(2)
    assert all(len(sample_prm(w, nu, rng)) == 0 for _ in range(100))


def test_counts_on_rectangles():
    w = SpaceTimeWindow(1.0, 1.0)
    nu = LevyMeasureSpec(density=lambda h: np.ones_like(h), support=(0, 2))
    rng = np.random.default_rng(3)
    reps = 10_000
    c1 = np.empty(reps)
    c2 = np.empty(reps)
    for r in range(reps):
        cl = sample_prm(w, nu, rng)
        c1[r] = count_events(cl, 0.5, (-1, 0), (0, 1))
        c2[r] = count_events(cl, 0.5, (0, 1), (0, 1))
    expected = rectangle_compensator(0.5, (-1, 0), (0, 1), w, nu)
    assert expected == pytest.approx(0.5, rel=1e-12)
    assert abs(c1.mean() - expected) <= 3 * math.sqrt(expected / reps)
    assert abs(np.corrcoef(c1, c2)[0, 1]) <= 3 / math.sqrt(reps)
    # the unit-intensity rectangle count is Poisson(1)
    big = np.array([count_events(sample_prm(w, nu, rng), 1.0, (-0.5, 0.5), (0, 1))
                    for _ in range(5000)])
    obs = np.bincount(big, minlength=7)[:7].astype(float)
    obs[-1] += np.sum(big > 6)
    p = stats.poisson.pmf(np.arange(7), 1.0)
    p[-1] += stats.poisson.sf(6, 1.0)
    chi2 = np.sum((obs - p * len(big)) ** 2 / (p * len(big)))
    assert stats.chi2.sf(chi2, 6) > 0.01


def test_count_additivity_and_edges():
    w = SpaceTimeWindow(1.0, 1.0)
    cl = PointCloud([0.2, 0.5, 0.9], [-0.5, 0.0, 0.5], [1.0, 2.0, 1.0], w)
    assert count_events(cl, 1.0) == 3
    assert count_events(cl, 0.5) == 2  # s <= t
    a = count_events(cl, 1.0, (-1, 0))
    b = count_events(cl, 1.0, (0, 1))
    assert a + b == count_events(cl, 1.0, [(-1, 0), (0, 1)]) == 3
    empty = PointCloud([], np.empty((0, 1)), [], w)
    assert count_events(empty, 1.0) == 0


def test_cloud_sorts_with_stable_ties():
    w = SpaceTimeWindow(1.0, 1.0)
    cl = PointCloud([0.5, 0.2, 0.5], [0.1, 0.2, 0.3], [1, 2, 3], w)
    assert list(cl.times) == [0.2, 0.5, 0.5]
    assert list(cl.marks) == [2, 1, 3]
    with pytest.raises(ValidationError):
        PointCloud([1.5], [0.0], [1.0], w)


def test_multidimensional_boxes():
    w = SpaceTimeWindow(1.0, 1.0, 2)
    cl = sample_prm(w, atomic((1.0, 5.0)), 4)
    assert cl.positions.shape == (len(cl), 2)
    inside = count_events(cl, 1.0, ([-1, -1], [0, 1])) + count_events(cl, 1.0, ([0, -1], [1, 1]))
    assert inside == len(cl)


def test_csv_round_trip(tmp_path):
    w = SpaceTimeWindow(1.0, 3.0)
    nu = LevyMeasureSpec(density=lambda h: np.ones_like(h), support=(-1, 1))
    cl = sample_prm(w, nu, 11)
    path = tmp_path / "cloud.csv"
    write_cloud(cl, path)
    text = path.read_bytes()
    assert text.startswith(b"s,y1,h\n") and b"\r" not in text
    back = read_cloud(path, w, nu)
    assert np.array_equal(back.times, cl.times)
    assert np.array_equal(back.positions, cl.positions)
    assert np.array_equal(back.marks, cl.marks)
