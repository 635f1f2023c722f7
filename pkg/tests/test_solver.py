import math

import numpy as np
import pytest

from levyheat.bounds import c_dab
from levyheat.coefficients import (AbsJ, Constant, GaussianBump, JumpCoefficientSpec, LinearG,
                                   TanhG, ZeroG, deterministic_part)
from levyheat.errors import ConvergenceError, DivergenceError, ExistenceGateError, ValidationError
from levyheat.kernel import KernelHandle, LevySymbolSpec
from levyheat.measure import PointCloud, SpaceTimeWindow, atomic, sample_prm
from levyheat.scenario import Scenario
from levyheat.seeding import replica_rng
from levyheat.solver import (SolverConfig, apply_A_alpha, field_eval, solution_norm,
                             solve_compensated, solve_noncompensated)

W = SpaceTimeWindow(1.0, 5.0)
NU = atomic((1.0, 1.0))
SIG = JumpCoefficientSpec(AbsJ(), LinearG())


def K(alpha):
    return KernelHandle(LevySymbolSpec(alpha))


def cfg(lam=0.1, **kw):
    kw.setdefault("u0", GaussianBump())
    return SolverConfig(lam=lam, beta=2.0, window=W, **kw)


def cloud(times, ys, hs):
    return PointCloud(times, ys, hs, W, NU)


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0])
def test_one_event_closed_form(alpha):
    k = K(alpha)
    c = cfg(0.7)
    s1, y1, h1 = 0.3, 0.4, 1.5
    sol = solve_noncompensated(cloud([s1], [y1], [h1]), k, SIG, c)
    det1 = deterministic_part(k, c.u0, s1, y1)
    assert sol.u_left[0] == det1
    for t, x in ((0.31, 0.4), (0.8, -1.0), (1.0, 3.0)):
        ref = deterministic_part(k, c.u0, t, x) + 0.7 * float(k.pdf(t - s1, x - y1)) * h1 * det1
        assert abs(field_eval(sol, t, x) - ref) <= 1e-12


def test_two_event_unroll_and_left_limit():
    k = K(1.5)
    c = cfg(0.5)
    ev = cloud([0.2, 0.6], [0.0, 0.5], [1.0, -2.0])
    sol = solve_noncompensated(ev, k, SIG, c)
    d = lambda t, x: deterministic_part(k, c.u0, t, x)
    u1 = d(0.2, 0.0)
    u2 = d(0.6, 0.5) + 0.5 * float(k.pdf(0.4, 0.5)) * 1.0 * u1
    assert sol.u_left[1] == pytest.approx(u2, abs=1e-12)
    t, x = 0.9, -0.3
    # J(h) = |h|, so the negative mark still enters with weight 2
    ref = d(t, x) + 0.5 * (float(k.pdf(0.7, x)) * u1 + 2.0 * float(k.pdf(0.3, x - 0.5)) * u2)
    assert field_eval(sol, t, x) == pytest.approx(ref, abs=1e-12)
    # an event at exactly t is excluded; before the first event the field is deterministic
    assert field_eval(sol, 0.6, 0.5) == pytest.approx(u2, abs=1e-15)
    assert field_eval(sol, 0.1, 0.3) == d(0.1, 0.3)


def test_empty_cloud_and_zero_lambda():
    k = K(2.0)
    c = cfg()
    sol = solve_noncompensated(cloud([], np.empty((0, 1)), []), k, SIG, c)
    assert field_eval(sol, 0.5, 1.0) == deterministic_part(k, c.u0, 0.5, 1.0)
    ev = sample_prm(W, NU, 1)
    sol0 = solve_noncompensated(ev, k, SIG, cfg(0.0))
    assert np.array_equal(sol0.u_left, deterministic_part(k, c.u0, ev.times, ev.y1))


def test_evaluation_outside_window_rejected():
    sol = solve_noncompensated(sample_prm(W, NU, 2), K(2.0), SIG, cfg())
    with pytest.raises(ValidationError):
        field_eval(sol, 1.5, 0.0)


def test_mild_equation_identity_at_events_and_queries():
    k = K(1.5)
    c = cfg(0.3)
    ev = sample_prm(W, NU, 3)
    sol = solve_noncompensated(ev, k, SIG, c)
    A = apply_A_alpha(sol, ev, k, SIG, c)
    lhs = field_eval(sol, ev.times, ev.y1)
    rhs = deterministic_part(k, c.u0, ev.times, ev.y1) + A(ev.times, ev.y1)
    assert np.max(np.abs(lhs - sol.u_left)) <= 1e-10
    assert np.max(np.abs(lhs - rhs)) <= 1e-10
    t = np.linspace(0, 1, 7)
    assert np.max(np.abs(field_eval(sol, t, 0.2) - deterministic_part(k, c.u0, t, 0.2)
                         - A(t, np.full(7, 0.2)))) <= 1e-10


def test_A_alpha_of_zero():
    ev = sample_prm(W, NU, 4)
    A = apply_A_alpha(lambda t, x: np.zeros(np.shape(t)), ev, K(2.0), SIG, cfg())
    assert np.all(A(np.linspace(0, 1, 5), np.zeros(5)) == 0)


def test_A_alpha_contraction_on_constant_fields():
    # u = a, v = 0: ||A u - A v||_{1,beta} <= C_dab lam K Lip ||u - v||_{1,beta}
    k = K(1.5)
    c = cfg(0.2)
    a = 2.0
    ts = np.linspace(0, 1, 11)
    xs = np.linspace(-5, 5, 11)
    T, X = np.meshgrid(ts, xs, indexing="ij")
    rng = np.random.default_rng(5)
    diff = np.array([apply_A_alpha(lambda t, x: np.full(np.shape(t), a), ev, k, SIG, c)(T, X)
                     for ev in (sample_prm(W, NU, rng) for _ in range(400))])
    lhs = solution_norm(diff, ts, 1, c.beta, ensemble=True)
    C = Scenario(alpha=1.5, noise="noncompensated").envelope()
    rhs = c_dab(1, 1.5, c.beta, C) * c.lam * SIG.K1(NU) * SIG.lip * a
    assert lhs <= rhs


def test_noncompensated_monotone_in_lambda():
    ev = cloud([0.1, 0.3, 0.5], [0.0, 0.2, -0.1], [1.0, 0.5, 2.0])
    t, x = np.meshgrid(np.linspace(0, 1, 11), np.linspace(-2, 2, 9), indexing="ij")
    prev = None
    for lam in (0.0, 0.1, 0.5, 1.0):
        u = solve_noncompensated(ev, K(1.5), SIG, cfg(lam)).on_lattice(t[:, 0], x[0])
        if prev is not None:
            assert np.all(u >= prev - 1e-15)
        prev = u


def test_compensated_lambda_zero_and_zero_sigma():
    k = K(2.0)
    ev = sample_prm(W, NU, 6)
    f = solve_compensated(ev, k, SIG, cfg(0.0))
    assert f.iterations == 1 and f.residual == 0.0
    assert np.array_equal(f.values, f.lattice.det)
    g0 = solve_compensated(ev, k, JumpCoefficientSpec(AbsJ(), ZeroG()), cfg(0.4))
    assert g0.iterations == 1
    assert g0(0.55, 0.37) == pytest.approx(deterministic_part(k, GaussianBump(), 0.55, 0.37),
                                           abs=1e-15)


def test_compensated_contraction_ratios():
    # C_dab(1, 2, 2, C=1) = 1.5, so lam = 1/3 gives contraction factor 0.5
    lam = 0.5 / c_dab(1, 2.0, 2.0, 1.0)
    for seed in range(3):
        ev = sample_prm(W, NU, seed)
        f = solve_compensated(ev, K(2.0), SIG, cfg(lam))
        assert f.residual <= 1e-10 and f.gated
        r = f.ratios[np.asarray(f.history[:-1]) > 1e-13]
        assert np.all(r <= 0.6)


def test_compensated_event_values_satisfy_mild_formula():
    ev = sample_prm(W, NU, 7)
    f = solve_compensated(ev, K(1.5), JumpCoefficientSpec(AbsJ(), TanhG()), cfg(0.3))
    assert np.max(np.abs(f._mild(ev.times, ev.y1) - f.event_values)) <= 1e-12
    T, X = np.meshgrid(f.times[::10], f.xs[::10], indexing="ij")
    assert np.max(np.abs(f._mild(T, X) - f.values[::10, ::10])) <= 1e-10


def test_compensated_refinement_consistency():
    s = Scenario(alpha=1.5, lam=0.3, g="tanh", nu_atoms="1:1,-0.5:1")
    T, X = np.meshgrid(np.linspace(0, 1, 26), np.linspace(-5, 5, 51), indexing="ij")
    for seed in range(2):
        ev = s.sample(replica_rng(seed, 0))
        u = [s.with_(dt=0.04 / f, dx=0.2 / f).solve(ev)(T, X) for f in (1, 2, 4)]
        coarse = np.max(np.abs(u[0] - u[1]))
        fine = np.max(np.abs(u[1] - u[2]))
        assert fine <= 2 * coarse


def test_existence_gate_and_override():
    ev = sample_prm(W, NU, 8)
    with pytest.raises(ExistenceGateError, match="Upsilon"):
        solve_compensated(ev, K(1.0), SIG, cfg())
    f = solve_compensated(ev, K(1.0), SIG, cfg(override_gate=True))
    assert not f.gated and f.label == "ungated"


def test_divergence_and_iteration_limit():
    ev = cloud([0.1, 0.2, 0.3], [0.0, 0.01, 0.02], [1.0, 1.0, 1.0])
    strong = cfg(60.0, u0=Constant(1.0))
    with pytest.raises(DivergenceError):
        solve_compensated(ev, K(2.0), SIG, strong)
    with pytest.raises(ConvergenceError) as info:
        solve_compensated(ev, K(2.0), SIG, cfg(0.3, max_iter=2))
    assert info.value.iterations == 2 and info.value.residual > 0


def test_leakage_diagnostic():
    lat = solve_compensated(sample_prm(W, NU, 9), K(2.0), SIG, cfg()).lattice
    # boundary nodes lose about half the kernel mass once t > 0
    assert lat.leakage() == pytest.approx(0.5, abs=1e-6)


def test_solution_norm_examples():
    t = np.linspace(0, 1, 11)
    x = np.linspace(-1, 1, 5)
    assert solution_norm(np.zeros((11, 5)), t, 1, 2.0) == 0.0
    assert solution_norm(np.full((11, 5), -3.0), t, 1, 2.0) == 3.0
    u = np.exp(2.0 * t)[:, None] * np.ones(5)
    assert solution_norm(u, t, 1, 2.0) == pytest.approx(1.0, rel=1e-15)
    assert solution_norm(np.full((4, 11, 5), 2.0), t, 2, 1.0, ensemble=True) == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        solution_norm(np.empty((0, 11, 5)), t, 1, 1.0, ensemble=True)
    with pytest.raises(ValidationError):
        solution_norm(u, t, 3, 1.0)
    assert x.size == 5


def test_config_validation():
    with pytest.raises(ValidationError):
        cfg(-0.1)
    with pytest.raises(ValidationError):
        SolverConfig(lam=0.1, beta=0.0, window=W)
    with pytest.raises(ValidationError):
        cfg(dt=0.0)
    assert math.isclose(cfg().dt, 0.02)
