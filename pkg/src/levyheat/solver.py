"""Mild solutions driven by Poisson noise.

Non-compensated noise: with finitely many events the mild equation is a causal
recursion over event times, solved exactly in O(n^2).  Compensated noise: the
deterministic drift integral needs the field everywhere, so it is solved by Picard
iteration on a space-time lattice, with event values and off-lattice queries
computed from the same mild formula.

In both cases sigma is evaluated at the left limit u(s-, y): an event at time s
only influences strictly later times.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import fft

from .coefficients import Constant, deterministic_part
from .errors import (ConvergenceError, DivergenceError, ExistenceGateError,
                     NumericalError, ValidationError)
from .kernel import upsilon
from .measure import SpaceTimeWindow

DIVERGENCE_RUN = 5


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    beta: float
    window: SpaceTimeWindow
    u0: object = Constant(1.0)
    dt: float = 0.02
    dx: float = 0.1
    tol: float = 1e-10
    max_iter: int = 200
    seed: int = 0
    override_gate: bool = False
    envelope_c: float = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError(f"noise level lambda must be >= 0, got {self.lam}")
        if self.beta <= 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if not (self.dt > 0 and self.dx > 0):
            raise ValidationError("lattice steps must be positive")
        if not self.tol > 0:
            raise ValidationError("Picard tolerance must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be at least 1")
        if getattr(self.u0, "sup", 0.0) < 0:
            raise ValidationError("initial data must be bounded and nonnegative")


def _distances(kernel, x, y):
    """|x - y| with broadcasting; y has a trailing axis of length d when d > 1."""
    if kernel.d == 1:
        return np.abs(x - y)
    return np.linalg.norm(x - y, axis=-1)


def _event_positions(cloud):
    return cloud.positions[:, 0] if cloud.window.d == 1 else cloud.positions


def _causal_kernel(kernel, lag, dist):
    """p(lag, dist) where lag > 0, zero elsewhere."""
    live = lag > 0
    out = kernel.pdf(np.where(live, lag, 1.0), dist)
    return np.where(live, out, 0.0)


# ---------------------------------------------------------------------------
# non-compensated equation


@dataclass(frozen=True, eq=False)
class EventSolution:
    """Left-limit values u(s_i-, y_i) of the non-compensated mild solution."""

    cloud: object
    u_left: np.ndarray
    kernel: object
    sigma: object
    config: SolverConfig

    @property
    def sigma_values(self):
        return self.sigma(self.u_left, self.cloud.marks)

    def __call__(self, t, x):
        return field_eval(self, t, x)

    def on_lattice(self, times, xs):
        T, X = np.meshgrid(times, xs, indexing="ij")
        return np.asarray(field_eval(self, T, X))


def solve_noncompensated(cloud, kernel, sigma, config):
    """Event-driven exact solve: u(s_i-, y_i) in time order."""
    s = cloud.times
    y = _event_positions(cloud)
    n = len(s)
    det = (np.asarray(deterministic_part(kernel, config.u0, s, y), dtype=float).reshape(n)
           if n else np.empty(0))
    u = np.empty(n)
    if n:
        lag = s[:, None] - s[None, :]
        dist = _distances(kernel, y[:, None], y[None, :])
        A = _causal_kernel(kernel, lag, dist)
        J = sigma.J(cloud.marks)
        for i in range(n):
            u[i] = det[i] + config.lam * (A[i, :i] @ (J[:i] * sigma.g(u[:i])))
            if not math.isfinite(u[i]):
                raise NumericalError(f"solution value at event {i} is not finite")
    u.setflags(write=False)
    return EventSolution(cloud, u, kernel, sigma, config)


def _check_times(t, T):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > T * (1 + 1e-12)):
        raise ValidationError(f"evaluation time outside the window [0, {T}]")
    return t


def _noise_sum(kernel, cloud, sig, lam, t, x):
    """lam * sum_{s_i < t} p(t - s_i, x - y_i) sig_i."""
    if len(cloud) == 0 or lam == 0:
        return 0.0
    y = _event_positions(cloud)
    if kernel.d == 1:
        lag = t[..., None] - cloud.times
        dist = np.abs(x[..., None] - y)
    else:
        lag = t[..., None] - cloud.times
        dist = np.linalg.norm(x[..., None, :] - y, axis=-1)
    return lam * np.sum(_causal_kernel(kernel, lag, dist) * sig, axis=-1)


def field_eval(sol, t, x, det=None):
    """u(t, x) from the mild formula with the stored left-limit event values.

    ``det`` optionally supplies the precomputed deterministic part at (t, x).
    """
    t = _check_times(t, sol.cloud.window.T)
    x = np.asarray(x, dtype=float)
    if sol.kernel.d == 1:
        t, x = np.broadcast_arrays(t, x)
    if det is None:
        det = deterministic_part(sol.kernel, sol.config.u0, t, x)
    det = np.asarray(det)
    out = det + _noise_sum(sol.kernel, sol.cloud, sol.sigma_values, sol.config.lam, t, x)
    return float(out) if np.ndim(out) == 0 else out


def apply_A_alpha(u_in, cloud, kernel, sigma, config):
    """Noise operator (t, x) -> lam sum_{s_i < t} p(t - s_i, x - y_i) sigma(u_in(s_i-, y_i), h_i).

    ``u_in`` is a field evaluator that already follows the left-limit convention.
    """
    y = _event_positions(cloud)
    values = np.asarray(u_in(cloud.times, y), dtype=float) if len(cloud) else np.empty(0)
    sig = sigma(values, cloud.marks) if len(cloud) else np.empty(0)

    def evaluate(t, x):
        t = _check_times(t, cloud.window.T)
        x = np.asarray(x, dtype=float)
        if kernel.d == 1:
            t, x = np.broadcast_arrays(t, x)
        out = _noise_sum(kernel, cloud, sig, config.lam, t, x)
        out = out + np.zeros(t.shape)
        return float(out) if np.ndim(out) == 0 else out
    return evaluate


# ---------------------------------------------------------------------------
# compensated equation


class Lattice:
    """Space-time grid plus the discretized drift operator.

    The drift int_0^t int p(t - s, x - y) G(s, y) dy ds is approximated with G
    frozen on cells: left-point rule in time, cell-integrated kernel mass in space
    (trapezoid end weights).  On the grid this is a causal 2-D convolution done
    by FFT.
    """

    def __init__(self, kernel, u0, window, dt, dx):
        if kernel.d != 1:
            raise ValidationError("the compensated lattice solver is implemented for d = 1")
        T, L = window.T, window.L
        nt = max(1, int(round(T / dt)))
        nx = max(2, int(round(2 * L / dx))) + 1
        self.kernel, self.window = kernel, window
        self.nt, self.nx = nt, nx
        self.dt = T / nt
        self.dx = 2 * L / (nx - 1)
        self.times = np.linspace(0.0, T, nt + 1)
        self.xs = np.linspace(-L, L, nx)
        self.cell_weight = np.ones(nx)
        self.cell_weight[[0, -1]] = 0.5
        Tg, Xg = np.meshgrid(self.times, self.xs, indexing="ij")
        self.det = np.asarray(deterministic_part(kernel, u0, Tg, Xg))
        offsets = np.arange(-(nx - 1), nx) * self.dx
        lags = np.arange(1, nt + 1)[:, None] * self.dt
        K = np.zeros((nt + 1, 2 * nx - 1))
        K[1:] = self.dt * kernel.sf_interval(lags, offsets - self.dx / 2, offsets + self.dx / 2)
        self._shape = (fft.next_fast_len(2 * nt + 1, real=True),
                       fft.next_fast_len(3 * nx - 2, real=True))
        self._kspec = fft.rfft2(K, self._shape)

    def drift(self, G):
        """Lattice values of the discretized drift integral of G."""
        full = fft.irfft2(fft.rfft2(G * self.cell_weight, self._shape) * self._kspec, self._shape)
        return full[: self.nt + 1, self.nx - 1: 2 * self.nx - 1]

    def drift_weights(self, t, x):
        """Weights W with drift(t, x) = sum W[..., m, l] G[m, l] for arbitrary points."""
        t = np.asarray(t, dtype=float)[..., None]
        x = np.asarray(x, dtype=float)[..., None, None]
        upper = np.append(self.times[1:], np.inf)
        w = np.clip(np.minimum(t, upper) - self.times, 0.0, None)
        lag = np.where(w > 0, t - self.times, 1.0)[..., None]
        off = x - self.xs
        mass = self.kernel.sf_interval(lag, off - self.dx / 2, off + self.dx / 2)
        return (w[..., None] * self.cell_weight) * mass

    def leakage(self):
        """Worst 1 - int_{-L}^{L} p(t, x - y) dy over lattice points with t > 0."""
        L = self.window.L
        T, X = np.meshgrid(self.times[1:], self.xs, indexing="ij")
        inside = self.kernel.sf_interval(T, X - L, X + L)
        return float(np.max(1.0 - inside))


@lru_cache(maxsize=8)
def lattice_for(kernel, u0, window, dt, dx):
    return Lattice(kernel, u0, window, dt, dx)


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Picard fixed point of the compensated mild equation on a lattice."""

    times: np.ndarray
    xs: np.ndarray
    values: np.ndarray
    event_values: np.ndarray
    iterations: int
    residual: float
    history: tuple
    gated: bool
    cloud: object = field(repr=False)
    kernel: object = field(repr=False)
    sigma: object = field(repr=False)
    config: SolverConfig = field(repr=False)
    lattice: Lattice = field(repr=False)
    k1: float = 0.0

    @property
    def label(self):
        return "gated" if self.gated else "ungated"

    @property
    def ratios(self):
        h = np.asarray(self.history)
        with np.errstate(divide="ignore", invalid="ignore"):
            return h[1:] / h[:-1]

    def drift_source(self):
        return self.k1 * self.sigma.g(self.values)

    def _nodes(self, t, x):
        """Lattice indices of (t, x), -1 where the point is not a node."""
        lat = self.lattice
        m = np.rint(t / lat.dt)
        l = np.rint((x - lat.xs[0]) / lat.dx)
        on = ((np.abs(t - m * lat.dt) <= 1e-12 * max(1.0, lat.window.T))
              & (np.abs(x - lat.xs[0] - l * lat.dx) <= 1e-12 * max(1.0, lat.window.L))
              & (l >= 0) & (l < lat.nx))
        return np.where(on, m, -1).astype(int), np.where(on, l, -1).astype(int)

    def __call__(self, t, x):
        """Mild formula at arbitrary points; lattice nodes read the fixed point directly."""
        t = _check_times(t, self.cloud.window.T)
        t, x = np.broadcast_arrays(t, np.asarray(x, dtype=float))
        m, l = self._nodes(t, x)
        node = m >= 0
        if node.all():
            out = self.values[m, l]
            return float(out) if np.ndim(out) == 0 else out
        if node.any():
            out = np.empty(t.shape)
            out[node] = self.values[m[node], l[node]]
            out[~node] = self._mild(t[~node], x[~node])
            return out
        return self._mild(t, x)

    def _mild(self, t, x):
        det = np.asarray(deterministic_part(self.kernel, self.config.u0, t, x))
        sig = self.sigma(self.event_values, self.cloud.marks)
        noise = _noise_sum(self.kernel, self.cloud, sig, self.config.lam, t, x)
        W = self.lattice.drift_weights(t, x)
        drift = np.einsum("...ml,ml->...", W, self.drift_source())
        out = det + noise - self.config.lam * drift
        return float(out) if np.ndim(out) == 0 else out


def check_existence_compensated(kernel, config):
    """Refuse infinite Upsilon(beta) unless overridden; returns True when gated."""
    if kernel.d != 1:
        raise ValidationError("the compensated equation is only treated in d = 1")
    if math.isinf(upsilon(kernel.symbol, config.beta)):
        if not config.override_gate:
            raise ExistenceGateError(
                f"existence gate: Upsilon(beta) = inf for alpha = {kernel.alpha} <= 1, so the "
                "compensated equation has no random-field solution; pass the override flag "
                "to run anyway (results are labeled ungated)")
        return False
    return True


def solve_compensated(cloud, kernel, sigma, config):
    """Picard iteration for the compensated mild equation on the lattice."""
    gated = check_existence_compensated(kernel, config)
    lat = lattice_for(kernel, config.u0, cloud.window, config.dt, config.dx)
    lam = config.lam
    k1 = sigma.K1(cloud.measure) if cloud.measure is not None else 0.0
    if cloud.measure is None and lam != 0:
        raise ValidationError("the compensated solve needs the cloud's Levy measure")
    s, y, h = cloud.times, _event_positions(cloud), cloud.marks
    n = len(s)
    det_ev = np.asarray(deterministic_part(kernel, config.u0, s, y), dtype=float).reshape(n)
    J = sigma.J(h)
    if n:
        P = _causal_kernel(kernel, lat.times[None, :, None] - s[:, None, None],
                           np.abs(lat.xs[None, None, :] - y[:, None, None]))
        A = _causal_kernel(kernel, s[:, None] - s[None, :], np.abs(y[:, None] - y[None, :]))
        Q = lat.drift_weights(s, y)
    U, V = lat.det, det_ev
    history = []
    for it in range(1, config.max_iter + 1):
        G = k1 * sigma.g(U)
        sig = J * sigma.g(V)
        U_new = lat.det - lam * lat.drift(G)
        V_new = det_ev.copy()
        if n:
            U_new = U_new + lam * np.tensordot(sig, P, axes=1)
            V_new = V_new + lam * (A @ sig - np.einsum("iml,ml->i", Q, G))
        res = float(max(np.max(np.abs(U_new - U)),
                        np.max(np.abs(V_new - V)) if n else 0.0))
        U, V = U_new, V_new
        history.append(res)
        if not math.isfinite(res):
            raise DivergenceError(f"Picard residual became non-finite at iteration {it}",
                                  residual=res, iterations=it)
        if res <= config.tol:
            break
        if len(history) > DIVERGENCE_RUN and all(
                history[-k] > history[-k - 1] for k in range(1, DIVERGENCE_RUN + 1)):
            raise DivergenceError(
                f"Picard residual grew over {DIVERGENCE_RUN} consecutive iterations "
                f"(last {res:.3e})", residual=res, iterations=it)
    else:
        raise ConvergenceError(
            f"Picard iteration did not reach tol={config.tol} in {config.max_iter} iterations "
            f"(last residual {history[-1]:.3e})", residual=history[-1], iterations=config.max_iter)
    U.setflags(write=False)
    return LatticeField(lat.times, lat.xs, U, V, it, history[-1], tuple(history), gated,
                        cloud, kernel, sigma, config, lat, k1)


# ---------------------------------------------------------------------------


def solution_norm(values, times, p, beta, ensemble=False):
    """sup_t,x e^(-beta t) E|u|^p, raised to 1/p for p = 2.

    ``values`` has shape (..., n_t, n_x) with n_t matching ``times``; with
    ``ensemble=True`` the leading axis indexes replicas and E is their mean,
    otherwise the per-path value is returned.
    """
    if p not in (1, 2):
        raise ValidationError("solution norms are defined for p = 1 and p = 2")
    v = np.abs(np.asarray(values, dtype=float)) ** p
    if ensemble:
        if v.shape[0] == 0:
            raise ValidationError("empty replica set")
        v = v.mean(axis=0)
    times = np.asarray(times, dtype=float)
    weight = np.exp(-beta * times).reshape(times.shape + (1,) * (v.ndim - times.ndim))
    out = float(np.max(weight * v))
    return math.sqrt(out) if p == 2 else out
