"""Poisson and compensated-Poisson integrals of explicit integrands over sampled clouds."""

from dataclasses import dataclass
import warnings

import numpy as np
from scipy import integrate

from .errors import NumericalError, QuadratureError, ValidationError

_RTOL = 1e-8


@dataclass(frozen=True)
class IntegrandSpec:
    """f(s, y, h), vectorized over events; ``cls`` is "H1" or "H2"."""

    f: object
    cls: str = "H2"

    def __post_init__(self):
        if self.cls not in ("H1", "H2"):
            raise ValidationError(f"integrability class must be H1 or H2, got {self.cls}")

    def __call__(self, s, y, h):
        return self.f(s, y, h)

    def check(self, window, measure, t=None):
        """Finiteness of int |f| (H1) or int f^2 (H2) over the window."""
        power = 1 if self.cls == "H1" else 2
        g = IntegrandSpec(lambda s, y, h: np.abs(self.f(s, y, h)) ** power)
        value = deterministic_integral(g, window, measure, window.T if t is None else t)
        if not np.isfinite(value):
            raise ValidationError(f"integrand is not in {self.cls} on this window")
        return value


def _event_values(f, cloud, t):
    mask = cloud.times <= t
    y = cloud.positions[mask]
    if cloud.window.d == 1:
        y = y[:, 0]
    vals = np.broadcast_to(np.asarray(f(cloud.times[mask], y, cloud.marks[mask]), dtype=float),
                           (int(mask.sum()),))
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.flatnonzero(mask)[np.argmax(bad)])
        raise NumericalError(
            f"integrand is not finite at event {i} "
            f"(s={cloud.times[i]}, y={cloud.positions[i]}, h={cloud.marks[i]})")
    return vals


def integrate_noncompensated(f, cloud, t):
    """Sum of f(s_i, y_i, h_i) over events with s_i <= t."""
    if len(cloud) == 0:
        return 0.0
    return float(np.sum(_event_values(f, cloud, t)))


def deterministic_integral(f, window, measure, t):
    """int_0^t int_{[-L, L]^d} int f(s, y, h) ds dy nu(dh).

    Atomic marks are summed exactly; the remaining space-time (and density-mark)
    integral uses nested adaptive quadrature at relative tolerance 1e-8.
    """
    if t <= 0:
        return 0.0
    L, d = window.L, window.d
    space = [(-L, L)] * d

    def scalar(*args):
        s, *rest = args
        ys, h = rest[:d], rest[d]
        y = ys[0] if d == 1 else np.array(ys)
        return float(f(s, y, h))

    def run(fn, ranges):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, _ = integrate.nquad(fn, ranges,
                                         opts={"epsrel": _RTOL, "epsabs": 1e-14, "limit": 200})
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(f"compensator quadrature did not converge ({exc})") from exc
        return val

    if measure.is_atomic:
        total = 0.0
        for h, m in measure.atoms:
            if m == 0:
                continue
            total += m * run(lambda *v, h=h: scalar(*v, h), [(0.0, t)] + space)
        return float(total)
    total = 0.0
    for a, b in measure._pieces():
        g = lambda *v: scalar(*v) * float(measure.density(v[-1]))
        total += run(g, [(0.0, t)] + space + [(a, b)])
    return float(total)


def integrate_compensated(f, cloud, t, compensator_value=None):
    """Event sum minus the deterministic triple integral of f.

    ``compensator_value`` lets Monte Carlo loops reuse one quadrature across
    clouds sharing window and measure.
    """
    if compensator_value is None:
        compensator_value = deterministic_integral(f, cloud.window, cloud.measure, t)
    return integrate_noncompensated(f, cloud, t) - compensator_value


def isometry_rhs(f, window, measure, t):
    """int |f|^2 ds dy nu(dh): the second moment of the compensated integral."""
    return deterministic_integral(IntegrandSpec(lambda s, y, h: np.abs(f(s, y, h)) ** 2),
                                  window, measure, t)
