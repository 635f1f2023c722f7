"""Analytic bounds on E|u(t2, x) - u(t1, x)|^p and the Picard contraction constant.

Mean-square (p = 2, compensated noise) bounds come from Plancherel and the Ito
isometry and are integrals over frequency; mean (p = 1, non-compensated noise)
bounds come from the stable heat-kernel envelope and are integrals over time.
Every integral has an adaptive route (default) and a fixed-grid Simpson route
used to cross-check it.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special

from ._numerics import quad, simpson
from .errors import ValidationError
from .measure import fmt, write_csv

SIMPSON_POINTS = 2 ** 16 + 1


@dataclass(frozen=True)
class BoundBreakdown:
    parts: dict
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, v in self.parts.items():
            if not (v >= 0 and math.isfinite(v)):
                raise ValidationError(f"bound part {name} = {v} is not a finite nonnegative number")

    @property
    def total(self):
        return float(sum(self.parts.values()))

    def rows(self):
        out = [("part", "value")]
        out += [(k, fmt(v)) for k, v in self.parts.items()]
        out.append(("total", fmt(self.total)))
        for k, v in self.inputs.items():
            out.append((f"input.{k}", fmt(v) if isinstance(v, (int, float)) else str(v)))
        return out

    def write(self, path):
        rows = self.rows()
        write_csv(path, rows[0], rows[1:])


def c_dab(d, alpha, beta, C):
    """2 C (d + alpha)/(d + alpha - 1) Gamma(gamma + 1) / beta^(gamma + 1), gamma = (1 - d)/alpha."""
    gamma = (1.0 - d) / alpha
    if gamma <= -1:
        raise ValidationError(
            f"C_(d,alpha,beta) is infinite for d={d}, alpha={alpha}: needs d < 1 + alpha")
    if d + alpha <= 1:
        raise ValidationError("C_(d,alpha,beta) needs d + alpha > 1")
    if beta <= 0 or C <= 0:
        raise ValidationError("beta and the envelope constant must be positive")
    return 2.0 * C * (d + alpha) / (d + alpha - 1) * math.gamma(gamma + 1) / beta ** (gamma + 1)


def existence_condition(lam, K, lip, c_value):
    """True iff c_value * lam * K * lip < 1 (strict)."""
    if min(lam, K, lip, c_value) < 0:
        raise ValidationError("existence condition inputs must be nonnegative")
    return c_value * lam * K * lip < 1.0


# ---------------------------------------------------------------------------
# mean-square bounds


def _halfline(f, knots, epsrel=1e-11):
    """int_0^inf f by adaptive quadrature split at the given knots."""
    edges = [0.0] + sorted(k for k in set(knots) if 0 < k < math.inf) + [math.inf]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        # later pieces only need accuracy relative to what has been accumulated
        total += quad(f, a, b, epsabs=epsrel * total, epsrel=epsrel, limit=1000,
                      what="bound integral")
    return total


def _halfline_simpson(f, alpha, n=SIMPSON_POINTS):
    """int_0^inf f on a fixed grid: [0, 1] directly, [1, inf) via xi = w^(-q).

    q = 2/(alpha - 1) turns the xi^(-alpha) tails into a linear end behaviour.
    """
    x = np.linspace(0.0, 1.0, n)
    head = simpson(f(x), x)
    q = 2.0 / (alpha - 1.0)
    w = x[1:]
    tail_vals = np.concatenate([[0.0], f(w ** -q) * q * w ** (-q - 1)])
    return head + simpson(tail_vals, x)


def increment_bound_ms(symbol, c0, lam, K, lip, norm2sq, beta, t1, t2, method="adaptive"):
    """D0 + D1 + D2 bounding E|u(t2, x) - u(t1, x)|^2 for compensated noise.

    c0 = int |u0|^2 dy; norm2sq is the squared norm estimate ||u||_{2,beta}^2.
    """
    a = symbol.alpha
    if symbol.d != 1:
        raise ValidationError("the mean-square bound is implemented for d = 1")
    if a <= 1:
        raise ValidationError(f"frequency integrals diverge for alpha = {a} <= 1")
    if not 0 < t1 <= t2:
        raise ValidationError(f"need 0 < t1 <= t2, got t1={t1}, t2={t2}")
    if not math.isfinite(c0):
        raise ValidationError("int |u0|^2 dy is infinite (constant initial data on the line)")
    if beta <= 0:
        raise ValidationError("beta must be positive")
    h = t2 - t1
    inputs = dict(t1=t1, t2=t2, alpha=a, beta=beta, lam=lam, K=K, lip=lip,
                  norm2sq=norm2sq, c0=c0, method=method)
    if h == 0:
        return BoundBreakdown({"D0": 0.0, "D1": 0.0, "D2": 0.0}, inputs)

    def i0(xi):
        psi = xi ** a
        return np.exp(-2 * t1 * psi) * np.expm1(-h * psi) ** 2

    def i1(xi):
        psi = xi ** a
        return np.expm1(-h * psi) ** 2 / (beta + 2 * psi)

    def i2(xi):
        r = beta + 2 * xi ** a
        return -np.expm1(-h * r) / r

    if method == "adaptive":
        knots = [h ** (-1 / a), t1 ** (-1 / a), (beta / 2) ** (1 / a), 1.0]
        I = [_halfline(f, knots) for f in (i0, i1, i2)]
    elif method == "simpson":
        I = [_halfline_simpson(f, a) for f in (i0, i1, i2)]
    else:
        raise ValidationError(f"unknown quadrature method {method}")
    I = [2.0 * v for v in I]  # even integrands over the whole line
    pref = lam ** 2 * K * lip ** 2 / (2 * math.pi)
    parts = {
        "D0": c0 / (2 * math.pi) * I[0],
        "D1": pref * norm2sq * math.exp(beta * t1) * I[1],
        "D2": pref * norm2sq * math.exp(beta * t2) * I[2],
    }
    return BoundBreakdown(parts, inputs)


# ---------------------------------------------------------------------------
# mean bounds


def _power_exp_integral(gamma, beta, h, method):
    """int_0^h z^gamma e^(-beta z) dz."""
    if h == 0:
        return 0.0
    if method == "adaptive":
        return quad(lambda z: math.exp(-beta * z), 0.0, h, weight="alg", wvar=(gamma, 0.0),
                    epsabs=0.0, epsrel=1e-12, what="D5 integral")
    # z = h w^m with m = 1/(gamma + 1) removes the endpoint singularity
    m = 1.0 / (gamma + 1.0)
    w = np.linspace(0.0, 1.0, SIMPSON_POINTS)
    return h ** (gamma + 1) * m * simpson(np.exp(-beta * h * w ** m), w)


def _d4_integral(gamma, beta, t1, t2, method):
    """int_0^t1 e^(beta s) |(t2 - s)^gamma - (t1 - s)^gamma| ds."""
    if gamma == 0 or t1 == t2:
        return 0.0
    f = lambda s: np.exp(beta * s) * np.abs((t2 - s) ** gamma - (t1 - s) ** gamma)
    if method == "adaptive":
        return _d4_adaptive(gamma, beta, t1, t2 - t1)
    # s = t1 (1 - w^m), m = 2/(gamma + 1), absorbs the (t1 - s)^gamma singularity:
    # (t1 - s)^gamma w^(m - 1) = t1^gamma w, so the transformed integrand is smooth
    m = 2.0 / (gamma + 1.0)
    w = np.linspace(0.0, 1.0, SIMPSON_POINTS)
    s = t1 * (1.0 - w ** m)
    vals = np.exp(beta * s) * t1 * m * np.abs((t2 - s) ** gamma * w ** (m - 1) - t1 ** gamma * w)
    return simpson(vals, w)


def _d4_adaptive(gamma, beta, t1, h):
    """The D4 integral in u = t1 - s, where the integrand has a layer of width h at u = 0.

    For gamma < 0 the integrand is e^(beta (t1 - u)) (u^gamma - (u + h)^gamma) >= 0.
    """
    g = lambda u: math.exp(beta * (t1 - u))
    head = min(h, t1)
    total = quad(g, 0.0, head, weight="alg", wvar=(gamma, 0.0), epsabs=0.0, epsrel=1e-12,
                 what="D4 integral")
    total -= quad(lambda u: g(u) * (u + h) ** gamma, 0.0, head, epsabs=0.0, epsrel=1e-12,
                  what="D4 integral")
    # beyond the layer, u^gamma - (u + h)^gamma = -u^gamma expm1(gamma log1p(h/u)) is cancellation free
    f = lambda u: -g(u) * u ** gamma * math.expm1(gamma * math.log1p(h / u))
    edges = [head]
    while edges[-1] * 10 < t1:
        edges.append(edges[-1] * 10)
    edges.append(t1)
    for a, b in zip(edges[:-1], edges[1:]):
        total += quad(f, a, b, epsabs=1e-12 * total, epsrel=1e-11, limit=1000, what="D4 integral")
    return total


def increment_bound_mean(d, alpha, C, c0_sup, lam, K, lip, norm1, beta, t1, t2, method="adaptive"):
    """D3 + D4 + D5 bounding E|u(t2, x) - u(t1, x)| for non-compensated stable noise.

    C is the heat-kernel envelope constant, c0_sup = sup |u0|, norm1 = ||u||_{1,beta}.
    For d > 1 the kernel-envelope differences are negative as written, so their
    absolute values are used.
    """
    gamma = (1.0 - d) / alpha
    if not d < 1 + alpha:
        raise ValidationError(f"mean bound needs d < 1 + alpha, got d={d}, alpha={alpha}")
    if not d + alpha > 1:
        raise ValidationError("mean bound needs d + alpha > 1")
    if not 0 < t1 <= t2:
        raise ValidationError(f"need 0 < t1 <= t2, got t1={t1}, t2={t2}")
    if beta <= 0 or C <= 0:
        raise ValidationError("beta and the envelope constant must be positive")
    if method not in ("adaptive", "simpson"):
        raise ValidationError(f"unknown quadrature method {method}")
    ratio = (d + alpha) / (d + alpha - 1)
    pre = 2 * lam * K * lip * C * norm1 * ratio
    parts = {
        "D3": 2 * c0_sup * C * ratio * abs(t2 ** gamma - t1 ** gamma),
        "D4": pre * _d4_integral(gamma, beta, t1, t2, method),
        "D5": pre * math.exp(beta * t2) * _power_exp_integral(gamma, beta, t2 - t1, method),
    }
    inputs = dict(t1=t1, t2=t2, d=d, alpha=alpha, beta=beta, lam=lam, K=K, lip=lip,
                  norm1=norm1, c0_sup=c0_sup, C=C, method=method)
    return BoundBreakdown(parts, inputs)


def d5_closed_form(gamma, beta, h):
    """int_0^h z^gamma e^(-beta z) dz via the regularized incomplete gamma function."""
    return special.gamma(gamma + 1) * special.gammainc(gamma + 1, beta * h) / beta ** (gamma + 1)
