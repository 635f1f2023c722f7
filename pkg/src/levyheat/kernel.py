"""Symmetric alpha-stable symbols and transition densities.

The density of the symmetric stable process with E exp(i xi X_t) = exp(-t|xi|^alpha)
is available in closed form for alpha = 2 (Gaussian, variance 2t) and alpha = 1
(Cauchy, scale t).  For the other indices in one dimension we tabulate the unit-time
density p(1, z) by numerical Fourier inversion, interpolate it with a cubic spline,
switch to the large-|z| expansion beyond the table, and get every other time by the
self-similarity p(t, x) = t^(-1/alpha) p(1, t^(-1/alpha) x).
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from ._numerics import composite_gauss, quad
from .errors import NumericalError, ValidationError

# Integrand e^{-xi^alpha} is cut where it drops below this.
_FOURIER_CUTOFF = 1e-17
_TABLE_STEP = 0.005
_TAIL_TERMS = 60


@dataclass(frozen=True)
class LevySymbolSpec:
    """Psi(xi) = |xi|^alpha in dimension d."""

    alpha: float
    d: int = 1

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValidationError(f"alpha must lie in (0, 2], got {self.alpha}")
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(f"d must be a positive integer, got {self.d}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "d", int(self.d))


def symbol_eval(spec, xi):
    """Levy exponent |xi|^alpha (xi may be a vector of norms)."""
    return np.abs(xi) ** spec.alpha


# ---------------------------------------------------------------------------
# unit-time density table for alpha not in {1, 2}


def _tail_coefficients(alpha):
    k = np.arange(1, _TAIL_TERMS + 1)
    sign = np.where(k % 2 == 1, 1.0, -1.0)
    sin = np.sin(k * np.pi * alpha / 2)
    logmag = special.gammaln(k * alpha + 1) - special.gammaln(k + 1)
    return k, sign * sin, logmag


def _tail_series(alpha, z, integrated=False):
    """Large-|z| expansion of p(1, z), or of its upper tail mass when integrated.

    Asymptotic for alpha > 1, convergent for alpha < 1.  Terms are summed while
    their magnitude keeps shrinking.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    k, coef, logmag = _tail_coefficients(alpha)
    if integrated:
        logmag = logmag - np.log(k * alpha)
        power = k * alpha
    else:
        power = k * alpha + 1
    logterm = logmag[None, :] - power[None, :] * np.log(z)[:, None]
    mag = np.exp(logterm)
    # stop at the smallest term (asymptotic series) or once negligible
    growing = np.diff(logterm, axis=1) > 0
    stop = np.argmax(np.concatenate([growing, np.ones((len(z), 1), bool)], axis=1), axis=1)
    mask = np.arange(_TAIL_TERMS)[None, :] <= stop[:, None]
    terms = np.where(mask, coef[None, :] * mag, 0.0)
    return terms.sum(axis=1) / np.pi


@lru_cache(maxsize=16)
def _unit_table(alpha):
    """Tabulate p(1, z) on [0, z_max] by Gauss-Legendre Fourier inversion."""
    z_max = 40.0 if alpha > 1 else 8.0
    xi_max = (-math.log(_FOURIER_CUTOFF)) ** (1.0 / alpha)
    width = min(0.5, 2.0 / z_max)
    uniform = np.arange(width, xi_max + width, width)
    # geometric panels resolve the xi^alpha cusp at the origin
    geometric = width * 2.0 ** -np.arange(45, 0, -1)
    edges = np.concatenate([[0.0], geometric, uniform])
    nodes, weights = composite_gauss(edges)
    weighted = weights * np.exp(-nodes ** alpha) / np.pi
    z = np.arange(0.0, z_max + _TABLE_STEP / 2, _TABLE_STEP)
    values = np.empty_like(z)
    for lo in range(0, len(z), 256):
        chunk = z[lo:lo + 256]
        values[lo:lo + 256] = np.cos(np.outer(chunk, nodes)) @ weighted
    spline = CubicSpline(z, values, bc_type=((1, 0.0), "not-a-knot"))
    tail_at_edge = float(_tail_series(alpha, z_max)[0])
    if abs(tail_at_edge - values[-1]) > 1e-9 * max(values[-1], 1e-300) + 1e-15:
        raise NumericalError(
            f"alpha={alpha}: tail expansion does not meet the table at z={z_max} "
            f"({tail_at_edge:.6e} vs {values[-1]:.6e})")
    antideriv = spline.antiderivative()
    return z_max, spline, antideriv


def _unit_pdf(alpha, z):
    z = np.abs(np.asarray(z, dtype=float))
    z_max, spline, _ = _unit_table(alpha)
    out = np.empty_like(z)
    inside = z <= z_max
    out[inside] = spline(z[inside])
    if (~inside).any():
        out[~inside] = _tail_series(alpha, z[~inside])
    return out


def _unit_cdf(alpha, z):
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    z_max, _, antideriv = _unit_table(alpha)
    half = np.empty_like(a)
    inside = a <= z_max
    half[inside] = antideriv(a[inside])
    if (~inside).any():
        half[~inside] = 0.5 - _tail_series(alpha, a[~inside], integrated=True)
    return 0.5 + np.sign(z) * half


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelHandle:
    """Evaluator for p(t, x).

    ``method`` is "closed-form" for alpha in {1, 2} and "fourier-table" otherwise.
    With ``tail=False`` a fourier-table handle refuses arguments beyond its
    tabulated range instead of switching to the large-|z| expansion.
    """

    symbol: LevySymbolSpec
    tail: bool = True
    method: str = field(init=False)

    def __post_init__(self):
        a, d = self.symbol.alpha, self.symbol.d
        if a in (1.0, 2.0):
            method = "closed-form"
        else:
            method = "fourier-table"
        if d > 1 and a != 2.0:
            raise ValidationError(
                "kernels for d >= 2 are only available in closed form for alpha = 2")
        object.__setattr__(self, "method", method)
        if method == "fourier-table":
            _unit_table(a)

    @property
    def alpha(self):
        return self.symbol.alpha

    @property
    def d(self):
        return self.symbol.d

    @property
    def table_range(self):
        """Largest |x| t^(-1/alpha) served from the table (inf for closed forms)."""
        if self.method == "closed-form" or self.tail:
            return math.inf
        return _unit_table(self.alpha)[0]

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(~(t > 0)):
            raise ValidationError("kernel evaluation needs t > 0")
        return t

    def pdf(self, t, r):
        """p(t, x) where r is |x| (any sign accepted; only the norm matters)."""
        t = self._check_t(t)
        r = np.abs(np.asarray(r, dtype=float))
        a, d = self.alpha, self.d
        if a == 2.0:
            return (4 * np.pi * t) ** (-d / 2) * np.exp(-r * r / (4 * t))
        if a == 1.0:
            return t / (np.pi * (t * t + r * r))
        scale = t ** (-1.0 / a)
        z = r * scale
        if not self.tail and np.any(z > self.table_range):
            raise ValidationError(
                f"argument outside the cached table (|x| t^(-1/alpha) > {self.table_range})")
        return scale * _unit_pdf(a, z)

    def cdf(self, t, x):
        """P(X_t <= x) in one dimension."""
        if self.d != 1:
            raise ValidationError("cdf is only defined for d = 1")
        t = self._check_t(t)
        x = np.asarray(x, dtype=float)
        a = self.alpha
        if a == 2.0:
            return special.ndtr(x / np.sqrt(2 * t))
        if a == 1.0:
            return 0.5 + np.arctan(x / t) / np.pi
        return _unit_cdf(a, x * t ** (-1.0 / a))

    def sf_interval(self, t, lo, hi):
        """P(lo <= X_t <= hi), accurate for intervals far in either tail."""
        t = np.asarray(t, dtype=float)
        lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
        # reflect so the interval sits on the left where cdf values are small
        flip = (lo + hi) > 0
        a = np.where(flip, -hi, lo)
        b = np.where(flip, -lo, hi)
        return self.cdf(t, b) - self.cdf(t, a)


def kernel_eval(k, t, x):
    """p(t, x); x is a scalar/array in d = 1 or an array of shape (..., d)."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if k.d == 1 else np.linalg.norm(x, axis=-1)
    out = k.pdf(t, r)
    return float(out) if np.ndim(out) == 0 else out


def kernel_scaling_residual(k, s, t, x):
    """|p(st, x) - t^(-d/alpha) p(s, t^(-1/alpha) x)|."""
    if s <= 0 or t <= 0:
        raise ValidationError("scaling residual needs s > 0 and t > 0")
    a, d = k.alpha, k.d
    lhs = kernel_eval(k, s * t, x)
    rhs = t ** (-d / a) * kernel_eval(k, s, t ** (-1.0 / a) * np.asarray(x, dtype=float))
    return float(np.max(np.abs(lhs - rhs)))


def total_mass(k, t):
    """Quadrature of p(t, .) over the real line (d = 1)."""
    if k.d != 1:
        raise ValidationError("normalization check is implemented for d = 1")
    return 2.0 * quad(lambda x: float(k.pdf(t, x)), 0.0, np.inf,
                      epsrel=1e-12, what="normalization")


def chapman_kolmogorov_residual(k, t, s):
    """|int p(t, x) p(s, x) dx - p(t + s, 0)| in d = 1."""
    if t <= 0 or s <= 0:
        raise ValidationError("Chapman-Kolmogorov check needs t, s > 0")
    if k.d != 1:
        raise ValidationError("Chapman-Kolmogorov check is implemented for d = 1")
    scale = max(t, s) ** (1.0 / k.alpha)
    f = lambda x: float(k.pdf(t, x) * k.pdf(s, x))
    body = quad(f, 0.0, 20 * scale, epsrel=1e-12, what="Chapman-Kolmogorov")
    tail = quad(f, 20 * scale, np.inf, epsrel=1e-10, what="Chapman-Kolmogorov tail")
    return abs(2.0 * (body + tail) - kernel_eval(k, t + s, 0.0))


def product_lower_bound_check(k, t, x, y, a, slack=1e-12):
    """p(t, (x - y)/a) >= p(t, x) p(t, y), valid when p(t, 0) <= 1 and a >= 2."""
    if a < 2:
        raise ValidationError(f"the product bound needs a >= 2, got {a}")
    if kernel_eval(k, t, np.zeros(k.d) if k.d > 1 else 0.0) > 1.0:
        raise ValidationError(f"precondition p(t, 0) <= 1 fails at t={t}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lhs = kernel_eval(k, t, (x - y) / a)
    rhs = kernel_eval(k, t, x) * kernel_eval(k, t, y)
    return bool(np.all(lhs >= rhs - slack))


def upsilon(spec, beta):
    """(1/2pi) int dxi / (beta + 2 Psi(xi)); +inf when alpha <= 1."""
    if beta <= 0:
        raise ValidationError(f"beta must be positive, got {beta}")
    if spec.d != 1:
        raise ValidationError("Upsilon(beta) is finite only in d = 1")
    if spec.alpha <= 1.0:
        return math.inf
    a = spec.alpha
    f = lambda xi: 1.0 / (beta + 2.0 * xi ** a)
    knee = (beta / 2.0) ** (1.0 / a)
    head = quad(f, 0.0, knee, epsabs=0.0, epsrel=1e-13, what="Upsilon")
    tail = quad(f, knee, np.inf, epsabs=0.0, epsrel=1e-13, what="Upsilon")
    return (head + tail) / np.pi


# ---------------------------------------------------------------------------
# comparability envelope


@dataclass(frozen=True)
class EnvelopeConstant:
    """c with c^-1 g <= p <= c g on the fit grid, g = t^(-d/alpha) ^ t/|x|^(d+alpha)."""

    c: float
    grid: dict

    def __post_init__(self):
        if not self.c >= 1.0:
            raise ValidationError(f"envelope constant must be >= 1, got {self.c}")


def envelope_profile(spec, t, r):
    t = np.asarray(t, dtype=float)
    r = np.abs(np.asarray(r, dtype=float))
    a, d = spec.alpha, spec.d
    near = t ** (-d / a)
    with np.errstate(divide="ignore"):
        far = np.where(r > 0, t / r ** (d + a), np.inf)
    return np.minimum(near, far)


def envelope_fit(k, ts, xs):
    """Smallest c such that the two-sided comparison holds on ts x xs."""
    ts = np.asarray(ts, dtype=float).ravel()
    xs = np.abs(np.asarray(xs, dtype=float).ravel())
    if ts.size == 0 or xs.size == 0:
        raise ValidationError("envelope fit needs a nonempty grid")
    if np.any(ts <= 0):
        raise ValidationError("envelope fit needs t > 0 on the whole grid")
    T, X = np.meshgrid(ts, xs, indexing="ij")
    p = k.pdf(T, X)
    if np.any(~(p > 0)):
        i, j = np.argwhere(~(p > 0))[0]
        raise NumericalError(
            f"kernel value {p[i, j]} at t={ts[i]}, x={xs[j]} is not positive; "
            "configure the envelope constant instead")
    g = envelope_profile(k.symbol, T, X)
    c = float(max(np.max(p / g), np.max(g / p)))
    grid = {"t_min": float(ts.min()), "t_max": float(ts.max()), "n_t": int(ts.size),
            "x_max": float(xs.max()), "n_x": int(xs.size)}
    return EnvelopeConstant(c=max(c, 1.0), grid=grid)


def standard_envelope_grid(refine=1):
    """log-spaced t in [0.01, 10] and |x| in [0, 10], 40 points each (times refine)."""
    n = 40 * refine - (refine - 1)
    return np.logspace(-2, 1, n), np.linspace(0.0, 10.0, n)


@lru_cache(maxsize=16)
def default_envelope(alpha, d=1):
    k = KernelHandle(LevySymbolSpec(alpha, d))
    return envelope_fit(k, *standard_envelope_grid())


# ---------------------------------------------------------------------------
# sampling


def sample_stable(spec, t, rng, size=None):
    """Chambers-Mallows-Stuck draws of X_t, E exp(i xi X_t) = exp(-t |xi|^alpha)."""
    if spec.d != 1:
        raise ValidationError("stable sampling is implemented for d = 1")
    a = spec.alpha
    v = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.exponential(1.0, size)
    if a == 1.0:
        x = np.tan(v)
    else:
        x = (np.sin(a * v) / np.cos(v) ** (1.0 / a)
             * (np.cos((1.0 - a) * v) / w) ** ((1.0 - a) / a))
    return t ** (1.0 / a) * x
