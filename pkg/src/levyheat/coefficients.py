"""Initial data and jump coefficients sigma(u, h) = J(h) g(u)."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from ._numerics import composite_gauss, quad
from .errors import ValidationError

# ---------------------------------------------------------------------------
# initial conditions


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError("initial data must be nonnegative")

    def __call__(self, x, d=1):
        x = np.asarray(x, dtype=float)
        shape = x.shape if d == 1 else x.shape[:-1]
        return np.full(shape, float(self.value))

    @property
    def sup(self):
        return abs(self.value)

    @property
    def l2sq(self):
        return 0.0 if self.value == 0 else math.inf

    def convolve(self, kernel, t, x):
        return self(x, kernel.d) + 0.0 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class GaussianBump:
    """mass times the centred Gaussian density with the given variance."""

    mass: float = 1.0
    variance: float = 1.0

    def __post_init__(self):
        if self.mass < 0 or self.variance <= 0:
            raise ValidationError("Gaussian bump needs mass >= 0 and variance > 0")

    def __call__(self, x, d=1):
        x = np.asarray(x, dtype=float)
        r2 = x * x if d == 1 else np.sum(x * x, axis=-1)
        return self.mass * (2 * np.pi * self.variance) ** (-d / 2) * np.exp(-r2 / (2 * self.variance))

    @property
    def sup(self):
        return self.mass / math.sqrt(2 * math.pi * self.variance)

    @property
    def l2sq(self):
        return self.mass ** 2 / (2 * math.sqrt(math.pi * self.variance))

    def convolve(self, kernel, t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float)) if kernel.d == 1 \
            else (np.asarray(t, float), np.asarray(x, float))
        a, d, v, m = kernel.alpha, kernel.d, self.variance, self.mass
        if a == 2.0:
            var = v + 2 * t
            r2 = x * x if d == 1 else np.sum(x * x, axis=-1)
            return m * (2 * np.pi * var) ** (-d / 2) * np.exp(-r2 / (2 * var))
        if a == 1.0:
            return m * special.voigt_profile(x, math.sqrt(v), t)
        return m * _fourier_gaussian(a, v, t, x)


def _fourier_gaussian(alpha, v, t, x):
    """(1/pi) int_0^inf exp(-t xi^alpha - v xi^2 / 2) cos(xi x) dxi."""
    shape = np.shape(x)
    t, x = np.ravel(t), np.ravel(x)
    xi_max = math.sqrt(2 * 40.0 / v)
    reach = float(np.max(np.abs(x), initial=0.0)) + 1.0
    width = min(0.25, 1.0 / reach)
    uniform = np.arange(width, xi_max + width, width)
    edges = np.concatenate([[0.0], width * 2.0 ** -np.arange(40, 0, -1), uniform])
    nodes, weights = composite_gauss(edges)
    base = weights * np.exp(-0.5 * v * nodes ** 2) / np.pi
    out = np.empty(len(x))
    for lo in range(0, len(x), 512):
        sl = slice(lo, lo + 512)
        damp = np.exp(-np.outer(t[sl], nodes ** alpha))
        out[sl] = np.sum(damp * np.cos(np.outer(x[sl], nodes)) * base, axis=1)
    return out.reshape(shape)


@dataclass(frozen=True)
class Indicator:
    """height on [a, b], zero elsewhere (d = 1)."""

    a: float = -1.0
    b: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if not self.a < self.b or self.height < 0:
            raise ValidationError("indicator needs a < b and height >= 0")

    def __call__(self, x, d=1):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), float(self.height), 0.0)

    @property
    def sup(self):
        return abs(self.height)

    @property
    def l2sq(self):
        return self.height ** 2 * (self.b - self.a)

    def convolve(self, kernel, t, x):
        x = np.asarray(x, dtype=float)
        return self.height * kernel.sf_interval(t, x - self.b, x - self.a)


@dataclass(frozen=True)
class Pointwise:
    """Arbitrary bounded nonnegative u0; convolution by adaptive quadrature (d = 1)."""

    fn: object
    bound: float = 50.0

    def __call__(self, x, d=1):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    @property
    def sup(self):
        grid = np.linspace(-self.bound, self.bound, 20001)
        return float(np.max(np.abs(self(grid))))

    @property
    def l2sq(self):
        return quad(lambda y: float(self(y)) ** 2, -np.inf, np.inf, what="int u0^2")

    def convolve(self, kernel, t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        out = np.empty(t.shape)
        for idx in np.ndindex(t.shape):
            ti, xi = float(t[idx]), float(x[idx])
            f = lambda y: float(kernel.pdf(ti, xi - y) * self(y))
            out[idx] = (quad(f, -np.inf, -self.bound, what="deterministic part")
                        + quad(f, -self.bound, self.bound, points=[xi] if abs(xi) < self.bound else None,
                               limit=1000, what="deterministic part")
                        + quad(f, self.bound, np.inf, what="deterministic part"))
        return out


def deterministic_part(kernel, u0, t, x):
    """(p(t) * u0)(x); u0(x) at t = 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("deterministic part needs t >= 0")
    x = np.asarray(x, dtype=float)
    if not np.any(t == 0):
        out = u0.convolve(kernel, t, x)
    else:
        tb, xb = (np.broadcast_arrays(t, x) if kernel.d == 1
                  else (np.broadcast_to(t, x.shape[:-1]), x))
        out = np.empty(tb.shape)
        zero = tb == 0
        out[zero] = u0(xb[zero], kernel.d)
        if (~zero).any():
            out[~zero] = u0.convolve(kernel, tb[~zero], xb[~zero])
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# sigma(u, h) = J(h) g(u)


@dataclass(frozen=True)
class AbsJ:
    def __call__(self, h):
        return np.abs(h)


@dataclass(frozen=True)
class ConstJ:
    value: float = 1.0

    def __call__(self, h):
        return np.full(np.shape(h), float(self.value))


@dataclass(frozen=True)
class SquareJ:
    def __call__(self, h):
        return np.asarray(h, dtype=float) ** 2


@dataclass(frozen=True)
class LinearG:
    scale: float = 1.0

    def __call__(self, u):
        return self.scale * np.asarray(u, dtype=float)

    @property
    def lip(self):
        return abs(self.scale)


@dataclass(frozen=True)
class TanhG:
    scale: float = 1.0

    def __call__(self, u):
        return self.scale * np.tanh(u)

    @property
    def lip(self):
        return abs(self.scale)


@dataclass(frozen=True)
class SinG:
    scale: float = 1.0

    def __call__(self, u):
        return self.scale * np.sin(u)

    @property
    def lip(self):
        return abs(self.scale)


@dataclass(frozen=True)
class ZeroG:
    def __call__(self, u):
        return np.zeros(np.shape(u))

    @property
    def lip(self):
        return 0.0


J_PRESETS = {"abs": AbsJ, "one": ConstJ, "square": SquareJ}
G_PRESETS = {"linear": LinearG, "tanh": TanhG, "sin": SinG, "zero": ZeroG}


@dataclass(frozen=True)
class JumpCoefficientSpec:
    """sigma(u, h) = J(h) g(u) with g Lipschitz and g(0) = 0.

    Then |sigma(0, h)| = 0 <= J(h) and |sigma(x, h) - sigma(y, h)| <= J(h) Lip |x - y|.
    ``lip`` defaults to the Lipschitz constant advertised by g.
    """

    J: object
    g: object
    lip: float = None

    def __post_init__(self):
        lip = self.lip if self.lip is not None else getattr(self.g, "lip", None)
        if lip is None or lip < 0:
            raise ValidationError("a nonnegative Lipschitz constant for g is required")
        if abs(float(self.g(0.0))) > 1e-15:
            raise ValidationError("g(0) must vanish")
        object.__setattr__(self, "lip", float(lip))

    def __call__(self, u, h):
        return self.J(h) * self.g(u)

    def K1(self, measure):
        """int J dnu (non-compensated constant K)."""
        return measure.integrate(self.J, what="int J dnu")

    def K2(self, measure):
        """int J^2 dnu (compensated constant K)."""
        return measure.integrate(lambda h: self.J(h) ** 2, what="int J^2 dnu")

    def check_positive(self, measure):
        h = (np.array([a[0] for a in measure.atoms]) if measure.is_atomic
             else np.linspace(*[np.clip(v, -1e6, 1e6) for v in measure.support], 1001))
        if np.any(np.asarray(self.J(h)) < 0):
            raise ValidationError("J must be nonnegative on the support of nu")
