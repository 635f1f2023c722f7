"""A fully specified, picklable problem: kernel, noise, coefficients, initial data, window."""

from dataclasses import dataclass, fields, replace

import numpy as np

from . import coefficients as co
from .bounds import c_dab, existence_condition
from .errors import ExistenceGateError, ValidationError
from .kernel import KernelHandle, LevySymbolSpec, default_envelope
from .measure import LevyMeasureSpec, SpaceTimeWindow, sample_prm
from .solver import (SolverConfig, check_existence_compensated, field_eval,
                     solve_compensated, solve_noncompensated)

NOISES = ("compensated", "noncompensated")
U0_KINDS = ("constant", "gaussian", "indicator")
NU_KINDS = ("atoms", "uniform", "power")


class _Uniform:
    """Constant density; a module-level class so scenarios pickle."""

    def __init__(self, level):
        self.level = level

    def __call__(self, h):
        return np.full(np.shape(h), self.level)


class _Power:
    """|h|^(-1 - index), the small-jump profile of a stable Levy measure."""

    def __init__(self, index):
        self.index = index

    def __call__(self, h):
        return np.abs(h) ** (-1.0 - self.index)


def parse_atoms(text):
    """'h:m, h:m' -> ((h, m), ...)."""
    out = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        try:
            h, m = item.split(":")
            out.append((float(h), float(m)))
        except ValueError:
            raise ValidationError(f"atoms must look like 'h:mass, h:mass', got {item!r}") from None
    if not out:
        raise ValidationError("at least one atom is required")
    return tuple(out)


@dataclass(frozen=True)
class Scenario:
    alpha: float = 2.0
    d: int = 1
    T: float = 1.0
    L: float = 5.0
    beta: float = 2.0
    lam: float = 0.1
    noise: str = "compensated"
    nu_kind: str = "atoms"
    nu_atoms: str = "1:1"
    nu_lo: float = -1.0
    nu_hi: float = 1.0
    nu_mass: float = 1.0
    nu_eps: float = 0.1
    nu_index: float = 0.5
    J: str = "abs"
    J_value: float = 1.0
    g: str = "linear"
    g_scale: float = 1.0
    u0: str = "gaussian"
    u0_value: float = 1.0
    u0_mass: float = 1.0
    u0_variance: float = 1.0
    u0_a: float = -1.0
    u0_b: float = 1.0
    dt: float = 0.02
    dx: float = 0.1
    tol: float = 1e-10
    max_iter: int = 200
    envelope_c: float = None
    override_gate: bool = False

    def __post_init__(self):
        if self.noise not in NOISES:
            raise ValidationError(f"noise must be one of {NOISES}, got {self.noise!r}")
        if self.nu_kind not in NU_KINDS:
            raise ValidationError(f"nu kind must be one of {NU_KINDS}, got {self.nu_kind!r}")
        if self.u0 not in U0_KINDS:
            raise ValidationError(f"u0 must be one of {U0_KINDS}, got {self.u0!r}")
        if self.J not in co.J_PRESETS:
            raise ValidationError(f"J must be one of {tuple(co.J_PRESETS)}, got {self.J!r}")
        if self.g not in co.G_PRESETS:
            raise ValidationError(f"g must be one of {tuple(co.G_PRESETS)}, got {self.g!r}")
        if self.envelope_c is not None and self.envelope_c < 1:
            raise ValidationError("envelope constant must be >= 1")
        # build everything once so bad values fail here rather than in a worker
        self.kernel(), self.measure(), self.sigma(), self.config()

    def with_(self, **kw):
        return replace(self, **kw)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def kernel(self):
        return KernelHandle(LevySymbolSpec(self.alpha, self.d))

    def window(self):
        return SpaceTimeWindow(self.T, self.L, self.d)

    def measure(self):
        if self.nu_kind == "atoms":
            return LevyMeasureSpec(atoms=parse_atoms(self.nu_atoms))
        if self.nu_kind == "uniform":
            width = self.nu_hi - self.nu_lo
            if not width > 0:
                raise ValidationError("uniform nu needs lo < hi")
            return LevyMeasureSpec(density=_Uniform(self.nu_mass / width),
                                   support=(self.nu_lo, self.nu_hi))
        return LevyMeasureSpec(density=_Power(self.nu_index), support=(self.nu_lo, self.nu_hi),
                               eps=self.nu_eps)

    def sigma(self):
        J = co.ConstJ(self.J_value) if self.J == "one" else co.J_PRESETS[self.J]()
        g = co.ZeroG() if self.g == "zero" else co.G_PRESETS[self.g](self.g_scale)
        return co.JumpCoefficientSpec(J, g)

    def initial(self):
        if self.u0 == "constant":
            return co.Constant(self.u0_value)
        if self.u0 == "gaussian":
            return co.GaussianBump(self.u0_mass, self.u0_variance)
        return co.Indicator(self.u0_a, self.u0_b, self.u0_value)

    def config(self):
        return SolverConfig(lam=self.lam, beta=self.beta, window=self.window(), u0=self.initial(),
                            dt=self.dt, dx=self.dx, tol=self.tol, max_iter=self.max_iter,
                            override_gate=self.override_gate, envelope_c=self.envelope_c)

    @property
    def p(self):
        """Moment order matched to the noise: 2 for compensated, 1 otherwise."""
        return 2 if self.noise == "compensated" else 1

    def K(self):
        s, m = self.sigma(), self.measure()
        return s.K2(m) if self.noise == "compensated" else s.K1(m)

    def envelope(self):
        """C(d, alpha): configured, else fitted on the standard grid."""
        if self.envelope_c is not None:
            return float(self.envelope_c)
        if self.alpha == 2.0:
            raise ValidationError(
                "the Gaussian kernel has no two-sided power-law envelope on the fit grid; "
                "set envelope_c explicitly for alpha = 2")
        return default_envelope(self.alpha, self.d).c

    def contraction(self):
        """C_{d,alpha,beta} * lam * K * Lip."""
        return c_dab(self.d, self.alpha, self.beta, self.envelope()) * self.lam * self.K() * self.sigma().lip

    def gate(self):
        """Existence gating; returns True when gated, False when overridden."""
        if self.noise == "compensated":
            return check_existence_compensated(self.kernel(), self.config())
        c = c_dab(self.d, self.alpha, self.beta, self.envelope())
        if existence_condition(self.lam, self.K(), self.sigma().lip, c):
            return True
        if self.override_gate:
            return False
        raise ExistenceGateError(
            f"existence gate: C_(d,alpha,beta) lam K Lip = {self.contraction():.6g} >= 1, so the "
            "contraction condition for a unique solution fails; pass the override flag to run "
            "anyway (results are labeled ungated)")

    def sample(self, rng):
        return sample_prm(self.window(), self.measure(), rng)

    def solve(self, cloud):
        """Solution object callable as u(t, x)."""
        if self.noise == "compensated":
            return solve_compensated(cloud, self.kernel(), self.sigma(), self.config())
        sol = solve_noncompensated(cloud, self.kernel(), self.sigma(), self.config())
        return lambda t, x: field_eval(sol, t, x)

    def path_values(self, cloud, ts, xs, det=None):
        """u(ts[k], xs[k]) on the path driven by ``cloud``."""
        if self.noise == "compensated":
            return self.solve(cloud)(ts, xs)
        sol = solve_noncompensated(cloud, self.kernel(), self.sigma(), self.config())
        return field_eval(sol, ts, xs, det)

    def deterministic(self, t, x):
        return co.deterministic_part(self.kernel(), self.initial(), t, x)


def norm_grid(scenario, nt=11, nx=21):
    """Points (t, x) on which sup_t,x e^(-beta t) E|u|^p is estimated."""
    t = np.linspace(0.0, scenario.T, nt)
    x = np.linspace(-scenario.L, scenario.L, nx)
    return t, x
