"""Flat ``key = value`` scenario files with dotted keys.

Blank lines and ``#`` comments are ignored.  Every key is checked on its own
line as it is read, so errors name the first offending key and where it came
from; cross-key constraints are checked when the scenario is built.
"""

from dataclasses import dataclass, fields, replace
import math

from .errors import ValidationError
from .scenario import Scenario


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _finite(v):
    return math.isfinite(v)


def _choice(*opts):
    def check(v):
        return v in opts
    check.__doc__ = "one of " + ", ".join(opts)
    return check


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _bool(text):
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(text)


def _opt_float(text):
    t = text.strip().lower()
    return None if t in ("", "none", "fit") else float(text)


@dataclass(frozen=True)
class RunParams:
    replicas: int = 1000
    seed: int = 0
    x: float = 0.0
    t1: float = 0.5
    t2: float = 0.75
    K: int = 8
    p: int = 0
    n_times: int = 11
    tail_fraction: float = 0.5
    norm: float = None


# key -> (section, field, parser, check)
KEYS = {
    "kernel.alpha": ("scenario", "alpha", float, lambda v: 0 < v <= 2),
    "kernel.d": ("scenario", "d", int, lambda v: v >= 1),
    "window.T": ("scenario", "T", float, _pos),
    "window.L": ("scenario", "L", float, _pos),
    "beta": ("scenario", "beta", float, _pos),
    "lambda": ("scenario", "lam", float, _nonneg),
    "noise": ("scenario", "noise", str, _choice("compensated", "noncompensated")),
    "nu.kind": ("scenario", "nu_kind", str, _choice("atoms", "uniform", "power")),
    "nu.atoms": ("scenario", "nu_atoms", str, None),
    "nu.lo": ("scenario", "nu_lo", float, _finite),
    "nu.hi": ("scenario", "nu_hi", float, _finite),
    "nu.mass": ("scenario", "nu_mass", float, _pos),
    "nu.eps": ("scenario", "nu_eps", float, _nonneg),
    "nu.index": ("scenario", "nu_index", float, lambda v: 0 < v < 2),
    "sigma.J": ("scenario", "J", str, _choice("abs", "one", "square")),
    "sigma.J_value": ("scenario", "J_value", float, _nonneg),
    "sigma.g": ("scenario", "g", str, _choice("linear", "tanh", "sin", "zero")),
    "sigma.g_scale": ("scenario", "g_scale", float, _finite),
    "u0.kind": ("scenario", "u0", str, _choice("constant", "gaussian", "indicator")),
    "u0.value": ("scenario", "u0_value", float, _nonneg),
    "u0.mass": ("scenario", "u0_mass", float, _nonneg),
    "u0.variance": ("scenario", "u0_variance", float, _pos),
    "u0.a": ("scenario", "u0_a", float, _finite),
    "u0.b": ("scenario", "u0_b", float, _finite),
    "solver.dt": ("scenario", "dt", float, _pos),
    "solver.dx": ("scenario", "dx", float, _pos),
    "solver.tol": ("scenario", "tol", float, _pos),
    "solver.max_iter": ("scenario", "max_iter", int, lambda v: v >= 1),
    "solver.override_existence_gate": ("scenario", "override_gate", _bool, None),
    "envelope.C": ("scenario", "envelope_c", _opt_float, lambda v: v is None or v >= 1),
    "run.replicas": ("run", "replicas", int, lambda v: v >= 2),
    "run.seed": ("run", "seed", int, _nonneg),
    "run.x": ("run", "x", float, _finite),
    "run.t1": ("run", "t1", float, _nonneg),
    "run.t2": ("run", "t2", float, _pos),
    "run.K": ("run", "K", int, lambda v: 3 <= v <= 30),
    "run.p": ("run", "p", int, lambda v: v in (0, 1, 2)),
    "run.n_times": ("run", "n_times", int, lambda v: v >= 2),
    "run.tail_fraction": ("run", "tail_fraction", float, lambda v: 0 < v < 1),
    "run.norm": ("run", "norm", _opt_float, lambda v: v is None or v > 0),
}


def resolve_key(key, where):
    """Full dotted key; a bare name such as 'alpha' resolves when exactly one key ends in '.alpha'."""
    if key in KEYS:
        return key
    matches = [k for k in KEYS if k.endswith("." + key)]
    if len(matches) == 1:
        return matches[0]
    if matches:
        raise ValidationError(f"{where}: key {key!r} is ambiguous ({', '.join(matches)})")
    raise ValidationError(f"{where}: unknown key {key!r}")


def parse_assignment(text, where):
    """'key = value' -> (key, parsed value, section, field)."""
    if "=" not in text:
        raise ValidationError(f"{where}: expected 'key = value', got {text.strip()!r}")
    key, value = (s.strip() for s in text.split("=", 1))
    key = resolve_key(key, where)
    section, name, conv, check = KEYS[key]
    try:
        parsed = conv(value)
    except ValueError:
        raise ValidationError(f"{where}: cannot parse {key} = {value!r}") from None
    if check is not None and not check(parsed):
        hint = f" (must be {check.__doc__})" if check.__doc__ else ""
        raise ValidationError(f"{where}: {key} = {value!r} is out of range{hint}")
    return key, parsed, section, name


def load(lines, overrides=(), source="config"):
    """Scenario and RunParams from config lines plus ``--set`` overrides."""
    vals = {"scenario": {}, "run": {}}
    for n, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        _, v, section, name = parse_assignment(text, f"{source} line {n}")
        vals[section][name] = v
    for item in overrides:
        _, v, section, name = parse_assignment(item, f"--set {item!r}")
        vals[section][name] = v
    try:
        scenario = Scenario(**vals["scenario"])
    except ValidationError as exc:
        raise ValidationError(f"{source}: {exc}") from None
    run = RunParams(**vals["run"])
    if not run.t1 < run.t2 <= scenario.T:
        raise ValidationError(f"{source}: need run.t1 < run.t2 <= window.T")
    return scenario, run


def load_file(path, overrides=()):
    with open(path, encoding="utf-8") as fh:
        return load(fh.read().splitlines(), overrides, source=str(path))


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump(scenario, run):
    """Effective configuration text; loading it reproduces the same scenario and run."""
    lines = []
    for key, (section, name, _, _) in KEYS.items():
        v = getattr(scenario if section == "scenario" else run, name)
        if v is None:
            continue
        lines.append(f"{key} = {_format(v)}")
    return "\n".join(lines) + "\n"


def with_overrides(scenario, run, **kw):
    s_names = {f.name for f in fields(Scenario)}
    s_kw = {k: v for k, v in kw.items() if k in s_names}
    r_kw = {k: v for k, v in kw.items() if k not in s_names}
    return (replace(scenario, **s_kw) if s_kw else scenario), (replace(run, **r_kw) if r_kw else run)
