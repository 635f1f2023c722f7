"""Monte Carlo moments and increments, Holder and Lyapunov regressions, verdicts.

Every replica r samples its own cloud from derive_seed(master, r) and solves
once; all requested (t, x) points are evaluated on that one path, so increments
are coupled by construction.  Replicas are computed in blocks, optionally in a
process pool, and reduced in replica order, so results do not depend on the
number of workers.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math
import os

import numpy as np

from .bounds import increment_bound_mean, increment_bound_ms
from .errors import ConvergenceError, LevyHeatError, NumericalError, ValidationError
from .measure import fmt, write_csv
from .scenario import norm_grid
from .seeding import replica_rng


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float
    replicas: int
    p: float
    t: float = None
    x: float = None


@dataclass(frozen=True)
class IncrementSeries:
    lags: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray
    p: float
    t1: float = None
    x: float = None
    replicas: int = 0
    norm: MomentEstimate = None

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=float)
        if len(lags) > 1 and np.any(np.diff(lags) >= 0):
            raise ValidationError("increment lags must be strictly decreasing")
        if np.any(np.asarray(self.estimates) < 0):
            raise ValidationError("increment estimates must be nonnegative")
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "estimates", np.asarray(self.estimates, dtype=float))
        object.__setattr__(self, "stderrs", np.asarray(self.stderrs, dtype=float))


def available_jobs():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# replica fan-out


def _block(scenario, master_seed, start, stop, ts, xs):
    out = np.empty((stop - start, len(ts)))
    det = scenario.deterministic(ts, xs) if scenario.noise == "noncompensated" else None
    for r in range(start, stop):
        try:
            cloud = scenario.sample(replica_rng(master_seed, r))
            out[r - start] = scenario.path_values(cloud, ts, xs, det)
        except LevyHeatError as exc:
            # exception objects with extra attributes do not survive pickling
            return ("error", r, type(exc).__name__, str(exc))
    return out


_ERRORS = {"ConvergenceError": ConvergenceError, "NumericalError": NumericalError}


def run_replicas(scenario, master_seed, replicas, ts, xs, jobs=1):
    """Array (replicas, n_points) of u_r(ts[k], xs[k])."""
    if replicas < 1:
        raise ValidationError("at least one replica is required")
    ts = np.asarray(ts, dtype=float).ravel()
    xs = np.asarray(xs, dtype=float).ravel()
    if ts.shape != xs.shape:
        raise ValidationError("evaluation times and positions differ in length")
    jobs = max(1, min(int(jobs), replicas))
    size = max(1, -(-replicas // (8 * jobs)))
    bounds = [(a, min(a + size, replicas)) for a in range(0, replicas, size)]
    args = [(scenario, master_seed, a, b, ts, xs) for a, b in bounds]
    if jobs == 1:
        blocks = [_block(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(_block, *zip(*args)))
    for b in blocks:
        if isinstance(b, tuple):
            _, r, name, msg = b
            cls = _ERRORS.get(name, ValidationError if "Validation" in name else NumericalError)
            raise cls(f"replica {r} failed: {msg}")
    return np.concatenate(blocks, axis=0)


def _summarize(samples):
    """Column means and standard errors; exact for identical samples."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n < 2:
        raise ValidationError("standard errors need at least 2 replicas")
    ref = samples[0]
    mean = ref + np.mean(samples - ref, axis=0)
    se = np.std(samples - ref, axis=0, ddof=1) / math.sqrt(n)
    return mean, se


def _gated(scenario):
    scenario.gate()
    return scenario


# ---------------------------------------------------------------------------
# estimators


def mc_moment(scenario, p, t, x, replicas, master_seed, jobs=1):
    """E|u(t, x)|^p."""
    _gated(scenario)
    u = run_replicas(scenario, master_seed, replicas, [t], [x], jobs)
    mean, se = _summarize(np.abs(u) ** p)
    return MomentEstimate(float(mean[0]), float(se[0]), replicas, p, t, x)


def mc_moments(scenario, p, times, x, replicas, master_seed, jobs=1):
    """E|u(t, x)|^p along a time grid, from one set of paths."""
    _gated(scenario)
    times = np.asarray(times, dtype=float)
    u = run_replicas(scenario, master_seed, replicas, times, np.full(len(times), x), jobs)
    mean, se = _summarize(np.abs(u) ** p)
    return [MomentEstimate(float(m), float(s), replicas, p, float(t), x)
            for m, s, t in zip(mean, se, times)]


def mc_increment(scenario, p, t1, t2, x, replicas, master_seed, jobs=1):
    """E|u(t2, x) - u(t1, x)|^p with both times on the same path."""
    if not 0 <= t1 <= t2 <= scenario.T:
        raise ValidationError(f"need 0 <= t1 <= t2 <= T, got t1={t1}, t2={t2}")
    _gated(scenario)
    u = run_replicas(scenario, master_seed, replicas, [t1, t2], [x, x], jobs)
    mean, se = _summarize(np.abs(u[:, 1] - u[:, 0])[:, None] ** p)
    return MomentEstimate(float(mean[0]), float(se[0]), replicas, p, t2, x)


def dyadic_lags(t1, t2, K=8):
    """h_k = (t2 - t1) 2^-k, k = 0..K."""
    return (t2 - t1) * 2.0 ** -np.arange(K + 1)


def increment_series(scenario, t1, t2, x, replicas, master_seed, K=8, p=None, jobs=1,
                     with_norm=True):
    """Coupled increments at the dyadic lags plus the weighted-norm estimate.

    The norm sup_{t,x} e^(-beta t) E|u(t, x)|^p is estimated on ``norm_grid``
    from the same paths and reported conservatively (mean + 3 s.e. at each point).
    """
    p = scenario.p if p is None else p
    if not 0 <= t1 < t2 <= scenario.T:
        raise ValidationError(f"need 0 <= t1 < t2 <= T, got t1={t1}, t2={t2}")
    _gated(scenario)
    lags = dyadic_lags(t1, t2, K)
    ts = np.concatenate([[t1], t1 + lags])
    xs = np.full(len(ts), float(x))
    if with_norm:
        gt, gx = norm_grid(scenario)
        GT, GX = np.meshgrid(gt, gx, indexing="ij")
        ts, xs = np.concatenate([ts, GT.ravel()]), np.concatenate([xs, GX.ravel()])
    u = run_replicas(scenario, master_seed, replicas, ts, xs, jobs)
    n_inc = K + 2
    mean, se = _summarize(np.abs(u[:, 1:n_inc] - u[:, :1]) ** p)
    norm = None
    if with_norm:
        m, s = _summarize(np.abs(u[:, n_inc:]) ** p)
        w = np.exp(-scenario.beta * ts[n_inc:])
        k = int(np.argmax(w * (m + 3 * s)))
        norm = MomentEstimate(float(w[k] * (m[k] + 3 * s[k])), float(w[k] * s[k]), replicas, p,
                              float(ts[n_inc + k]), float(xs[n_inc + k]))
    return IncrementSeries(lags, mean, se, p, t1, x, replicas, norm)


# ---------------------------------------------------------------------------
# bounds and verdicts


def scenario_bounds(scenario, t1, lags, norm):
    """Analytic increment bounds at t2 = t1 + lag, matched to the scenario's noise.

    ``norm`` is ||u||^2_{2,beta} for compensated noise and ||u||_{1,beta} otherwise.
    """
    K, lip = scenario.K(), scenario.sigma().lip
    u0 = scenario.initial()
    out = []
    for h in lags:
        t2 = t1 + float(h)
        if scenario.noise == "compensated":
            b = increment_bound_ms(scenario.kernel().symbol, u0.l2sq, scenario.lam, K, lip, norm,
                                   scenario.beta, t1, t2)
        else:
            b = increment_bound_mean(scenario.d, scenario.alpha, scenario.envelope(), u0.sup,
                                     scenario.lam, K, lip, norm, scenario.beta, t1, t2)
        out.append(b)
    return out


@dataclass(frozen=True)
class ContinuityReport:
    rows: list
    dominated: bool
    trend: bool
    trend_ratio: float

    @property
    def verdict(self):
        return "PASS" if self.dominated and self.trend else "FAIL"

    def write(self, path):
        write_csv(path, ["lag", "estimate", "stderr", "bound", "verdict"],
                  [[fmt(h), fmt(e), fmt(s), fmt(b), v] for h, e, s, b, v in self.rows])


def continuity_verdict(series, bounds, trend_ratio=0.1, sigmas=3.0):
    """Per lag PASS iff estimate <= bound + 3 s.e.; trend iff smallest <= ratio * largest."""
    if len(bounds) != len(series.lags):
        raise ValidationError("lag sets of the empirical series and the bounds differ")
    rows = []
    for h, e, s, b in zip(series.lags, series.estimates, series.stderrs, bounds):
        lag = b.inputs["t2"] - b.inputs["t1"]
        if not math.isclose(lag, h, rel_tol=1e-9, abs_tol=1e-15):
            raise ValidationError(f"bound lag {lag} does not match empirical lag {h}")
        ok = e <= b.total + sigmas * s
        rows.append((float(h), float(e), float(s), b.total, "PASS" if ok else "FAIL"))
    dominated = all(r[-1] == "PASS" for r in rows)
    largest, smallest = series.estimates[0], series.estimates[-1]
    trend = bool(smallest <= trend_ratio * largest) if len(rows) > 1 else True
    return ContinuityReport(rows, dominated, trend, trend_ratio)


# ---------------------------------------------------------------------------
# regressions


@dataclass(frozen=True)
class HolderFit:
    slope: float
    band: float
    points: int
    p: float

    @property
    def exponent(self):
        """Kolmogorov-Centsov path exponent (m - 1)/p, None when m <= 1."""
        return (self.slope - 1.0) / self.p if self.slope > 1 else None

    @property
    def conclusive(self):
        return self.slope - self.band > 1.0

    @property
    def verdict(self):
        if not self.conclusive:
            return "no KC conclusion"
        return f"Holder exponent up to {self.exponent:.6g}"


BAND_FLOOR = 1e-9


def _wls(x, y, var=None):
    """Slope and its standard error; residual-scaled when variances are unknown or too small."""
    n = len(x)
    w = np.ones(n) if var is None else 1.0 / var
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    resid = y - ym - slope * (x - xm)
    chi2 = float(np.sum(w * resid ** 2)) / max(n - 2, 1)
    scale = chi2 if var is None else max(1.0, chi2)
    return float(slope), math.sqrt(scale / sxx)


def holder_exponent(series, p=None, sigmas=3.0):
    """Log-log slope of E|u(t1 + h) - u(t1)|^p against h with a confidence band.

    Points with nonpositive estimates are dropped.  With standard errors the fit
    is weighted by (estimate / s.e.)^2 (delta method for the logarithm).
    """
    p = series.p if p is None else p
    e = np.asarray(series.estimates, dtype=float)
    keep = e > 0
    if keep.sum() < 4:
        raise ValidationError("Holder regression needs at least 4 positive increment estimates")
    x = np.log(series.lags[keep])
    y = np.log(e[keep])
    se = None if series.stderrs is None else np.asarray(series.stderrs, dtype=float)[keep]
    var = (se / e[keep]) ** 2 if se is not None and np.all(se > 0) else None
    slope, s = _wls(x, y, var)
    return HolderFit(slope, sigmas * s + BAND_FLOOR, int(keep.sum()), p)


@dataclass(frozen=True)
class LyapunovEstimate:
    slope: float
    stderr: float
    moments: list = field(default_factory=list)
    label: str = "finite-horizon proxy for the upper Lyapunov exponent"


def _tail(times, tail_fraction):
    if not 0 < tail_fraction < 1:
        raise ValidationError("tail fraction must lie in (0, 1)")
    n = len(times)
    k = max(2, int(math.ceil(tail_fraction * n)))
    return slice(n - k, n)


def lyapunov_slope(times, moments, tail_fraction=0.5):
    """Least-squares slope of ln(moment) against t over the trailing fraction of the grid."""
    times = np.asarray(times, dtype=float)
    m = np.asarray(moments, dtype=float)
    sl = _tail(times, tail_fraction)
    if np.any(m[sl] <= 0):
        raise ValidationError("nonpositive moment estimate in the regression tail")
    x = times[sl]
    return float(np.polyfit(x, np.log(m[sl]), 1)[0])


def lyapunov_proxy(scenario, p, x0, times, replicas, master_seed, tail_fraction=0.5, jobs=1):
    """t^-1 ln E|u(t, x0)|^p growth rate as a log-linear slope on a finite horizon.

    The standard error uses the replica covariance of |u|^p across times
    (delta method), since all times share the same paths.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(times > scenario.T):
        raise ValidationError("Lyapunov time grid must lie inside [0, T]")
    _gated(scenario)
    u = run_replicas(scenario, master_seed, replicas, times, np.full(len(times), x0), jobs)
    v = np.abs(u) ** p
    mean, se = _summarize(v)
    sl = _tail(times, tail_fraction)
    slope = lyapunov_slope(times, mean, tail_fraction)
    x = times[sl]
    c = (x - x.mean()) / np.sum((x - x.mean()) ** 2)
    g = c / mean[sl]
    vt = v[:, sl] - v[0, sl]
    cov = np.atleast_2d(np.cov(vt, rowvar=False)) / len(v)
    var = float(g @ cov @ g)
    moments = [MomentEstimate(float(m), float(s), replicas, p, float(t), x0)
               for m, s, t in zip(mean, se, times)]
    return LyapunovEstimate(slope, math.sqrt(max(var, 0.0)), moments)


def write_moments(path, estimates):
    write_csv(path, ["t", "moment", "stderr"],
              [[fmt(e.t), fmt(e.value), fmt(e.stderr)] for e in estimates])
