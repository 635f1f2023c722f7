"""Finite-activity Levy measures and Poisson random measures on space-time windows."""

from dataclasses import dataclass, field
import csv
import math

import numpy as np

from ._numerics import quad
from .errors import QuadratureError, ValidationError

DEFAULT_KNOTS = 2 ** 14


@dataclass(frozen=True)
class LevyMeasureSpec:
    """Jump-size measure nu(dh) on the real line.

    Atomic form: ``atoms`` is a sequence of (h, mass).  Density form: ``density``
    is a vectorized function on ``support`` = (lo, hi); jumps with |h| < ``eps``
    are discarded so the total mass is finite.
    """

    atoms: tuple = None
    density: object = None
    support: tuple = None
    eps: float = 0.0
    knots: int = DEFAULT_KNOTS
    total_mass: float = field(init=False, default=None)
    levy_integral: float = field(init=False, default=None)

    def __post_init__(self):
        if (self.atoms is None) == (self.density is None):
            raise ValidationError("give exactly one of atoms or density")
        if self.atoms is not None:
            atoms = tuple((float(h), float(m)) for h, m in self.atoms)
            if any(m < 0 or not math.isfinite(m) for _, m in atoms):
                raise ValidationError("atom masses must be finite and nonnegative")
            object.__setattr__(self, "atoms", atoms)
        else:
            if self.support is None:
                raise ValidationError("density form needs a support (lo, hi)")
            lo, hi = map(float, self.support)
            if not lo < hi:
                raise ValidationError(f"empty support {self.support}")
            if self.eps < 0:
                raise ValidationError("truncation eps must be >= 0")
            object.__setattr__(self, "support", (lo, hi))
        levy = self.integrate(lambda h: np.minimum(1.0, h * h), what="int (1 ^ h^2) dnu")
        mass = self.integrate(np.ones_like, what="total mass")
        if not mass > 0:
            raise ValidationError("Levy measure has zero total mass")
        object.__setattr__(self, "levy_integral", levy)
        object.__setattr__(self, "total_mass", mass)

    @property
    def is_atomic(self):
        return self.atoms is not None

    def _pieces(self):
        # split at the origin so quadrature sees the singularity as an endpoint
        lo, hi = self.support
        e = self.eps
        pieces = []
        if lo < -e:
            pieces.append((lo, min(hi, -e)))
        if hi > e:
            pieces.append((max(lo, e), hi))
        return pieces

    def integrate(self, fn, what="integral"):
        """int fn(h) nu(dh); sums exactly for atoms, adaptive quadrature otherwise."""
        if self.is_atomic:
            h = np.array([a[0] for a in self.atoms])
            m = np.array([a[1] for a in self.atoms])
            return float(np.sum(np.asarray(fn(h), dtype=float) * m))
        total = 0.0
        for a, b in self._pieces():
            if a >= b:
                continue
            g = lambda h: float(np.asarray(fn(np.asarray(h)), dtype=float) * self.density(np.asarray(h)))
            try:
                with np.errstate(all="ignore"):
                    total += quad(g, a, b, epsrel=1e-10, what=what)
            except QuadratureError as exc:
                raise ValidationError(f"{what} diverges or fails to converge: {exc}") from exc
        return total

    def mass_in(self, marks):
        """nu(B) for a mark set B (see ``select``)."""
        if marks is None:
            return self.total_mass
        if self.is_atomic:
            h = np.array([a[0] for a in self.atoms])
            m = np.array([a[1] for a in self.atoms])
            return float(np.sum(m[select(marks, h)]))
        if callable(marks):
            raise ValidationError("nu(B) for a density measure needs B given as intervals")
        return sum(self._interval_mass(a, b) for a, b in _intervals(marks))

    def _interval_mass(self, a, b):
        total = 0.0
        for lo, hi in self._pieces():
            lo, hi = max(lo, a), min(hi, b)
            if lo < hi:
                total += quad(lambda h: float(self.density(np.asarray(h))), lo, hi,
                              epsrel=1e-10, what="nu(B)")
        return total

    def sampler(self):
        """Return draw(rng, n) producing i.i.d. marks from nu / total_mass."""
        if self.is_atomic:
            h = np.array([a[0] for a in self.atoms])
            cum = np.cumsum([a[1] for a in self.atoms])
            cum = cum / cum[-1]

            def draw(rng, n):
                return h[np.searchsorted(cum, rng.random(n), side="right").clip(max=len(h) - 1)]
            return draw
        grid, cdf = self._inverse_table()

        def draw(rng, n):
            return np.interp(rng.random(n), cdf, grid)
        return draw

    def _inverse_table(self):
        cached = self.__dict__.get("_table")
        if cached is not None:
            return cached
        pieces = [(a, b) for a, b in self._pieces() if a < b]
        lengths = np.array([b - a for a, b in pieces])
        counts = np.maximum(2, np.round(self.knots * lengths / lengths.sum()).astype(int))
        grids, cdfs, acc = [], [], 0.0
        for (a, b), n in zip(pieces, counts):
            x = np.linspace(a, b, n)
            f = np.asarray(self.density(x), dtype=float)
            c = acc + np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))])
            acc = c[-1]
            grids.append(x)
            cdfs.append(c)
        grid = np.concatenate(grids)
        cdf = np.concatenate(cdfs) / acc
        object.__setattr__(self, "_table", (grid, cdf))
        return grid, cdf


def atomic(*atoms):
    return LevyMeasureSpec(atoms=tuple(atoms))


def _intervals(spec):
    """Normalize an interval spec to a list of (lo, hi) pairs."""
    if isinstance(spec, tuple) and len(spec) == 2 and np.isscalar(spec[0]):
        return [(float(spec[0]), float(spec[1]))]
    return [(float(a), float(b)) for a, b in spec]


def select(spec, values):
    """Boolean mask of values in a set.

    ``spec`` is None (everything), a half-open interval (lo, hi) meaning
    lo <= v < hi, a list of such intervals (a union), or a callable returning a
    mask.  For d > 1 positions an interval is a pair of corner vectors.
    """
    values = np.asarray(values, dtype=float)
    if spec is None:
        return np.ones(values.shape[0], dtype=bool)
    if callable(spec):
        return np.asarray(spec(values), dtype=bool)
    if values.ndim == 2:
        boxes = [spec] if (len(spec) == 2 and np.ndim(spec[0]) == 1) else spec
        mask = np.zeros(values.shape[0], dtype=bool)
        for lo, hi in boxes:
            lo, hi = np.asarray(lo, float), np.asarray(hi, float)
            mask |= np.all((values >= lo) & (values < hi), axis=1)
        return mask
    mask = np.zeros(values.shape, dtype=bool)
    for lo, hi in _intervals(spec):
        mask |= (values >= lo) & (values < hi)
    return mask


def set_volume(spec, window):
    """Lebesgue measure of a spatial set inside the window (intervals/boxes only)."""
    if spec is None:
        return window.volume / window.T
    if callable(spec):
        raise ValidationError("volume of a callable set is not computable")
    L = window.L
    if window.d == 1:
        return float(sum(max(0.0, min(b, L) - max(a, -L)) for a, b in _intervals(spec)))
    boxes = [spec] if (len(spec) == 2 and np.ndim(spec[0]) == 1) else spec
    return float(sum(np.prod(np.clip(np.minimum(hi, L) - np.maximum(lo, -L), 0, None))
                     for lo, hi in ((np.asarray(a, float), np.asarray(b, float)) for a, b in boxes)))


@dataclass(frozen=True)
class SpaceTimeWindow:
    """(0, T] x [-L, L]^d."""

    T: float
    L: float
    d: int = 1

    def __post_init__(self):
        if not (self.T > 0 and self.L > 0):
            raise ValidationError(f"window needs T > 0 and L > 0, got T={self.T}, L={self.L}")
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(f"window dimension must be a positive integer, got {self.d}")

    @property
    def volume(self):
        return self.T * (2.0 * self.L) ** self.d


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Time-sorted Poisson events (s_i, y_i, h_i) in a window."""

    times: np.ndarray
    positions: np.ndarray
    marks: np.ndarray
    window: SpaceTimeWindow
    measure: LevyMeasureSpec = None
    seed: object = None

    def __post_init__(self):
        s = np.asarray(self.times, dtype=float).ravel()
        y = np.asarray(self.positions, dtype=float).reshape(len(s), self.window.d)
        h = np.asarray(self.marks, dtype=float).ravel()
        if len(h) != len(s):
            raise ValidationError("times and marks differ in length")
        order = np.argsort(s, kind="stable")
        s, y, h = s[order], y[order], h[order]
        w = self.window
        if len(s) and (s[0] < 0 or s[-1] > w.T or np.any(np.abs(y) > w.L)):
            raise ValidationError("cloud has events outside its window")
        for name, arr in (("times", s), ("positions", y), ("marks", h)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.times)

    @property
    def y1(self):
        """Positions as a flat array (d = 1)."""
        return self.positions[:, 0]


def sample_prm(window, measure, rng):
    """Sample a Poisson random measure with intensity ds dy nu(dh) on the window."""
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = rng
        rng = np.random.default_rng(rng)
    n = rng.poisson(window.volume * measure.total_mass)
    s = np.sort(rng.uniform(0.0, window.T, n))
    y = rng.uniform(-window.L, window.L, (n, window.d))
    h = measure.sampler()(rng, n)
    return PointCloud(s, y, h, window, measure, seed)


def count_events(cloud, t, space=None, marks=None):
    """#{i : s_i <= t, y_i in space, h_i in marks}."""
    if len(cloud) == 0:
        return 0
    pos = cloud.positions[:, 0] if cloud.window.d == 1 else cloud.positions
    mask = (cloud.times <= t) & select(space, pos) & select(marks, cloud.marks)
    return int(mask.sum())


def compensator(t, space_volume, nu_b):
    """E N((0, t], A x B) = t |A| nu(B)."""
    return t * space_volume * nu_b


def rectangle_compensator(t, space, marks, window, measure):
    return compensator(t, set_volume(space, window), measure.mass_in(marks))


# ---------------------------------------------------------------------------
# CSV


def fmt(x):
    """17 significant digits; round-trips any double exactly."""
    return format(float(x), ".17g")


def cloud_header(d):
    return ["s"] + [f"y{i + 1}" for i in range(d)] + ["h"]


def cloud_rows(cloud, extra=()):
    for i in range(len(cloud)):
        row = [cloud.times[i], *cloud.positions[i], cloud.marks[i]]
        row += [col[i] for col in extra]
        yield [fmt(v) for v in row]


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_cloud(cloud, path):
    write_csv(path, cloud_header(cloud.window.d), cloud_rows(cloud))


def read_cloud(path, window, measure=None):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header != cloud_header(window.d):
        raise ValidationError(f"unexpected cloud header {header}")
    data = np.array(body, dtype=float).reshape(len(body), window.d + 2)
    return PointCloud(data[:, 0], data[:, 1:-1], data[:, -1], window, measure)
