"""Compactly supported probability measures on the real line.

A measure is carried in two coupled representations:

* density samples on a node grid (plus optional exact atoms), used for
  pointwise work such as Hilbert transforms and moments, and
* a quantile table on a uniform mass grid, used for every optimal-transport
  functional (Wasserstein distance, maximal correlation, displacement
  interpolation, logarithmic energy).

The transport functionals all evaluate the same piecewise-linear quantile
model (equal-mass blocks between quantile edges), so algebraic identities
between them hold to round-off rather than to quadrature tolerance.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidInputError

DEFAULT_NODES = 2048
DEFAULT_CELLS = 1024

_FLAT_TOL = 1e-14


def chebyshev_nodes(a, b, n):
    """Chebyshev-Lobatto points on [a, b], increasing, endpoints included."""
    theta = np.linspace(0.0, np.pi, n)
    return 0.5 * (a + b) - 0.5 * (b - a) * np.cos(theta)


def _log_kernel_primitive(u):
    # Second primitive of -log|u|; C^1 across 0 with value 0 there.
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    nz = u != 0.0
    un = u[nz]
    out[nz] = 0.25 * un * un * (3.0 - 2.0 * np.log(np.abs(un)))
    return out


class GridMeasure:
    """A compactly supported probability measure on the line.

    Instances are immutable by convention; every operation returns a new
    measure.  Use the ``from_*`` constructors, not ``__init__`` directly.
    """

    def __init__(self, support, segments, atoms, edges, density_fn=None,
                 quantiles_primary=False):
        self.support = (float(support[0]), float(support[1]))
        self._segments = [(np.asarray(x, float), np.asarray(d, float)) for x, d in segments]
        self.atoms = sorted((float(x), float(w)) for x, w in atoms)
        self._edges = np.asarray(edges, dtype=float)
        self.density_fn = density_fn
        self.mixed = bool(self._segments) and bool(self.atoms)
        # when True the stored quantile table is the authoritative view and
        # any density samples are a derived convenience (pushforwards,
        # displacement interpolants, particle clouds)
        self._quantiles_primary = bool(quantiles_primary)
        self._splines = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_density(cls, nodes, density, support=None, atoms=(), normalize=False,
                     n_cells=DEFAULT_CELLS, density_fn=None, validate=True):
        """Build a measure from density samples (piecewise linear between nodes).

        ``normalize=True`` rescales the density so that the total mass
        (including any atoms) is exactly one.
        """
        nodes = np.asarray(nodes, dtype=float)
        density = np.asarray(density, dtype=float)
        if nodes.ndim != 1 or nodes.shape != density.shape or nodes.size < 2:
            raise InvalidInputError("nodes and density must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidInputError("nodes must be strictly increasing")
        if np.min(density) < -1e-9:
            raise InvalidInputError("density must be nonnegative")
        density = np.clip(density, 0.0, None)
        atom_mass = sum(w for _, w in atoms)
        ac_mass = float(np.trapezoid(density, nodes))
        if normalize:
            if ac_mass <= 0:
                raise InvalidInputError("cannot normalize a zero density")
            density = density * ((1.0 - atom_mass) / ac_mass)
            ac_mass = 1.0 - atom_mass
        if support is None:
            lo = min([nodes[0]] + [x for x, _ in atoms])
            hi = max([nodes[-1]] + [x for x, _ in atoms])
            support = (lo, hi)
        m = cls(support, [(nodes, density)], list(atoms), np.zeros(2), density_fn=density_fn)
        m._edges = m._exact_quantile(np.linspace(0.0, 1.0, n_cells + 1))
        if validate:
            m.validate()
        return m

    @classmethod
    def from_callable(cls, fn, support, n_nodes=DEFAULT_NODES, n_cells=DEFAULT_CELLS,
                      normalize=True, validate=True):
        """Sample a density callable on a Chebyshev-spaced node grid."""
        nodes = chebyshev_nodes(support[0], support[1], n_nodes)
        vals = np.clip(np.asarray(fn(nodes), dtype=float), 0.0, None)
        return cls.from_density(nodes, vals, support=support, normalize=normalize,
                                n_cells=n_cells, density_fn=fn, validate=validate)

    @classmethod
    def from_atoms(cls, atoms, n_cells=DEFAULT_CELLS):
        """A purely atomic measure from (location, mass) pairs."""
        atoms = sorted((float(x), float(w)) for x, w in atoms)
        if not atoms or any(w <= 0 for _, w in atoms):
            raise InvalidInputError("atoms must be nonempty with positive masses")
        total = sum(w for _, w in atoms)
        if abs(total - 1.0) > 1e-10:
            raise InvalidInputError("atom masses must sum to one")
        support = (atoms[0][0], atoms[-1][0])
        m = cls(support, [], atoms, np.zeros(2))
        m._edges = m._exact_quantile(np.linspace(0.0, 1.0, n_cells + 1))
        return m

    @classmethod
    def from_quantile_edges(cls, edges, validate=True):
        """Build a measure from quantile values on the uniform edge grid j/m.

        Runs of exactly equal edges become atoms; the rest is carried as the
        equal-mass block model with no density samples attached.
        """
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 3:
            raise InvalidInputError("need at least 3 quantile edge values")
        if np.any(np.diff(edges) < -1e-12 * (abs(edges[-1] - edges[0]) + 1.0)):
            raise InvalidInputError("quantile edges must be nondecreasing")
        edges = np.maximum.accumulate(edges)
        n = edges.size - 1
        scale = edges[-1] - edges[0]
        flat = np.diff(edges) <= _FLAT_TOL * (scale + 1.0)
        atoms = []
        if flat.any():
            j = 0
            while j < n:
                if flat[j]:
                    k = j
                    while k < n and flat[k]:
                        k += 1
                    atoms.append((float(edges[j]), (k - j) / n))
                    j = k
                else:
                    j += 1
        m = cls((edges[0], edges[-1]), [], atoms, edges, quantiles_primary=True)
        if validate:
            m.validate()
        return m

    # -- basic accessors ---------------------------------------------------

    @property
    def nodes(self):
        if not self._segments:
            return None
        if len(self._segments) == 1:
            return self._segments[0][0]
        return np.concatenate([x for x, _ in self._segments])

    @property
    def density(self):
        if not self._segments:
            return None
        if len(self._segments) == 1:
            return self._segments[0][1]
        return np.concatenate([d for _, d in self._segments])

    @property
    def quantiles(self):
        """Quantile values on the interior uniform grid s_j = j/m."""
        return self._edges[1:-1]

    @property
    def n_cells(self):
        return self._edges.size - 1

    def is_atomic(self):
        return bool(self.atoms) and not self._segments

    def total_mass(self):
        ac = sum(float(np.trapezoid(d, x)) for x, d in self._segments)
        return ac + sum(w for _, w in self.atoms)

    # -- exact CDF / quantile machinery -------------------------------------

    def _items(self):
        # Ordered list of mass-carrying pieces: ("cell", x0, x1, d0, d1, mass)
        # for density cells and ("atom", x, mass) for atoms.
        items = []
        for xs, ds in self._segments:
            widths = np.diff(xs)
            masses = 0.5 * (ds[:-1] + ds[1:]) * widths
            for i in range(xs.size - 1):
                if masses[i] > 0:
                    items.append(("cell", xs[i], xs[i + 1], ds[i], ds[i + 1], masses[i]))
        for x, w in self.atoms:
            items.append(("atom", x, x, 0.0, 0.0, w))
        items.sort(key=lambda it: (it[1], it[2]))
        return items

    def _exact_quantile(self, s):
        """Generalized inverse CDF, exact for the stored representation."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        items = self._items()
        cum = np.concatenate([[0.0], np.cumsum([it[5] for it in items])])
        total = cum[-1]
        out = np.empty_like(s)
        # mass level s*total falls in item i when cum[i] < s*total <= cum[i+1]
        idx = np.clip(np.searchsorted(cum, s * total, side="left") - 1, 0, len(items) - 1)
        for k, (sk, i) in enumerate(zip(s, idx)):
            kind, x0, x1, d0, d1, mass = items[i]
            if kind == "atom":
                out[k] = x0
                continue
            rem = min(max(sk * total - cum[i], 0.0), mass)
            slope = (d1 - d0) / (x1 - x0)
            if abs(slope) < 1e-300:
                out[k] = x0 + (rem / mass) * (x1 - x0) if mass > 0 else x0
                continue
            disc = d0 * d0 + 2.0 * slope * rem
            root = (math.sqrt(max(disc, 0.0)) - d0) / slope
            out[k] = min(max(x0 + root, x0), x1)
        return out

    def cdf(self, x):
        """CDF at x (right-continuous), exact for the stored representation."""
        xq = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(xq)
        for xs, ds in self._segments:
            widths = np.diff(xs)
            cellmass = 0.5 * (ds[:-1] + ds[1:]) * widths
            cum = np.concatenate([[0.0], np.cumsum(cellmass)])
            pos = np.clip(np.searchsorted(xs, xq, side="right") - 1, 0, xs.size - 2)
            t = np.clip((xq - xs[pos]) / widths[pos], 0.0, 1.0)
            d0 = ds[pos]
            slope = (ds[pos + 1] - ds[pos])
            part = widths[pos] * (d0 * t + 0.5 * slope * t * t)
            inside = cum[pos] + part
            out += np.where(xq < xs[0], 0.0, np.where(xq >= xs[-1], cum[-1], inside))
        for xa, wa in self.atoms:
            out += np.where(xq >= xa, wa, 0.0)
        return out if np.ndim(x) else float(out[0])

    # -- model quantile (equal-mass block) -----------------------------------

    def _model_quantile(self, s):
        grid = np.linspace(0.0, 1.0, self._edges.size)
        return np.interp(s, grid, self._edges)

    def _resampled_edges(self, n_cells):
        if n_cells == self.n_cells:
            return self._edges
        return self._model_quantile(np.linspace(0.0, 1.0, n_cells + 1))

    # -- misc ----------------------------------------------------------------

    def translate(self, c):
        c = float(c)
        segs = [(x + c, d.copy()) for x, d in self._segments]
        atoms = [(x + c, w) for x, w in self.atoms]
        fn = None
        if self.density_fn is not None:
            base = self.density_fn
            fn = lambda x: base(np.asarray(x) - c)  # noqa: E731
        return GridMeasure((self.support[0] + c, self.support[1] + c),
                           segs, atoms, self._edges + c, density_fn=fn)

    def center(self):
        return self.translate(-barycenter(self))

    def validate(self, cdf_tol=1e-8, mass_tol=1e-10):
        lo, hi = self.support
        if not hi > lo or not np.isfinite([lo, hi]).all():
            raise InvalidInputError("support must be a finite nondegenerate interval")
        for xs, ds in self._segments:
            if np.any(np.diff(xs) <= 0):
                raise InvalidInputError("nodes must be strictly increasing")
            if np.min(ds) < 0:
                raise InvalidInputError("density must be nonnegative")
            if xs[0] < lo - 1e-12 or xs[-1] > hi + 1e-12:
                raise InvalidInputError("nodes outside support")
        if any(w <= 0 for _, w in self.atoms):
            raise InvalidInputError("atom masses must be positive")
        if self.atoms and self._segments and not self.mixed:
            raise InvalidInputError("atoms and density both present but not flagged mixed")
        total = self.total_mass()
        if self._segments and abs(total - 1.0) > mass_tol:
            raise InvalidInputError(f"total mass {total} differs from 1")
        if np.any(np.diff(self._edges) < -1e-12 * (hi - lo)):
            raise InvalidInputError("quantiles must be nondecreasing")
        if self._segments and not self.atoms:
            # quantile table consistent with the density CDF at interior grid points
            s = np.linspace(0.0, 1.0, min(self.n_cells, 64) + 1)[1:-1]
            q = self._exact_quantile(s)
            f = self.cdf(q)
            if np.max(np.abs(f - s)) > cdf_tol:
                raise InvalidInputError("quantiles inconsistent with density CDF")
        return True

    # -- serialization -------------------------------------------------------

    def block_density_estimate(self):
        """Midpoint density samples of the equal-mass block model."""
        e = self._edges
        d = np.diff(e)
        keep = d > _FLAT_TOL * (abs(e[-1] - e[0]) + 1.0)
        mids = 0.5 * (e[:-1] + e[1:])[keep]
        dens = (1.0 / d.size) / d[keep]
        return mids, dens

    def to_dict(self):
        nodes, density = self.nodes, self.density
        if nodes is None and not self.is_atomic():
            nodes, density = self.block_density_estimate()
        d = {
            "support": [self.support[0], self.support[1]],
            "nodes": [] if nodes is None else list(map(float, nodes)),
            "density": [] if density is None else list(map(float, density)),
            "atoms": [[x, w] for x, w in self.atoms],
            "quantiles": list(map(float, self.quantiles)),
        }
        if self._quantiles_primary:
            d["quantiles_primary"] = True
        if len(self._segments) > 1 or (self._segments and self._quantiles_primary):
            d["segment_lengths"] = [int(x.size) for x, _ in self._segments]
        return d

    @classmethod
    def from_dict(cls, d):
        support = tuple(d["support"])
        atoms = [tuple(a) for a in d.get("atoms", [])]
        q = np.asarray(d.get("quantiles", []), dtype=float)
        edges = np.concatenate([[support[0]], q, [support[1]]])
        primary = bool(d.get("quantiles_primary"))
        segments = []
        if not primary or d.get("segment_lengths"):
            nodes = np.asarray(d.get("nodes", []), dtype=float)
            dens = np.asarray(d.get("density", []), dtype=float)
            if nodes.size:
                lengths = d.get("segment_lengths", [nodes.size])
                pos = 0
                for ln in lengths:
                    segments.append((nodes[pos:pos + ln], dens[pos:pos + ln]))
                    pos += ln
        return cls(support, segments, atoms, edges, quantiles_primary=primary)

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path):
        try:
            d = json.loads(text_or_path)
        except (ValueError, TypeError):
            with open(text_or_path) as fh:
                d = json.load(fh)
        return cls.from_dict(d)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["node", "density"])
        if self.nodes is not None:
            for x, d in zip(self.nodes, self.density):
                w.writerow([repr(float(x)), repr(float(d))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def __repr__(self):
        kind = "atomic" if self.is_atomic() else ("mixed" if self.mixed else "ac")
        return (f"GridMeasure({kind}, support=[{self.support[0]:.6g}, {self.support[1]:.6g}], "
                f"atoms={len(self.atoms)})")


class TransportPlanDiag:
    """The comonotone (quantile) coupling between two measures on the line."""

    def __init__(self, source, target, map_values):
        self.source = source
        self.target = target
        self.map_values = np.asarray(map_values, dtype=float)

    @classmethod
    def comonotone(cls, source, target):
        vals = target._resampled_edges(source.n_cells)
        return cls(source, target, vals)

    def validate(self, tol=1e-8):
        if np.any(np.diff(self.map_values) < -1e-12):
            raise InvalidInputError("transport map must be nondecreasing")
        pushed = GridMeasure.from_quantile_edges(self.map_values, validate=False)
        err = wasserstein2_sq(pushed, self.target)
        if err > tol:
            raise InvalidInputError(f"pushforward misses target, W2^2={err:.3g}")
        return True


# -- standard measures --------------------------------------------------------


def semicircle(radius=2.0, center=0.0, n_nodes=DEFAULT_NODES, n_cells=DEFAULT_CELLS):
    r = float(radius)

    def fn(x):
        x = np.asarray(x, dtype=float) - center
        return 2.0 / (np.pi * r * r) * np.sqrt(np.clip(r * r - x * x, 0.0, None))

    return GridMeasure.from_callable(fn, (center - r, center + r), n_nodes=n_nodes,
                                     n_cells=n_cells)


def uniform(a=0.0, b=1.0, n_nodes=DEFAULT_NODES, n_cells=DEFAULT_CELLS):
    nodes = np.linspace(a, b, n_nodes)
    density = np.full(n_nodes, 1.0 / (b - a))
    return GridMeasure.from_density(nodes, density, support=(a, b), n_cells=n_cells)


def two_point(a=1.0, n_cells=DEFAULT_CELLS):
    return GridMeasure.from_atoms([(-a, 0.5), (a, 0.5)], n_cells=n_cells)


def dirac(c=0.0, n_cells=DEFAULT_CELLS):
    return GridMeasure.from_atoms([(c, 1.0)], n_cells=n_cells)


# -- operations ----------------------------------------------------------------


def moment(m, k):
    """k-th raw moment: trapezoid rule on the nodes plus atom sums.

    Measures carrying only a quantile table are integrated exactly against
    their equal-mass block model instead.
    """
    if k < 0 or int(k) != k:
        raise InvalidInputError("moment order must be a nonnegative integer")
    k = int(k)
    if not m._segments and not m.atoms:
        return _block_moment(m, k)
    total = sum(w * x ** k for x, w in m.atoms)
    for xs, ds in m._segments:
        total += float(np.trapezoid(xs ** k * ds, xs))
    return total


def _block_moment(m, k):
    # Exact k-th moment of the equal-mass block model.
    e = m._edges
    d = np.diff(e)
    n = d.size
    flat = d <= _FLAT_TOL * (abs(e[-1] - e[0]) + 1.0)
    vals = np.empty(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (e[1:] ** (k + 1) - e[:-1] ** (k + 1)) / ((k + 1) * d)
    vals[flat] = e[:-1][flat] ** k
    return float(np.mean(vals))


def barycenter(m):
    if m._segments or m.atoms:
        return moment(m, 1)
    return _block_moment(m, 1)


def absolute_moment(m):
    """Integral of |x|, exact against the equal-mass block model."""
    e = m._edges
    a, b = e[:-1], e[1:]
    d = b - a
    same = a * b >= 0
    vals = np.empty_like(d)
    vals[same] = 0.5 * np.abs(a + b)[same]
    cross = ~same
    vals[cross] = (a[cross] ** 2 + b[cross] ** 2) / (2.0 * d[cross])
    flat = d <= _FLAT_TOL * (abs(e[-1] - e[0]) + 1.0)
    vals[flat] = np.abs(a[flat])
    return float(np.mean(vals))


def quantile(m, s):
    """Generalized inverse CDF.

    Exact inversion of the stored density/atom representation; measures whose
    quantile table is the authoritative view (pushforwards, interpolants,
    particle clouds) interpolate that table instead.
    """
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s <= 0.0) | (s >= 1.0)):
        raise InvalidInputError("quantile level must lie in (0, 1)")
    if m._quantiles_primary and not m.is_atomic():
        out = m._model_quantile(s)
    elif m._segments or m.atoms:
        out = m._exact_quantile(s)
    else:
        out = m._model_quantile(s)
    return float(out[0]) if scalar else out


def _fprime(f, x, scale):
    h = 6e-6 * max(abs(x), 0.05 * scale, 1e-12)
    return (f(x + h) - f(x - h)) / (2.0 * h)


def _refine_flat_boundary(f, x_flat, x_move, v, tol):
    # Monotone f: bisect for the boundary of the region where f == v.
    lo, hi = (x_flat, x_move)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if abs(f(mid) - v) <= tol:
            lo = mid
        else:
            hi = mid
    return lo


def pushforward_monotone(m, f):
    """Law of f(X) for X ~ m, for nondecreasing f.

    Densities transform by the change-of-variables rule; intervals where f is
    flat collapse to exact atoms.
    """
    lo, hi = m.support
    scale = hi - lo
    probe = np.linspace(lo, hi, 1025)
    fp = np.array([f(x) for x in probe], dtype=float)
    fscale = abs(fp[-1] - fp[0]) + 1.0
    if np.any(np.diff(fp) < -1e-10 * fscale):
        raise InvalidInputError("f must be nondecreasing on the support")

    new_edges = np.array([f(x) for x in m._edges], dtype=float)
    new_edges = np.maximum.accumulate(new_edges)

    if m.is_atomic():
        merged = {}
        for x, w in m.atoms:
            y = float(f(x))
            merged[y] = merged.get(y, 0.0) + w
        out = GridMeasure((min(merged), max(merged)), [], sorted(merged.items()), new_edges)
        return out

    flat_tol = 1e-12 * fscale
    mids = 0.5 * (m._edges[:-1] + m._edges[1:])
    fmids = np.array([f(x) for x in mids], dtype=float)
    runs = []
    j = 0
    ncell = mids.size
    while j < ncell - 1:
        if abs(fmids[j + 1] - fmids[j]) <= flat_tol:
            k = j
            while k < ncell - 1 and abs(fmids[k + 1] - fmids[k]) <= flat_tol:
                k += 1
            runs.append((j, k, fmids[j]))
            j = k + 1
        else:
            j += 1

    atoms = []
    flat_x = []
    for j0, j1, v in runs:
        xl = _refine_flat_boundary(f, mids[j0], lo, v, flat_tol)
        xr = _refine_flat_boundary(f, mids[j1], hi, v, flat_tol)
        # CDF difference already includes any input atoms sitting inside the run
        mass = float(m.cdf(xr) - m.cdf(xl))
        if mass > 1e-13:
            atoms.append((v, mass))
            flat_x.append((xl, xr))

    segments = []
    for xs, ds in m._segments:
        keep = np.ones(xs.size, dtype=bool)
        for xl, xr in flat_x:
            keep &= ~((xs > xl + 1e-13 * scale) & (xs < xr - 1e-13 * scale))
        idx = np.flatnonzero(keep)
        if idx.size == 0:
            continue
        # contiguous runs of kept indices form the surviving density pieces
        breaks = np.flatnonzero(np.diff(idx) > 1)
        pieces = np.split(idx, breaks + 1)
        for piece in pieces:
            if piece.size < 2:
                continue
            xs_p = xs[piece]
            ys = np.array([f(x) for x in xs_p], dtype=float)
            fpv = np.array([_fprime(f, x, scale) for x in xs_p], dtype=float)
            dens = np.divide(ds[piece], fpv, out=np.zeros_like(fpv), where=fpv > 1e-300)
            good = np.concatenate([[True], np.diff(ys) > 0]) & np.isfinite(dens)
            if np.count_nonzero(good) >= 2:
                segments.append((ys[good], dens[good]))

    # input atoms outside every flat run keep their own image atoms
    atoms_all = list(atoms)
    for xa, wa in m.atoms:
        if not any(xl <= xa <= xr for xl, xr in flat_x):
            atoms_all.append((float(f(xa)), wa))
    support = (float(new_edges[0]), float(new_edges[-1]))
    return GridMeasure(support, segments, atoms_all, new_edges, quantiles_primary=True)


def hilbert_transform(m, x):
    """(1/pi) PV integral of dm(t)/(x - t).

    Uses the subtract-the-singularity rule inside the support so only a
    bounded integrand is quadratured; requires density samples.
    """
    x = float(x)
    lo, hi = m.support
    scale = max(hi - lo, 1e-12)
    for xa, wa in m.atoms:
        if abs(x - xa) < 1e-12 * (abs(x) + abs(xa) + 1.0):
            raise InvalidInputError("Hilbert transform undefined at an atom")
    if not m._segments and not m.atoms:
        raise InvalidInputError("Hilbert transform needs a density or atoms")
    total = sum(w / (x - xa) for xa, w in m.atoms)
    if m._splines is None:
        m._splines = [CubicSpline(xs, ds) for xs, ds in m._segments]
    for (xs, ds), spl in zip(m._segments, m._splines):
        a, b = xs[0], xs[-1]
        if a < x < b:
            rho_x = float(spl(x))
            g = np.empty_like(ds)
            dx = x - xs
            small = np.abs(dx) < 1e-12 * scale
            g[~small] = (ds[~small] - rho_x) / dx[~small]
            if small.any():
                g[small] = -float(spl(x, 1))
            total += float(np.trapezoid(g, xs)) + rho_x * math.log(abs((x - a) / (b - x)))
        else:
            total += float(np.trapezoid(ds / (x - xs), xs))
    return total / math.pi


def log_energy(m):
    """Double integral of -log|s - t|; +inf when the measure has atoms.

    Evaluates the equal-mass block model with the log kernel integrated in
    closed form on every block pair, including the diagonal.
    """
    if m.atoms:
        return math.inf
    e = m._edges
    d = np.diff(e)
    if np.any(d <= _FLAT_TOL * (abs(e[-1] - e[0]) + 1.0)):
        return math.inf
    g = _log_kernel_primitive(np.subtract.outer(e, e))
    block = g[1:, :-1] - g[:-1, :-1] - g[1:, 1:] + g[:-1, 1:]
    n = d.size
    weights = 1.0 / np.outer(d, d)
    return float(np.sum(block * weights)) / (n * n)


def _simpson_pl(valsA, valsB, s):
    # Exact integral over [0,1] of the product of two piecewise-linear
    # functions sharing the breakpoint grid s.
    h = np.diff(s)
    fa0, fa1 = valsA[:-1], valsA[1:]
    fb0, fb1 = valsB[:-1], valsB[1:]
    fam = 0.5 * (fa0 + fa1)
    fbm = 0.5 * (fb0 + fb1)
    return float(np.sum(h / 6.0 * (fa0 * fb0 + 4.0 * fam * fbm + fa1 * fb1)))


def _pair_grid(m1, m2):
    n = max(m1.n_cells, m2.n_cells)
    s = np.linspace(0.0, 1.0, n + 1)
    return s, m1._resampled_edges(n), m2._resampled_edges(n)


def wasserstein2_sq(m1, m2):
    """Squared 2-Wasserstein distance via quantile functions."""
    s, q1, q2 = _pair_grid(m1, m2)
    d = q1 - q2
    return max(_simpson_pl(d, d, s), 0.0)


def max_correlation(m1, m2):
    """Maximal correlation T = integral of Q1(s) Q2(s) ds.

    The defining identity T = (M2(m1) + M2(m2) - W2^2)/2 is checked on the
    same quantile model before returning.
    """
    s, q1, q2 = _pair_grid(m1, m2)
    t = _simpson_pl(q1, q2, s)
    m2a = _simpson_pl(q1, q1, s)
    m2b = _simpson_pl(q2, q2, s)
    w2 = _simpson_pl(q1 - q2, q1 - q2, s)
    ident = 0.5 * m2a + 0.5 * m2b - 0.5 * w2
    if abs(t - ident) > 1e-8 * max(1.0, abs(t)):
        raise InvalidInputError("maximal-correlation identity violated")
    return t


def displacement_interpolate(m0, m1, t):
    """Measure at time t on the Wasserstein geodesic from m0 to m1."""
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError("interpolation time must lie in [0, 1]")
    if m0.atoms:
        raise InvalidInputError("initial measure must be non-atomic")
    n = max(m0.n_cells, m1.n_cells)
    e0 = m0._resampled_edges(n)
    e1 = m1._resampled_edges(n)
    return GridMeasure.from_quantile_edges((1.0 - t) * e0 + t * e1, validate=False)
