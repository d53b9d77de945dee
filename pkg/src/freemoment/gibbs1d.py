"""Free Gibbs measures for even polynomial potentials.

The equilibrium condition 2*pi*H(rho) = u' on the support is solved through
the Cauchy transform: the transform is written as a power series in the
Riemann map of the complement of [-r, r], the series coefficients come from a
Fourier analysis of u' on the boundary circle, and the support radius r is
pinned by the residue condition r*a_1 = -2.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import measure1d
from .errors import InvalidInputError, RegimeError
from .measure1d import GridMeasure

_GAUSS_CACHE = {}


def _gauss_theta(order):
    # Gauss-Legendre rule mapped to [0, pi]; exact to machine precision for
    # the trigonometric-polynomial integrands this module produces.
    if order not in _GAUSS_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        _GAUSS_CACHE[order] = (0.5 * np.pi * (x + 1.0), 0.5 * np.pi * w)
    return _GAUSS_CACHE[order]


class EvenPotential:
    """Even polynomial u(x) = sum_k c_{2k} x^{2k} with positive leading term."""

    def __init__(self, even_coeffs):
        coeffs = [float(c) for c in even_coeffs]
        while coeffs and coeffs[-1] == 0.0:
            coeffs.pop()
        if not coeffs:
            raise InvalidInputError("potential must have at least one nonzero even coefficient")
        if coeffs[-1] <= 0.0:
            raise InvalidInputError("leading coefficient must be positive (u must grow at infinity)")
        self.even_coeffs = tuple(coeffs)
        self.degree = 2 * len(coeffs)

    @classmethod
    def parse(cls, text):
        """Parse "c2,c4,..." or a JSON object {"even_coeffs": [...]}."""
        text = text.strip()
        if text.startswith("{"):
            return cls(json.loads(text)["even_coeffs"])
        return cls([float(p) for p in text.split(",") if p.strip()])

    @classmethod
    def from_poly_coeffs(cls, coeffs):
        """From dense coefficients [c0, c1, c2, ...]; odd terms must vanish."""
        coeffs = [float(c) for c in coeffs]
        for j, c in enumerate(coeffs):
            if j % 2 == 1 and c != 0.0:
                raise InvalidInputError("potential must be even")
        return cls(coeffs[2::2])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, c in enumerate(self.even_coeffs, start=1):
            out = out + c * x ** (2 * k)
        return out

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, c in enumerate(self.even_coeffs, start=1):
            out = out + 2 * k * c * x ** (2 * k - 1)
        return out

    def scaled(self, c):
        """The potential x -> u(c x)."""
        return EvenPotential([ck * c ** (2 * k) for k, ck in enumerate(self.even_coeffs, start=1)])

    def __repr__(self):
        return f"EvenPotential({list(self.even_coeffs)})"


def fourier_coefficients(uprime, r, n_coeffs):
    """Cosine coefficients a_0..a_N of the boundary values u'(-r cos t)/2.

    Trapezoid rule on a uniform periodic grid of 4*(N+1) points, exact when
    u' is a polynomial of degree <= N.
    """
    if n_coeffs < 1:
        raise InvalidInputError("need at least one Fourier coefficient")
    mpts = 4 * (n_coeffs + 1)
    theta = np.arange(mpts) * (2.0 * np.pi / mpts)
    vals = np.asarray(uprime(-r * np.cos(theta)), dtype=float)
    a = np.empty(n_coeffs + 1)
    a[0] = 0.5 * np.mean(vals)
    for n in range(1, n_coeffs + 1):
        a[n] = np.mean(vals * np.cos(n * theta))
    return a


def solve_radius(u, r_min=1e-6, r_max=1e6, bisect_steps=200, newton_steps=10):
    """Positive support radius solving r*a_1(r) + 2 = 0."""
    n_coeffs = max(u.degree - 1, 1)

    def objective(r):
        return r * fourier_coefficients(u.deriv, r, n_coeffs)[1] + 2.0

    grid = np.geomspace(r_min, r_max, 481)
    vals = np.array([objective(r) for r in grid])
    sign_change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
    if sign_change.size == 0:
        raise RegimeError("no admissible radius in the search bracket")
    lo, hi = grid[sign_change[0]], grid[sign_change[0] + 1]
    flo = objective(lo)
    for _ in range(bisect_steps):
        mid = 0.5 * (lo + hi)
        fm = objective(mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
        if hi - lo < 1e-15 * hi:
            break
    r = 0.5 * (lo + hi)
    for _ in range(newton_steps):
        fr = objective(r)
        h = 1e-7 * r
        dfr = (objective(r + h) - objective(r - h)) / (2 * h)
        if dfr == 0:
            break
        step = fr / dfr
        r_new = r - step
        if not (r_min <= r_new <= r_max):
            break
        r = r_new
        if abs(step) < 1e-15 * r:
            break
    return float(r)


class GibbsSolution:
    """Radius, boundary Fourier coefficients, and the assembled measure."""

    def __init__(self, potential, radius, fourier, measure):
        self.potential = potential
        self.radius = float(radius)
        self.fourier = np.asarray(fourier, dtype=float)
        self.measure = measure

    def density(self, x):
        """Density at x from the Fourier representation; 0 outside (-r, r)."""
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if scalar and abs(x[0]) >= self.radius:
            raise InvalidInputError("density evaluation requires |x| < r")
        theta = np.arccos(np.clip(-x / self.radius, -1.0, 1.0))
        vals = np.zeros_like(theta)
        for n in range(1, self.fourier.size):
            vals += self.fourier[n] * np.sin(n * theta)
        vals = -vals / np.pi
        vals[vals < -1e-12] = np.nan
        vals = np.clip(vals, 0.0, None)
        vals[np.abs(x) >= self.radius] = 0.0
        return float(vals[0]) if scalar else vals

    def _theta_integral(self, f):
        # integral over [-r, r] of f(x) d(measure) via the theta substitution
        theta, w = _gauss_theta(max(64, 4 * self.fourier.size + 16))
        x = -self.radius * np.cos(theta)
        dens = np.zeros_like(theta)
        for n in range(1, self.fourier.size):
            dens += self.fourier[n] * np.sin(n * theta)
        dens = -dens / np.pi
        return float(np.sum(w * f(x) * dens * self.radius * np.sin(theta)))

    def moment(self, k):
        """Exact k-th moment of the Fourier-form density."""
        return self._theta_integral(lambda x: x ** k)

    def mass(self):
        return self._theta_integral(lambda x: np.ones_like(x))

    def sd_scalar(self):
        """The Schwinger-Dyson number: integral of x u'(x) d(nu); equals 1."""
        return self._theta_integral(lambda x: x * self.potential.deriv(x))

    def to_dict(self):
        return {
            "even_coeffs": list(self.potential.even_coeffs),
            "radius": self.radius,
            "fourier": list(map(float, self.fourier)),
            "measure": self.measure.to_dict(),
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d):
        return cls(EvenPotential(d["even_coeffs"]), d["radius"],
                   np.asarray(d["fourier"], dtype=float),
                   GridMeasure.from_dict(d["measure"]))


def gibbs_density(sol, x):
    return sol.density(x)


def free_gibbs_measure(u, n_nodes=measure1d.DEFAULT_NODES, n_cells=measure1d.DEFAULT_CELLS,
                       neg_tol=1e-9):
    """Free Gibbs measure of an even polynomial potential.

    Fails with RegimeError when the candidate density dips below -neg_tol
    anywhere (the potential is outside the one-cut regime).
    """
    if not isinstance(u, EvenPotential):
        raise InvalidInputError("potential must be an EvenPotential")
    r = solve_radius(u)
    n_coeffs = max(u.degree - 1, 1)
    a = fourier_coefficients(u.deriv, r, n_coeffs)
    if abs(r * a[1] + 2.0) > 1e-10:
        raise RegimeError("radius condition r*a_1 = -2 not met")
    sol = GibbsSolution(u, r, a, None)

    theta_fine = np.linspace(0.0, np.pi, 8192)
    dens_fine = np.zeros_like(theta_fine)
    for n in range(1, a.size):
        dens_fine += a[n] * np.sin(n * theta_fine)
    dens_fine = -dens_fine / np.pi
    if dens_fine.min() < -neg_tol:
        raise RegimeError("one-cut assumption violated: density would be negative")

    mass = sol.mass()
    if abs(mass - 1.0) > 1e-8:
        raise RegimeError(f"assembled density has mass {mass}, not 1")

    def density_fn(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        theta = np.arccos(np.clip(-x / r, -1.0, 1.0))
        vals = np.zeros_like(theta)
        for n in range(1, a.size):
            vals += a[n] * np.sin(n * theta)
        return np.clip(-vals / np.pi, 0.0, None)

    sol.measure = GridMeasure.from_callable(density_fn, (-r, r), n_nodes=n_nodes,
                                            n_cells=n_cells)
    return sol


def hilbert_residual(sol, u=None, n_points=101, interior=0.9):
    """Max over sample points of |2 pi H(nu)(x) - u'(x)|.

    The Hilbert transform is recomputed from the grid samples by principal
    value quadrature, so this is an independent check on the solution.
    """
    if u is None:
        u = sol.potential
    r = sol.radius
    xs = np.linspace(-interior * r, interior * r, n_points)
    worst = 0.0
    for x in xs:
        h = measure1d.hilbert_transform(sol.measure, float(x))
        worst = max(worst, abs(2.0 * math.pi * h - float(u.deriv(x))))
    return worst
