"""Variational solver for the one-dimensional free moment-measure problem.

Given a target measure mu, minimize the functional

    F(rho) = L(rho) + T(rho, mu)

(logarithmic energy plus maximal correlation) over probability measures rho,
and recover the potential derivative u' as the monotone rearrangement from
the minimizer to mu.  The minimizer is the free Gibbs measure of u and mu is
its moment measure.

rho is discretized by equal-mass particles at quantile positions, which makes
T linear in the positions and L a pairwise log sum; descent runs on the
sorted, centered particle vector with Barzilai-Borwein steps and a
backtracking line search, so the objective never increases along accepted
steps.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import measure1d
from .errors import InvalidInputError
from .measure1d import GridMeasure


class MonotoneMap:
    """A nondecreasing map given by samples, evaluated by linear interpolation."""

    def __init__(self, xs, values):
        self.xs = np.asarray(xs, dtype=float)
        self.values = np.asarray(values, dtype=float)

    def __call__(self, x):
        return np.interp(x, self.xs, self.values)

    def to_dict(self):
        return {"x": list(map(float, self.xs)), "value": list(map(float, self.values))}


class MomentProblem:
    """Target measure plus solver knobs for the minimization of F."""

    def __init__(self, target, n_particles=512, max_iters=20000, step_size=None,
                 tol=1e-10, grad_tol=1e-6):
        if not isinstance(target, GridMeasure):
            raise InvalidInputError("target must be a GridMeasure")
        if target.is_atomic() and len(target.atoms) == 1:
            raise InvalidInputError("degenerate target: a single point mass has no moment potential")
        self.target = target
        self.n_particles = int(n_particles)
        self.max_iters = int(max_iters)
        self.step_size = step_size
        self.tol = float(tol)
        self.grad_tol = float(grad_tol)
        self.barycenter = measure1d.barycenter(target)


class MomentSolution:
    def __init__(self, rho_hat, uprime, functional_value, residuals, positions,
                 target_quantiles, iterations, converged):
        self.rho_hat = rho_hat
        self.uprime = uprime
        self.functional_value = float(functional_value)
        self.residuals = dict(residuals)
        self.positions = np.asarray(positions, dtype=float)
        self.target_quantiles = np.asarray(target_quantiles, dtype=float)
        self.iterations = int(iterations)
        self.converged = bool(converged)

    def to_dict(self):
        return {
            "rho_hat": self.rho_hat.to_dict(),
            "uprime": self.uprime.to_dict(),
            "functional_value": self.functional_value,
            "residuals": self.residuals,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def functional_F(rho, mu):
    """F(rho) = log-energy of rho plus maximal correlation with mu.

    Returns +inf for atomic rho (the log energy diverges).
    """
    energy = measure1d.log_energy(rho)
    if math.isinf(energy):
        return math.inf
    return energy + measure1d.max_correlation(rho, mu)


def particle_objective(q, y, eps_sep):
    """Discrete F on sorted particle positions q against target quantiles y."""
    m = q.size
    diffs = q[:, None] - q[None, :]
    iu = np.triu_indices(m, k=1)
    gaps = np.maximum(np.abs(diffs[iu]), eps_sep)
    energy = -2.0 / (m * m) * float(np.sum(np.log(gaps)))
    corr = float(np.mean(q * y))
    return energy + corr


def particle_gradient(q, y, eps_sep):
    """Analytic gradient of the discrete F with respect to each position."""
    m = q.size
    diffs = q[:, None] - q[None, :]
    np.fill_diagonal(diffs, np.inf)
    small = np.abs(diffs) < eps_sep
    if small.any():
        diffs = np.where(small, np.copysign(eps_sep, diffs), diffs)
    grad = -2.0 / (m * m) * np.sum(1.0 / diffs, axis=1) + y / m
    return grad


def _target_quantiles(mu, m):
    s = (np.arange(m) + 0.5) / m
    return measure1d.quantile(mu, s)


def minimize_F(problem):
    """Projected-gradient descent for the centered minimizer of F.

    Gradient steps use Barzilai-Borwein lengths guarded by a backtracking
    line search; each accepted iterate is re-sorted and re-centered.
    """
    mu = problem.target
    m = problem.n_particles
    y = _target_quantiles(mu, m) - problem.barycenter
    if float(np.max(y) - np.min(y)) <= 0.0:
        raise InvalidInputError("degenerate target")

    sc = measure1d.semicircle()
    q = measure1d.quantile(sc, (np.arange(m) + 0.5) / m)
    span = max(q[-1] - q[0], 1.0)
    eps_sep = 1e-9 * span

    fval = particle_objective(q, y, eps_sep)
    grad = particle_gradient(q, y, eps_sep)
    step = problem.step_size if problem.step_size is not None else 1.0 / m
    step_min, step_max = 1e-14, 1e3
    history = [fval]
    converged = False
    it = 0
    for it in range(1, problem.max_iters + 1):
        accepted = False
        trial = step
        for _ in range(60):
            q_new = np.sort(q - trial * grad)
            q_new -= np.mean(q_new)
            f_new = particle_objective(q_new, y, eps_sep)
            if f_new <= fval - 1e-4 * trial * float(np.dot(grad, grad)):
                accepted = True
                break
            trial *= 0.5
            if trial < step_min:
                break
        if not accepted:
            converged = float(np.max(np.abs(grad))) < problem.grad_tol
            break
        grad_new = particle_gradient(q_new, y, eps_sep)
        s_vec = q_new - q
        y_vec = grad_new - grad
        sy = float(np.dot(s_vec, y_vec))
        if sy > 0:
            step = min(max(float(np.dot(s_vec, s_vec)) / sy, step_min), step_max)
        else:
            step = min(trial * 2.0, step_max)
        rel_change = abs(f_new - fval) / max(1.0, abs(fval))
        q, fval, grad = q_new, f_new, grad_new
        history.append(fval)
        if rel_change < problem.tol and float(np.max(np.abs(grad))) < problem.grad_tol:
            converged = True
            break

    rho_hat = _measure_from_particles(q)
    uprime = MonotoneMap(q, y)
    residuals = _residuals(q, y)
    return MomentSolution(rho_hat, uprime, fval, residuals, q, y, it, converged)


def _measure_from_particles(q):
    m = q.size
    edges = np.empty(m + 1)
    edges[1:-1] = 0.5 * (q[:-1] + q[1:])
    edges[0] = q[0] - 0.5 * (q[1] - q[0])
    edges[-1] = q[-1] + 0.5 * (q[-1] - q[-2])
    return GridMeasure.from_quantile_edges(edges, validate=False)


def _residuals(q, y, interior=0.9):
    m = q.size
    diffs = q[:, None] - q[None, :]
    np.fill_diagonal(diffs, np.inf)
    hilb2pi = 2.0 / m * np.sum(1.0 / diffs, axis=1)
    span = max(np.max(np.abs(q)), 1e-30)
    inner = np.abs(q) <= interior * span
    hres = float(np.max(np.abs(hilb2pi[inner] - y[inner])))
    sd = abs(float(np.mean(q * y)) - 1.0)
    return {"hilbert_residual": hres, "pushforward_w2": None, "sd_scalar_error": sd}


def recover_potential_derivative(rho_hat, mu):
    """u' as the monotone rearrangement from rho_hat to mu (u' = Q_mu o F_rho)."""
    if rho_hat.atoms:
        raise InvalidInputError("source measure must be non-atomic")
    m = rho_hat.n_cells
    s = (np.arange(m) + 0.5) / m
    xs = rho_hat._model_quantile(s)
    vals = measure1d.quantile(mu, s)
    return MonotoneMap(xs, vals)


def verify_solution(sol, mu):
    """Residual report: Hilbert-transform identity, pushforward error, and the
    scalar Schwinger-Dyson check."""
    q = sol.positions
    y = sol.target_quantiles
    rep = _residuals(q, y)
    pushed = GridMeasure.from_quantile_edges(
        np.concatenate([[y[0]], 0.5 * (y[:-1] + y[1:]), [y[-1]]]), validate=False) \
        if np.max(np.diff(y)) > 0 else None
    mu_c = mu.translate(-measure1d.barycenter(mu))
    if pushed is None:
        pushed = GridMeasure.from_atoms([(float(y[0]), 1.0)])
    rep["pushforward_w2"] = math.sqrt(max(measure1d.wasserstein2_sq(pushed, mu_c), 0.0))
    return rep


# -- builtin targets -------------------------------------------------------------


def builtin_target(name, n_cells=measure1d.DEFAULT_CELLS):
    """Named targets for the command line: semicircle, two_point:a, dirac:c,
    quartic_pushforward."""
    parts = name.split(":")
    kind = parts[0]
    if kind == "semicircle":
        return measure1d.semicircle(n_cells=n_cells)
    if kind == "two_point":
        a = float(parts[1]) if len(parts) > 1 else 1.0
        return measure1d.two_point(a, n_cells=n_cells)
    if kind in ("dirac", "dirac0"):
        c = float(parts[1]) if len(parts) > 1 else 0.0
        return measure1d.dirac(c, n_cells=n_cells)
    if kind == "quartic_pushforward":
        from . import gibbs1d

        sol = gibbs1d.free_gibbs_measure(gibbs1d.EvenPotential([0.0, 0.25]),
                                         n_cells=n_cells)
        return measure1d.pushforward_monotone(sol.measure, lambda x: x ** 3)
    raise InvalidInputError(f"unknown builtin target '{name}'")
