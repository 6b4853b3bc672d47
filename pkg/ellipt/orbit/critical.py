#  Licensed under the Apache License, Version 2.0 (the "License"); you may
#  not use this file except in compliance with the License. You may obtain
#  a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#  WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#  License for the specific language governing permissions and limitations
#  under the License.

"""

Periodic orbits as critical points of the reduced action.

Shifting phi0 along the flow direction gives the same orbit, so the action
lives on the quotient torus spanned by the integer vectors orthogonal to
the winding vector k. Its minimum and maximum there are periodic orbits.
The search evaluates the action on a grid, then refines every local minimum
and maximum by Barzilai-Borwein gradient steps until the jump I(T) - I(0)
is below the closure tolerance.

"""

import math
import logging
import itertools
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ellipt.contrib.numtheory import (
    dist_to_2pi,
    gcd_list,
    orthogonal_lattice_basis,
)
from ellipt.orbit.contraction import sup
from ellipt.orbit.reduction import TorusReduction

logger = logging.getLogger(__name__)

__all__ = [
    "CriticalPointSearchError",
    "OrbitSolution",
    "CriticalPointSearch",
    "MinimalPeriodReport",
    "quotient_lattice_basis",
    "find_critical_points",
    "find_torus_orbits",
    "minimal_period_bound",
]


class CriticalPointSearchError(Exception):

    def __init__(self, found, dropped):
        super().__init__(
            "Critical point search kept {} orbits; dropped: {}".format(
                found, "; ".join(dropped) or "none"))
        self._dropped = list(dropped)

    @property
    def dropped(self):
        return list(self._dropped)


class OrbitSolution(object):
    """A periodic orbit: its initial angle phi_star, the sampled
    trajectory, the action value and closure, and the period data."""

    def __init__(self, phi_star, setup, t, I, phi, z, action_value,
                 closure_residual, kind, iterations=0, degenerate=False):
        self._phi_star = np.asarray(phi_star, dtype=float)
        self._setup = setup
        self._t = np.asarray(t, dtype=float)
        self._I = I
        self._phi = phi
        self._z = z
        self._action_value = float(action_value)
        self._closure = float(closure_residual)
        self._kind = kind
        self._iterations = int(iterations)
        self._degenerate = bool(degenerate)
        self._min_period = self._setup.T / max(1, gcd_list(setup.k_vec))

    @classmethod
    def from_sample(cls, sample, setup, kind, iterations=0,
                    degenerate=False):
        orbit = sample.orbit
        closure = max(sup(orbit.jump), orbit.boundary_residual)
        return cls(sample.phi0, setup, orbit.t, orbit.I, orbit.phi, orbit.z,
                   sample.value, closure, kind, iterations, degenerate)

    @property
    def phi_star(self):
        return self._phi_star.copy()

    @property
    def setup(self):
        return self._setup

    @property
    def T(self):
        return self._setup.T

    @property
    def t(self):
        return self._t

    @property
    def I(self):
        return self._I

    @property
    def phi(self):
        return self._phi

    @property
    def z(self):
        return self._z

    @property
    def initial_state(self):
        return (self._I[0], self._phi[0], self._z[0])

    @property
    def action_value(self):
        return self._action_value

    @property
    def closure_residual(self):
        return self._closure

    @property
    def min_period_lower_bound(self):
        return self._min_period

    @property
    def kind(self):
        return self._kind

    @property
    def iterations(self):
        return self._iterations

    @property
    def degenerate(self):
        return self._degenerate

    def to_dict(self, trajectory=True):
        doc = {"phi_star": self._phi_star.tolist(),
               "T": self.T,
               "k": list(self._setup.k_vec),
               "action_value": self._action_value,
               "closure_residual": self._closure,
               "min_period_lower_bound": self._min_period,
               "kind": self._kind,
               "iterations": self._iterations,
               "degenerate": self._degenerate,
               "setup": self._setup.to_dict()}
        if trajectory:
            doc["trajectory"] = {
                "t": self._t.tolist(),
                "I": np.asarray(self._I).tolist(),
                "phi": np.asarray(self._phi).tolist(),
                "z_re": np.asarray(self._z).real.tolist(),
                "z_im": np.asarray(self._z).imag.tolist()}
        return doc


class CriticalPointSearch(namedtuple("CriticalPointSearch",
                                     ["solutions", "degenerate", "dropped",
                                      "grid_values"])):
    __slots__ = ()


def quotient_lattice_basis(k):
    """Integer basis of the vectors orthogonal to k (n - 1 of them)."""
    if not any(k):
        raise ValueError("Winding vector must be nonzero")
    return orthogonal_lattice_basis(k)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _neighbors(index, g, dim):
    for axis in range(dim):
        for step in (-1, 1):
            other = list(index)
            other[axis] = (other[axis] + step) % g
            yield tuple(other)


def _same_orbit(a, b):
    """b starts on the trajectory of a, up to one grid step of motion."""
    d = dist_to_2pi(a.phi - b.phi_star[None, :]).max(axis=1)
    h = a.t[1] - a.t[0] if a.t.size > 1 else 0.0
    speed = float(np.abs(np.diff(a.phi, axis=0)).max()) / max(h, 1e-300) \
        if a.t.size > 1 else 0.0
    return float(d.min()) <= max(1e-6, h * speed)


class _Refiner(object):

    def __init__(self, reduction, B, g, closure_tol, max_iter):
        self._reduction = reduction
        self._B = B
        self._g = g
        self._tol = closure_tol
        self._max_iter = max_iter

    def phi0(self, s):
        if self._B.size == 0:
            return np.zeros(self._reduction.n)
        return 2 * math.pi * (np.asarray(s) @ self._B)

    def grad_s(self, sample):
        if self._B.size == 0:
            return np.zeros(0)
        return 2 * math.pi * (self._B @ np.asarray(sample.gradient))

    def refine(self, s, sample, sign):
        """Barzilai-Borwein steps, ascending for sign = +1."""
        cap = 0.5 / self._g
        grad = self.grad_s(sample)
        alpha = 0.25 / (self._g * max(sup(grad), 1e-300))
        for iteration in range(self._max_iter + 1):
            if sup(sample.gradient) <= self._tol:
                return s, sample, iteration
            if iteration == self._max_iter:
                break
            delta = sign * alpha * grad
            size = sup(delta)
            if size > cap:
                delta *= cap / size
            s_new = s + delta
            new = self._reduction.evaluate(self.phi0(s_new))
            grad_new = self.grad_s(new)
            ds, dg = s_new - s, grad_new - grad
            denom = float(np.dot(ds, dg))
            if denom != 0.0:
                alpha = abs(float(np.dot(ds, ds)) / denom)
            s, sample, grad = s_new, new, grad_new
        return None, sample, self._max_iter


def _flat_representatives(samples, setup, values, dropped):
    """Lowest grid orbit and the highest one on a different trajectory."""
    order = [int(p) for p in np.argsort(values, kind="stable")]
    first = OrbitSolution.from_sample(samples[order[0]], setup, "degenerate",
                                      degenerate=True)
    for p in reversed(order[1:]):
        other = OrbitSolution.from_sample(samples[p], setup, "degenerate",
                                          degenerate=True)
        if not (_same_orbit(first, other) or _same_orbit(other, first)):
            return CriticalPointSearch([first, other], True, dropped,
                                       values)
    dropped.append("every closed grid orbit lies on one trajectory")
    raise CriticalPointSearchError(1, dropped)


def find_critical_points(reduction, setup, grid_per_dim=12,
                         closure_tol=1e-7, max_iter=50, threads=1):
    """Periodic orbits from the extrema of the action on the quotient torus.

    Returns at least two geometrically distinct orbits when n >= 2, or the
    single orbit when n = 1. If the jump vanishes on the whole grid the
    action is flat, every grid orbit closes and the lowest grid orbit is
    returned with the highest one lying on a different trajectory, both
    flagged degenerate.
    """
    n = reduction.n
    k_vec = setup.k_vec
    basis = quotient_lattice_basis(k_vec) if n > 1 else []
    B = np.array(basis, dtype=float).reshape(len(basis), n)
    dim = len(basis)
    g = grid_per_dim if dim else 1
    refiner = _Refiner(reduction, B, g, closure_tol, max_iter)
    indices = list(itertools.product(range(g), repeat=dim))
    s_values = [np.array(idx, dtype=float) / g for idx in indices]
    samples = _map(lambda s: reduction.evaluate(refiner.phi0(s)), s_values,
                   threads)
    values = np.array([sample.value for sample in samples])
    jumps = np.array([sup(sample.gradient) for sample in samples])
    logger.info("Action on {} grid points: range [{:.9g}, {:.9g}], max "
                "jump {:.3e}".format(len(samples), values.min(),
                                     values.max(), jumps.max()))
    dropped = []

    if n == 1:
        kind = "min" if jumps[0] <= closure_tol else "unclosed"
        if kind == "unclosed":
            raise CriticalPointSearchError(0, ["single orbit does not close"
                                               " ({:.3e})".format(jumps[0])])
        solution = OrbitSolution.from_sample(samples[0], setup, "min")
        return CriticalPointSearch([solution], False, dropped, values)

    if jumps.max() <= closure_tol:
        logger.warning("Action is flat on the grid; returning degenerate "
                       "representatives")
        return _flat_representatives(samples, setup, values, dropped)

    position = {idx: p for p, idx in enumerate(indices)}
    candidates = []
    for p, idx in enumerate(indices):
        around = [values[position[o]] for o in _neighbors(idx, g, dim)]
        if values[p] <= min(around):
            candidates.append((p, -1, "min"))
        if values[p] >= max(around):
            candidates.append((p, 1, "max"))

    def _polish(candidate):
        p, sign, kind = candidate
        s, sample, iterations = refiner.refine(s_values[p], samples[p], sign)
        return s, sample, iterations, kind

    solutions = []
    for s, sample, iterations, kind in _map(_polish, candidates, threads):
        if s is None:
            reason = "{} near phi0 = {} did not converge (jump {:.3e})".format(
                kind, np.round(sample.phi0, 6).tolist(),
                sup(sample.gradient))
            logger.warning(reason)
            dropped.append(reason)
            continue
        solution = OrbitSolution.from_sample(sample, setup, kind, iterations)
        if any(_same_orbit(other, solution) for other in solutions):
            logger.debug("Dropping duplicate {} at {}".format(
                kind, np.round(solution.phi_star, 6).tolist()))
            continue
        solutions.append(solution)
    if len(solutions) < 2:
        raise CriticalPointSearchError(len(solutions), dropped)
    logger.info("Found {} distinct periodic orbits".format(len(solutions)))
    return CriticalPointSearch(solutions, False, dropped, values)


def find_torus_orbits(setup, H_rescaled, grid_per_dim=12, closure_tol=1e-7,
                      max_iter=50, threads=1, samples_per_period=64,
                      min_samples=256, contraction_opts=None):
    reduction = TorusReduction(setup, H_rescaled, samples_per_period,
                               min_samples, contraction_opts)
    return find_critical_points(reduction, setup, grid_per_dim, closure_tol,
                                max_iter, threads)


class MinimalPeriodReport(namedtuple("MinimalPeriodReport",
                                     ["bound", "gcd", "asymptotic",
                                      "self_check", "min_mismatch"])):
    __slots__ = ()

    def to_dict(self):
        return dict(self._asdict())


def _shift_mismatch(solution, shift):
    phi = solution.phi[:-1]
    I = solution.I[:-1]
    z = solution.z[:-1]
    d_phi = dist_to_2pi(np.roll(phi, -shift, axis=0) - phi)
    d_I = np.abs(np.roll(I, -shift, axis=0) - I)
    d_z = np.abs(np.roll(z, -shift, axis=0) - z)
    return max(sup(d_phi), sup(d_I), sup(d_z))


def minimal_period_bound(solution, k_vec, gamma, tau, tol=1e-6):
    """T / gcd(k) bounds the minimal period from below.

    The trajectory shifted by T / g' for g' above gcd(k) is checked to
    differ from itself; T^(1 / (tau + 1)) is the growth rate of the bound
    for Diophantine frequencies.
    """
    g = max(1, gcd_list(k_vec))
    T = solution.T
    N = solution.t.size - 1
    mismatch = float("inf")
    for g_other in range(g + 1, min(4 * g, N // 4) + 1):
        shift = int(round(N / g_other))
        if shift <= 0 or shift >= N:
            continue
        mismatch = min(mismatch, _shift_mismatch(solution, shift))
    report = MinimalPeriodReport(T / g, g, T ** (1.0 / (tau + 1.0)),
                                 mismatch > tol, mismatch)
    logger.debug("Minimal period >= {:.6g} (gcd {}, gamma {})".format(
        report.bound, g, gamma))
    return report
