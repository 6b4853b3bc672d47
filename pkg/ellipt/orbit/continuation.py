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

Continuation of a resonant torus of a nearly integrable system.

The Hamiltonian is

    H = h(J) + eps Omega~(J) . z zbar + eps g(J, psi, z) + eps^N f(J, psi, z)

and the unperturbed torus J = J0 is resonant: h'(J0) = 2 pi k / T. The
same reduction as in the torus mode applies with s = 1, the twist h''(J_eps)
and the normal frequencies eps Omega~(J_eps); it needs eps T <= 1 / c1.

"""

import logging
from collections import namedtuple

import numpy as np
from scipy import optimize

from ellipt.series.tfseries import SeriesBundleEvaluator
from ellipt.contrib.quadrature import grid_size
from ellipt.normal.twist import require_invertible
from ellipt.normal.averaging import HamiltonianFormatError
from ellipt.orbit.green import monodromy_gap, MonodromySingularError
from ellipt.orbit.reduction import ReductionCore
from ellipt.orbit.critical import find_critical_points

logger = logging.getLogger(__name__)

__all__ = [
    "ContinuationWindowError",
    "ResonanceMismatchError",
    "ContinuationModel",
    "ContinuationSetup",
    "ContinuationResult",
    "continuation_hamiltonian",
    "resonant_torus_continuation",
]


class ContinuationWindowError(Exception):

    def __init__(self, eps, T, c1):
        super().__init__(
            "eps T = {:.3e} exceeds 1 / c1 = {:.3e}".format(eps * T,
                                                            1.0 / c1))


class ResonanceMismatchError(Exception):

    def __init__(self, mismatch):
        super().__init__(
            "h'(J0) misses 2 pi k / T by {:.3e}".format(mismatch))


class ContinuationModel(object):
    """The four pieces h, Omega~(J) . z zbar, g and f of the Hamiltonian.
    """

    def __init__(self, h, normal, g=None, f=None):
        self._h = h
        self._normal = normal
        n, m = h.dims
        self._g = g if g is not None else h.scale(0.0)
        self._f = f if f is not None else h.scale(0.0)
        for part in (normal, self._g, self._f):
            if part.dims != (n, m):
                raise ValueError("Pieces of the continuation Hamiltonian "
                                 "differ in dimensions")
        self._dh = SeriesBundleEvaluator(
            [h.derivative("I", i) for i in range(n)])
        self._d2h = SeriesBundleEvaluator(
            [h.derivative("I", i).derivative("I", i2)
             for i in range(n) for i2 in range(n)])
        if m:
            self._freqs = SeriesBundleEvaluator(
                [normal.derivative("z", j).derivative("zbar", j)
                 for j in range(m)])
        else:
            self._freqs = None

    @classmethod
    def from_series(cls, H):
        """Split an eps-free series into h, Omega~ . z zbar, g and f.

        h: a = abar = 0, ell = 0; Omega~: a = abar = e_j, ell = 0;
        g: ell = 0 with |a + abar| >= 3; f: ell != 0. Any other ell = 0
        term is refused.
        """
        parts = {"h": {}, "normal": {}, "g": {}, "f": {}}
        for key, c in H.items():
            elliptic = key.elliptic_order
            if any(key.ell):
                parts["f"][key] = c
            elif elliptic == 0:
                parts["h"][key] = c
            elif (elliptic == 2 and key.a == key.abar and
                  max(key.a) == 1):
                parts["normal"][key] = c
            elif elliptic >= 3:
                parts["g"][key] = c
            else:
                raise HamiltonianFormatError(key, c)
        pieces = {name: H.project(lambda key, terms=terms: key in terms)
                  for name, terms in parts.items()}
        return cls(pieces["h"], pieces["normal"], pieces["g"],
                   pieces["f"])

    @property
    def dims(self):
        return self._h.dims

    @property
    def h(self):
        return self._h

    @property
    def normal(self):
        return self._normal

    @property
    def g(self):
        return self._g

    @property
    def f(self):
        return self._f

    def _at(self, evaluator, J):
        n, m = self.dims
        return evaluator(np.asarray(J, dtype=float), np.zeros(n),
                         np.zeros(m, dtype=complex)).real

    def frequency(self, J):
        return self._at(self._dh, J)

    def hessian(self, J):
        n = self.dims[0]
        return self._at(self._d2h, J).reshape(n, n)

    def normal_frequencies(self, J):
        if self._freqs is None:
            return np.zeros(0)
        return self._at(self._freqs, J)


def continuation_hamiltonian(model, eps, order=4):
    """h + eps Omega~ . z zbar + eps g + eps^order f as one series.

    model is a ContinuationModel or an eps-free series to split.
    """
    if not isinstance(model, ContinuationModel):
        model = ContinuationModel.from_series(model)
    return (model.h + model.normal.scale(eps) + model.g.scale(eps) +
            model.f.scale(eps ** order))


class ContinuationSetup(namedtuple("ContinuationSetup",
                                   ["T", "k_vec", "I0", "omega_tilde", "eps",
                                    "M", "Omega_lin"])):
    """Period data of the continuation mode; I0 is J_eps and omega_tilde
    the resonant frequency 2 pi k / T."""

    __slots__ = ()

    def to_dict(self):
        return {"T": self.T, "k": list(self.k_vec),
                "J_eps": np.asarray(self.I0).tolist(),
                "omega": np.asarray(self.omega_tilde).tolist(),
                "eps": self.eps, "M": np.asarray(self.M).tolist(),
                "Omega_lin": np.asarray(self.Omega_lin).tolist()}


class ContinuationResult(namedtuple("ContinuationResult",
                                    ["search", "setup", "corrections"])):
    """The orbits found, their period data and sup norms of the
    corrections (J~, psi~, z~) per orbit."""

    __slots__ = ()

    @property
    def solutions(self):
        return self.search.solutions


def resonant_torus_continuation(model, J0, T, k_vec, eps, c1=1.0, order=4,
                                grid_per_dim=12, closure_tol=1e-7,
                                max_iter=50, threads=1,
                                samples_per_period=64, min_samples=256,
                                contraction_opts=None):
    if not isinstance(model, ContinuationModel):
        model = ContinuationModel.from_series(model)
    if eps * T > 1.0 / c1:
        raise ContinuationWindowError(eps, T, c1)
    omega = 2 * np.pi * np.asarray(k_vec, dtype=float) / T
    J0 = np.asarray(J0, dtype=float)
    mismatch = float(np.abs(model.frequency(J0) - omega).max())
    if mismatch > 1e-8 * (1.0 + float(np.abs(omega).max())):
        raise ResonanceMismatchError(mismatch)
    solved = optimize.root(lambda J: model.frequency(J) - omega, J0,
                           jac=model.hessian, tol=1e-14)
    if not solved.success:
        raise ResonanceMismatchError(
            float(np.abs(model.frequency(solved.x) - omega).max()))
    J_eps = solved.x
    M = require_invertible(model.hessian(J_eps))
    Omega_lin = eps * model.normal_frequencies(J_eps)
    gap = monodromy_gap(Omega_lin, T)
    if not gap.invertible:
        raise MonodromySingularError(gap)
    setup = ContinuationSetup(float(T), tuple(int(x) for x in k_vec), J_eps,
                              omega, eps, M, Omega_lin)
    H = continuation_hamiltonian(model, eps, order)
    max_freq = float(np.abs(np.concatenate([omega, Omega_lin])).max())
    N = grid_size(T, max_freq, samples_per_period, min_samples)
    reduction = ReductionCore(H, J_eps, omega, 1.0, M, Omega_lin, T, N,
                              setup.k_vec, contraction_opts)
    logger.info("Continuation at eps = {:.3e}, T = {:.6g}, J_eps = "
                "{}".format(eps, T, np.round(J_eps, 8).tolist()))
    search = find_critical_points(reduction, setup, grid_per_dim,
                                  closure_tol, max_iter, threads)
    corrections = []
    for solution in search.solutions:
        J = np.abs(np.asarray(solution.I) - J_eps[None, :]).max()
        psi = np.abs(np.asarray(solution.phi) - solution.phi_star[None, :] -
                     np.outer(solution.t, omega)).max()
        z = np.abs(np.asarray(solution.z)).max() if model.dims[1] else 0.0
        corrections.append((float(J), float(psi), float(z)))
    return ContinuationResult(search, setup, corrections)
