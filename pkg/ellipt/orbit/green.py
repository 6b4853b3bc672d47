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

Linear boundary value problem of the periodic orbit search.

For forcing (Jhat, psihat, zhat) on [0, T] the operator L returns the
solution of

    J' = Jhat,   psi' = M J + psihat,   z' = i Omega z + zhat

with psi(0) = psi(T) = 0 and z(0) = z(T), M an invertible n x n matrix and
Omega a real m-vector with the monodromy 1 - e^{i Omega T} invertible.
Integrals are composite Simpson rules on a uniform grid.

"""

import math
import logging
from collections import namedtuple

import numpy as np

from ellipt.contrib.numtheory import wrap, dist_to_2pi
from ellipt.contrib.quadrature import cumulative_simpson, time_grid
from ellipt.normal.twist import require_invertible

logger = logging.getLogger(__name__)

__all__ = [
    "MonodromySingularError",
    "MonodromyReport",
    "PeriodSetup",
    "GreenOperator",
    "resonant_action",
    "monodromy_gap",
    "green_apply",
    "green_norm_bound",
]

# sup-norm constant of the Green operator bound
GREEN_CONSTANT = 3.0


class MonodromySingularError(Exception):

    def __init__(self, report):
        super().__init__(
            "Monodromy 1 - exp(i Omega T) is not invertible: min "
            "dist(Omega T, 2 pi Z) = {:.3e}".format(report.min_distance))
        self._report = report

    @property
    def report(self):
        return self._report


class MonodromyReport(namedtuple("MonodromyReport",
                                 ["invertible", "minv_norm", "stima_bound",
                                  "min_distance"])):
    """minv_norm is the sup norm of the inverse monodromy; stima_bound the
    estimate 2 / min dist(Omega_j T, 2 pi Z) that dominates it."""

    __slots__ = ()

    def to_dict(self):
        return dict(self._asdict())


def monodromy_gap(Omega, T, floor=1e-12):
    Omega = np.asarray(Omega, dtype=float).reshape(-1)
    if Omega.size == 0:
        return MonodromyReport(True, 0.0, 0.0, float("inf"))
    diag = np.abs(1.0 - np.exp(1j * Omega * T))
    dist = float(dist_to_2pi(Omega * T).min())
    if diag.min() <= floor:
        return MonodromyReport(False, float("inf"), float("inf"), dist)
    return MonodromyReport(True, float((1.0 / diag).max()), 2.0 / dist,
                           dist)


def resonant_action(T, eta, R, omega):
    """I0, k and omega_tilde for a period T.

    I0 = -(2 pi / (eta^2 T)) R^-1 <omega T / 2 pi> puts the frequency
    omega + eta^2 R I0 exactly on 2 pi k / T.
    """
    R = require_invertible(R)
    omega = np.asarray(omega, dtype=float)
    cycles = omega * T / (2 * math.pi)
    frac = wrap(cycles)
    k = np.rint(cycles - frac).astype(np.int64)
    I0 = -(2 * math.pi / (eta ** 2 * T)) * np.linalg.solve(R, frac)
    omega_tilde = 2 * math.pi * k / T
    drift = float(np.abs(omega + eta ** 2 * R @ I0 - omega_tilde).max())
    if drift > 1e-9 * max(1.0, float(np.abs(omega).max())):
        logger.warning("Resonant frequency mismatch {:.3e}".format(drift))
    if T < 1.0 / eta ** 2:
        logger.warning("Period T = {:.6g} below 1/eta^2 = {:.6g}".format(
            T, 1.0 / eta ** 2))
    return I0, tuple(int(x) for x in k), omega_tilde


class PeriodSetup(object):
    """Everything fixed by the choice of (T, eta): the resonant action, the
    integer winding vector, the shifted frequencies and the inverse
    monodromy bound."""

    def __init__(self, T, k_vec, I0, omega_tilde, Omega_eta, eta,
                 minv_bound=None, R=None, Q=None):
        self._T = float(T)
        self._k_vec = tuple(int(x) for x in k_vec)
        self._I0 = np.asarray(I0, dtype=float)
        self._omega_tilde = np.asarray(omega_tilde, dtype=float)
        self._Omega_eta = np.asarray(Omega_eta, dtype=float)
        self._eta = float(eta)
        self._R = None if R is None else np.asarray(R, dtype=float)
        self._Q = None if Q is None else np.asarray(Q, dtype=float)
        gap = monodromy_gap(self._Omega_eta, self._T)
        if not gap.invertible:
            raise MonodromySingularError(gap)
        self._minv_bound = gap.minv_norm if minv_bound is None else float(
            minv_bound)
        self._gap = gap

    @classmethod
    def build(cls, T, eta, R, Q, freq, minv_bound=None):
        I0, k, omega_tilde = resonant_action(T, eta, R, freq.omega)
        Q = np.asarray(Q, dtype=float).reshape(freq.m, freq.n)
        Omega_eta = freq.Omega + eta ** 2 * Q @ I0
        setup = cls(T, k, I0, omega_tilde, Omega_eta, eta, minv_bound, R, Q)
        logger.info("Period setup T = {:.6g}, k = {}, I0 = {}".format(
            T, k, np.round(I0, 6).tolist()))
        return setup

    @property
    def T(self):
        return self._T

    @property
    def k_vec(self):
        return self._k_vec

    @property
    def I0(self):
        return self._I0.copy()

    @property
    def omega_tilde(self):
        return self._omega_tilde.copy()

    @property
    def Omega_eta(self):
        return self._Omega_eta.copy()

    @property
    def eta(self):
        return self._eta

    @property
    def R(self):
        return self._R

    @property
    def Q(self):
        return self._Q

    @property
    def minv_bound(self):
        return self._minv_bound

    @property
    def monodromy(self):
        return self._gap

    def to_dict(self):
        return {"T": self._T, "k": list(self._k_vec),
                "I0": self._I0.tolist(),
                "omega_tilde": self._omega_tilde.tolist(),
                "Omega_eta": self._Omega_eta.tolist(), "eta": self._eta,
                "minv_bound": self._minv_bound,
                "monodromy": self._gap.to_dict()}


class GreenOperator(object):
    """L for fixed (M, Omega, T) on a uniform grid of N subintervals."""

    def __init__(self, M, Omega, T, N):
        self._M = np.atleast_2d(np.asarray(M, dtype=float))
        self._Omega = np.asarray(Omega, dtype=float).reshape(-1)
        self._T = float(T)
        self._N = int(N)
        self._t = time_grid(self._T, self._N)
        n = self._M.shape[0]
        if n:
            self._Minv = np.linalg.inv(require_invertible(self._M))
        else:
            self._Minv = self._M
        gap = monodromy_gap(self._Omega, self._T)
        if not gap.invertible:
            raise MonodromySingularError(gap)
        self._gap = gap
        self._phase = np.exp(1j * np.outer(self._t, self._Omega))
        eT = np.exp(1j * self._Omega * self._T)
        self._monodromy_factor = eT / (1.0 - eT)

    @property
    def t(self):
        return self._t.copy()

    @property
    def T(self):
        return self._T

    @property
    def N(self):
        return self._N

    @property
    def M(self):
        return self._M.copy()

    @property
    def Omega(self):
        return self._Omega.copy()

    def apply(self, Jhat, psihat, zhat):
        t = self._t
        IJ = cumulative_simpson(Jhat, t)
        IIJ = cumulative_simpson(IJ, t)
        Ipsi = cumulative_simpson(psihat, t)
        alpha = -(IIJ[-1] + self._Minv @ Ipsi[-1]) / self._T
        J = alpha[None, :] + IJ
        psi = (np.outer(t, self._M @ alpha) + IIJ @ self._M.T + Ipsi)
        if self._Omega.size == 0:
            return J, psi, np.zeros((t.size, 0), dtype=complex)
        Iz = cumulative_simpson(np.conj(self._phase) * zhat, t)
        beta = self._monodromy_factor * Iz[-1]
        z = self._phase * (beta[None, :] + Iz)
        return J, psi, z

    def norm_bound(self, C=GREEN_CONSTANT):
        return green_norm_bound(self._M, self._Omega, self._T, C,
                                minv=self._gap.minv_norm)


def green_apply(Jhat, psihat, zhat, M, Omega, T):
    """L applied to samples on the uniform grid of len(Jhat) points."""
    N = np.asarray(Jhat).shape[0] - 1
    return GreenOperator(M, Omega, T, N).apply(
        np.asarray(Jhat, dtype=float), np.asarray(psihat, dtype=float),
        np.asarray(zhat, dtype=complex))


def green_norm_bound(M, Omega, T, C=GREEN_CONSTANT, minv=None):
    """C (|M^-1| + |M| T^2 + |M| |M^-1| T + |monodromy^-1| T), sup norms.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size:
        norm_M = float(np.linalg.norm(M, np.inf))
        norm_Minv = float(np.linalg.norm(
            np.linalg.inv(require_invertible(M)), np.inf))
    else:
        norm_M = norm_Minv = 0.0
    if minv is None:
        minv = monodromy_gap(Omega, T).minv_norm
    return C * (norm_Minv + norm_M * T ** 2 + norm_M * norm_Minv * T +
                minv * T)
