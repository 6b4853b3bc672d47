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

Independent checks of computed objects by direct integration.

verify_orbit re-integrates a periodic orbit from its initial state;
conjugacy_residual compares H o Phi_chi against the averaged Hamiltonian at
sample points, Phi_chi being the time one flow of the generating function.

"""

import math
import logging
from collections import namedtuple

import numpy as np

from ellipt.contrib.numtheory import dist_to_2pi
from ellipt.normal.averaging import rescale
from ellipt.dynamics.integrator import (
    IntegratorConfig,
    HamiltonianFlow,
    PhaseState,
    integrate,
)

logger = logging.getLogger(__name__)

__all__ = [
    "VerifyReport",
    "ConjugacyReport",
    "verify_orbit",
    "sample_points",
    "conjugacy_residual",
]


class VerifyReport(namedtuple("VerifyReport",
                              ["closure", "closure_I", "closure_phi",
                               "closure_z", "energy_drift", "torus_sup_I",
                               "torus_sup_z", "phase_sup",
                               "conjugacy_deviation", "passed"])):
    __slots__ = ()

    def to_dict(self):
        return dict(self._asdict())


def verify_orbit(H, solution, cfg=None, closure_tol=1e-7):
    """Integrate H from solution.initial_state over one period.

    Closure compares the state after T with the initial one, angles modulo
    2 pi. The torus distances are measured from the resonant action and the
    linear angle motion of the solution's period setup.
    """
    cfg = cfg or IntegratorConfig()
    setup = solution.setup
    T = setup.T
    traj = integrate(H, solution.initial_state, T, cfg,
                     t_eval=solution.t)
    closure_I = float(np.abs(traj.I[-1] - traj.I[0]).max(initial=0.0))
    closure_phi = float(dist_to_2pi(traj.phi[-1] - traj.phi[0]).max(
        initial=0.0))
    closure_z = float(np.abs(traj.z[-1] - traj.z[0]).max(initial=0.0))
    closure = max(closure_I, closure_phi, closure_z)
    energy = HamiltonianFlow(H).energy(traj.I, traj.phi, traj.z).real
    drift = float(np.abs(energy - energy[0]).max())
    linear = traj.phi[0][None, :] + np.outer(traj.t, setup.omega_tilde)
    report = VerifyReport(
        closure, closure_I, closure_phi, closure_z, drift,
        float(np.abs(traj.I - setup.I0[None, :]).max(initial=0.0)),
        float(np.abs(traj.z).max(initial=0.0)),
        float(np.abs(traj.phi - linear).max(initial=0.0)),
        traj.conjugacy_deviation,
        closure <= closure_tol)
    if report.passed:
        logger.info("Orbit closes to {:.3e} over T = {:.6g}".format(
            closure, T))
    else:
        logger.warning("Orbit closure {:.3e} exceeds {:.1e}".format(
            closure, closure_tol))
    return report


def sample_points(n, m, count=16, radius=1.0, seed=0):
    """Random phase space points with |I|, |z| <= radius."""
    rng = np.random.default_rng(seed)
    points = []
    for _ in range(count):
        I = rng.uniform(-radius, radius, n)
        phi = rng.uniform(0.0, 2 * math.pi, n)
        r = radius * np.sqrt(rng.uniform(0.0, 1.0, m))
        z = r * np.exp(1j * rng.uniform(0.0, 2 * math.pi, m))
        points.append(PhaseState.make(I, phi, z))
    return points


class ConjugacyReport(namedtuple("ConjugacyReport",
                                 ["eta", "max_residual", "residuals"])):
    __slots__ = ()

    def to_dict(self):
        return {"eta": self.eta, "max_residual": self.max_residual,
                "residuals": list(self.residuals)}


def conjugacy_residual(H_star, nf, eta, points=None, cfg=None,
                       include_remainder=False):
    """max |H_eta(Phi(zeta)) - K_eta(zeta)| over sample points.

    H_eta and K_eta are the rescaled original and averaged Hamiltonians and
    Phi the time one flow of the rescaled total generating function. The
    residual is O(eta^4) without the remainder and O(eta^5) with it.
    """
    cfg = cfg or IntegratorConfig()
    n, m = H_star.dims
    points = points or sample_points(n, m)
    H_eta = HamiltonianFlow(rescale(H_star, eta).series)
    K_eta = HamiltonianFlow(nf.rescaled(eta, include_remainder))
    chi_total = nf.chi[0]
    for part in nf.chi[1:]:
        chi_total = chi_total + part
    chi_eta = rescale(chi_total, eta).series
    residuals = []
    for zeta in points:
        moved = integrate(chi_eta, zeta, 1.0, cfg, t_eval=[0.0, 1.0])
        end = moved.state(-1)
        value = H_eta.energy(end.I, end.phi, end.z)
        target = K_eta.energy(zeta.I, zeta.phi, zeta.z)
        residuals.append(float(abs(value - target)))
    report = ConjugacyReport(eta, max(residuals), residuals)
    logger.info("Conjugacy residual at eta = {}: {:.3e}".format(
        eta, report.max_residual))
    return report
