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

Reduction of the periodic orbit problem to a function on a torus.

For every initial angle phi0 an orbit is sought in the form

    I = I_base + s J,   phi = phi0 + nu t + s psi,   z = s w

with psi(0) = psi(T) = 0 and w(0) = w(T). Writing the equations of motion
as (J', psi' - M J, w' - i Omega w) = P(J, psi, w) turns the problem into
the fixed point x = L(P(x)) of the Green operator. The solution closes
except for the jump I(T) - I(0), which is the gradient of the action
functional at phi0, so periodic orbits are critical points of that
functional.

s is eta in the torus mode and 1 in the continuation mode.

"""

import logging
from collections import namedtuple

import numpy as np

from ellipt.contrib.quadrature import simpson, grid_size
from ellipt.series.tfseries import hamiltonian_vector_field
from ellipt.normal.averaging import NormalFormResult
from ellipt.orbit.green import GreenOperator
from ellipt.orbit.contraction import (
    ContractionConstant,
    contraction_solve,
    sup,
)

logger = logging.getLogger(__name__)

__all__ = [
    "PseudoOrbit",
    "ActionSample",
    "ReductionCore",
    "TorusReduction",
    "pseudo_periodic",
    "reduced_action",
    "action_gradient",
]


class PseudoOrbit(object):
    """Solution of the reduced problem for one phi0.

    Holds the corrections (J, psi, w), the reconstructed trajectory and the
    residuals of the construction.
    """

    def __init__(self, phi0, t, J, psi, w, I, phi, z, contraction,
                 ode_residual, boundary_residual, field=None):
        self._phi0 = np.asarray(phi0, dtype=float)
        self._t = t
        self._J = J
        self._psi = psi
        self._w = w
        self._I = I
        self._phi = phi
        self._z = z
        self._contraction = contraction
        self._ode_residual = ode_residual
        self._boundary_residual = boundary_residual
        self._field = field

    @property
    def phi0(self):
        return self._phi0.copy()

    @property
    def t(self):
        return self._t

    @property
    def J(self):
        return self._J

    @property
    def psi(self):
        return self._psi

    @property
    def w(self):
        return self._w

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
    def contraction(self):
        return self._contraction

    @property
    def iterations(self):
        return self._contraction.iterations

    @property
    def ode_residual(self):
        return self._ode_residual

    @property
    def boundary_residual(self):
        return self._boundary_residual

    @property
    def field(self):
        """(H, I', phi', z', zbar') along the trajectory, if kept."""
        return self._field

    @property
    def jump(self):
        """I(T) - I(0)."""
        return self._I[-1] - self._I[0]

    @property
    def correction_norm(self):
        return sup(self._J), sup(self._psi), sup(self._w)


class ActionSample(namedtuple("ActionSample",
                              ["phi0", "value", "gradient", "imag_residual",
                               "orbit"])):
    __slots__ = ()


class ReductionCore(object):
    """Fixed point machinery shared by the torus and continuation modes."""

    def __init__(self, H, base_action, base_frequency, scale, M, Omega, T,
                 N, k_vec=None, contraction_opts=None):
        self._H = H
        self._n, self._m = H.dims
        self._base = np.asarray(base_action, dtype=float)
        self._nu = np.asarray(base_frequency, dtype=float)
        self._s = float(scale)
        self._M = np.atleast_2d(np.asarray(M, dtype=float))
        self._Omega = np.asarray(Omega, dtype=float).reshape(-1)
        self._T = float(T)
        self._k_vec = None if k_vec is None else tuple(k_vec)
        self._green = GreenOperator(self._M, self._Omega, self._T, N)
        self._t = self._green.t
        self._field = hamiltonian_vector_field(H)
        self._bundle = self._field.bundle()
        self._opts = dict(contraction_opts or {})
        self._L_norm = self._green.norm_bound()
        self._constant = None

    @property
    def hamiltonian(self):
        return self._H

    @property
    def n(self):
        return self._n

    @property
    def m(self):
        return self._m

    @property
    def T(self):
        return self._T

    @property
    def t(self):
        return self._t

    @property
    def k_vec(self):
        return self._k_vec

    @property
    def scale(self):
        return self._s

    @property
    def base_action(self):
        return self._base.copy()

    @property
    def base_frequency(self):
        return self._nu.copy()

    @property
    def green(self):
        return self._green

    @property
    def L_norm(self):
        return self._L_norm

    @property
    def constant(self):
        """Contraction constant shared by the solves of this reduction."""
        return self._constant

    def _sizes(self):
        P = self._t.size
        return P * self._n, P * self._n, P * self._m

    def pack(self, J, psi, w):
        return np.concatenate([J.ravel(), psi.ravel(),
                               np.asarray(w).ravel()]).astype(complex)

    def unpack(self, x):
        P = self._t.size
        a, b, _ = self._sizes()
        J = x[:a].real.reshape(P, self._n)
        psi = x[a:a + b].real.reshape(P, self._n)
        w = x[a + b:].reshape(P, self._m)
        return J, psi, w

    def _random_point(self, rng, x0, radius):
        a, b, c = self._sizes()
        v = np.concatenate([rng.uniform(-1, 1, a + b),
                            np.zeros(c)]).astype(complex)
        v[a + b:] = (rng.uniform(-1, 1, c) + 1j * rng.uniform(-1, 1, c))
        return radius * v / max(sup(v), 1e-300)

    def trajectory(self, phi0, J, psi, w):
        s = self._s
        I = self._base[None, :] + s * J
        phi = phi0[None, :] + np.outer(self._t, self._nu) + s * psi
        z = s * w
        return I, phi, z

    def _field_at(self, I, phi, z):
        return self._field.split(self._bundle(I, phi, z))

    def P(self, phi0, x):
        """The nonlinear map (J, psi, w) -> (P_J, P_psi, P_w)."""
        J, psi, w = self.unpack(x)
        I, phi, z = self.trajectory(phi0, J, psi, w)
        _, I_dot, phi_dot, z_dot, _ = self._field_at(I, phi, z)
        s = self._s
        PJ = I_dot.real / s
        Ppsi = (phi_dot.real - self._nu[None, :]) / s - J @ self._M.T
        Pw = z_dot / s - 1j * self._Omega[None, :] * w
        return self.pack(PJ, Ppsi, Pw)

    def L(self, y):
        PJ, Ppsi, Pw = self.unpack(y)
        return self.pack(*self._green.apply(PJ, Ppsi, Pw))

    def solve(self, phi0):
        phi0 = np.asarray(phi0, dtype=float).reshape(self._n)
        x0 = np.zeros(sum(self._sizes()), dtype=complex)
        opts = dict(self._opts)
        opts.setdefault("random_point", self._random_point)
        cached = self._constant
        result = contraction_solve(lambda x: self.P(phi0, x), self.L, x0,
                                   L_norm=self._L_norm, constant=cached,
                                   **opts)
        if result.delta0 > (cached.radius if cached else 0.0):
            self._constant = ContractionConstant(
                result.lipschitz, result.a_priori, result.delta0)
        J, psi, w = self.unpack(result.x)
        I, phi, z = self.trajectory(phi0, J, psi, w)
        boundary = max(sup(psi[0]), sup(psi[-1]), sup(w[-1] - w[0]))
        field = self._field_at(I, phi, z)
        orbit = PseudoOrbit(phi0, self._t, J, psi, w, I, phi, z, result,
                            self._ode_residual(I, phi, z, field), boundary,
                            field)
        logger.debug("Pseudo orbit at phi0 = {}: {} iterations, jump "
                     "{:.3e}".format(np.round(phi0, 6).tolist(),
                                     result.iterations,
                                     sup(orbit.jump)))
        return orbit

    def _ode_residual(self, I, phi, z, field=None):
        """Largest mismatch of the state against Simpson panels of the
        vector field over pairs of grid steps."""
        _, I_dot, phi_dot, z_dot, _ = field or self._field_at(I, phi, z)
        h = self._t[1] - self._t[0]
        worst = 0.0
        for state, rate in ((I, I_dot.real), (phi, phi_dot.real),
                            (z, z_dot)):
            if state.shape[1] == 0 or state.shape[0] < 3:
                continue
            panel = h / 3 * (rate[:-2] + 4 * rate[1:-1] + rate[2:])
            worst = max(worst, sup(state[2:] - state[:-2] - panel))
        return worst

    def action(self, orbit):
        """(value, imaginary residual) of the action along an orbit.

        The action is the integral of I . phi' + i z . conj(z)' - H with
        the velocities taken from the vector field.
        """
        H, _, phi_dot, z_dot, _ = (orbit.field or
                                   self._field_at(orbit.I, orbit.phi,
                                                  orbit.z))
        integrand = ((orbit.I * phi_dot.real).sum(axis=1) +
                     1j * (orbit.z * np.conj(z_dot)).sum(axis=1) - H)
        value = simpson(integrand, self._t)
        return float(np.real(value)), float(abs(np.imag(value)))

    def evaluate(self, phi0):
        orbit = self.solve(phi0)
        value, imag = self.action(orbit)
        return ActionSample(orbit.phi0, value, orbit.jump, imag, orbit)


class TorusReduction(ReductionCore):
    """Torus mode: the rescaled averaged Hamiltonian around the resonant
    action I0, with s = eta, M = eta^2 R and Omega = Omega_eta."""

    def __init__(self, setup, H_rescaled, samples_per_period=64,
                 min_samples=256, contraction_opts=None):
        max_freq = float(np.abs(np.concatenate(
            [setup.omega_tilde, setup.Omega_eta])).max())
        N = grid_size(setup.T, max_freq, samples_per_period, min_samples)
        eta = setup.eta
        super(TorusReduction, self).__init__(
            H_rescaled, setup.I0, setup.omega_tilde, eta,
            eta ** 2 * np.asarray(setup.R, dtype=float), setup.Omega_eta,
            setup.T, N, setup.k_vec, contraction_opts)
        self._setup = setup
        logger.debug("Torus reduction on {} grid points, |L| <= "
                     "{:.3e}".format(N + 1, self.L_norm))

    @property
    def setup(self):
        return self._setup


def _torus_reduction(setup, H_avg, reduction, **kwargs):
    if reduction is not None:
        return reduction
    if isinstance(H_avg, NormalFormResult):
        H_avg = H_avg.rescaled(setup.eta)
    return TorusReduction(setup, H_avg, **kwargs)


def pseudo_periodic(phi0, setup, H_avg, reduction=None, **kwargs):
    """Pseudo orbit through phi0 for the period data in setup.

    H_avg is either a NormalFormResult, rescaled with setup.eta, or an
    already rescaled series. A prebuilt reduction for the same setup skips
    the construction and H_avg is then ignored; kwargs go to
    TorusReduction.
    """
    return _torus_reduction(setup, H_avg, reduction, **kwargs).solve(phi0)


def reduced_action(phi0, setup, H_avg, reduction=None, **kwargs):
    torus = _torus_reduction(setup, H_avg, reduction, **kwargs)
    return torus.action(torus.solve(phi0))[0]


def action_gradient(phi0, setup, H_avg, reduction=None, **kwargs):
    """The closing jump I(T) - I(0), equal to the gradient of the reduced
    action at phi0."""
    return pseudo_periodic(phi0, setup, H_avg, reduction, **kwargs).jump
