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

Numerical flow of a real Hamiltonian series.

The state is kept real as [I, phi, Re z, Im z] and zbar is always the
conjugate of z, so the reality of the flow holds by construction. What the
series itself does to that symmetry is measured instead: the largest
imaginary part of I' and phi' and the mismatch between zbar' and
conj(z') along the trajectory are returned as conjugacy_deviation.

Three schemes are offered: "rk4" with a fixed step, "rk8" (scipy's DOP853
with tolerances) and "splitting", a Strang composition of the exact flow of
omega . I + Omega . z zbar with a fixed RK4 step for the rest.

"""

import math
import logging
from collections import namedtuple

import numpy as np
from scipy.integrate import solve_ivp

from ellipt.series.tfseries import hamiltonian_vector_field, TermKey

logger = logging.getLogger(__name__)

__all__ = [
    "IntegratorStepError",
    "TrajectoryBlowUpError",
    "PhaseState",
    "IntegratorConfig",
    "Trajectory",
    "HamiltonianFlow",
    "integrate",
]

BLOW_UP = 1e8


class IntegratorStepError(Exception):

    def __init__(self, message):
        super().__init__(
            "Integration stopped: {}".format(message))


class TrajectoryBlowUpError(Exception):

    def __init__(self, t, size):
        super().__init__(
            "Trajectory left the bounded region at t = {:.6g} "
            "(|state| = {:.3e})".format(t, size))
        self._t = t

    @property
    def t(self):
        return self._t


class PhaseState(namedtuple("PhaseState", ["I", "phi", "z"])):
    """A point (I, phi, z) of the phase space."""

    __slots__ = ()

    @classmethod
    def make(cls, I, phi, z):
        return cls(np.asarray(I, dtype=float).reshape(-1),
                   np.asarray(phi, dtype=float).reshape(-1),
                   np.asarray(z, dtype=complex).reshape(-1))

    def pack(self):
        return np.concatenate([self.I, self.phi, self.z.real, self.z.imag])

    @classmethod
    def unpack(cls, y, n, m):
        return cls(y[:n], y[n:2 * n], y[2 * n:2 * n + m] +
                   1j * y[2 * n + m:2 * n + 2 * m])


class IntegratorConfig(object):

    METHODS = ("rk4", "rk8", "splitting")

    def __init__(self, method="rk8", rtol=1e-12, atol=1e-12, dt=None,
                 points_per_period=50):
        if method not in self.METHODS:
            raise ValueError("Unknown integrator {}, expected one of "
                             "{}".format(method, self.METHODS))
        self._method = method
        self._rtol = float(rtol)
        self._atol = float(atol)
        self._dt = dt
        self._points_per_period = int(points_per_period)

    @property
    def method(self):
        return self._method

    @property
    def rtol(self):
        return self._rtol

    @property
    def atol(self):
        return self._atol

    def step_for(self, max_frequency):
        if self._dt is not None:
            return float(self._dt)
        return 2 * math.pi / (self._points_per_period *
                              max(max_frequency, 1e-12))


class Trajectory(namedtuple("Trajectory",
                            ["t", "I", "phi", "z",
                             "conjugacy_deviation", "nfev"])):
    """Samples of a solution; phi is unwrapped."""

    __slots__ = ()

    @property
    def phi_wrapped(self):
        return np.mod(self.phi, 2 * math.pi)

    def state(self, index):
        return PhaseState(self.I[index], self.phi[index], self.z[index])


def _linear_part(H):
    """omega and Omega from the ell = 0 degree 2 diagonal terms."""
    n, m = H.dims
    zero = (0,) * n
    zm = (0,) * m
    omega = np.zeros(n)
    Omega = np.zeros(m)
    for i in range(n):
        k = tuple(int(i == p) for p in range(n))
        omega[i] = H.coefficient(TermKey(k, zm, zm, zero)).real
    for j in range(m):
        e = tuple(int(j == q) for q in range(m))
        Omega[j] = H.coefficient(TermKey(zero, e, e, zero)).real
    return omega, Omega


class HamiltonianFlow(object):
    """Right hand side of Hamilton's equations for a series."""

    def __init__(self, H):
        self._H = H
        self._n, self._m = H.dims
        self._field = hamiltonian_vector_field(H)
        self._bundle = self._field.bundle()
        self._deviation = 0.0
        self._nfev = 0

    @property
    def hamiltonian(self):
        return self._H

    @property
    def deviation(self):
        return self._deviation

    @property
    def nfev(self):
        return self._nfev

    def reset(self):
        self._deviation = 0.0
        self._nfev = 0

    def max_frequency(self):
        omega, Omega = _linear_part(self._H)
        values = np.concatenate([np.abs(omega), np.abs(Omega)])
        best = float(values.max()) if values.size else 0.0
        return best if best > 0 else 1.0

    def evaluate(self, I, phi, z):
        """(H, I', phi', z', zbar') at one or many points."""
        return self._field.split(self._bundle(I, phi, z))

    def rhs(self, t, y):
        n, m = self._n, self._m
        state = PhaseState.unpack(y, n, m)
        _, I_dot, phi_dot, z_dot, zbar_dot = self.evaluate(
            state.I, state.phi, state.z)
        self._nfev += 1
        deviation = max(np.abs(I_dot.imag).max(initial=0.0),
                        np.abs(phi_dot.imag).max(initial=0.0),
                        np.abs(zbar_dot - np.conj(z_dot)).max(initial=0.0))
        self._deviation = max(self._deviation, float(deviation))
        return np.concatenate([I_dot.real, phi_dot.real, z_dot.real,
                               z_dot.imag])

    def energy(self, I, phi, z):
        return self.evaluate(I, phi, z)[0]


def _rk4_step(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _fixed_step(step, y0, T, t_eval, dt):
    """Fixed step march from 0 to T, sampling t_eval exactly."""
    out = np.empty((t_eval.size, y0.size))
    y = y0.copy()
    t = 0.0
    sign = 1.0 if T >= 0 else -1.0
    for idx, target in enumerate(t_eval):
        while sign * (target - t) > 1e-15 * max(1.0, abs(target)):
            h = sign * min(abs(dt), abs(target - t))
            y = step(t, y, h)
            t += h
            size = float(np.abs(y).max())
            if not np.isfinite(size) or size > BLOW_UP:
                raise TrajectoryBlowUpError(t, size)
        out[idx] = y
    return out


class _SplitStep(object):
    """Strang step: half linear flow, RK4 on the rest, half linear flow."""

    def __init__(self, H, n, m):
        omega, Omega = _linear_part(H)
        zero = (0,) * n
        zm = (0,) * m
        linear_keys = set()
        for i in range(n):
            k = tuple(int(i == p) for p in range(n))
            linear_keys.add(TermKey(k, zm, zm, zero))
        for j in range(m):
            e = tuple(int(j == q) for q in range(m))
            linear_keys.add(TermKey(zero, e, e, zero))
        self._rest = HamiltonianFlow(H.project(
            lambda key: key not in linear_keys))
        self._omega = omega
        self._Omega = Omega
        self._n = n
        self._m = m

    @property
    def rest(self):
        return self._rest

    def _linear(self, y, h):
        n, m = self._n, self._m
        y = y.copy()
        y[n:2 * n] += self._omega * h
        z = (y[2 * n:2 * n + m] + 1j * y[2 * n + m:]) * np.exp(
            1j * self._Omega * h)
        y[2 * n:2 * n + m] = z.real
        y[2 * n + m:] = z.imag
        return y

    def __call__(self, t, y, h):
        y = self._linear(y, h / 2)
        y = _rk4_step(self._rest.rhs, t, y, h)
        return self._linear(y, h / 2)


def integrate(H, zeta0, T, cfg=None, t_eval=None, samples=None):
    """Integrate from zeta0 over [0, T] and sample the trajectory.

    t_eval defaults to samples + 1 (or 201) uniform points.
    """
    cfg = cfg or IntegratorConfig()
    n, m = H.dims
    zeta0 = PhaseState.make(*zeta0)
    y0 = zeta0.pack()
    if t_eval is None:
        t_eval = np.linspace(0.0, T, (samples or 200) + 1)
    t_eval = np.asarray(t_eval, dtype=float)
    flow = HamiltonianFlow(H)
    dt = cfg.step_for(flow.max_frequency())
    if cfg.method == "rk8":
        result = solve_ivp(flow.rhs, (0.0, T), y0, method="DOP853",
                           t_eval=t_eval, rtol=cfg.rtol, atol=cfg.atol)
        if result.status != 0:
            raise IntegratorStepError(result.message)
        Y = result.y.T
        size = float(np.abs(Y).max()) if Y.size else 0.0
        if not np.isfinite(size) or size > BLOW_UP:
            raise TrajectoryBlowUpError(float(result.t[-1]), size)
        deviation, nfev = flow.deviation, result.nfev
    elif cfg.method == "rk4":
        Y = _fixed_step(lambda t, y, h: _rk4_step(flow.rhs, t, y, h),
                        y0, T, t_eval, dt)
        deviation, nfev = flow.deviation, flow.nfev
    else:
        step = _SplitStep(H, n, m)
        Y = _fixed_step(step, y0, T, t_eval, dt)
        deviation, nfev = step.rest.deviation, step.rest.nfev
    logger.debug("Integrated {} over T = {:.6g} with {} ({} evaluations, "
                 "conjugacy deviation {:.2e})".format(
                     tuple(H.dims), T, cfg.method, nfev, deviation))
    return Trajectory(t_eval, Y[:, :n], Y[:, n:2 * n],
                      Y[:, 2 * n:2 * n + m] + 1j * Y[:, 2 * n + m:],
                      deviation, nfev)
