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

Twist matrix R and coupling matrix Q of the averaged Hamiltonian.

The averaged quartic part contains (1/2) R I . I + (Q I) . (z zbar). Both
matrices can be read off the normal form (the *_from_slice functions) or
computed directly from the cubic and quartic coefficients of the original
Hamiltonian. The direct formulas sum over Fourier modes ell of the linear
elliptic terms

    h+[i, j, ell] = c(e_i, e_j, 0, ell)     h-[i, j, ell] = c(e_i, 0, e_j, ell)

divided by omega . ell + Omega_j. The cubic elliptic terms with two zbar_j
factors carry a (1 + delta_jj') multiplicity in the coupling sum.

"""

import math
import logging
from collections import defaultdict, namedtuple

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "SmallDivisorError",
    "TwistSingularError",
    "MatrixReport",
    "compute_twist_matrix",
    "compute_coupling_matrix",
    "twist_from_slice",
    "coupling_from_slice",
    "require_invertible",
]


class SmallDivisorError(Exception):

    def __init__(self, ell, h, value, bound):
        super().__init__(
            "Divisor omega . ell + Omega . h = {:.3e} below {:.3e} at "
            "ell = {}, h = {}".format(value, bound, list(ell), list(h)))
        self._ell = tuple(ell)
        self._h = tuple(h)

    @property
    def ell(self):
        return self._ell

    @property
    def h(self):
        return self._h


class TwistSingularError(Exception):

    def __init__(self, R, cond):
        super().__init__(
            "Twist matrix is singular (condition number {:.3e}): {}".format(
                cond, np.asarray(R).tolist()))
        self._cond = cond

    @property
    def cond(self):
        return self._cond


class MatrixReport(namedtuple("MatrixReport",
                              ["matrix", "imag_residual", "asymmetry",
                               "tail", "shells"])):
    """A real matrix with the imaginary part dropped from it, its asymmetry
    before symmetrization, and a geometric estimate of the Fourier tail
    left out of the sums."""

    __slots__ = ()

    def to_dict(self):
        return {"matrix": np.asarray(self.matrix).tolist(),
                "imag_residual": self.imag_residual,
                "asymmetry": self.asymmetry,
                "tail": self.tail}


def require_invertible(R, cond_max=1e12, zero_tol=1e-10):
    R = np.asarray(R, dtype=float)
    if R.size == 0:
        return R
    if float(np.abs(R).max()) <= zero_tol:
        raise TwistSingularError(R, float("inf"))
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > cond_max:
        raise TwistSingularError(R, cond)
    return R


def _unit(size, index):
    v = [0] * size
    v[index] = 1
    return tuple(v)


def _first_order_tables(H):
    """h+ and h- keyed by (i, j, ell) and the cubic elliptic tables.

    A[j, j', ell] = c(0, e_j, e_j + e_j', ell)
    B[j, j', ell] = c(0, e_j + e_j', e_j, ell)
    """
    hplus, hminus = {}, {}
    A, B = {}, {}
    for key, c in H.items():
        if key.action_order == 1 and key.elliptic_order == 1:
            i = key.k.index(1)
            if sum(key.a) == 1:
                hplus[(i, key.a.index(1), key.ell)] = c
            else:
                hminus[(i, key.abar.index(1), key.ell)] = c
        elif key.action_order == 0 and key.elliptic_order == 3:
            if sum(key.a) == 1:
                j = key.a.index(1)
                if key.abar[j] >= 1:
                    rest = list(key.abar)
                    rest[j] -= 1
                    A[(j, rest.index(1), key.ell)] = c
            elif sum(key.a) == 2 and sum(key.abar) == 1:
                j = key.abar.index(1)
                if key.a[j] >= 1:
                    rest = list(key.a)
                    rest[j] -= 1
                    B[(j, rest.index(1), key.ell)] = c
    return hplus, hminus, A, B


def _divisor(freq, ell, j, floor):
    value = float(np.dot(freq.omega, ell) + freq.Omega[j])
    bound = freq.divisor_floor(ell, floor)
    if abs(value) < bound:
        raise SmallDivisorError(ell, _unit(freq.m, j), value, bound)
    return value


def _neg(ell):
    return tuple(-x for x in ell)


def _geometric_tail(shells):
    """Tail of a sum from the decay of its largest term per |ell| shell."""
    points = sorted((s, v) for s, v in shells.items() if s >= 1 and v > 0)
    if len(points) < 2:
        return 0.0
    s = np.array([p[0] for p in points], dtype=float)
    v = np.log([p[1] for p in points])
    slope, intercept = np.polyfit(s, v, 1)
    ratio = math.exp(slope)
    if ratio >= 1.0:
        return float("inf")
    last = math.exp(intercept + slope * s[-1])
    return last * ratio / (1.0 - ratio)


def _record(shells, ell, value):
    order = sum(abs(x) for x in ell)
    shells[order] = max(shells.get(order, 0.0), abs(value))


def _finish(M, shells, symmetric):
    imag = float(np.abs(M.imag).max()) if M.size else 0.0
    real = M.real.copy()
    asym = 0.0
    if symmetric and real.size:
        asym = float(np.abs(real - real.T).max())
        real = 0.5 * (real + real.T)
    return MatrixReport(real, imag, asym, _geometric_tail(shells),
                        dict(shells))


def compute_twist_matrix(H, freq, divisor_floor=1e-10):
    """R from the cubic and quartic coefficients of H.

    R[i, i'] = (1 + delta_ii') c(e_i + e_i')
               - sum_{j, ell} (h+[i, j, ell] h-[i', j, -ell]
                               + h+[i', j, ell] h-[i, j, -ell])
                              / (omega . ell + Omega_j)
    """
    n = H.n
    zm = (0,) * H.m
    zero = (0,) * n
    R = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for i2 in range(n):
            k = tuple(a + b for a, b in zip(_unit(n, i), _unit(n, i2)))
            R[i, i2] = (1 + (i == i2)) * H.coefficient(k, zm, zm, zero)
    hplus, hminus, _, _ = _first_order_tables(H)
    shells = {}
    for (p, j, ell), hp in hplus.items():
        neg = _neg(ell)
        partners = [(q, hminus[(q, j, neg)]) for q in range(n)
                    if (q, j, neg) in hminus]
        if not partners:
            continue
        d = _divisor(freq, ell, j, divisor_floor)
        for q, hm in partners:
            value = hp * hm / d
            R[p, q] -= value
            R[q, p] -= value
            _record(shells, ell, value)
    report = _finish(R, shells, True)
    logger.debug("Direct twist matrix {} (imag {:.2e}, tail {:.2e})".format(
        report.matrix.tolist(), report.imag_residual, report.tail))
    return report


def compute_coupling_matrix(H, freq, divisor_floor=1e-10):
    """Q from the cubic and quartic coefficients of H.

    Q[j, i] = c(e_i, e_j, e_j, 0)
        - sum_{ell, q} ell_q (h+[i, j, ell] h-[q, j, -ell]
                              + h+[q, j, ell] h-[i, j, -ell])
                             / (omega . ell + Omega_j)
        - sum_{j', ell} (1 + delta_jj') (A[j, j', -ell] h+[i, j', ell]
                                         + B[j, j', ell] h-[i, j', -ell])
                                        / (omega . ell + Omega_j')
    """
    n, m = H.n, H.m
    zero = (0,) * n
    Q = np.zeros((m, n), dtype=complex)
    for j in range(m):
        for i in range(n):
            Q[j, i] = H.coefficient(_unit(n, i), _unit(m, j), _unit(m, j),
                                    zero)
    hplus, hminus, A, B = _first_order_tables(H)
    shells = {}
    for (p, j, ell), hp in hplus.items():
        neg = _neg(ell)
        partners = [(q, hminus[(q, j, neg)]) for q in range(n)
                    if (q, j, neg) in hminus]
        if not partners:
            continue
        d = _divisor(freq, ell, j, divisor_floor)
        for q, hm in partners:
            value = hp * hm / d
            Q[j, p] -= ell[q] * value
            Q[j, q] -= ell[p] * value
            _record(shells, ell, value)
    for (i, jp, ell), hp in hplus.items():
        neg = _neg(ell)
        for j in range(m):
            c = A.get((j, jp, neg))
            if c is None:
                continue
            d = _divisor(freq, ell, jp, divisor_floor)
            value = (1 + (j == jp)) * c * hp / d
            Q[j, i] -= value
            _record(shells, ell, value)
    for (i, jp, key_ell), hm in hminus.items():
        ell = _neg(key_ell)
        for j in range(m):
            c = B.get((j, jp, ell))
            if c is None:
                continue
            d = _divisor(freq, ell, jp, divisor_floor)
            value = (1 + (j == jp)) * c * hm / d
            Q[j, i] -= value
            _record(shells, ell, value)
    report = _finish(Q, shells, False)
    logger.debug("Direct coupling matrix {} (imag {:.2e})".format(
        report.matrix.tolist(), report.imag_residual))
    return report


def twist_from_slice(H_avg):
    """R read off the action-only quartic terms of an averaged series."""
    n = H_avg.n
    zm = (0,) * H_avg.m
    zero = (0,) * n
    R = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for i2 in range(n):
            k = tuple(a + b for a, b in zip(_unit(n, i), _unit(n, i2)))
            R[i, i2] = (1 + (i == i2)) * H_avg.coefficient(k, zm, zm, zero)
    return _finish(R, {}, True)


def coupling_from_slice(H_avg):
    n, m = H_avg.n, H_avg.m
    zero = (0,) * n
    Q = np.zeros((m, n), dtype=complex)
    for j in range(m):
        for i in range(n):
            Q[j, i] = H_avg.coefficient(_unit(n, i), _unit(m, j),
                                        _unit(m, j), zero)
    return _finish(Q, {}, False)
