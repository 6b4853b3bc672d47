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

Choice of periods T for which the monodromy of the normal directions is
uniformly invertible, and the admissible epsilon window of the
continuation mode.

For a period T the resonant action moves the normal frequencies to

    Omega_eta T = 2 pi (Omega T / 2 pi - Q R^-1 <omega T / 2 pi>)

where <.> is the centered fractional part. A period is certified when every
Omega_eta,j T stays a fixed distance away from 2 pi Z. Two strategies
exist: a time shift built from the resonance structure (needs one of the
conditions in select_period_lemma_a), and a direct scan of one short time
window (needs Omega - Q R^-1 omega to have no zero entry).

"""

import math
import logging
from collections import namedtuple

import numpy as np
from scipy import optimize

from ellipt.contrib.numtheory import wrap, dist_to_2pi
from ellipt.arith.resonance import (
    NonresonantShiftRefusedError,
    LatticePointRefusedError,
    nonresonant_shift,
)
from ellipt.normal.twist import require_invertible

logger = logging.getLogger(__name__)

__all__ = [
    "PeriodSelectionRefusedError",
    "PeriodCertificate",
    "EpsilonWindow",
    "normal_phases",
    "select_period_lemma_a",
    "select_period_lemma_b",
    "select_period",
    "epsilon_window",
    "inverse_log_squared",
    "window_threshold",
]


class PeriodSelectionRefusedError(Exception):

    def __init__(self, lemma, reason, constants=None):
        super().__init__(
            "Period selection ({}) refused: {}".format(lemma, reason))
        self._lemma = lemma
        self._reason = reason
        self._constants = dict(constants or {})

    @property
    def lemma(self):
        return self._lemma

    @property
    def reason(self):
        return self._reason

    @property
    def constants(self):
        return dict(self._constants)


class PeriodCertificate(namedtuple("PeriodCertificate",
                                   ["T", "interval", "d_bound",
                                    "minv_bound", "lemma", "constants"])):
    """A period T inside an admissible interval, with the certified lower
    bound on dist(Omega_eta T, 2 pi Z) and the resulting bound on the
    inverse monodromy."""

    __slots__ = ()

    def to_dict(self):
        return {"T": self.T, "interval": list(self.interval),
                "d_bound": self.d_bound, "minv_bound": self.minv_bound,
                "lemma": self.lemma, "constants": self.constants}


def _QRinv(R, Q):
    R = require_invertible(R)
    Q = np.asarray(Q, dtype=float).reshape(-1, R.shape[0])
    return Q @ np.linalg.inv(R)


def normal_phases(freq, QRinv, T):
    """Omega_eta T for a period T (radians)."""
    cycles = np.asarray(T, dtype=float) / (2 * math.pi)
    frac = wrap(np.multiply.outer(cycles, freq.omega))
    return 2 * math.pi * (np.multiply.outer(cycles, freq.Omega) -
                          frac @ QRinv.T)


def _row_norm(A):
    if A.size == 0:
        return 0.0
    return float(np.abs(A).sum(axis=1).max())


def select_period_lemma_a(freq, structure, R, Q, t0, erg_budget=1e4,
                          delta=None):
    """Period from a nonresonant time shift.

    Applies when m <= 2, or no normal frequency is resonant, or every
    modulus M_j is at least the number of resonant frequencies.
    """
    m, m_hat = freq.m, structure.m_hat
    moduli = structure.moduli
    if not (m <= 2 or m_hat == 0 or all(M >= m_hat for M in moduli)):
        raise PeriodSelectionRefusedError(
            "a", "m = {} > 2 with moduli {} below m_hat = {}".format(
                m, moduli, m_hat),
            {"m": m, "m_hat": m_hat, "moduli": moduli})
    QRinv = _QRinv(R, Q)
    rows = _row_norm(QRinv)
    if m_hat == 0:
        d0 = 0.25
        limit = 1.0 / (8 * rows) if rows > 0 else float("inf")
        default_delta = min(limit, 0.25)
    else:
        norm_a = max(float(np.abs(r.a).sum()) for r in structure.relations)
        d0 = min(1.0 / (4 * norm_a), 1.0 / (4 * max(moduli)))
        limit = d0 / (2 * rows) if rows > 0 else float("inf")
        default_delta = min(limit, 1.0 / (4 * norm_a))
    delta = default_delta if delta is None else min(delta, default_delta)
    theta = delta / (4 * float(np.abs(freq.omega).max()))
    if m:
        theta = min(theta, d0 / (8 * float(np.abs(freq.Omega).max())))
    constants = {"d0": d0, "delta": delta, "Theta": theta,
                 "QRinv_norm": rows, "t0": t0}
    try:
        shift = nonresonant_shift(freq, structure, delta,
                                  t0 / (2 * math.pi), erg_budget)
    except (NonresonantShiftRefusedError, LatticePointRefusedError) as e:
        raise PeriodSelectionRefusedError("a", str(e), constants)
    T = 2 * math.pi * shift.tau
    interval = (T - 2 * math.pi * theta, T + 2 * math.pi * theta)
    d_bound = math.pi * d0 / 2
    margin = float(dist_to_2pi(normal_phases(freq, QRinv, T)).min()) \
        if m else float("inf")
    if margin < d_bound:
        raise PeriodSelectionRefusedError(
            "a", "re-verification failed: margin {:.3e} < {:.3e}".format(
                margin, d_bound), constants)
    for t_other in shift.others:
        logger.info("Further admissible shift at T = {:.6g} not "
                    "used".format(2 * math.pi * t_other))
    constants.update({"tau": shift.tau, "margin": margin,
                      "beta": shift.beta, "M": shift.M})
    cert = PeriodCertificate(T, interval, d_bound, 4.0 / (math.pi * d0),
                             "a", constants)
    logger.info("Lemma a period T = {:.6g}, margin {:.4g} >= {:.4g}".format(
        T, margin, d_bound))
    return cert


def _interval_margin(freq, QRinv, lo, hi):
    """Smallest dist(Omega_eta T, 2 pi Z) over T in [lo, hi].

    [lo, hi] must lie on one piece where <omega T / 2 pi> is continuous, so
    each phase is affine and the minimum sits at an endpoint unless a
    multiple of 2 pi is crossed.
    """
    ends = normal_phases(freq, QRinv, np.array([lo, hi], dtype=float))
    low, high = ends.min(axis=0), ends.max(axis=0)
    if np.any(np.floor(high / (2 * math.pi)) >
              np.floor(low / (2 * math.pi))):
        return 0.0
    return float(dist_to_2pi(ends).min())


def select_period_lemma_b(freq, structure, R, Q, t0, samples=20000):
    """Period from a scan of [t0, t0 + 4 pi theta].

    Needs alpha = min |Omega - Q R^-1 omega| > 0. On each piece where the
    fractional parts <omega T / 2 pi> are continuous, Omega_eta T is affine
    in T, so admissible sets are unions of intervals. Neighbouring grid
    points join a run only when no phase crosses 2 pi Z between them; the
    first run whose whole interval keeps the margin is returned, with its
    midpoint as T.
    """
    n, m = freq.n, freq.m
    if m == 0:
        raise PeriodSelectionRefusedError(
            "b", "no normal frequencies to certify")
    QRinv = _QRinv(R, Q)
    xi = freq.Omega - QRinv @ freq.omega
    alpha = float(np.abs(xi).min())
    theta = float((1.0 / np.abs(freq.omega)).min())
    constants = {"alpha": alpha, "theta": theta, "t0": t0}
    scale = max(1.0, float(np.abs(freq.Omega).max()))
    if alpha <= 1e-12 * scale:
        raise PeriodSelectionRefusedError(
            "b", "alpha = min |Omega - Q R^-1 omega| vanishes", constants)
    d1 = min(math.pi / (8 * m), math.pi * alpha * theta / (2 * n * m))
    constants["d1"] = d1
    T_grid = np.linspace(t0, t0 + 4 * math.pi * theta, samples + 1)
    phases = normal_phases(freq, QRinv, T_grid)
    margins = dist_to_2pi(phases).min(axis=1)
    segment = np.floor(np.multiply.outer(T_grid / (2 * math.pi),
                                         freq.omega) + 0.5)
    turns = np.floor(phases / (2 * math.pi))
    ok = margins > d1
    linked = (ok[:-1] & ok[1:] &
              np.all(segment[:-1] == segment[1:], axis=1) &
              np.all(turns[:-1] == turns[1:], axis=1))
    idx = 0
    while idx < T_grid.size:
        if not ok[idx]:
            idx += 1
            continue
        start = stop = idx
        while stop < linked.size and linked[stop]:
            stop += 1
        idx = stop + 1
        lo, hi = float(T_grid[start]), float(T_grid[stop])
        covered = _interval_margin(freq, QRinv, lo, hi)
        if covered <= d1:
            logger.debug("Run [{:.6g}, {:.6g}] loses the margin "
                         "({:.3e})".format(lo, hi, covered))
            continue
        T = 0.5 * (lo + hi)
        margin = float(dist_to_2pi(normal_phases(freq, QRinv, T)).min())
        constants.update({"margin": margin, "interval_margin": covered})
        cert = PeriodCertificate(float(T), (lo, hi), d1, 2.0 / d1, "b",
                                 constants)
        logger.info("Lemma b period T = {:.6g}, margin {:.4g} > "
                    "{:.4g} on [{:.6g}, {:.6g}]".format(T, covered, d1, lo,
                                                       hi))
        return cert
    constants["best_margin"] = float(margins.max())
    raise PeriodSelectionRefusedError(
        "b", "no admissible interval in [{:.6g}, {:.6g}]".format(
            T_grid[0], T_grid[-1]), constants)


def select_period(freq, structure, R, Q, t0, erg_budget=1e4,
                  samples=20000, delta=None):
    """Lemma a when it applies, otherwise lemma b."""
    try:
        return select_period_lemma_a(freq, structure, R, Q, t0, erg_budget,
                                     delta)
    except PeriodSelectionRefusedError as first:
        logger.warning("{}; trying the window scan".format(first))
        try:
            return select_period_lemma_b(freq, structure, R, Q, t0, samples)
        except PeriodSelectionRefusedError as second:
            raise PeriodSelectionRefusedError(
                "a+b", "{}; {}".format(first.reason, second.reason),
                dict(first.constants, **second.constants))


class EpsilonWindow(namedtuple("EpsilonWindow",
                               ["eps_lo", "eps_hi", "empty"])):
    __slots__ = ()

    def to_dict(self):
        return {"eps_lo": self.eps_lo, "eps_hi": self.eps_hi,
                "empty": self.empty}


_CLAMP = math.exp(-2.0)


def inverse_log_squared(x):
    """Inverse of G(eps) = eps log^2(1/eps) on (0, e^-2].

    Arguments above G(e^-2) = 4 e^-2 are clamped to e^-2. With u = log eps
    the equation reads u + 2 log(-u) = log x.
    """
    if x <= 0:
        return 0.0
    if x >= 4 * _CLAMP:
        return _CLAMP
    target = math.log(x)

    def _g(u):
        return u + 2 * math.log(-u) - target

    # _g increases on u < -2, where the branch with eps < e^-2 lives
    lo_u = min(target - 1.0, -3.0)
    while _g(lo_u) > 0:
        lo_u *= 2
    u = optimize.bisect(_g, lo_u, -2.0, xtol=1e-14, maxiter=500)
    return math.exp(u)


def epsilon_window(T, c1, c2, c3, eps1):
    """Admissible eps for a period T in the continuation mode.

    eps_lo = min(e^{-T/c2}, 1/(c1 T), eps1)
    eps_hi = min(F(c3 / T^2), 1/(c1 T), eps1), F the inverse of
    eps log^2(1/eps)
    """
    if T <= 0:
        raise ValueError("T must be positive, got {}".format(T))
    cap = min(1.0 / (c1 * T), eps1)
    eps_lo = min(math.exp(-T / c2), cap)
    eps_hi = min(inverse_log_squared(c3 / T ** 2), cap)
    return EpsilonWindow(eps_lo, eps_hi, eps_lo > eps_hi)


def window_threshold(c1, c2, c3, eps1, T_lo=1e-2, T_hi=1e4, samples=400):
    """Smallest T on a log grid above which the window opens.

    The crossing eps_lo = eps_hi is located on the grid and refined by
    bisection. Returns None when the window never opens in the range.
    """
    def _gap(T):
        w = epsilon_window(T, c1, c2, c3, eps1)
        return w.eps_hi - w.eps_lo

    grid = np.logspace(math.log10(T_lo), math.log10(T_hi), samples)
    gaps = [_gap(T) for T in grid]
    for i in range(1, len(grid)):
        if gaps[i - 1] < 0 < gaps[i]:
            T0 = optimize.bisect(_gap, grid[i - 1], grid[i], xtol=1e-10)
            logger.info("Epsilon window opens at T0 = {:.6g}".format(T0))
            return T0
    logger.warning("Epsilon window does not open for T in [{}, {}]".format(
        T_lo, T_hi))
    return None
