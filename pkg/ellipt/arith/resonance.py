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

Frequency arithmetic: second order Melnikov conditions, the integer
relations among normal frequencies, and the nonresonant time shift used to
pick periods.

Frequencies are measured in cycles: a phase omega * t is compared with the
integers, and the caller converts to 2*pi units where needed.

"""

import math
import logging
import itertools
from collections import namedtuple

import numpy as np

from ellipt.contrib.numtheory import (
    wrap,
    dist_to_int,
    gcd_list,
    lcm_list,
    normalize_relation,
    l1_ball,
)

logger = logging.getLogger(__name__)

__all__ = [
    "MelnikovFailedError",
    "CongruencePreconditionError",
    "LatticePointRefusedError",
    "NonresonantShiftRefusedError",
    "RelationCertificationError",
    "FrequencyData",
    "MelnikovReport",
    "Relation",
    "ResonanceStructure",
    "ShiftResult",
    "melnikov_check",
    "count_congruence_solutions",
    "find_relation",
    "detect_resonances",
    "nonresonant_lattice_point",
    "nonresonant_shift",
]


class MelnikovFailedError(Exception):

    def __init__(self, report):
        super().__init__(
            "Second order Melnikov condition fails: margin {:.3e} at "
            "ell = {}, h = {}".format(report.min_margin, report.ell,
                                      report.h))
        self._report = report

    @property
    def report(self):
        return self._report


class CongruencePreconditionError(Exception):

    def __init__(self, a, M):
        super().__init__(
            "gcd of coefficients {} and modulus {} is not 1".format(a, M))


class LatticePointRefusedError(Exception):

    def __init__(self, reason):
        super().__init__(
            "No nonresonant lattice point: {}".format(reason))
        self._reason = reason

    @property
    def reason(self):
        return self._reason


class NonresonantShiftRefusedError(Exception):

    def __init__(self, reason, best_margin=None):
        super().__init__(
            "Nonresonant shift refused: {} (best margin {})".format(
                reason, best_margin))
        self._reason = reason
        self._best_margin = best_margin

    @property
    def reason(self):
        return self._reason

    @property
    def best_margin(self):
        return self._best_margin


class RelationCertificationError(Exception):

    def __init__(self, message, residual=None):
        super().__init__(message)
        self._residual = residual

    @property
    def residual(self):
        return self._residual


class FrequencyData(object):
    """Tangential frequencies omega, normal frequencies Omega and the
    Diophantine constants (gamma, tau)."""

    def __init__(self, omega, Omega, gamma=1e-3, tau=2.0):
        self._omega = np.asarray(omega, dtype=float).reshape(-1)
        self._Omega = np.asarray(Omega, dtype=float).reshape(-1)
        self._gamma = float(gamma)
        self._tau = float(tau)
        if self._gamma <= 0:
            raise ValueError("gamma must be positive, got {}".format(gamma))

    @property
    def omega(self):
        return self._omega.copy()

    @property
    def Omega(self):
        return self._Omega.copy()

    @property
    def n(self):
        return self._omega.size

    @property
    def m(self):
        return self._Omega.size

    @property
    def gamma(self):
        return self._gamma

    @property
    def tau(self):
        return self._tau

    @property
    def max_frequency(self):
        values = np.concatenate([np.abs(self._omega), np.abs(self._Omega)])
        return float(values.max()) if values.size else 1.0

    def certify(self, ell_cutoff=10):
        """Run the Melnikov check and refuse the data when it fails."""
        report = melnikov_check(self, ell_cutoff)
        if not report.passed:
            raise MelnikovFailedError(report)
        return report

    def divisor_floor(self, ell, floor=1e-10):
        norm = sum(abs(x) for x in ell)
        return max(self._gamma / (1.0 + norm ** self._tau), floor)

    def to_dict(self):
        return {"omega": self._omega.tolist(), "Omega": self._Omega.tolist(),
                "gamma": self._gamma, "tau": self._tau}


class MelnikovReport(namedtuple("MelnikovReport",
                                ["min_margin", "ell", "h", "passed"])):
    __slots__ = ()

    def to_dict(self):
        return {"min_margin": self.min_margin, "ell": list(self.ell),
                "h": list(self.h), "passed": self.passed}


def _canonical_sign(ell, h):
    # report the witness with the first nonzero entry of (h, ell) positive
    first = next((x for x in list(h) + list(ell) if x != 0), 0)
    if first < 0:
        return tuple(-x for x in ell), tuple(-x for x in h)
    return tuple(ell), tuple(h)


def melnikov_check(freq, ell_cutoff=10):
    """Scan |omega . ell + Omega . h| (1 + |ell|^tau) / gamma.

    The scan runs over |ell|_1 <= ell_cutoff and |h|_1 <= 2 excluding
    (0, 0); the condition holds when every margin is at least 1.
    """
    ells = l1_ball(freq.n, ell_cutoff)
    # ties resolve to the shortest ell
    ells = ells[np.argsort(np.abs(ells).sum(axis=1), kind="stable")]
    hs = l1_ball(freq.m, 2)
    values = np.abs((ells @ freq.omega)[:, None] +
                    (hs @ freq.Omega)[None, :])
    weights = (1.0 + np.abs(ells).sum(axis=1) ** freq.tau) / freq.gamma
    margins = values * weights[:, None]
    trivial_l = np.flatnonzero(~np.any(ells, axis=1))
    trivial_h = np.flatnonzero(~np.any(hs, axis=1))
    margins[trivial_l[0], trivial_h[0]] = np.inf
    flat = int(np.argmin(margins))
    il, ih = np.unravel_index(flat, margins.shape)
    min_margin = float(margins[il, ih])
    ell, h = _canonical_sign(ells[il].tolist(), hs[ih].tolist())
    report = MelnikovReport(min_margin, ell, h, min_margin >= 1.0)
    if report.passed:
        logger.info("Melnikov check passed, min margin {:.4g}".format(
            min_margin))
    else:
        logger.warning("Melnikov check failed at ell = {}, h = {}: "
                       "margin {:.4g}".format(ell, h, min_margin))
    return report


def count_congruence_solutions(a, M, b):
    """Number of x in {0..M-1}^n with a . x = b (mod M).

    Exact counting by convolution over residues; requires gcd(a, M) = 1.
    """
    M = int(M)
    if M <= 0:
        raise ValueError("Modulus must be positive, got {}".format(M))
    if gcd_list(list(a) + [M]) != 1:
        raise CongruencePreconditionError(list(a), M)
    counts = [0] * M
    counts[0] = 1
    for coeff in a:
        new = [0] * M
        for r, c in enumerate(counts):
            if not c:
                continue
            for x in range(M):
                new[(r + coeff * x) % M] += c
        counts = new
    return counts[int(b) % M]


class Relation(namedtuple("Relation", ["j", "M", "a"])):
    """M * Omega_j = a . omega_hat, with j 0-based."""

    __slots__ = ()

    def to_dict(self):
        return {"j": self.j + 1, "M": self.M, "a": list(self.a)}


class ResonanceStructure(object):
    """Splitting of the normal frequencies into independent and resonant.

    order is the permutation putting the resonant Omega_j first; the
    extended basis omega_hat is omega followed by the independent normal
    frequencies.
    """

    def __init__(self, m_hat, order, relations, n):
        self._m_hat = int(m_hat)
        self._order = tuple(order)
        self._relations = [Relation(r.j, int(r.M), tuple(r.a))
                           for r in relations]
        self._n = n

    @property
    def m_hat(self):
        return self._m_hat

    @property
    def order(self):
        return self._order

    @property
    def relations(self):
        return list(self._relations)

    @property
    def resonant(self):
        return self._order[:self._m_hat]

    @property
    def independent(self):
        return self._order[self._m_hat:]

    @property
    def n_hat(self):
        return self._n + len(self.independent)

    @property
    def moduli(self):
        return [r.M for r in self._relations]

    @property
    def lcm(self):
        return lcm_list(self.moduli) if self._relations else 1

    def omega_hat(self, freq):
        return np.concatenate([freq.omega, freq.Omega[list(self.independent)]])

    def residuals(self, freq):
        """|M Omega_j - a . omega_hat| for every relation."""
        basis = self.omega_hat(freq)
        return [abs(r.M * freq.Omega[r.j] - np.dot(r.a, basis))
                for r in self._relations]

    def to_dict(self):
        return {"m_hat": self._m_hat,
                "order": [j + 1 for j in self._order],
                "relations": [r.to_dict() for r in self._relations]}


_VECTORIZED_DIMS = 3


def _coefficient_blocks(dim, bound):
    """Yield (leading, grid) blocks covering {-bound..bound}^dim.

    The last few coordinates come as one vectorized grid, the leading ones
    are looped over in Python.
    """
    tail = min(dim, _VECTORIZED_DIMS)
    head = dim - tail
    axes = [np.arange(-bound, bound + 1)] * tail
    if tail:
        grid = np.stack(np.meshgrid(*axes, indexing="ij"),
                        axis=-1).reshape(-1, tail)
    else:
        grid = np.zeros((1, 0), dtype=np.int64)
    for leading in itertools.product(range(-bound, bound + 1), repeat=head):
        yield np.array(leading, dtype=np.int64), grid


def find_relation(value, basis, M_max=12, a_max=10, tol=1e-9):
    """Smallest M <= M_max with M * value = a . basis for |a|_inf <= a_max.

    The coefficient of the largest basis entry is solved for and rounded;
    the remaining ones are enumerated. Returns (M, a) normalized by their
    gcd, or None.
    """
    basis = np.asarray(basis, dtype=float)
    dim = basis.size
    if dim == 0:
        return None
    pivot = int(np.argmax(np.abs(basis)))
    if basis[pivot] == 0:
        return None
    others = [i for i in range(dim) if i != pivot]
    rest = basis[others]
    for M in range(1, M_max + 1):
        target = M * value
        best = None
        for leading, grid in _coefficient_blocks(dim - 1, a_max):
            if grid.shape[1]:
                coeffs = np.hstack(
                    [np.broadcast_to(leading, (grid.shape[0],
                                               leading.size)), grid])
            else:
                coeffs = np.broadcast_to(leading, (1, leading.size))
            partial = coeffs @ rest if rest.size else np.zeros(
                coeffs.shape[0])
            solved = np.rint((target - partial) / basis[pivot])
            residual = np.abs(target - partial - solved * basis[pivot])
            ok = (np.abs(solved) <= a_max) & (residual < tol)
            if not np.any(ok):
                continue
            for idx in np.flatnonzero(ok):
                a = np.zeros(dim, dtype=np.int64)
                a[others] = coeffs[idx]
                a[pivot] = int(solved[idx])
                size = int(np.abs(a).sum())
                if best is None or size < best[0]:
                    best = (size, a)
        if best is not None:
            return normalize_relation(M, best[1].tolist())
    return None


def _certify_declared(freq, declared, tol):
    m = freq.m
    resonant = sorted(j for j, _, _ in declared)
    if len(set(resonant)) != len(resonant):
        raise RelationCertificationError(
            "Several relations declared for one of Omega_{}".format(
                [j + 1 for j in resonant]))
    independent = [j for j in range(m) if j not in resonant]
    order = tuple(resonant + independent)
    basis = np.concatenate([freq.omega, freq.Omega[independent]])
    relations = []
    for j, M, a in sorted(declared):
        if len(a) != basis.size:
            raise RelationCertificationError(
                "Relation for Omega_{} has {} coefficients, expected "
                "{}".format(j + 1, len(a), basis.size))
        residual = abs(M * freq.Omega[j] - np.dot(a, basis))
        if residual > tol:
            raise RelationCertificationError(
                "Declared relation {} * Omega_{} = {} . omega_hat is off "
                "by {:.3e}".format(M, j + 1, list(a), residual), residual)
        M, a = normalize_relation(M, a)
        relations.append(Relation(j, M, a))
    logger.info("Declared relations certified for resonant indices "
                "{}".format([j + 1 for j in resonant]))
    return ResonanceStructure(len(resonant), order, relations, freq.n)


def detect_resonances(freq, M_max=12, a_max=10, tol=1e-9, declared=None):
    """Split Omega into resonant and independent frequencies.

    Subsets are tried by increasing number of resonant frequencies. A subset
    qualifies when every independent Omega_j has no bounded relation with
    the rest of the extended basis and every resonant one has. Among the
    qualifying subsets with the fewest resonances the one with the smallest
    total modulus wins. Declared relations replace the scan but are still
    certified against tol.
    """
    if declared:
        return _certify_declared(freq, declared, tol)
    m = freq.m
    omega, Omega = freq.omega, freq.Omega
    for m_hat in range(0, m + 1):
        candidates = []
        for resonant in itertools.combinations(range(m), m_hat):
            independent = [j for j in range(m) if j not in resonant]
            basis = np.concatenate([omega, Omega[independent]])
            valid = True
            for pos, j in enumerate(independent):
                rest = np.delete(basis, freq.n + pos)
                if find_relation(Omega[j], rest, M_max, a_max,
                                 tol) is not None:
                    valid = False
                    break
            if not valid:
                continue
            relations = []
            for j in resonant:
                found = find_relation(Omega[j], basis, M_max, a_max, tol)
                if found is None:
                    break
                relations.append(Relation(j, found[0], found[1]))
            if len(relations) != m_hat:
                continue
            total = sum(r.M for r in relations)
            candidates.append((total, resonant, independent, relations))
        if candidates:
            total, resonant, independent, relations = min(
                candidates, key=lambda c: (c[0], c[1]))
            structure = ResonanceStructure(
                m_hat, tuple(resonant) + tuple(independent), relations,
                freq.n)
            logger.info("Detected m_hat = {} resonant normal frequencies "
                        "{}".format(m_hat, [j + 1 for j in resonant]))
            for r in relations:
                logger.debug("Relation {} * Omega_{} = {} . omega_hat"
                             "".format(r.M, r.j + 1, list(r.a)))
            return structure
    raise RelationCertificationError(
        "No splitting of Omega = {} into independent and resonant "
        "frequencies within M <= {}, |a| <= {}".format(
            Omega.tolist(), M_max, a_max))


def nonresonant_lattice_point(structure):
    """Lexicographically first k in {0..M-1}^n_hat with a_j . k != 0 mod M_j.

    M is the lcm of the moduli. Needs M_j >= m_hat for every j, and
    M_1 >= 2 when m_hat = 1.
    """
    m_hat = structure.m_hat
    if m_hat == 0:
        return (0,) * structure.n_hat, 1
    moduli = structure.moduli
    if any(M < m_hat for M in moduli):
        raise LatticePointRefusedError(
            "moduli {} below m_hat = {}".format(moduli, m_hat))
    if m_hat == 1 and moduli[0] < 2:
        raise LatticePointRefusedError("m_hat = 1 with modulus 1")
    M = structure.lcm
    rels = structure.relations
    for k in itertools.product(range(M), repeat=structure.n_hat):
        if all(np.dot(r.a, k) % r.M != 0 for r in rels):
            logger.debug("Nonresonant lattice point k = {} (M = {})".format(
                k, M))
            return tuple(k), M
    raise LatticePointRefusedError(
        "exhausted {{0..{}}}^{}".format(M - 1, structure.n_hat))


class ShiftResult(namedtuple("ShiftResult",
                             ["tau", "d0", "beta", "M", "target",
                              "margin", "others"])):
    """A time tau with dist(omega_i tau, Z) <= delta and
    dist(Omega_j tau, Z) >= d0, plus later hits seen in the same scan."""

    __slots__ = ()


def _shift_target(freq, structure, delta):
    """Return (target y, modulus M, beta, d0) for the flow omega_hat / M."""
    n = freq.n
    n_hat = structure.n_hat
    m_hat = structure.m_hat
    tail = np.zeros(n_hat)
    tail[n:] = 1.0
    if m_hat == 0:
        return 0.5 * tail, 1, 2.0, 0.25
    rels = structure.relations
    if m_hat == 1 and rels[0].M == 1:
        a = np.asarray(rels[0].a, dtype=float)
        if not np.any(a[n:]):
            raise NonresonantShiftRefusedError(
                "relation coefficients vanish on the independent normal "
                "frequencies")
        norm_a = float(np.abs(a).sum())
        tail_norm = float(np.abs(a[n:]).sum())
        beta = 2.0 * norm_a
        y = np.zeros(n_hat)
        for i in range(n, n_hat):
            if a[i] != 0:
                y[i] = math.copysign(1.0, a[i]) / (2.0 * tail_norm)
            else:
                y[i] = 1.0 / (2.0 * norm_a)
        return y, 1, beta, min(1.0 / (2.0 * beta), 0.25)
    beta = 2.0 * max(float(np.abs(r.a).sum()) for r in rels)
    k, M = nonresonant_lattice_point(structure)
    y = (np.asarray(k, dtype=float) + tail / beta) / M
    d0 = min(1.0 / (2.0 * beta), 1.0 / (4.0 * max(r.M for r in rels)))
    return y, M, beta, d0


def nonresonant_shift(freq, structure, delta, t0=0.0, erg_budget=1e4,
                      chunk=200000, collect=3):
    """First tau >= t0 on a grid with the omega phases delta-close to
    integers and the Omega phases at least d0 away from them.

    The extended flow omega_hat * tau / M is stepped in increments small
    enough that no delta / M window is jumped over, until it enters the
    box around the target point. The hit is then checked directly against
    the original frequencies. Times are in cycles.
    """
    y, M, beta, d0 = _shift_target(freq, structure, delta)
    if delta > 1.0 / (2.0 * beta) + 1e-15:
        raise NonresonantShiftRefusedError(
            "delta = {} exceeds 1/(2 beta) = {}".format(delta,
                                                        1.0 / (2 * beta)))
    omega_hat = structure.omega_hat(freq)
    speed = float(np.abs(omega_hat).max()) if omega_hat.size else 1.0
    step = delta / (2.0 * M * max(speed, 1e-300))
    total = int(math.ceil(erg_budget / step)) + 1
    best = np.inf
    window = delta / M
    for start in range(0, total, chunk):
        s = t0 + step * np.arange(start, min(total, start + chunk))
        phases = wrap(np.outer(s, omega_hat) / M - y[None, :])
        dist = np.abs(phases).max(axis=1) if omega_hat.size else (
            np.zeros(s.size))
        best = min(best, float(dist.min()))
        hits = np.flatnonzero(dist <= window)
        for idx in hits:
            tau = float(s[idx])
            if _verify_shift(freq, tau, delta, d0):
                others = _later_clusters(s, hits, idx, step, collect)
                margin = float(dist_to_int(freq.Omega * tau).min()) if \
                    freq.m else float("inf")
                logger.info("Nonresonant shift tau = {:.6g} (target {}, "
                            "M = {})".format(tau, np.round(y, 4).tolist(),
                                             M))
                return ShiftResult(tau, d0, beta, M, y.tolist(), margin,
                                   others)
    raise NonresonantShiftRefusedError(
        "no admissible time within budget {}".format(erg_budget), best)


def _verify_shift(freq, tau, delta, d0):
    ok_omega = np.all(dist_to_int(freq.omega * tau) <= delta + 1e-12)
    ok_Omega = (freq.m == 0 or
                np.all(dist_to_int(freq.Omega * tau) >= d0 - 1e-12))
    return bool(ok_omega and ok_Omega)


def _later_clusters(s, hits, idx, step, limit):
    later = [float(s[h]) for h in hits if h > idx]
    clusters = []
    last = float(s[idx])
    for t in later:
        if t - last > 1.5 * step:
            clusters.append(t)
            if len(clusters) >= limit:
                break
        last = t
    return clusters
