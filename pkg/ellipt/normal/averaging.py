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

Averaging of an elliptic torus Hamiltonian by Lie series.

Input Hamiltonians start with omega . I + Omega . z zbar. Under the scaling
I -> eta^2 I, z -> eta z a term of weighted degree d picks up eta^(d - 2),
so the order-d step works on the degree d + 2 slice. Three steps remove
every degree 3..5 term outside the resonant set; what is left is the
averaged Hamiltonian, plus the degree 6 slice of the transformed series
kept as the eta^4 remainder.

"""

import enum
import logging
from collections import namedtuple

import numpy as np

from ellipt.series.tfseries import (
    TFSeries,
    check_reality,
)
from ellipt.series.codec import series_to_dict, series_from_dict
from ellipt.arith.resonance import FrequencyData
from ellipt.normal.twist import (
    SmallDivisorError,
    MatrixReport,
    compute_twist_matrix,
    compute_coupling_matrix,
    twist_from_slice,
    coupling_from_slice,
)

logger = logging.getLogger(__name__)

__all__ = [
    "HamiltonianFormatError",
    "LieTransformCapError",
    "NormalFormConsistencyError",
    "ResonantClass",
    "RescaledHamiltonian",
    "LieTransformResult",
    "NormalFormResult",
    "check_hamiltonian_form",
    "rescale",
    "eta_exponent",
    "resonant_set_member",
    "build_generating_function",
    "lie_transform",
    "averaged_normal_form",
]

NORMAL_FORM_ORDER = 3


class HamiltonianFormatError(Exception):

    def __init__(self, key, coeff):
        super().__init__(
            "Low order term {} = {} is not of the form omega . I + "
            "Omega . z zbar".format(tuple(key), coeff))
        self._key = key

    @property
    def key(self):
        return self._key


class LieTransformCapError(Exception):

    def __init__(self, required_cap, cap):
        super().__init__(
            "Lie transform needs degree cap {} but the series has "
            "{}".format(required_cap, cap))
        self._required_cap = required_cap

    @property
    def required_cap(self):
        return self._required_cap


class NormalFormConsistencyError(Exception):

    def __init__(self, what, value, tol):
        super().__init__(
            "Normal form check '{}' failed: {:.3e} > {:.3e}".format(
                what, value, tol))
        self._what = what
        self._value = value

    @property
    def what(self):
        return self._what

    @property
    def value(self):
        return self._value


class ResonantClass(enum.Enum):
    S1 = "S1"
    S2_0 = "S2_0"
    S2_1 = "S2_1"
    S2_2 = "S2_2"
    S3 = "S3"
    NONE = "none"
    OUT_OF_RANGE = "out_of_range"

    @property
    def resonant(self):
        return self not in (ResonantClass.NONE, ResonantClass.OUT_OF_RANGE)


def _is_unit(v):
    return sum(v) == 1 and max(v, default=0) == 1


def resonant_set_member(key):
    """Class of a key of degree 3..5 with respect to the resonant set."""
    d = key.degree
    if d < 3 or d > 5:
        return ResonantClass.OUT_OF_RANGE
    ell_zero = not any(key.ell)
    elliptic = key.elliptic_order
    if d == 3:
        return ResonantClass.S1 if key.action_order == 0 else \
            ResonantClass.NONE
    if d == 4:
        if key.action_order == 0:
            return ResonantClass.S2_0
        if (key.action_order == 1 and ell_zero and key.a == key.abar and
                _is_unit(key.a)):
            return ResonantClass.S2_1
        if key.action_order == 2 and elliptic == 0 and ell_zero:
            return ResonantClass.S2_2
        return ResonantClass.NONE
    if elliptic in (3, 5):
        return ResonantClass.S3
    return ResonantClass.NONE


def check_hamiltonian_form(H, gamma=1e-3, tau=2.0, tol=1e-12):
    """Frequencies from the degree 2 part, refusing any other low term.

    Constants are allowed. Degree 1 terms and degree 2 terms other than
    I_i and z_j zbar_j with ell = 0 are refused, as are imaginary parts of
    the frequencies.
    """
    n, m = H.dims
    omega = np.zeros(n)
    Omega = np.zeros(m)
    scale = max(1.0, H.max_abs_coefficient())
    for key, c in H.items():
        d = key.degree
        if d > 2:
            continue
        ell_zero = not any(key.ell)
        if d == 0 and ell_zero:
            continue
        if d == 2 and ell_zero and abs(c.imag) <= tol * scale:
            if key.action_order == 1:
                omega[key.k.index(1)] = c.real
                continue
            if key.a == key.abar and _is_unit(key.a):
                Omega[key.a.index(1)] = c.real
                continue
        raise HamiltonianFormatError(key, c)
    freq = FrequencyData(omega, Omega, gamma, tau)
    logger.info("Frequencies omega = {}, Omega = {}".format(
        omega.tolist(), Omega.tolist()))
    return freq


def eta_exponent(key):
    return key.degree - 2


class RescaledHamiltonian(namedtuple("RescaledHamiltonian",
                                     ["series", "eta", "exponents"])):
    """A series multiplied term by term by eta^(d - 2), with the exponent
    of every key."""

    __slots__ = ()


def rescale(H, eta):
    """Apply I -> eta^2 I, z -> eta z and divide by eta^2.

    The map multiplies every term by a power of eta fixed by its degree, so
    it commutes with Poisson brackets.
    """
    if eta <= 0:
        raise ValueError("eta must be positive, got {}".format(eta))
    exponents = {key: eta_exponent(key) for key in H.keys()}
    series = H.map_coefficients(lambda key, c: c * eta ** eta_exponent(key))
    return RescaledHamiltonian(series, eta, exponents)


def build_generating_function(source, freq, d, divisor_floor=1e-10):
    """Order-d generating function from the degree d + 2 slice of source.

    chi = -i c / (omega . ell + Omega . (a - abar)) on keys outside the
    resonant set, and 0 on it.
    """
    terms = {}
    for key, c in source.items():
        if key.degree != d + 2:
            continue
        if resonant_set_member(key) is not ResonantClass.NONE:
            continue
        h = tuple(x - y for x, y in zip(key.a, key.abar))
        div = float(np.dot(freq.omega, key.ell) + np.dot(freq.Omega, h))
        bound = freq.divisor_floor(key.ell, divisor_floor)
        if abs(div) < bound:
            raise SmallDivisorError(key.ell, h, div, bound)
        terms[key] = -1j * c / div
    chi = TFSeries(source.n, source.m, terms,
                   degree_cap=source.degree_cap,
                   fourier_cap=source.fourier_cap,
                   drop_tol=source.drop_tol,
                   real=source.is_real_flagged)
    logger.debug("Generating function of order {}: {} terms".format(
        d, len(chi)))
    return chi


def _total_generator(chi, like, cap):
    total = TFSeries.zero_like(like, degree_cap=cap)
    for part in chi:
        total = total + part.with_caps(degree_cap=cap)
    return total


def _lie_series(H, chi, cap):
    """exp(L_chi) H truncated at weighted degree cap."""
    base = H.with_caps(degree_cap=cap)
    generator = _total_generator(chi, base, cap)
    if generator.is_zero():
        return base
    total = base
    term = base
    j = 1
    while True:
        term = term.bracket(generator).scale(1.0 / j)
        if term.is_zero():
            break
        total = total + term
        j += 1
        if j > cap + 2:
            # each bracket raises the degree, so this cannot be reached
            raise LieTransformCapError(cap, H.degree_cap)
    logger.debug("Lie series to degree {} used {} brackets".format(cap, j))
    return total


class LieTransformResult(namedtuple("LieTransformResult",
                                    ["polynomial", "remainder", "cap"])):
    """exp(L_chi) H split into the part through degree cap - 1 and the
    degree cap slice."""

    __slots__ = ()


def lie_transform(H, chi, j0):
    """exp(L_chi) H with terms up to weighted degree j0 + 3.

    Returns the polynomial part through degree j0 + 2 and the degree j0 + 3
    slice as the remainder.
    """
    cap = j0 + 3
    if H.degree_cap < cap:
        raise LieTransformCapError(cap, H.degree_cap)
    if isinstance(chi, TFSeries):
        chi = [chi]
    full = _lie_series(H, chi, cap)
    return LieTransformResult(full.up_to_degree(cap - 1),
                              full.degree_slice(cap), cap)


class NormalFormResult(object):
    """Averaged Hamiltonian with its generating functions, twist and
    coupling matrices, and the diagnostics gathered while building it."""

    def __init__(self, H_avg, remainder, chi, twist, coupling, freq,
                 eta=0.1, diagnostics=None):
        self._H_avg = H_avg
        self._remainder = remainder
        self._chi = list(chi)
        self._twist = twist
        self._coupling = coupling
        self._freq = freq
        self._eta = float(eta)
        self._diagnostics = dict(diagnostics or {})

    @property
    def H_avg(self):
        return self._H_avg

    @property
    def remainder(self):
        return self._remainder

    @property
    def chi(self):
        return list(self._chi)

    @property
    def twist(self):
        return self._twist

    @property
    def coupling(self):
        return self._coupling

    @property
    def R_twist(self):
        return np.asarray(self._twist.matrix)

    @property
    def Q_coupling(self):
        return np.asarray(self._coupling.matrix)

    @property
    def freq(self):
        return self._freq

    @property
    def eta(self):
        return self._eta

    @property
    def diagnostics(self):
        return dict(self._diagnostics)

    @property
    def eta_exponents(self):
        keys = self._H_avg.keys() + self._remainder.keys()
        return {key: eta_exponent(key) for key in keys}

    def hamiltonian(self, include_remainder=True):
        if include_remainder:
            return self._H_avg + self._remainder
        return self._H_avg

    def rescaled(self, eta=None, include_remainder=True):
        eta = self._eta if eta is None else eta
        return rescale(self.hamiltonian(include_remainder), eta).series

    def to_dict(self):
        return {"H_avg": series_to_dict(self._H_avg),
                "remainder": series_to_dict(self._remainder),
                "chi": [series_to_dict(c) for c in self._chi],
                "R": self._twist.to_dict(),
                "Q": self._coupling.to_dict(),
                "frequencies": self._freq.to_dict(),
                "eta": self._eta,
                "diagnostics": self._diagnostics}

    @classmethod
    def from_dict(cls, doc):
        def _matrix(entry):
            return MatrixReport(np.array(entry["matrix"], dtype=float),
                                entry.get("imag_residual", 0.0),
                                entry.get("asymmetry", 0.0),
                                entry.get("tail", 0.0), {})
        f = doc["frequencies"]
        freq = FrequencyData(f["omega"], f["Omega"], f["gamma"], f["tau"])
        return cls(series_from_dict(doc["H_avg"]),
                   series_from_dict(doc["remainder"]),
                   [series_from_dict(c) for c in doc.get("chi", [])],
                   _matrix(doc["R"]), _matrix(doc["Q"]), freq,
                   doc.get("eta", 0.1), doc.get("diagnostics"))


def _eliminated_residual(series):
    worst = 0.0
    for key, c in series.items():
        cls = resonant_set_member(key)
        if cls is ResonantClass.NONE:
            worst = max(worst, abs(c))
    return worst


def _check(what, value, tol):
    if value > tol:
        raise NormalFormConsistencyError(what, value, tol)


def averaged_normal_form(H_star, freq, eta=0.1, divisor_floor=1e-10,
                         consistency_tol=1e-10, reality_tol=1e-12):
    """Average H_star through order three.

    For d = 1, 2, 3 the degree d + 2 slice of exp(L_{chi_1 + .. + chi_{d-1}})
    H_star feeds the generating function chi_d. The final transform keeps
    degree <= 5 as H_avg and the degree 6 slice as the remainder. The twist
    and coupling matrices read off H_avg must agree with the direct
    formulas.
    """
    required = NORMAL_FORM_ORDER + 3
    if H_star.degree_cap < required:
        raise LieTransformCapError(required, H_star.degree_cap)
    chi = []
    for d in range(1, NORMAL_FORM_ORDER + 1):
        partial = _lie_series(H_star, chi, d + 2)
        chi.append(build_generating_function(partial.degree_slice(d + 2),
                                             freq, d, divisor_floor))
    result = lie_transform(H_star, chi, NORMAL_FORM_ORDER)
    scale = max(1.0, H_star.max_abs_coefficient())

    eliminated = _eliminated_residual(result.polynomial)
    _check("eliminated terms", eliminated, consistency_tol * scale)
    polynomial = result.polynomial.project(
        lambda key: resonant_set_member(key) is not ResonantClass.NONE or
        key.degree <= 2)

    reality = check_reality(polynomial).max_violation
    if reality > reality_tol * scale:
        logger.warning("Averaged Hamiltonian departs from conjugate "
                       "symmetry by {:.3e}".format(reality))
    polynomial = polynomial.real_part()
    remainder = result.remainder.real_part()

    twist = twist_from_slice(polynomial)
    coupling = coupling_from_slice(polynomial)
    direct_twist = compute_twist_matrix(H_star, freq, divisor_floor)
    direct_coupling = compute_coupling_matrix(H_star, freq, divisor_floor)
    twist_mismatch = float(np.abs(twist.matrix - direct_twist.matrix).max(
        initial=0.0))
    coupling_mismatch = float(np.abs(
        coupling.matrix - direct_coupling.matrix).max(initial=0.0))
    _check("twist matrix", twist_mismatch, consistency_tol * scale)
    _check("coupling matrix", coupling_mismatch, consistency_tol * scale)
    twist = direct_twist._replace(matrix=twist.matrix)
    coupling = direct_coupling._replace(matrix=coupling.matrix)

    diagnostics = {
        "eliminated_residual": eliminated,
        "twist_mismatch": twist_mismatch,
        "coupling_mismatch": coupling_mismatch,
        "reality_violation": reality,
        "truncation_loss": (result.polynomial.truncation_loss +
                            result.remainder.truncation_loss),
        "orders_used": NORMAL_FORM_ORDER,
        "terms": len(polynomial),
        "remainder_terms": len(remainder),
    }
    logger.info("Averaged normal form: {} terms, remainder {} terms, "
                "R = {}".format(len(polynomial), len(remainder),
                                twist.matrix.tolist()))
    return NormalFormResult(polynomial, remainder, chi, twist, coupling,
                            freq, eta, diagnostics)
