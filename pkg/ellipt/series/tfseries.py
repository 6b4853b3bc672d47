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

Truncated Taylor-Fourier series on T^n x R^n x C^m.

A TFSeries is the finite sum

    sum_{k, a, abar, ell} c * I^k * z^a * zbar^abar * exp(i ell . phi)

stored as a mapping TermKey -> complex coefficient. Terms are graded by the
weighted degree d = 2|k| + |a + abar|, so one action weighs as much as two
elliptic coordinates. Every series carries a degree cap and a Fourier cap;
terms above either cap are dropped when a result is built, and the number
of dropped terms is kept in truncation_loss.

Series are immutable: arithmetic always returns a new series.

The Poisson structure is

    {f, g} = d_phi f . d_I g - d_I f . d_phi g
             + i (d_z f . d_zbar g - d_zbar f . d_z g)

and Hamilton's equations read g' = {g, H}.

"""

import math
import logging
from collections import defaultdict, namedtuple

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "TFSeriesDimensionError",
    "TFSeriesFormatError",
    "TFSeriesInvariantError",
    "TermKey",
    "TFSeries",
    "SeriesEvaluator",
    "SeriesBundleEvaluator",
    "VectorFieldSeries",
    "RealityReport",
    "poisson_bracket",
    "ring_arithmetic",
    "project",
    "evaluate",
    "hamiltonian_vector_field",
    "sup_fourier_norm",
    "check_reality",
]

DERIVATIVE_KINDS = ("I", "phi", "z", "zbar")


class TFSeriesDimensionError(Exception):

    def __init__(self, left, right):
        super().__init__(
            "Series dimensions differ: (n, m) = {} against {}".format(
                left, right))
        self._left = left
        self._right = right

    @property
    def left(self):
        return self._left

    @property
    def right(self):
        return self._right


class TFSeriesFormatError(Exception):

    def __init__(self, message):
        super().__init__(message)


class TFSeriesInvariantError(Exception):

    def __init__(self, message):
        super().__init__(message)


class TermKey(namedtuple("TermKey", ["k", "a", "abar", "ell"])):
    """Exponents of one monomial: I^k z^a zbar^abar exp(i ell . phi)."""

    __slots__ = ()

    @classmethod
    def make(cls, k, a, abar, ell):
        return cls(tuple(int(x) for x in k),
                   tuple(int(x) for x in a),
                   tuple(int(x) for x in abar),
                   tuple(int(x) for x in ell))

    @property
    def degree(self):
        return 2 * sum(self.k) + sum(self.a) + sum(self.abar)

    @property
    def action_order(self):
        return sum(self.k)

    @property
    def elliptic_order(self):
        return sum(self.a) + sum(self.abar)

    @property
    def fourier_order(self):
        return sum(abs(x) for x in self.ell)

    def mirror(self):
        """Key of the complex conjugate monomial."""
        return TermKey(self.k, self.abar, self.a,
                       tuple(-x for x in self.ell))


def _add_vec(u, v):
    return tuple(x + y for x, y in zip(u, v))


class TFSeries(object):

    def __init__(self, n, m, terms=None, degree_cap=6, fourier_cap=8,
                 drop_tol=1e-15, real=False):
        if n < 0 or m < 0:
            raise TFSeriesFormatError(
                "Negative dimensions (n, m) = ({}, {})".format(n, m))
        self._n = int(n)
        self._m = int(m)
        self._degree_cap = int(degree_cap)
        self._fourier_cap = int(fourier_cap)
        self._drop_tol = float(drop_tol)
        self._real = bool(real)
        self._truncation_loss = 0
        self._terms = {}
        if terms:
            acc = defaultdict(complex)
            for key, coeff in terms.items():
                key = self._check_key(key)
                acc[key] += complex(coeff)
            self._store(acc)

    @classmethod
    def zero_like(cls, other, **overrides):
        params = other._params()
        params.update(overrides)
        return cls(other.n, other.m, **params)

    def _params(self):
        return {"degree_cap": self._degree_cap,
                "fourier_cap": self._fourier_cap,
                "drop_tol": self._drop_tol,
                "real": self._real}

    def _check_key(self, key):
        if not isinstance(key, TermKey):
            try:
                k, a, abar, ell = key
            except (TypeError, ValueError):
                raise TFSeriesFormatError(
                    "Malformed term key {!r}".format(key))
            key = TermKey.make(k, a, abar, ell)
        if (len(key.k) != self._n or len(key.ell) != self._n or
                len(key.a) != self._m or len(key.abar) != self._m):
            raise TFSeriesFormatError(
                "Key {} does not match (n, m) = ({}, {})".format(
                    key, self._n, self._m))
        if any(x < 0 for x in key.k + key.a + key.abar):
            raise TFSeriesFormatError(
                "Negative exponent in key {}".format(key))
        return key

    def _store(self, acc):
        # acc holds validated keys; apply caps and the drop tolerance
        lost = 0
        for key, coeff in acc.items():
            if (key.degree > self._degree_cap or
                    key.fourier_order > self._fourier_cap):
                if coeff != 0:
                    lost += 1
                continue
            if abs(coeff) <= self._drop_tol:
                continue
            self._terms[key] = coeff
        self._truncation_loss += lost
        if lost:
            logger.debug("Dropped {} terms beyond caps ({}, {})".format(
                lost, self._degree_cap, self._fourier_cap))

    def _build(self, acc, real, degree_cap=None, fourier_cap=None,
               lost=0):
        out = TFSeries(self._n, self._m,
                       degree_cap=(self._degree_cap if degree_cap is None
                                   else degree_cap),
                       fourier_cap=(self._fourier_cap if fourier_cap is None
                                    else fourier_cap),
                       drop_tol=self._drop_tol, real=real)
        out._truncation_loss = lost
        out._store(acc)
        return out

    @property
    def n(self):
        return self._n

    @property
    def m(self):
        return self._m

    @property
    def dims(self):
        return (self._n, self._m)

    @property
    def degree_cap(self):
        return self._degree_cap

    @property
    def fourier_cap(self):
        return self._fourier_cap

    @property
    def drop_tol(self):
        return self._drop_tol

    @property
    def is_real_flagged(self):
        return self._real

    @property
    def truncation_loss(self):
        return self._truncation_loss

    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items())

    def keys(self):
        return sorted(self._terms)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self.items())

    def __contains__(self, key):
        return key in self._terms

    def __repr__(self):
        return "TFSeries(n={}, m={}, terms={}, caps=({}, {}))".format(
            self._n, self._m, len(self._terms), self._degree_cap,
            self._fourier_cap)

    def is_zero(self):
        return not self._terms

    def coefficient(self, k, a=None, abar=None, ell=None):
        """Coefficient of a key, given as a TermKey or as its four parts."""
        key = k if a is None else TermKey.make(k, a, abar, ell)
        if not isinstance(key, TermKey):
            key = TermKey.make(*key)
        return self._terms.get(key, 0j)

    def max_degree(self):
        return max((key.degree for key in self._terms), default=0)

    def max_abs_coefficient(self):
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def with_caps(self, degree_cap=None, fourier_cap=None):
        return self._build(dict(self._terms), self._real,
                           degree_cap=degree_cap, fourier_cap=fourier_cap)

    def with_real_flag(self, real=True):
        out = self._build(dict(self._terms), real)
        out._truncation_loss = self._truncation_loss
        return out

    def _compatible(self, other):
        if not isinstance(other, TFSeries):
            raise TypeError("Expected a TFSeries, got {!r}".format(other))
        if self.dims != other.dims:
            raise TFSeriesDimensionError(self.dims, other.dims)
        return (min(self._degree_cap, other._degree_cap),
                min(self._fourier_cap, other._fourier_cap))

    def __add__(self, other):
        if not isinstance(other, TFSeries):
            return self + self.constant(other)
        dcap, fcap = self._compatible(other)
        acc = defaultdict(complex, self._terms)
        for key, coeff in other._terms.items():
            acc[key] += coeff
        return self._build(acc, self._real and other._real, dcap, fcap,
                           self._truncation_loss + other._truncation_loss)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TFSeries):
            return self.scale(other)
        dcap, fcap = self._compatible(other)
        acc = defaultdict(complex)
        lost = 0
        for kf, cf in self._terms.items():
            df = kf.degree
            for kg, cg in other._terms.items():
                if df + kg.degree > dcap:
                    lost += 1
                    continue
                ell = _add_vec(kf.ell, kg.ell)
                if sum(abs(x) for x in ell) > fcap:
                    lost += 1
                    continue
                key = TermKey(_add_vec(kf.k, kg.k), _add_vec(kf.a, kg.a),
                              _add_vec(kf.abar, kg.abar), ell)
                acc[key] += cf * cg
        return self._build(acc, self._real and other._real, dcap, fcap,
                           lost)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.scale(1.0 / c)

    def scale(self, c):
        c = complex(c)
        acc = {key: c * coeff for key, coeff in self._terms.items()}
        return self._build(acc, self._real and c.imag == 0,
                           lost=self._truncation_loss)

    def constant(self, c):
        zero = (0,) * self._n
        zm = (0,) * self._m
        return self._build({TermKey(zero, zm, zm, zero): complex(c)},
                           complex(c).imag == 0)

    def bracket(self, other):
        return poisson_bracket(self, other)

    def project(self, selector):
        acc = {key: c for key, c in self._terms.items() if selector(key)}
        out = self._build(acc, self._real, lost=self._truncation_loss)
        return out

    def degree_slice(self, degree):
        return self.project(lambda key: key.degree == degree)

    def up_to_degree(self, degree):
        return self.project(lambda key: key.degree <= degree)

    def derivative(self, kind, index):
        """Partial derivative with respect to I, phi, z or zbar."""
        acc = defaultdict(complex)
        for key, c in self._terms.items():
            if kind == "phi":
                if key.ell[index]:
                    acc[key] += 1j * key.ell[index] * c
                continue
            if kind == "I":
                field = key.k
            elif kind == "z":
                field = key.a
            elif kind == "zbar":
                field = key.abar
            else:
                raise ValueError(
                    "Unknown derivative kind {}, expected one of {}".format(
                        kind, DERIVATIVE_KINDS))
            power = field[index]
            if power == 0:
                continue
            lowered = list(field)
            lowered[index] -= 1
            lowered = tuple(lowered)
            if kind == "I":
                new = TermKey(lowered, key.a, key.abar, key.ell)
            elif kind == "z":
                new = TermKey(key.k, lowered, key.abar, key.ell)
            else:
                new = TermKey(key.k, key.a, lowered, key.ell)
            acc[new] += power * c
        return self._build(acc, False)

    def conjugate(self):
        """Series of the complex conjugate function."""
        acc = {key.mirror(): c.conjugate() for key, c in self._terms.items()}
        return self._build(acc, self._real)

    def real_part(self):
        """Reality-symmetrized series (f + conj f) / 2, flagged real."""
        sym = (self + self.conjugate()).scale(0.5)
        return sym.with_real_flag(True)

    def map_coefficients(self, fn):
        """New series with c replaced by fn(key, c) for every term."""
        acc = {key: fn(key, c) for key, c in self._terms.items()}
        return self._build(acc, self._real)

    def allclose(self, other, tol=1e-12):
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(k) - other.coefficient(k)) <= tol
                   for k in keys)

    def evaluator(self):
        return SeriesEvaluator(self)

    def __call__(self, I, phi, z, zbar=None):
        return self.evaluator()(I, phi, z, zbar)


def poisson_bracket(f, g):
    """{f, g} computed monomial by monomial.

    For f = c I^k z^a zbar^abar e^{i ell phi} and g with primed exponents,
    the angle-action part contributes i (ell_i k'_i - k_i ell'_i) c c' at
    (k + k' - e_i, a + a', abar + abar', ell + ell') and the elliptic part
    contributes i (a_j abar'_j - abar_j a'_j) c c' at
    (k + k', a + a' - e_j, abar + abar' - e_j, ell + ell'). Both lower the
    weighted degree by two, so pairs above the cap are skipped up front.
    """
    dcap, fcap = f._compatible(g)
    n, m = f.n, f.m
    acc = defaultdict(complex)
    lost = 0
    for kf, cf in f._terms.items():
        df = kf.degree
        for kg, cg in g._terms.items():
            if df + kg.degree - 2 > dcap:
                lost += 1
                continue
            ell = _add_vec(kf.ell, kg.ell)
            if sum(abs(x) for x in ell) > fcap:
                lost += 1
                continue
            c = cf * cg
            k_sum = _add_vec(kf.k, kg.k)
            a_sum = _add_vec(kf.a, kg.a)
            abar_sum = _add_vec(kf.abar, kg.abar)
            for i in range(n):
                w = kf.ell[i] * kg.k[i] - kf.k[i] * kg.ell[i]
                if w:
                    k_new = k_sum[:i] + (k_sum[i] - 1,) + k_sum[i + 1:]
                    acc[TermKey(k_new, a_sum, abar_sum, ell)] += 1j * w * c
            for j in range(m):
                w = kf.a[j] * kg.abar[j] - kf.abar[j] * kg.a[j]
                if w:
                    a_new = a_sum[:j] + (a_sum[j] - 1,) + a_sum[j + 1:]
                    b_new = (abar_sum[:j] + (abar_sum[j] - 1,) +
                             abar_sum[j + 1:])
                    acc[TermKey(k_sum, a_new, b_new, ell)] += 1j * w * c
    return f._build(acc, f.is_real_flagged and g.is_real_flagged,
                    dcap, fcap, lost)


def ring_arithmetic(f, g=None, op="add", c=None):
    """Add, multiply or scale series; caps of the result are the minimum."""
    if op == "add":
        return f + g
    if op == "sub":
        return f - g
    if op == "mul":
        return f * g
    if op == "scale":
        return f.scale(c)
    raise ValueError("Unknown series operation {}".format(op))


def project(f, selector):
    return f.project(selector)


def _power_table(x, lo, hi):
    """Table of x**p for p in lo..hi, shape (points, hi - lo + 1)."""
    x = np.asarray(x)
    exps = np.arange(lo, hi + 1)
    return x[:, None] ** exps[None, :]


def _unique_rows(E):
    """Distinct rows of E and the row index of every original row."""
    if E.shape[1] == 0:
        return E[:1], np.zeros(E.shape[0], dtype=np.int64)
    rows, inverse = np.unique(E, axis=0, return_inverse=True)
    return rows, inverse.reshape(-1)


class SeriesBundleEvaluator(object):
    """Evaluates several series of the same dimensions at once.

    Every term factors into a polynomial part I^k z^a zbar^abar and a
    Fourier part e^{i ell.phi}. Both are tabulated once per point over the
    distinct exponents only, and the bundle value is the bilinear form

        out[p, c] = sum_{u, v} poly[p, u] W[u, c, v] four[p, v]

    so the cost is two small tables and one matrix product per chunk of
    points.
    """

    CHUNK_ELEMENTS = 4000000

    def __init__(self, series_list):
        if not series_list:
            raise ValueError("Empty series bundle")
        n, m = series_list[0].dims
        for s in series_list[1:]:
            if s.dims != (n, m):
                raise TFSeriesDimensionError((n, m), s.dims)
        self._n = n
        self._m = m
        self._count = len(series_list)
        rows, comps, coeffs = [], [], []
        for idx, s in enumerate(series_list):
            for key, c in s.items():
                rows.append(key.k + key.a + key.abar + key.ell)
                comps.append(idx)
                coeffs.append(c)
        E = np.array(rows, dtype=np.int64).reshape(-1, 2 * n + 2 * m)
        self._terms = E.shape[0]
        if not self._terms:
            return
        self._poly, p_idx = _unique_rows(E[:, :n + 2 * m])
        self._four, f_idx = _unique_rows(E[:, n + 2 * m:])
        W = np.zeros((self._poly.shape[0], self._count,
                      self._four.shape[0]), dtype=complex)
        np.add.at(W, (p_idx, np.array(comps), f_idx),
                  np.array(coeffs, dtype=complex))
        self._W = W.reshape(self._poly.shape[0], -1)

    @property
    def components(self):
        return self._count

    @staticmethod
    def _table(variables, exponents, signed):
        out = np.ones((variables.shape[0], exponents.shape[0]),
                      dtype=complex)
        for i in range(exponents.shape[1]):
            exps = exponents[:, i]
            lo = int(exps.min()) if signed else 0
            hi = int(exps.max())
            if lo == 0 and hi == 0:
                continue
            out *= _power_table(variables[:, i], lo, hi)[:, exps - lo]
        return out

    def _block(self, I, phi, z, zbar):
        poly = self._table(np.concatenate([I, z, zbar], axis=1), self._poly,
                           False)
        four = self._table(np.exp(1j * phi), self._four, True)
        mixed = (poly @ self._W).reshape(-1, self._count,
                                         self._four.shape[0])
        return np.einsum("pcv,pv->pc", mixed, four)

    def __call__(self, I, phi, z, zbar=None):
        """Values at one point (1-d inputs) or many (2-d inputs).

        Returns shape (components,) or (points, components).
        """
        single = np.ndim(phi) <= 1 and np.ndim(I) <= 1 and np.ndim(z) <= 1
        I = np.atleast_2d(np.asarray(I))
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        P = max(I.shape[0], phi.shape[0], z.shape[0])
        I = np.broadcast_to(I, (P, self._n))
        phi = np.broadcast_to(phi, (P, self._n))
        z = np.broadcast_to(z, (P, self._m))
        if zbar is None:
            zbar = np.conj(z)
        else:
            zbar = np.broadcast_to(
                np.atleast_2d(np.asarray(zbar, dtype=complex)), (P, self._m))
        out = np.zeros((P, self._count), dtype=complex)
        if self._terms:
            width = self._W.shape[1] + self._poly.shape[0]
            chunk = max(1, self.CHUNK_ELEMENTS // width)
            for start in range(0, P, chunk):
                sl = slice(start, start + chunk)
                out[sl] = self._block(I[sl], phi[sl], z[sl], zbar[sl])
        return out[0] if single else out


class SeriesEvaluator(object):

    def __init__(self, series):
        self._bundle = SeriesBundleEvaluator([series])

    def __call__(self, I, phi, z, zbar=None):
        values = self._bundle(I, phi, z, zbar)
        return values[..., 0]


def evaluate(f, I, phi, z, zbar=None):
    return SeriesEvaluator(f)(I, phi, z, zbar)


class VectorFieldSeries(object):
    """Hamiltonian vector field of H as series.

    I' = -d_phi H, phi' = d_I H, z' = i d_zbar H and zbar' = -i d_z H.
    """

    def __init__(self, H):
        n, m = H.dims
        self._H = H
        self._I_dot = [H.derivative("phi", i).scale(-1.0) for i in range(n)]
        self._phi_dot = [H.derivative("I", i) for i in range(n)]
        self._z_dot = [H.derivative("zbar", j).scale(1j) for j in range(m)]
        self._zbar_dot = [H.derivative("z", j).scale(-1j) for j in range(m)]
        self._bundle = None

    @property
    def hamiltonian(self):
        return self._H

    @property
    def I_dot(self):
        return list(self._I_dot)

    @property
    def phi_dot(self):
        return list(self._phi_dot)

    @property
    def z_dot(self):
        return list(self._z_dot)

    @property
    def zbar_dot(self):
        return list(self._zbar_dot)

    def bundle(self):
        """Evaluator returning [H, I', phi', z', zbar'] stacked."""
        if self._bundle is None:
            self._bundle = SeriesBundleEvaluator(
                [self._H] + self._I_dot + self._phi_dot + self._z_dot +
                self._zbar_dot)
        return self._bundle

    def split(self, values):
        """Cut a bundle result into (H, I', phi', z', zbar')."""
        n, m = self._H.dims
        cuts = np.cumsum([1, n, n, m])
        H = values[..., 0]
        I_dot = values[..., 1:cuts[1]]
        phi_dot = values[..., cuts[1]:cuts[2]]
        z_dot = values[..., cuts[2]:cuts[3]]
        zbar_dot = values[..., cuts[3]:]
        return H, I_dot, phi_dot, z_dot, zbar_dot


def hamiltonian_vector_field(H):
    return VectorFieldSeries(H)


def sup_fourier_norm(f, r, rho, s):
    """Weighted norm sum |c| r^|k| rho^|a+abar| e^{|ell|_1 s}."""
    total = 0.0
    for key, c in f._terms.items():
        total += (abs(c) * r ** key.action_order *
                  rho ** key.elliptic_order *
                  math.exp(key.fourier_order * s))
    return total


class RealityReport(namedtuple("RealityReport",
                               ["max_violation", "worst_key", "passed"])):
    __slots__ = ()


def check_reality(f, tol=1e-12):
    """Largest |conj(c(key)) - c(mirror(key))| over stored keys."""
    worst, worst_key = 0.0, None
    for key, c in f._terms.items():
        violation = abs(c.conjugate() - f.coefficient(key.mirror()))
        if violation > worst:
            worst, worst_key = violation, key
    return RealityReport(worst, worst_key, worst <= tol)
