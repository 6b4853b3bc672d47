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

JSON form of Hamiltonians and series.

A Hamiltonian document looks like:

    {"n": 2, "m": 2, "degree_cap": 6, "fourier_cap": 8,
     "gamma": 1e-3, "tau": 2,
     "terms": [{"k": [1, 0], "a": [0, 0], "abar": [0, 0], "ell": [0, 0],
                "re": 1.0, "im": 0.0}, ...],
     "relations": [{"j": 1, "M": 3, "a": [1, 1]}]}

Relation indices j are 1-based in documents and 0-based in code. Terms are
written sorted by key, so dumping the same series twice gives the same
bytes.

"""

import os
import json
import logging

from ellipt.series.tfseries import (
    TFSeries,
    TFSeriesFormatError,
    TFSeriesInvariantError,
    TermKey,
    check_reality,
)

logger = logging.getLogger(__name__)

__all__ = [
    "HamiltonianDocument",
    "series_to_dict",
    "series_from_dict",
    "dumps_series",
    "loads_series",
    "load_hamiltonian",
    "load_model",
    "list_models",
    "MODELS_DIR",
]

MODELS_DIR = os.path.abspath(
    os.path.join(os.path.dirname(__file__), "..", "models"))


def series_to_dict(series):
    terms = []
    for key, c in series.items():
        terms.append({"k": list(key.k), "a": list(key.a),
                      "abar": list(key.abar), "ell": list(key.ell),
                      "re": c.real, "im": c.imag})
    return {"n": series.n, "m": series.m,
            "degree_cap": series.degree_cap,
            "fourier_cap": series.fourier_cap,
            "real": series.is_real_flagged,
            "terms": terms}


def series_from_dict(doc, real_default=True, reality_tol=1e-12):
    """Build a series from its dict form.

    Series flagged real are checked for conjugate symmetry; a violation
    beyond reality_tol (relative to the largest coefficient) is refused.
    """
    try:
        n = int(doc["n"])
        m = int(doc["m"])
        raw_terms = doc.get("terms", [])
    except (KeyError, TypeError, ValueError) as e:
        raise TFSeriesFormatError(
            "Series document lacks n, m or terms: {}".format(e))
    terms = {}
    for item in raw_terms:
        try:
            key = TermKey.make(item["k"], item["a"], item["abar"],
                               item["ell"])
            coeff = complex(float(item.get("re", 0.0)),
                            float(item.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as e:
            raise TFSeriesFormatError(
                "Malformed term {!r}: {}".format(item, e))
        if key in terms:
            raise TFSeriesFormatError(
                "Duplicated term key {}".format(key))
        terms[key] = coeff
    real = bool(doc.get("real", real_default))
    series = TFSeries(n, m, terms,
                      degree_cap=int(doc.get("degree_cap", 6)),
                      fourier_cap=int(doc.get("fourier_cap", 8)),
                      real=real)
    if series.truncation_loss:
        logger.warning("{} input terms exceed the caps and were "
                       "dropped".format(series.truncation_loss))
    if real:
        report = check_reality(series)
        scale = max(1.0, series.max_abs_coefficient())
        if report.max_violation > reality_tol * scale:
            raise TFSeriesInvariantError(
                "Series flagged real is not conjugate symmetric: "
                "violation {:.3e} at {}".format(report.max_violation,
                                                report.worst_key))
    return series


def dumps_series(series):
    return json.dumps(series_to_dict(series), indent=2, sort_keys=True)


def loads_series(text, **kwargs):
    try:
        doc = json.loads(text)
    except ValueError as e:
        raise TFSeriesFormatError("Invalid JSON: {}".format(e))
    return series_from_dict(doc, **kwargs)


class HamiltonianDocument(object):
    """A Hamiltonian with its Diophantine constants and declared relations.
    """

    def __init__(self, series, gamma=1e-3, tau=2.0, relations=None,
                 name=None):
        self._series = series
        self._gamma = float(gamma)
        self._tau = float(tau)
        self._relations = list(relations or [])
        self._name = name

    @property
    def series(self):
        return self._series

    @property
    def gamma(self):
        return self._gamma

    @property
    def tau(self):
        return self._tau

    @property
    def relations(self):
        """Declared relations as 0-based (j, M, a) tuples."""
        return list(self._relations)

    @property
    def name(self):
        return self._name

    @classmethod
    def from_dict(cls, doc, name=None, reality_tol=1e-12):
        series = series_from_dict(doc, reality_tol=reality_tol)
        relations = []
        for rel in doc.get("relations", []) or []:
            try:
                j = int(rel["j"]) - 1
                M = int(rel["M"])
                a = tuple(int(x) for x in rel["a"])
            except (KeyError, TypeError, ValueError) as e:
                raise TFSeriesFormatError(
                    "Malformed relation {!r}: {}".format(rel, e))
            if not 0 <= j < series.m or M <= 0:
                raise TFSeriesFormatError(
                    "Relation {!r} out of range for m = {}".format(
                        rel, series.m))
            relations.append((j, M, a))
        return cls(series, doc.get("gamma", 1e-3), doc.get("tau", 2.0),
                   relations, name=name or doc.get("name"))

    def to_dict(self):
        doc = series_to_dict(self._series)
        doc["gamma"] = self._gamma
        doc["tau"] = self._tau
        if self._name:
            doc["name"] = self._name
        if self._relations:
            doc["relations"] = [{"j": j + 1, "M": M, "a": list(a)}
                                for j, M, a in self._relations]
        return doc


def load_hamiltonian(path, reality_tol=1e-12):
    with open(path) as f:
        try:
            doc = json.load(f)
        except ValueError as e:
            raise TFSeriesFormatError(
                "Invalid JSON in {}: {}".format(path, e))
    name = os.path.splitext(os.path.basename(path))[0]
    logger.info("Loaded Hamiltonian {} from {}".format(name, path))
    return HamiltonianDocument.from_dict(doc, name=name,
                                         reality_tol=reality_tol)


def list_models():
    return sorted(os.path.splitext(f)[0] for f in os.listdir(MODELS_DIR)
                  if f.endswith(".json"))


def load_model(name, reality_tol=1e-12):
    """Load one of the bundled example Hamiltonians by name."""
    path = os.path.join(MODELS_DIR, "{}.json".format(name))
    if not os.path.exists(path):
        raise TFSeriesFormatError(
            "Unknown model {}, available: {}".format(
                name, ", ".join(list_models())))
    return load_hamiltonian(path, reality_tol=reality_tol)
