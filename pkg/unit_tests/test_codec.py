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

import os
import json
import shutil
import tempfile
import unittest

from ellipt.series import codec
from ellipt.series.tfseries import (
    TFSeries,
    TFSeriesFormatError,
    TFSeriesInvariantError,
)

DOC = {
    "n": 1, "m": 1, "degree_cap": 6, "fourier_cap": 4,
    "gamma": 0.01, "tau": 1.5,
    "terms": [
        {"k": [1], "a": [0], "abar": [0], "ell": [0], "re": 1.0, "im": 0.0},
        {"k": [0], "a": [1], "abar": [0], "ell": [1], "re": 0.5, "im": 0.25},
        {"k": [0], "a": [0], "abar": [1], "ell": [-1], "re": 0.5,
         "im": -0.25},
    ],
    "relations": [{"j": 1, "M": 2, "a": [1]}],
}


class TestCodec(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestCodec, self).setUp()
        self.tmp = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmp)

    def test_series_roundtrip_is_byte_identical(self):
        series = codec.series_from_dict(DOC)
        text = codec.dumps_series(series)
        again = codec.dumps_series(codec.loads_series(text))
        self.assertEqual(text, again)
        self.assertEqual(series.fourier_cap, 4)
        self.assertTrue(series.is_real_flagged)

    def test_reality_violation_refused(self):
        doc = json.loads(json.dumps(DOC))
        doc["terms"][2]["im"] = 0.25
        with self.assertRaises(TFSeriesInvariantError):
            codec.series_from_dict(doc)
        # accepted when flagged complex
        doc["real"] = False
        self.assertFalse(codec.series_from_dict(doc).is_real_flagged)

    def test_duplicate_key_refused(self):
        doc = json.loads(json.dumps(DOC))
        doc["terms"].append(dict(doc["terms"][0]))
        with self.assertRaises(TFSeriesFormatError):
            codec.series_from_dict(doc)

    def test_malformed(self):
        with self.assertRaises(TFSeriesFormatError):
            codec.series_from_dict({"m": 1})
        with self.assertRaises(TFSeriesFormatError):
            codec.series_from_dict({"n": 1, "m": 0, "terms": [{"k": [1]}]})
        with self.assertRaises(TFSeriesFormatError):
            codec.loads_series("{not json")

    def test_document_relations_are_zero_based(self):
        doc = codec.HamiltonianDocument.from_dict(DOC, name="toy")
        self.assertEqual(doc.relations, [(0, 2, (1,))])
        self.assertEqual(doc.gamma, 0.01)
        self.assertEqual(doc.tau, 1.5)
        out = doc.to_dict()
        self.assertEqual(out["relations"], DOC["relations"])
        self.assertEqual(out["name"], "toy")

    def test_relation_out_of_range(self):
        doc = json.loads(json.dumps(DOC))
        doc["relations"] = [{"j": 2, "M": 2, "a": [1]}]
        with self.assertRaises(TFSeriesFormatError):
            codec.HamiltonianDocument.from_dict(doc)

    def test_load_hamiltonian(self):
        path = os.path.join(self.tmp, "toy.json")
        with open(path, "w") as f:
            json.dump(DOC, f)
        doc = codec.load_hamiltonian(path)
        self.assertEqual(doc.name, "toy")
        self.assertEqual(len(doc.series), 3)
        with open(path, "w") as f:
            f.write("[")
        with self.assertRaises(TFSeriesFormatError):
            codec.load_hamiltonian(path)

    def test_bundled_models(self):
        self.assertEqual(codec.list_models(),
                         ["intera", "linint", "model_n2m2"])
        for name in codec.list_models():
            doc = codec.load_model(name)
            self.assertTrue(doc.series.is_real_flagged)
            self.assertIsInstance(doc.series, TFSeries)
        self.assertEqual(len(codec.load_model("linint").relations), 4)
        with self.assertRaises(TFSeriesFormatError):
            codec.load_model("missing")
