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

import io
import os
import json
import shutil
import tempfile
import unittest

from mock import patch

from ellipt.apps import cli
from ellipt.apps.pipeline import ClosureFailedError, Pipeline
from ellipt.orbit.contraction import ContractionRefusedError
from ellipt.series.tfseries import TFSeriesFormatError


class TestExitCodes(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestExitCodes, self).setUp()

    def test_mapping(self):
        self.assertEqual(cli.exit_code_for(TFSeriesFormatError("x")), 2)
        self.assertEqual(
            cli.exit_code_for(ContractionRefusedError(1.0, 2.0, 3.0)), 7)
        self.assertEqual(cli.exit_code_for(ClosureFailedError(["a"], 1e-7)),
                         8)
        self.assertIsNone(cli.exit_code_for(RuntimeError("boom")))

    def test_parser(self):
        args = cli.build_parser().parse_args(
            ["run", "--model", "intera", "--eta", "0.1", "0.05",
             "--stages", "melnikov", "--tol-closure", "1e-8",
             "--no-remainder"])
        self.assertEqual(args.eta, [0.1, 0.05])
        self.assertEqual(args.closure_tol, 1e-8)
        self.assertFalse(args.include_remainder)
        with patch("sys.stderr", new_callable=io.StringIO):
            with self.assertRaises(SystemExit):
                cli.build_parser().parse_args(
                    ["melnikov", "--model", "a", "--input", "b.json"])


class TestMain(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestMain, self).setUp()
        self.tmp = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmp)
        self.stderr = io.StringIO()
        patcher = patch("sys.stderr", self.stderr)
        patcher.start()
        self.addCleanup(patcher.stop)

    def _main(self, *argv):
        return cli.main(list(argv) + ["--out", self.tmp,
                                      "--log-level", "ERROR"])

    def _error(self):
        with open(os.path.join(self.tmp, "error.json")) as f:
            return json.load(f)

    def test_melnikov(self):
        self.assertEqual(self._main("melnikov", "--model", "model_n2m2"), 0)
        self.assertTrue(os.path.exists(os.path.join(self.tmp,
                                                    "certificates.json")))

    def test_vanishing_twist(self):
        self.assertEqual(self._main("normalform", "--model", "intera"), 5)
        self.assertEqual(self._error()["error"], "TwistSingularError")
        self.assertEqual(json.loads(self.stderr.getvalue())["exit_code"],
                         5)

    def test_no_period(self):
        self.assertEqual(self._main("periods", "--model", "linint"), 6)
        self.assertEqual(self._error()["exit_code"], 6)

    def test_unknown_model(self):
        self.assertEqual(self._main("melnikov", "--model", "missing"), 2)

    def test_bad_config(self):
        path = os.path.join(self.tmp, "cfg.yaml")
        with open(path, "w") as f:
            f.write("grid_per_dim: -1\n")
        self.assertEqual(self._main("run", "--model", "intera",
                                    "--config", path), 2)

    @patch.object(Pipeline, "run")
    def test_contraction_refused(self, mock_run):
        mock_run.side_effect = ContractionRefusedError(1.0, 2.0, 3.0)
        self.assertEqual(self._main("orbits", "--model", "model_n2m2"), 7)
        mock_run.assert_called_once_with(["orbits"])

    @patch.object(Pipeline, "run")
    def test_run_uses_configured_stages(self, mock_run):
        self.assertEqual(self._main("run", "--model", "model_n2m2"), 0)
        mock_run.assert_called_once_with(None)

    @patch.object(Pipeline, "run")
    def test_unexpected_error_propagates(self, mock_run):
        mock_run.side_effect = RuntimeError("boom")
        with self.assertRaises(RuntimeError):
            self._main("melnikov", "--model", "model_n2m2")

    def test_window(self):
        with patch("sys.stdout", new_callable=io.StringIO) as out:
            self.assertEqual(self._main("window", "--T", "10",
                                        "--threshold"), 0)
        doc = json.loads(out.getvalue())
        self.assertFalse(doc["window"]["empty"])
        self.assertGreater(doc["T0"], 1.0)
        with open(os.path.join(self.tmp, "window.json")) as f:
            self.assertEqual(json.load(f)["T"], 10.0)
