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
import shutil
import tempfile
import unittest

from ellipt.apps import config
from ellipt.apps.config import ConfigError, PipelineConfig


class TestPipelineConfig(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestPipelineConfig, self).setUp()

    def test_defaults(self):
        cfg = PipelineConfig()
        self.assertEqual(cfg.stages, list(config.STAGES))
        self.assertEqual(cfg.eta, [0.1])
        self.assertAlmostEqual(cfg.period_start, 100.0)
        self.assertEqual(cfg.integrator_config().method, "rk8")
        self.assertEqual(cfg.contraction_opts(),
                         {"max_iter": 200, "stop_tol": 1e-12, "seed": 0})
        self.assertEqual(cfg.to_dict()["closure_tol"], 1e-7)

    def test_stages_in_run_order(self):
        cfg = PipelineConfig({"stages": "verify, melnikov"})
        self.assertEqual(cfg.stages, ["melnikov", "verify"])
        with self.assertRaises(ConfigError) as ctx:
            PipelineConfig({"stages": ["melnikov", "plot"]})
        self.assertEqual(ctx.exception.key, "stages")

    def test_eta(self):
        cfg = PipelineConfig({"eta": 0.05, "t0": 12.5})
        self.assertEqual(cfg.eta, [0.05])
        self.assertEqual(cfg.period_start, 12.5)
        cfg = PipelineConfig({"eta": [0.1, 0.05]})
        self.assertAlmostEqual(cfg.period_start, 400.0)
        with self.assertRaises(ConfigError):
            PipelineConfig({"eta": [0.1, -0.05]})
        with self.assertRaises(ConfigError):
            PipelineConfig({"eta": []})
        cfg = PipelineConfig({"eta": [], "stages": ["melnikov"]})
        self.assertEqual(cfg.eta, [])

    def test_invalid_values(self):
        for values in ({"closure_tol": 0}, {"grid_per_dim": -3},
                       {"divisor_floor": "small"}, {"no_such_key": 1},
                       {"integrator": {"method": "euler"}},
                       {"integrator": "rk8"}):
            with self.assertRaises(ConfigError, msg=str(values)):
                PipelineConfig(values)

    def test_assignment_is_validated(self):
        cfg = PipelineConfig()
        cfg.grid_per_dim = "8"
        self.assertEqual(cfg.grid_per_dim, 8)
        with self.assertRaises(ConfigError):
            cfg.threads = 0
        with self.assertRaises(AttributeError):
            cfg.missing

    def test_nested_integrator_merge(self):
        cfg = PipelineConfig({"integrator": {"method": "splitting"}})
        self.assertEqual(cfg.integrator["method"], "splitting")
        self.assertEqual(cfg.integrator["rtol"], 1e-12)


class TestLoadConfig(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestLoadConfig, self).setUp()
        self.tmp = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmp)

    def _write(self, text, name="cfg.yaml"):
        path = os.path.join(self.tmp, name)
        with open(path, "w") as f:
            f.write(text)
        return path

    def test_file_then_flags(self):
        path = self._write("eta: [0.1, 0.07]\n"
                           "grid_per_dim: 6\n"
                           "integrator:\n"
                           "  method: rk4\n")
        cfg = config.load_config(path, {"grid_per_dim": 4, "out": None,
                                        "model": "linint"})
        self.assertEqual(cfg.eta, [0.1, 0.07])
        self.assertEqual(cfg.grid_per_dim, 4)
        self.assertEqual(cfg.out, "ellipt-out")
        self.assertEqual(cfg.model, "linint")
        self.assertEqual(cfg.integrator["method"], "rk4")

    def test_json_is_yaml(self):
        path = self._write('{"threads": 3}', "cfg.json")
        self.assertEqual(config.load_config(path).threads, 3)

    def test_empty_file(self):
        self.assertEqual(config.load_config(self._write("")).eta, [0.1])

    def test_bad_files(self):
        with self.assertRaises(ConfigError):
            config.load_config(os.path.join(self.tmp, "missing.yaml"))
        with self.assertRaises(ConfigError):
            config.load_config(self._write("- 1\n- 2\n"))
        with self.assertRaises(ConfigError):
            config.load_config(self._write("eta: [0.1\n"))
