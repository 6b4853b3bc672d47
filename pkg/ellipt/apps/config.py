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

Pipeline configuration.

Every numeric default lives in DEFAULTS. A run merges, in order, the
defaults, an optional YAML or JSON file and the explicit command line
flags:

    input: ellipt/models/model_n2m2.json
    out: results
    eta: [0.1, 0.07, 0.05]
    stages: [melnikov, normalform, resonances, periods, orbits, verify]
    integrator:
      method: rk8
      rtol: 1.0e-12

The effective values are echoed into every artifact.

"""

import copy
import logging

import yaml

from ellipt.dynamics.integrator import IntegratorConfig

logger = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "DEFAULTS",
    "STAGES",
    "load_config",
]

STAGES = ("melnikov", "normalform", "resonances", "periods", "orbits",
          "verify")

DEFAULTS = {
    "input": None,
    "model": None,
    "out": "ellipt-out",
    "eta": [0.1],
    "stages": list(STAGES),
    "include_remainder": True,
    # caps; None keeps the ones of the input document
    "degree_cap": None,
    "fourier_cap": None,
    # tolerances
    "drop_tol": 1e-15,
    "divisor_floor": 1e-10,
    "relation_tol": 1e-9,
    "contraction_stop": 1e-12,
    "closure_tol": 1e-7,
    "reality_tol": 1e-12,
    "consistency_tol": 1e-10,
    # scans
    "ell_cutoff": 10,
    "M_max": 12,
    "a_max": 10,
    # period search; t0 None means 1 / min(eta)^2
    "t0": None,
    "erg_budget": 1e4,
    "delta": None,
    "period_samples": 20000,
    # orbit search
    "grid_per_dim": 12,
    "samples_per_period": 64,
    "min_samples": 256,
    "max_iter": 200,
    "refine_iter": 50,
    "threads": 1,
    "seed": 0,
    # continuation
    "eps_order": 4,
    "integrator": {"method": "rk8", "rtol": 1e-12, "atol": 1e-12,
                   "points_per_period": 50},
}

_TOLERANCES = ("drop_tol", "divisor_floor", "relation_tol",
               "contraction_stop", "closure_tol", "reality_tol",
               "consistency_tol")

_POSITIVE_INTS = ("ell_cutoff", "M_max", "a_max", "period_samples",
                  "grid_per_dim", "samples_per_period", "min_samples",
                  "max_iter", "refine_iter", "threads", "eps_order")


class ConfigError(Exception):

    def __init__(self, key, value, reason):
        super().__init__(
            "Invalid configuration {} = {!r}: {}".format(key, value, reason))
        self._key = key

    @property
    def key(self):
        return self._key


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


class PipelineConfig(object):
    """Validated view over the merged configuration values."""

    def __init__(self, values=None):
        merged = _merge(DEFAULTS, values)
        unknown = sorted(set(merged) - set(DEFAULTS))
        if unknown:
            raise ConfigError(unknown[0], merged[unknown[0]], "unknown key")
        self._values = {}
        # eta is checked against the stages
        self.stages = merged.pop("stages")
        for key, value in merged.items():
            setattr(self, key, value)

    def _positive(self, key, value):
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError(key, value, "not a number")
        if not value > 0:
            raise ConfigError(key, value, "must be positive")
        return value

    def __setattr__(self, key, value):
        if key.startswith("_"):
            return super().__setattr__(key, value)
        if key not in DEFAULTS:
            raise ConfigError(key, value, "unknown key")
        validate = getattr(self, "_check_" + key, None)
        if validate is not None:
            value = validate(value)
        elif key in _TOLERANCES or key in ("erg_budget",):
            value = self._positive(key, value)
        elif key in _POSITIVE_INTS:
            value = int(self._positive(key, value))
        self._values[key] = value

    def __getattr__(self, key):
        values = self.__dict__.get("_values", {})
        if key in values:
            return values[key]
        raise AttributeError(key)

    def _check_eta(self, value):
        if isinstance(value, (int, float)):
            value = [value]
        values = [self._positive("eta", v) for v in value or []]
        if not values and any(s in self._stages_or_default()
                              for s in ("orbits", "verify")):
            raise ConfigError("eta", value,
                              "needs at least one value for orbit stages")
        return values

    def _stages_or_default(self):
        return self._values.get("stages", DEFAULTS["stages"])

    def _check_stages(self, value):
        if isinstance(value, str):
            value = [s.strip() for s in value.split(",") if s.strip()]
        stages = list(value or [])
        for stage in stages:
            if stage not in STAGES:
                raise ConfigError("stages", stage, "expected one of {}".format(
                    ", ".join(STAGES)))
        # run order is fixed
        return [s for s in STAGES if s in stages]

    def _check_include_remainder(self, value):
        return bool(value)

    def _check_degree_cap(self, value):
        return None if value is None else int(self._positive("degree_cap",
                                                             value))

    def _check_fourier_cap(self, value):
        return None if value is None else int(self._positive("fourier_cap",
                                                             value))

    def _check_t0(self, value):
        return None if value is None else float(value)

    def _check_delta(self, value):
        return None if value is None else self._positive("delta", value)

    def _check_seed(self, value):
        return int(value)

    def _check_integrator(self, value):
        if not isinstance(value, dict):
            raise ConfigError("integrator", value, "expected a mapping")
        opts = _merge(DEFAULTS["integrator"], value)
        try:
            IntegratorConfig(**opts)
        except (TypeError, ValueError) as e:
            raise ConfigError("integrator", value, str(e))
        return opts

    @property
    def period_start(self):
        """t0, or 1 / min(eta)^2 when unset."""
        if self.t0 is not None:
            return self.t0
        return 1.0 / min(self.eta) ** 2 if self.eta else 0.0

    def integrator_config(self):
        return IntegratorConfig(**self.integrator)

    def contraction_opts(self):
        return {"max_iter": self.max_iter, "stop_tol": self.contraction_stop,
                "seed": self.seed}

    def to_dict(self):
        return copy.deepcopy(self._values)


def load_config(path=None, overrides=None):
    """Defaults, then the file at path, then overrides (None values are
    ignored)."""
    values = {}
    if path:
        try:
            with open(path) as f:
                loaded = yaml.safe_load(f)
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError("config", path, str(e))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config", path, "expected a mapping")
        logger.debug("Loaded configuration from {}".format(path))
        values = loaded
    flags = {k: v for k, v in (overrides or {}).items() if v is not None}
    return PipelineConfig(_merge(values, flags))
