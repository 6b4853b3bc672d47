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

Command line front end.

    ellipt run --model model_n2m2 --eta 0.1 0.07 0.05 --out results
    ellipt melnikov --input ham.json
    ellipt window --T 10 --c1 1 --c2 1 --c3 1 --eps1 1

Every failure is reported as a JSON diagnostic on stderr (and in
<out>/error.json) and mapped to an exit code:

    0  success
    2  input, invariant or configuration error
    3  second order Melnikov condition fails
    4  small divisor or normal form inconsistency
    5  singular twist matrix
    6  no admissible period
    7  fixed point iteration refused or diverged
    8  orbit closure tolerance unmet

"""

import os
import sys
import json
import logging
import argparse

from ellipt.series.tfseries import (
    TFSeriesDimensionError,
    TFSeriesFormatError,
    TFSeriesInvariantError,
)
from ellipt.arith.resonance import (
    LatticePointRefusedError,
    MelnikovFailedError,
    NonresonantShiftRefusedError,
    RelationCertificationError,
)
from ellipt.arith.periods import (
    PeriodSelectionRefusedError,
    epsilon_window,
    window_threshold,
)
from ellipt.normal.averaging import (
    HamiltonianFormatError,
    LieTransformCapError,
    NormalFormConsistencyError,
)
from ellipt.normal.twist import SmallDivisorError, TwistSingularError
from ellipt.orbit.green import MonodromySingularError
from ellipt.orbit.contraction import (
    ContractionDivergedError,
    ContractionRefusedError,
)
from ellipt.orbit.critical import CriticalPointSearchError
from ellipt.orbit.continuation import ContinuationWindowError
from ellipt.dynamics.integrator import (
    IntegratorStepError,
    TrajectoryBlowUpError,
)
from ellipt.apps.config import ConfigError, load_config
from ellipt.apps.pipeline import ClosureFailedError, Pipeline, write_json

logger = logging.getLogger(__name__)

__all__ = [
    "EXIT_CODES",
    "exit_code_for",
    "build_parser",
    "main",
]

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

EXIT_CODES = (
    ((TFSeriesFormatError, TFSeriesInvariantError, TFSeriesDimensionError,
      HamiltonianFormatError, RelationCertificationError,
      LieTransformCapError, ConfigError), 2),
    ((MelnikovFailedError,), 3),
    ((SmallDivisorError, NormalFormConsistencyError), 4),
    ((TwistSingularError,), 5),
    ((PeriodSelectionRefusedError, NonresonantShiftRefusedError,
      LatticePointRefusedError, MonodromySingularError,
      ContinuationWindowError), 6),
    ((ContractionRefusedError, ContractionDivergedError), 7),
    ((CriticalPointSearchError, ClosureFailedError, IntegratorStepError,
      TrajectoryBlowUpError), 8),
)

# subcommand -> stages it runs (dependencies are added by the pipeline)
COMMAND_STAGES = {
    "melnikov": ["melnikov"],
    "resonances": ["resonances"],
    "normalform": ["normalform"],
    "periods": ["periods"],
    "orbits": ["orbits"],
    "verify": ["verify"],
    "run": None,
}


def exit_code_for(error):
    for classes, code in EXIT_CODES:
        if isinstance(error, classes):
            return code
    return None


def _add_common(parser):
    parser.add_argument("--config", help="YAML or JSON configuration file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--threads", type=int)


def _add_pipeline(parser):
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--input", "--hamiltonian", dest="input",
                        help="Hamiltonian JSON document")
    source.add_argument("--model", help="name of a bundled model")
    parser.add_argument("--eta", type=float, nargs="+")
    parser.add_argument("--t0", type=float)
    parser.add_argument("--budget", dest="erg_budget", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--degree-cap", type=int)
    parser.add_argument("--fourier-cap", type=int)
    parser.add_argument("--grid", dest="grid_per_dim", type=int)
    parser.add_argument("--ell-cutoff", type=int)
    parser.add_argument("--tol-divisor", dest="divisor_floor", type=float)
    parser.add_argument("--tol-contraction", dest="contraction_stop",
                        type=float)
    parser.add_argument("--tol-closure", dest="closure_tol", type=float)
    parser.add_argument("--tol-relation", dest="relation_tol", type=float)
    parser.add_argument("--tol-reality", dest="reality_tol", type=float)
    parser.add_argument("--no-remainder", dest="include_remainder",
                        action="store_const", const=False)
    parser.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ellipt",
        description="Periodic orbits near elliptic invariant tori")
    sub = parser.add_subparsers(dest="command")
    sub.required = True
    for name in ("melnikov", "resonances", "normalform", "periods",
                 "orbits", "verify"):
        cmd = sub.add_parser(name, help="run the {} stage".format(name))
        _add_common(cmd)
        _add_pipeline(cmd)
    run = sub.add_parser("run", help="run the configured stages")
    _add_common(run)
    _add_pipeline(run)
    run.add_argument("--stages", help="comma separated stage list")
    window = sub.add_parser("window",
                            help="admissible eps for a period T")
    _add_common(window)
    window.add_argument("--T", type=float, required=True)
    window.add_argument("--c1", type=float, default=1.0)
    window.add_argument("--c2", type=float, default=1.0)
    window.add_argument("--c3", type=float, default=1.0)
    window.add_argument("--eps1", type=float, default=1.0)
    window.add_argument("--threshold", action="store_true",
                        help="also locate the period above which the "
                             "window opens")
    return parser


_NOT_CONFIG = ("command", "config", "log_level", "T", "c1", "c2", "c3",
               "eps1", "threshold")


def _overrides(args):
    return {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}


def _run_window(args, cfg):
    window = epsilon_window(args.T, args.c1, args.c2, args.c3, args.eps1)
    doc = {"T": args.T, "c1": args.c1, "c2": args.c2, "c3": args.c3,
           "eps1": args.eps1, "window": window.to_dict()}
    if args.threshold:
        doc["T0"] = window_threshold(args.c1, args.c2, args.c3, args.eps1)
    write_json(os.path.join(cfg.out, "window.json"), doc)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _report(error, code, out):
    doc = {"error": type(error).__name__, "message": str(error),
           "exit_code": code}
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    if out:
        try:
            write_json(os.path.join(out, "error.json"), doc)
        except OSError as e:
            logger.warning("Could not write error report: {}".format(e))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format=LOG_FORMAT)
    out = args.out
    try:
        cfg = load_config(args.config, _overrides(args))
        out = cfg.out
        if args.command == "window":
            return _run_window(args, cfg)
        Pipeline(cfg).run(COMMAND_STAGES[args.command])
    except Exception as e:
        code = exit_code_for(e)
        if code is None:
            raise
        logger.error("{}: {}".format(type(e).__name__, e))
        _report(e, code, out)
        return code
    logger.info("Artifacts written to {}".format(cfg.out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
