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

Batch pipeline from a Hamiltonian document to verified periodic orbits.

Stages run in a fixed order and each one adds to the artifact tree under
the output directory:

    melnikov     certificates.json["melnikov"]
    normalform   normalform.json, certificates.json["twist"]
    resonances   certificates.json["resonances"]
    periods      certificates.json["period"]
    orbits       orbits/<eta>_<T>_<idx>.json and .csv, summary.csv
    verify       verify_report.json, summary.csv

Selecting a stage also runs the stages it depends on. certificates.json is
rewritten after every stage, so a refused stage leaves the evidence
gathered so far on disk.

"""

import os
import csv
import json
import logging

import numpy as np

from ellipt.series.tfseries import TFSeries
from ellipt.series.codec import load_hamiltonian, load_model
from ellipt.arith.resonance import (
    MelnikovFailedError,
    melnikov_check,
    detect_resonances,
)
from ellipt.arith.periods import select_period
from ellipt.normal.averaging import (
    averaged_normal_form,
    check_hamiltonian_form,
)
from ellipt.normal.twist import require_invertible
from ellipt.orbit.green import PeriodSetup
from ellipt.orbit.critical import find_torus_orbits, minimal_period_bound
from ellipt.dynamics.verify import verify_orbit
from ellipt.apps.config import STAGES, ConfigError

logger = logging.getLogger(__name__)

__all__ = [
    "ClosureFailedError",
    "Pipeline",
    "STAGE_REQUIRES",
    "run_pipeline",
    "write_json",
]

STAGE_REQUIRES = {
    "melnikov": (),
    "normalform": ("melnikov",),
    "resonances": (),
    "periods": ("normalform", "resonances"),
    "orbits": ("periods",),
    "verify": ("orbits",),
}

SUMMARY_FIELDS = ["eta", "T", "index", "kind", "phi_star", "action",
                  "closure_residual", "min_period_bound", "degenerate",
                  "verify_closure", "energy_drift", "torus_sup_I",
                  "torus_sup_z", "phase_sup"]


class ClosureFailedError(Exception):

    def __init__(self, failures, tol):
        super().__init__(
            "{} orbit(s) do not close within {:.1e}: {}".format(
                len(failures), tol, failures))
        self._failures = failures

    @property
    def failures(self):
        return list(self._failures)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError("{!r} is not JSON serializable".format(obj))


def write_json(path, doc):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(json.dumps(doc, indent=2, sort_keys=True,
                           default=_jsonable))
        f.write("\n")


def expand_stages(stages):
    """Selected stages plus everything they depend on, in run order."""
    wanted = set()
    pending = list(stages)
    while pending:
        stage = pending.pop()
        if stage not in STAGE_REQUIRES:
            raise ConfigError("stages", stage, "unknown stage")
        if stage not in wanted:
            wanted.add(stage)
            pending.extend(STAGE_REQUIRES[stage])
    return [s for s in STAGES if s in wanted]


class Pipeline(object):
    """Runs the selected stages for one configuration.

    Results of every stage stay available as attributes for callers that
    drive the stages one by one.
    """

    def __init__(self, cfg):
        self._cfg = cfg
        self._document = None
        self._H = None
        self._freq = None
        self._nf = None
        self._structure = None
        self._certificate = None
        self._certificates = {}
        self._orbits = []
        self._reports = []

    @property
    def config(self):
        return self._cfg

    @property
    def out(self):
        return self._cfg.out

    @property
    def document(self):
        return self._document

    @property
    def hamiltonian(self):
        return self._H

    @property
    def frequencies(self):
        return self._freq

    @property
    def normal_form(self):
        return self._nf

    @property
    def structure(self):
        return self._structure

    @property
    def certificate(self):
        return self._certificate

    @property
    def certificates(self):
        return dict(self._certificates)

    @property
    def orbits(self):
        """(eta, setup, solutions, minimal period reports) per eta."""
        return list(self._orbits)

    @property
    def reports(self):
        return list(self._reports)

    def _path(self, *parts):
        return os.path.join(self._cfg.out, *parts)

    def _with_config(self, doc):
        doc = dict(doc)
        doc["config"] = self._cfg.to_dict()
        return doc

    def _save_certificates(self):
        write_json(self._path("certificates.json"),
                   self._with_config(self._certificates))

    def load(self):
        cfg = self._cfg
        if cfg.input:
            document = load_hamiltonian(cfg.input, cfg.reality_tol)
        elif cfg.model:
            document = load_model(cfg.model, cfg.reality_tol)
        else:
            raise ConfigError("input", None, "an input file or a bundled "
                              "model is required")
        H = document.series
        H = TFSeries(H.n, H.m, dict(H.items()),
                     degree_cap=cfg.degree_cap or H.degree_cap,
                     fourier_cap=cfg.fourier_cap or H.fourier_cap,
                     drop_tol=cfg.drop_tol, real=H.is_real_flagged)
        if H.truncation_loss:
            logger.warning("{} terms beyond the configured caps were "
                           "dropped".format(H.truncation_loss))
        self._document = document
        self._H = H
        self._freq = check_hamiltonian_form(H, document.gamma, document.tau,
                                            cfg.reality_tol)
        self._certificates["frequencies"] = self._freq.to_dict()
        self._certificates["model"] = document.name
        return H

    def run_melnikov(self):
        report = melnikov_check(self._freq, self._cfg.ell_cutoff)
        self._certificates["melnikov"] = dict(
            report.to_dict(), ell_cutoff=self._cfg.ell_cutoff)
        self._save_certificates()
        if not report.passed:
            raise MelnikovFailedError(report)
        return report

    def run_normalform(self):
        cfg = self._cfg
        eta = cfg.eta[0] if cfg.eta else 0.1
        nf = averaged_normal_form(self._H, self._freq, eta,
                                  cfg.divisor_floor, cfg.consistency_tol,
                                  cfg.reality_tol)
        self._nf = nf
        write_json(self._path("normalform.json"),
                   self._with_config({"normal_form": nf.to_dict()}))
        self._certificates["twist"] = {
            "R": nf.R_twist.tolist(), "Q": nf.Q_coupling.tolist(),
            "diagnostics": nf.diagnostics}
        self._save_certificates()
        # exit at a singular twist before any period is searched
        require_invertible(nf.R_twist)
        return nf

    def run_resonances(self):
        cfg = self._cfg
        structure = detect_resonances(self._freq, cfg.M_max, cfg.a_max,
                                      cfg.relation_tol,
                                      self._document.relations)
        self._structure = structure
        doc = structure.to_dict()
        doc["residuals"] = [float(r) for r in structure.residuals(self._freq)]
        doc["moduli_lcm"] = structure.lcm
        self._certificates["resonances"] = doc
        self._save_certificates()
        return structure

    def run_periods(self):
        cfg = self._cfg
        t0 = cfg.period_start
        try:
            cert = select_period(self._freq, self._structure,
                                 self._nf.R_twist, self._nf.Q_coupling, t0,
                                 cfg.erg_budget, cfg.period_samples,
                                 cfg.delta)
        except Exception as e:
            self._certificates["period"] = {
                "refused": str(e),
                "constants": getattr(e, "constants", None)}
            self._save_certificates()
            raise
        self._certificate = cert
        self._certificates["period"] = cert.to_dict()
        self._save_certificates()
        return cert

    def _orbit_name(self, eta, T, index):
        return "{:g}_{:.6g}_{}".format(eta, T, index)

    def _write_orbit(self, eta, solution, period, index):
        name = self._orbit_name(eta, solution.T, index)
        doc = solution.to_dict(trajectory=True)
        doc.update({"eta": eta, "index": index,
                    "minimal_period": period.to_dict()})
        write_json(self._path("orbits", name + ".json"),
                   self._with_config(doc))
        n = solution.I.shape[1]
        m = np.asarray(solution.z).shape[1]
        header = (["t"] + ["I_{}".format(i + 1) for i in range(n)] +
                  ["phi_{}".format(i + 1) for i in range(n)] +
                  ["Re_z_{}".format(j + 1) for j in range(m)] +
                  ["Im_z_{}".format(j + 1) for j in range(m)])
        z = np.asarray(solution.z)
        table = np.column_stack([solution.t, solution.I, solution.phi,
                                 z.real, z.imag])
        with open(self._path("orbits", name + ".csv"), "w",
                  newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in table:
                writer.writerow(["{:.17g}".format(x) for x in row])

    def run_orbits(self):
        cfg = self._cfg
        self._orbits = []
        for eta in cfg.eta:
            setup = PeriodSetup.build(self._certificate.T, eta,
                                      self._nf.R_twist, self._nf.Q_coupling,
                                      self._freq,
                                      self._certificate.minv_bound)
            H_eta = self._nf.rescaled(eta, cfg.include_remainder)
            search = find_torus_orbits(
                setup, H_eta, cfg.grid_per_dim, cfg.closure_tol,
                cfg.refine_iter, cfg.threads, cfg.samples_per_period,
                cfg.min_samples, cfg.contraction_opts())
            periods = []
            for index, solution in enumerate(search.solutions):
                period = minimal_period_bound(solution, setup.k_vec,
                                              self._freq.gamma,
                                              self._freq.tau)
                periods.append(period)
                self._write_orbit(eta, solution, period, index)
            for reason in search.dropped:
                logger.warning("eta = {:g}: {}".format(eta, reason))
            logger.info("eta = {:g}: {} orbits at T = {:.6g}".format(
                eta, len(search.solutions), setup.T))
            self._orbits.append((eta, setup, search, periods))
        self._write_summary()
        return self._orbits

    def run_verify(self):
        cfg = self._cfg
        integrator = cfg.integrator_config()
        self._reports = []
        failures = []
        entries = []
        for eta, setup, search, _ in self._orbits:
            H_eta = self._nf.rescaled(eta, cfg.include_remainder)
            for index, solution in enumerate(search.solutions):
                report = verify_orbit(H_eta, solution, integrator,
                                      cfg.closure_tol)
                self._reports.append((eta, index, report))
                entries.append({"eta": eta, "T": setup.T, "index": index,
                                "report": report.to_dict()})
                if not report.passed:
                    failures.append(self._orbit_name(eta, setup.T, index))
        write_json(self._path("verify_report.json"),
                   self._with_config({"orbits": entries,
                                      "passed": not failures}))
        self._write_summary()
        if failures:
            raise ClosureFailedError(failures, cfg.closure_tol)
        return self._reports

    def _summary_rows(self):
        reports = {(eta, index): report
                   for eta, index, report in self._reports}
        rows = []
        for eta, setup, search, periods in self._orbits:
            for index, solution in enumerate(search.solutions):
                report = reports.get((eta, index))
                row = {"eta": eta, "T": setup.T, "index": index,
                       "kind": solution.kind,
                       "phi_star": " ".join("{:.12g}".format(x)
                                            for x in solution.phi_star),
                       "action": solution.action_value,
                       "closure_residual": solution.closure_residual,
                       "min_period_bound": periods[index].bound,
                       "degenerate": solution.degenerate}
                if report is not None:
                    row.update({"verify_closure": report.closure,
                                "energy_drift": report.energy_drift,
                                "torus_sup_I": report.torus_sup_I,
                                "torus_sup_z": report.torus_sup_z,
                                "phase_sup": report.phase_sup})
                rows.append(row)
        return rows

    def _write_summary(self):
        path = self._path("summary.csv")
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS,
                                    restval="")
            writer.writeheader()
            for row in self._summary_rows():
                writer.writerow(row)

    def run(self, stages=None):
        stages = expand_stages(self._cfg.stages if stages is None
                               else stages)
        logger.info("Running stages {}".format(", ".join(stages)))
        os.makedirs(self._cfg.out, exist_ok=True)
        self.load()
        for stage in stages:
            logger.debug("Stage {}".format(stage))
            getattr(self, "run_" + stage)()
        return self


def run_pipeline(cfg, stages=None):
    """Run the configured stages; exceptions carry the failing stage's
    diagnostics."""
    return Pipeline(cfg).run(stages)
