"""Command-line front end.

Exit status: 0 on success, 1 on a computation error, 2 on a configuration
error.  Every artifact is written atomically (temporary file, then rename).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .action import PerturbationSpec, action_integral, paper_action, stationarity_test
from .config import ConfigError, RunConfig, load_config
from .euler_lagrange import (
    derive_eom,
    eom_document,
    generalized_hamiltonian,
    ostrogradsky_momenta,
)
from .integrate import IntegratorSpec, conservation_report, integrate_eom
from .jet import format_float
from .lagrangian import QuadraticLagrangian, energy_ranks
from .potentials import newtonian_comparison, orbit_simulate

SUBCOMMANDS = (
    "derive-eom",
    "simulate",
    "momenta",
    "energy",
    "action-check",
    "potential-table",
    "orbit",
    "selftest",
)


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    # repr-based float output is the shortest exact round-trip form
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


class Run:
    def __init__(self, cfg: RunConfig, jobs: int = 1, quiet: bool = False):
        self.cfg = cfg
        self.jobs = max(1, jobs)
        self.quiet = quiet
        self.outdir, self.prefix = cfg.output()
        self.written: list[Path] = []

    def emit(self, suffix: str, text: str) -> None:
        self.written.append(write_atomic(self.outdir / f"{self.prefix}_{suffix}", text))

    def say(self, text: str) -> None:
        if not self.quiet:
            print(text)

    def _initial(self, L, order: int):
        """Initial jet, completed through the EOM up to ``order`` if needed."""
        jet = self.cfg.initial_jet(L.dim)
        if jet.M >= order:
            return jet
        sys_ = derive_eom(L)
        return sys_.extend(jet, max(order, 2 * sys_.order))

    # ---------------------------------------------------------- subcommands

    def derive_eom(self) -> None:
        L = self.cfg.lagrangian()
        doc = eom_document(L)
        self.emit("eom.json", dumps(doc))
        self.say(f"order {doc['order']}")
        self.say(f"eom: {doc['eom']} = 0")
        self.say(f"H  = {doc['hamiltonian']}")

    def simulate(self) -> None:
        L = self.cfg.lagrangian()
        sys_ = derive_eom(L)
        t0, t1 = self.cfg.tspan()
        jet_order = self.cfg.section("integrator").get("jetOrder")
        traj = integrate_eom(sys_, self.cfg.initial_jet(L.dim), t1, self.cfg.integrator(), jet_order)
        rep = conservation_report(traj, L, "standard")
        self.emit("trajectory.csv", traj.to_csv())
        summary = {
            "steps": traj.metadata["steps"],
            "rejects": traj.metadata["rejects"],
            "drift": rep.max_drift,
            "samples": len(traj),
            "hamiltonian0": rep.initial,
        }
        self.emit("summary.json", dumps(summary))
        self.say(f"{len(traj)} samples, {summary['steps']} steps, H drift {rep.max_drift:.3e}")

    def momenta(self) -> None:
        L = self.cfg.lagrangian()
        jet = self._initial(L, 2 * L.order)
        doc = {
            "order": L.order,
            "t": jet.t,
            "standard": ostrogradsky_momenta(L, jet, "standard").values,
            "paper": ostrogradsky_momenta(L, jet, "paper").values,
        }
        self.emit("momenta.json", dumps(doc))
        self.say(dumps(doc).strip())

    def energy(self) -> None:
        L = self.cfg.lagrangian()
        jet = self._initial(L, 2 * L.order)
        doc = {
            "order": L.order,
            "hamiltonianStandard": generalized_hamiltonian(L, jet, "standard"),
            "hamiltonianPaper": generalized_hamiltonian(L, jet, "paper"),
        }
        if isinstance(L, QuadraticLagrangian):
            er = energy_ranks(L, jet)
            doc["ranks"] = er.ranks
            doc["total"] = er.total
        self.emit("energy.json", dumps(doc))
        self.say(dumps(doc).strip())

    def action_check(self) -> None:
        L = self.cfg.lagrangian()
        sys_ = derive_eom(L)
        t0, t1 = self.cfg.tspan()
        a = self.cfg.section("action")
        samples = int(a.get("samples", 2001))
        spec = IntegratorSpec("rk4", step=(t1 - t0) / (samples - 1))
        traj = integrate_eom(sys_, self.cfg.initial_jet(L.dim), t1, spec)
        pert = PerturbationSpec(m=a.get("m"), component=int(a.get("component", 0)))
        eps = a.get("epsSweep")
        rep = stationarity_test(L, traj, pert, eps, float(a.get("residualThreshold", 1e-6)))
        doc = rep.as_dict()
        doc["paperAction"] = paper_action(L, traj[0])
        doc["actionIntegral"] = action_integral(L, traj)
        self.emit("action.json", dumps(doc))
        self.say(f"S = {rep.S!r}, slope = {rep.slope:.4f}, valid = {rep.valid}")

    def potential_table(self) -> None:
        p = self.cfg.potential()
        rows = newtonian_comparison(p, self.cfg.radii())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "phi_model", "phi_newton", "force_model", "force_newton", "ratio", "regime"])
        for row in rows:
            w.writerow(
                [format_float(v) for v in (row.r, row.phi_model, row.phi_newton, row.force_model,
                                           row.force_newton, row.ratio)] + [row.regime]
            )
        self.emit("potential.csv", buf.getvalue())
        self.say(f"{len(rows)} radii, model {p.describe()}")

    def orbit(self) -> None:
        p = self.cfg.potential()
        o = self.cfg.section("orbit")
        init = list(o.get("position", [1.0, 0.0])) + list(o.get("velocity", [0.0, 1.0]))
        if len(init) != 4:
            raise ConfigError("position and velocity must each have two components", "orbit")
        res = orbit_simulate(p, init, float(o.get("t1", 2 * math.pi)), self.cfg.integrator())
        self.emit("orbit.csv", res.trajectory.to_csv())
        stats = res.stats.as_dict()
        stats["model"] = p.describe()
        self.emit("orbit.json", dumps(stats))
        self.say(f"periapsis advance per orbit {res.stats.advance_per_orbit:.6e} rad")

    def selftest(self) -> int:
        from .selftest import CHECKS, run_check

        names = list(CHECKS)
        seeds = [self.cfg.seed] * len(names)
        if self.jobs > 1:
            with ProcessPoolExecutor(self.jobs) as pool:
                results = list(pool.map(run_check, names, seeds))
        else:
            results = [run_check(n, s) for n, s in zip(names, seeds)]
        for r in results:
            self.say(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: {r['detail']}")
        ok = all(r["passed"] for r in results)
        self.emit("selftest.json", dumps({"passed": ok, "checks": results, "seed": self.cfg.seed}))
        return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hodyn",
        description="Higher-order Lagrangian mechanics and modified gravitational potentials.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=SUBCOMMANDS, help="subcommand to run")
    parser.add_argument("-c", "--config", help="JSON configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry by dotted path, e.g. integrator.relTol=1e-10")
    parser.add_argument("-o", "--output-dir", help="directory for artifacts (overrides output.dir)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for independent checks")
    parser.add_argument("-q", "--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.output_dir:
        overrides.append(f"output.dir={json.dumps(args.output_dir)}")
    try:
        cfg = load_config(args.config, overrides)
        run = Run(cfg, args.jobs, args.quiet)
        status = getattr(run, args.command.replace("-", "_"))()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, ValueError, RuntimeError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return int(status or 0)


if __name__ == "__main__":
    sys.exit(main())
