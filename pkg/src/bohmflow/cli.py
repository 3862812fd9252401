"""Command-line entry point: ``bohmflow <command> SCENARIO [options]``.

Exit codes: 0 success, 1 a test or embedded expectation failed, 2 bad
configuration, 3 integration halted (node or non-finite state),
4 inconclusive statistics (edge loss), 5 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import scenario as scn
from .dynamics import IntegratorConfig, PacketFamily, classical_limit_study, integrate
from .errors import (ConfigurationError, EnvelopeTooLoose, InconclusiveDomain, IntegrationError,
                     NodeProximity, ScenarioError)
from .invariants import run_invariant_suite
from .nonrel import ConditionalWaveFunction, ScaledModeFamily, nr_integrate, nr_limit_study
from .stats import (ALPHA, _threads, compare_ensembles, equivariance_test, frame_independence_test,
                    sample_equilibrium)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_HALTED, EXIT_INCONCLUSIVE, EXIT_IO = 0, 1, 2, 3, 4, 5


class CommandFailed(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# -- output helpers --------------------------------------------------------------

def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def atomic_write(path: Path, text: str):
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


def csv_text(rows):
    return "".join(",".join(r) + "\n" for r in rows)


def manifest(command, sc, outputs, wall):
    return {
        "command": command,
        "scenario": sc.name,
        "scenario_sha256": sc.digest(),
        "seed": sc.seed,
        "threads": _threads(),
        "versions": {"bohmflow": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": wall,
        "outputs": sorted(outputs),
    }


# -- commands --------------------------------------------------------------------

def _close(a, b, tol):
    return bool(np.all(np.abs(np.asarray(a, float) - np.asarray(b, float)) <= tol))


def cmd_simulate(sc, args):
    if sc.initial is None:
        raise ScenarioError("simulate needs initial positions", field="initial")
    name = sc.outputs.get("trajectory", "trajectory.csv")
    if sc.kind == "relativistic":
        rec = integrate(sc.wavefunction, sc.field, sc.initial, sc.integrator)
    else:
        rec = nr_integrate(ConditionalWaveFunction(sc.wavefunction, sc.offsets), sc.initial, sc.integrator)
    files = {name: csv_text(rec.csv_rows())}
    if rec.halted:
        return files, None, CommandFailed(f"integration halted: {rec.halt_reason}", EXIT_HALTED)
    exp = sc.expect
    tol = exp.get("tol", 1e-10)
    problems = []
    if "final_position" in exp and not _close(rec.positions[-1], exp["final_position"], tol):
        problems.append(f"final position {rec.positions[-1].tolist()} != {exp['final_position']}")
    if "final_tau" in exp and not _close(rec.tau[-1], exp["final_tau"], tol):
        problems.append(f"final tau {rec.tau[-1].tolist()} != {exp['final_tau']}")
    if problems:
        return files, None, CommandFailed("; ".join(problems), EXIT_FAILED)
    return files, None, None


def _need_box(sc):
    if sc.box is None:
        raise ScenarioError("this command needs a sampling box", field="sampler.box")
    return sc.box


def _expect_passed(sc, report):
    if not report["passed"]:
        return CommandFailed(f"{report['test']} test failed", EXIT_FAILED)
    if "passed" in sc.expect and report["passed"] != sc.expect["passed"]:
        return CommandFailed("report disagrees with embedded expectation", EXIT_FAILED)
    return None


def cmd_sample(sc, args):
    box = _need_box(sc)
    s = sc.sampler
    n = int(s.get("n", 1000))
    method = s.get("method", "rejection")
    ens = sample_equilibrium(sc.wavefunction, box, n, sc.seed, method)
    ref = sample_equilibrium(sc.wavefunction, box, 4 * n, sc.seed + 1, method)
    ks, crit, chi2, p = compare_ensembles(ens.samples, ref.samples, box)
    report = {"test": "sample", "n": n, "seed": sc.seed, "method": method, "edge_loss": 0.0,
              "statistic": max(r["statistic"] for r in ks), "critical": crit, "ks": ks,
              "chi2": chi2, "chi2_pvalue": p,
              "passed": bool(all(r["passed"] for r in ks) and p > ALPHA)}
    files = {sc.outputs.get("ensemble", "ensemble.csv"): csv_text(ens.csv_rows()),
             sc.outputs.get("report", "sample_report.json"): dumps(report)}
    return files, report, _expect_passed(sc, report)


def cmd_equivariance(sc, args):
    box = _need_box(sc)
    s = sc.sampler
    scale = args.corrupt_velocities if args.corrupt_velocities is not None else s.get("spatial_scale", 1.0)
    report = equivariance_test(sc.wavefunction, sc.field, box, n=int(s.get("n", 5000)),
                               sigma_span=float(s.get("sigma_span", 1.0)), n_steps=int(s.get("n_steps", 50)),
                               seed=sc.seed, method=s.get("method", "rejection"), spatial_scale=float(scale))
    files = {sc.outputs.get("report", "equivariance_report.json"): dumps(report)}
    return files, report, _expect_passed(sc, report)


def cmd_frames(sc, args):
    box = _need_box(sc)
    s = sc.sampler
    report = frame_independence_test(sc.wavefunction, box, float(s.get("beta", 0.5)),
                                     n=int(s.get("n", 100_000)), seed=sc.seed, axis=int(s.get("axis", 0)))
    files = {sc.outputs.get("report", "frames_report.json"): dumps(report)}
    return files, report, _expect_passed(sc, report)


def _in_band(x, band):
    return x is not None and band[0] <= x <= band[1]


def cmd_limits(sc, args):
    mode = args.mode or sc.raw.get("mode")
    if mode not in ("classical", "nonrelativistic"):
        raise ScenarioError("limits needs --mode classical|nonrelativistic", field="mode")
    spec = sc.limits.get(mode)
    if spec is None:
        raise ScenarioError(f"no '{mode}' limit study in scenario", field=f"limits.{mode}")
    band = spec.get("exponent_range", [1.7, 2.3])
    p0 = sc.particles[0]
    if mode == "classical":
        scan = spec.get("hbar_values", [])
        if not scan:
            raise ConfigurationError("limits.classical.hbar_values is empty")
        fam = PacketFamily(float(spec.get("momentum", 0.5)), float(spec.get("width", 2.0)),
                           int(spec.get("n_modes", 41)), p0.mass, sc.constants.c)
        cfg = IntegratorConfig(float(spec.get("d_sigma", 0.01)), int(spec.get("n_steps", 500)))
        report = classical_limit_study(fam, scan, cfg)
        passed = all(report["monotone"].values()) and _in_band(report.get("q_exponent"), band)
        stat = report.get("q_exponent")
    else:
        scan = spec.get("v_over_c", [])
        if not scan:
            raise ConfigurationError("limits.nonrelativistic.v_over_c is empty")
        fam = ScaledModeFamily(tuple(spec.get("kappas", (1.0, 2.0))), tuple(spec.get("coefficients", (1.0, 0.5))),
                               p0.mass, sc.constants.hbar, sc.constants.c, float(spec.get("span", 4.0)),
                               int(spec.get("n_steps", 2000)), float(spec.get("x0", 0.3)))
        report = nr_limit_study(fam, scan)
        passed = (_in_band(report.get("scaling_exponent"), band) and _in_band(report.get("dT_exponent"), band)
                  and not any(r["halted"] for r in report["scan"]))
        stat = report.get("scaling_exponent")
    report.update({"test": f"{mode}_limit", "mode": mode, "exponent_range": band, "passed": bool(passed),
                   "statistic": stat, "critical": band, "n": len(scan), "seed": sc.seed, "edge_loss": 0.0})
    files = {sc.outputs.get("report", f"limits_{mode}.json"): dumps(report)}
    return files, report, _expect_passed(sc, report)


def cmd_verify(sc, args):
    report = run_invariant_suite(sc)
    worst = max(c["value"] / c["tolerance"] if c["tolerance"] > 0 else float("inf") for c in report["checks"])
    report.update({"statistic": worst, "critical": 1.0, "n": len(report["checks"]), "seed": sc.seed,
                   "edge_loss": 0.0})
    files = {sc.outputs.get("report", "verify_report.json"): dumps(report)}
    return files, report, _expect_passed(sc, report)


COMMANDS = {"simulate": cmd_simulate, "sample": cmd_sample, "equivariance": cmd_equivariance,
            "frames": cmd_frames, "limits": cmd_limits, "verify": cmd_verify}


# -- driver ----------------------------------------------------------------------

def resolve_scenario(arg):
    p = Path(arg)
    if p.exists():
        return p
    try:
        return scn.bundled(arg)
    except ConfigurationError:
        raise FileNotFoundError(f"scenario file not found: {arg}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario JSON path or bundled scenario name")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-path scenario override, e.g. integrator.d_sigma=0.005")
    p = argparse.ArgumentParser(prog="bohmflow", description="Relativistic Bohmian trajectory toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "equivariance":
            sp.add_argument("--corrupt-velocities", type=float, default=None, metavar="FACTOR",
                            help="scale spatial guide velocities to check the test's power")
        if name == "limits":
            sp.add_argument("--mode", choices=["classical", "nonrelativistic"], default=None)
    sub.add_parser("list", help="list bundled scenarios")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for p in scn.bundled():
            print(p.stem)
        return EXIT_OK
    t0 = time.perf_counter()
    try:
        raw = scn.load_raw(resolve_scenario(args.scenario))
        raw = scn.apply_overrides(raw, args.override)
        if args.seed is not None:
            raw["seed"] = args.seed
        sc = scn.parse(raw)
        files, report, failure = COMMANDS[args.command](sc, args)
    except (ConfigurationError, EnvelopeTooLoose) as exc:
        print(f"bohmflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NodeProximity, IntegrationError) as exc:
        print(f"bohmflow: integration error: {exc}", file=sys.stderr)
        return EXIT_HALTED
    except InconclusiveDomain as exc:
        print(f"bohmflow: inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except OSError as exc:
        print(f"bohmflow: {exc}", file=sys.stderr)
        return EXIT_IO
    out = Path(args.out_dir)
    wall = time.perf_counter() - t0
    try:
        for name, text in files.items():
            atomic_write(out / name, text)
        atomic_write(out / f"{args.command}_manifest.json",
                     dumps(manifest(args.command, sc, list(files), wall)))
    except OSError as exc:
        print(f"bohmflow: {exc}", file=sys.stderr)
        return EXIT_IO
    if report is not None:
        print(json.dumps({k: report.get(k) for k in ("test", "statistic", "critical", "passed", "n",
                                                    "seed", "edge_loss")}, default=_json_default))
    if failure is not None:
        print(f"bohmflow: {failure}", file=sys.stderr)
        return failure.code
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
