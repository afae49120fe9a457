"""Command-line front end: ``hybrid-lipm {synth,simulate,basin,walk2d}``.

Exit codes: 0 success, 1 domain failure (infeasible, diverged, incomplete),
2 usage or configuration error. Failures also write ``error.json`` to the
output directory and print it on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .basin import estimate_basin
from .config import RunConfig, load_config
from .controller import ControllerConfig
from .exceptions import ConfigError, HybridLipmError, Infeasible, InfeasibleGait, SolverFailure
from .simulation import Status, check_monotonicity, simulate
from .synthesis import GainCertificate, SynthesisProblem, synthesize, verify
from .walk import run_fixed_timing, run_walk

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class CliFailure(Exception):
    def __init__(self, code, reason, message, extra=None):
        super().__init__(message)
        self.code, self.reason, self.extra = code, reason, extra or {}


def _problem(cfg: RunConfig) -> SynthesisProblem:
    s = cfg.section("synthesis")
    return SynthesisProblem(cfg.model, alpha=s["alpha"], strictness_margin=s["strictness_margin"])


def _certificate(args, cfg: RunConfig) -> GainCertificate:
    """Load ``--cert`` (checked against the model) or synthesize from ``[synthesis]``."""
    p = cfg.model
    if args.cert is None:
        return synthesize(_problem(cfg))
    try:
        cert = GainCertificate.from_json(args.cert)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise CliFailure(EXIT_USAGE, "bad_certificate", f"cannot read certificate {args.cert}: {exc}")
    if cert.model:
        # the gains depend on omega and T only, so r_bar may differ
        omega = math.sqrt(float(cert.model.get("g", 9.81)) / float(cert.model["z_c"]))
        T = float(cert.model["T"])
        if not (math.isclose(omega, p.omega, rel_tol=1e-9) and math.isclose(T, p.T, rel_tol=1e-9)):
            raise CliFailure(EXIT_USAGE, "certificate_mismatch",
                             f"certificate was synthesized for omega={omega:.6g}, T={T:.6g}; "
                             f"config has omega={p.omega:.6g}, T={p.T:.6g}")
    return cert


def cmd_synth(args, cfg: RunConfig, out: Path) -> int:
    cfg.require("model")
    cert = synthesize(_problem(cfg))
    report = verify(cfg.model, cert)
    cert.to_json(out / "certificate.json")
    io.write_json(out / "report.json", report.to_dict())
    print(f"K = {np.array2string(cert.K, precision=6)}  L = {cert.L:.6g}  "
          f"verify: {'pass' if report.passed else 'FAIL ' + ','.join(report.failed)}")
    if not report.passed:
        raise CliFailure(EXIT_DOMAIN, "verification_failed", "certificate failed verification",
                         {"failed": report.failed})
    return EXIT_OK


def cmd_simulate(args, cfg: RunConfig, out: Path) -> int:
    cfg.require("model", "sim")
    p = cfg.model
    s = cfg.section("sim")
    cert = _certificate(args, cfg)
    ctl = ControllerConfig.from_certificate(cert, p.u_bar)
    opts = cfg.sim_options()
    traj = simulate(p, ctl, (s["x0_p"], s["x0_v"]), s["tau0"], horizon=s["horizon"], opts=opts,
                    lyap=(cert.P, cert.alpha))
    mono = check_monotonicity(traj, cert.P, cert.alpha, p)
    io.write_trajectory(out / "trajectory.csv", traj)
    err = traj.final_error_norm
    ok = traj.status is Status.CONVERGED or (
        traj.status is Status.HORIZON_REACHED and err < opts.conv_tol)
    summary = {"status": traj.status.value, "diverging": not ok and traj.status is Status.HORIZON_REACHED,
               "final_error_norm": err, "jumps": len(traj.jumps), "final_time": float(traj.t[-1]),
               "max_abs_u": float(np.max(np.abs(traj.u))), "lyapunov": mono.to_dict()}
    io.write_json(out / "summary.json", summary)
    print(f"status {traj.status.value}, |eps| = {err:.3e}, {len(traj.jumps)} jumps, "
          f"Lyapunov check {'pass' if mono.passed else 'fail'}")
    if not ok:
        raise CliFailure(EXIT_DOMAIN, traj.status.value, "run did not converge", summary)
    return EXIT_OK


def cmd_basin(args, cfg: RunConfig, out: Path) -> int:
    cfg.require("model")
    p = cfg.model
    cert = _certificate(args, cfg)
    ctl = ControllerConfig.from_certificate(cert, p.u_bar)
    b = cfg.section("basin")
    t0 = time.perf_counter()
    grid = estimate_basin(p, ctl, cert, cfg.basin_spec(), opts=cfg.sim_options(),
                          horizon=b["horizon"], threads=args.threads, chunks=b["chunks"])
    report = grid.nesting_report()
    report["tau0"] = grid.tau0
    report["seconds"] = round(time.perf_counter() - t0, 3)
    io.write_basin(out / "basin.csv", grid)
    io.write_json(out / "nesting.json", report)
    print(f"{report['cells']} cells: ellipsoid {report['in_ellipsoid']}, "
          f"Lyapunov-decreasing {report['lyap_decreasing']}, converging {report['converging']}; "
          f"nesting violations {report['violations']}")
    return EXIT_OK


def cmd_walk2d(args, cfg: RunConfig, out: Path) -> int:
    cfg.require("model", "walk")
    p = cfg.model
    w = cfg.walk()
    mpc = cfg.mpc_config()
    common = dict(tau0=w["tau0"], stance=w["stance"], n_steps=w["n_steps"],
                  p_z_max=w["p_z_max"], dt=w["dt"], max_time=w["max_time"])
    x0, y0 = (w["x0_p"], w["x0_v"]), (w["y0_p"], w["y0_v"])
    if args.baseline == "fixed-timing":
        res = run_fixed_timing(p, mpc, x0, y0, **common)
    else:
        cert = _certificate(args, cfg)
        ctl = ControllerConfig.from_certificate(cert, p.u_bar)
        res = run_walk(p, ctl, mpc, x0, y0, lyap=(cert.P, cert.alpha), **common)
    io.write_csv(out / "longitudinal.csv", "trajectory", res.longitudinal)
    io.write_csv(out / "lateral.csv", "lateral", res.lateral)
    io.write_csv(out / "swing.csv", "swing", res.swing)
    io.write_csv(out / "gait_events.csv", "gait_events", res.gait_events)
    io.write_json(out / "summary.json", res.summary)
    durs = ", ".join(f"{d:.4f}" for d in res.summary["step_durations"])
    print(f"{res.status}: {res.summary['steps_completed']} steps [{durs}] s")
    if not res.ok:
        raise CliFailure(EXIT_DOMAIN, res.status, "walking run failed", res.summary)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "simulate": cmd_simulate, "basin": cmd_basin,
            "walk2d": cmd_walk2d}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybrid-lipm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("synth", "synthesize and verify feedback gains"),
                        ("simulate", "simulate one closed-loop solution"),
                        ("basin", "classify a grid of initial errors"),
                        ("walk2d", "sagittal + lateral walking pipeline")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="INI run configuration")
        sp.add_argument("--out", default=".", help="output directory (created if needed)")
        sp.add_argument("--seed", type=int, default=None, help="reserved; runs are deterministic")
        if name != "synth":
            sp.add_argument("--cert", default=None,
                            help="certificate JSON from `synth` (default: synthesize from config)")
        if name == "basin":
            sp.add_argument("--threads", type=int, default=1, help="worker processes")
        if name == "walk2d":
            sp.add_argument("--baseline", choices=["fixed-timing"], default=None,
                            help="run the clock-timed MPC baseline instead")
    return parser


def _fail(out: Path | None, code, reason, message, extra=None) -> int:
    doc = {"error": reason, "message": message, "exit_code": code}
    if extra:
        doc["details"] = extra
    text = json.dumps(doc, sort_keys=True, default=io._json_default)
    print(text, file=sys.stderr)
    if out is not None and out.is_dir():
        (out / "error.json").write_text(text + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _fail(None, EXIT_USAGE, "bad_output_dir", str(exc))
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg, out)
    except CliFailure as exc:
        return _fail(out, exc.code, exc.reason, str(exc), exc.extra)
    except ConfigError as exc:
        return _fail(out, EXIT_USAGE, "config_error", str(exc))
    except Infeasible as exc:
        return _fail(out, EXIT_DOMAIN, "infeasible", str(exc), {"best_margin": exc.best_margin})
    except InfeasibleGait as exc:
        return _fail(out, EXIT_DOMAIN, "infeasible_gait", str(exc))
    except SolverFailure as exc:
        return _fail(out, EXIT_DOMAIN, "solver_failure", str(exc), exc.diagnostics)
    except HybridLipmError as exc:
        return _fail(out, EXIT_DOMAIN, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
