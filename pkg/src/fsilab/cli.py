"""Command-line entry points.

Subcommands map one-to-one onto the harness operations plus the invariant
batteries and a blending demonstration. Output lands under the directory
named by the FSILAB_OUTPUT_ROOT environment variable (default: current
directory); every command prints a small JSON record on stdout.

Exit codes: 0 success, 1 failed verification, 2 config error, 3 solver
error, 4 geometry error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import RigidState, rotation_exp
from .errors import ConfigError, FsilabError, GeometryError
from .geometry import disc
from .harness import load_config, run_simulation, run_viscosity_sweep, \
    run_weak_strong
from .testfns import BlendParams, CutoffRigidField, RadialPatchField, \
    RigidField, SumField, TestFunctionPair, blend_test_function, \
    validate_admissible
from .transforms import Cutoff
from .verify import verify

__all__ = ["main"]


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True, indent=2))


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    epsilon = cfg.epsilon_list[-1] if args.epsilon is None else args.epsilon
    run_dir = run_simulation(cfg, epsilon)
    _emit({"command": "simulate", "epsilon": float(epsilon),
           "run_dir": str(run_dir)})
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    sweep_dir = run_viscosity_sweep(cfg, parallel=not args.sequential)
    summary = json.loads((sweep_dir / "summary.json").read_text())
    _emit({"command": "sweep", "sweep_dir": str(sweep_dir),
           "partial": summary["partial"]})
    return 0


def _cmd_weak_strong(args) -> int:
    cfg_w = load_config(args.weak_config)
    cfg_s = load_config(args.strong_config)
    ws_dir = run_weak_strong(cfg_w, cfg_s)
    summary = json.loads((ws_dir / "summary.json").read_text())
    _emit({"command": "weak-strong", "dir": str(ws_dir),
           "gronwall": summary["gronwall"],
           "relative_energy_max": summary["relative_energy_max"]})
    return 0


def _cmd_verify(args) -> int:
    report = verify(args.battery)
    _emit(report)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0 if report["passed"] else 1


def _cmd_blend_demo(args) -> int:
    cfg = load_config(args.config)
    if cfg.scenario != "disc2d":
        raise ConfigError("blend-demo needs a disc2d config")
    radius = float(cfg.body["radius"])
    center = np.asarray(cfg.body["X0"], dtype=float)
    shape = disc(radius)
    bounds = cfg.bounds

    alpha = np.asarray(cfg.body.get("V0", [0.0, 0.0]), dtype=float)
    spin = float(cfg.body.get("omega0", 0.0))
    rigid = RigidField(alpha=alpha, spin=spin, center=center.copy())
    patch = RadialPatchField(center=center, radius=radius, z_power=2,
                             amp_tangent=0.4)
    phiF = SumField((CutoffRigidField(rigid, Cutoff(bounds, cfg.sigma)),
                     patch))
    pair = TestFunctionPair(phiF, rigid, True, True)

    delta = args.delta
    shift = delta ** 2 * np.array([0.6, -0.4])
    rb_eps = RigidState(dim=2, X=center + shift, V=alpha, omega=spin,
                        O=rotation_exp(1.0, 0.3, 2),
                        M=1.0, J=0.5 * radius ** 2)
    raw = validate_admissible(pair, shape, rb_eps, bounds, which="V")
    blended = blend_test_function(pair, rb_eps, BlendParams(delta), shape)
    eps_pair = TestFunctionPair(blended, pair.phiB, True, False)
    mended = validate_admissible(eps_pair, shape, rb_eps, bounds, which="V",
                                 tol_jump=1e-8)

    record = {
        "command": "blend-demo",
        "delta": delta,
        "jump_before": raw.max_normal_jump,
        "jump_after": mended.max_normal_jump,
        "wall_normal_after": mended.max_wall_normal,
        "passes_v_after": mended.passes_v,
    }
    _emit(record)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(record, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsilab",
                                description="coupled rigid-body/compressible-"
                                            "fluid laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configuration")
    sim.add_argument("config")
    sim.add_argument("--epsilon", type=float, default=None,
                     help="viscosity (default: smallest configured level)")
    sim.set_defaults(fn=_cmd_simulate)

    sw = sub.add_parser("sweep", help="run every viscosity level")
    sw.add_argument("config")
    sw.add_argument("--sequential", action="store_true",
                    help="disable the parallel task pool")
    sw.set_defaults(fn=_cmd_sweep)

    ws = sub.add_parser("weak-strong", help="compare a viscous run against "
                                            "an inviscid reference")
    ws.add_argument("weak_config")
    ws.add_argument("strong_config")
    ws.set_defaults(fn=_cmd_weak_strong)

    ver = sub.add_parser("verify", help="run an invariant battery")
    ver.add_argument("battery")
    ver.add_argument("--out", default=None, help="also write the report here")
    ver.set_defaults(fn=_cmd_verify)

    bd = sub.add_parser("blend-demo", help="blend a test-function pair "
                                           "around a perturbed pose")
    bd.add_argument("config")
    bd.add_argument("--delta", type=float, default=0.05)
    bd.add_argument("--out", default=None, help="also write the record here")
    bd.set_defaults(fn=_cmd_blend_demo)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}),
              file=sys.stderr)
        return 2
    except GeometryError as exc:
        print(json.dumps({"error": "GeometryError", "message": str(exc)}),
              file=sys.stderr)
        return 4
    except FsilabError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
