"""Command line entry point.

Subcommands: mesh, stage1, stage2, reconstruct (stages 1+2), gradcheck,
report.  Exit status 0 on success, 1 on usage errors, 2 on numerical
failures; errors land on stderr as one machine-parsable line.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from .checks import finite_difference_check
from .fem import SolveError
from .measurements import generate_measurements
from .mesh import save_mesh
from .scenario import build_scenario, parse_config, run_stage1, run_stage2

GRADCHECK_TOL = 1e-3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eitcem",
        description="Conductivity reconstruction from boundary electrode data")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "mesh": "generate the scenario mesh and export it",
        "stage1": "fit the boundary voltages for the applied current pattern",
        "stage2": "generate rotated measurements and run the reconstruction",
        "reconstruct": "run stage 1 and stage 2",
        "gradcheck": "finite-difference validation at a random feasible point",
        "report": "summarize metrics from an output directory",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        if name != "report":
            p.add_argument("--config", required=True, help="scenario INI file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--rotations", type=int, default=None,
                       help="override the number of voltage rotations")
        p.add_argument("--beta", type=float, default=None,
                       help="override the regularization weight")
        p.add_argument("--seed", type=int, default=0,
                       help="RNG seed (gradcheck perturbations only)")
        p.add_argument("--threads", type=int, default=1,
                       help="within-iteration solve parallelism bound "
                            "(solves are batched; results do not depend on it)")
    return parser


def _load_scenario(args):
    cfg = parse_config(args.config)
    if args.rotations is not None:
        cfg.gpm.rotations = args.rotations
    if args.beta is not None:
        cfg.gpm.beta = args.beta
    if args.threads < 1:
        raise ValueError("--threads must be >= 1")
    return build_scenario(cfg)


def _require_out(args) -> Path:
    if args.out is None:
        raise ValueError(f"{args.command} requires --out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_mesh(args) -> int:
    scenario = _load_scenario(args)
    out = _require_out(args)
    save_mesh(out / "mesh.txt", scenario.mesh, scenario.layout)
    print(f"mesh: {scenario.mesh.node_count} nodes, "
          f"{scenario.mesh.element_count} elements -> {out / 'mesh.txt'}")
    return 0


def _save_stage1(out: Path, stage1) -> None:
    np.savetxt(out / "u_star.txt", stage1.u_star, fmt="%.17g")
    with open(out / "stage1.json", "w") as fh:
        json.dump({"residual_norm": stage1.fit.residual_norm,
                   "rank_deficient": stage1.fit.rank_deficient}, fh, indent=2)
        fh.write("\n")


def _cmd_stage1(args) -> int:
    scenario = _load_scenario(args)
    out = _require_out(args)
    stage1 = run_stage1(scenario)
    _save_stage1(out, stage1)
    print(f"stage1: residual {stage1.fit.residual_norm:.3e} -> {out / 'u_star.txt'}")
    return 0


def _cmd_stage2(args) -> int:
    scenario = _load_scenario(args)
    out = _require_out(args)
    star_path = out / "u_star.txt"
    if star_path.exists():
        u_star = np.loadtxt(star_path)
    else:
        stage1 = run_stage1(scenario)
        _save_stage1(out, stage1)
        u_star = stage1.u_star
    result, _ = run_stage2(scenario, u_star, out_dir=out)
    print(f"stage2: {result.state.n} iterations, cost {result.state.cost.total:.6e}")
    return 0


def _cmd_reconstruct(args) -> int:
    scenario = _load_scenario(args)
    out = _require_out(args)
    stage1 = run_stage1(scenario)
    _save_stage1(out, stage1)
    result, _ = run_stage2(scenario, stage1.u_star, out_dir=out)
    with open(out / "metrics.json") as fh:
        metrics = json.load(fh)
    print(f"reconstruct: cost {metrics['final_cost']:.6e}, "
          f"voltage err {metrics['voltage_rel_error']:.4f}, "
          f"sigma err {metrics['sigma_rel_error']:.4f}, "
          f"{metrics['iterations']} iterations")
    return 0


def _cmd_gradcheck(args) -> int:
    scenario = _load_scenario(args)
    stage1 = run_stage1(scenario)
    system = scenario.workspace.assemble(scenario.sigma_true)
    meas = generate_measurements(system, stage1.u_star)
    rng = np.random.default_rng(args.seed)
    rotations = scenario.config.gpm.rotations
    beta = scenario.config.gpm.beta
    worst = finite_difference_check(scenario, meas, rng, n_points=3,
                                    beta=beta, rotations=rotations)
    print(f"gradcheck: max relative finite-difference error {worst:.3e}")
    return 0 if worst <= GRADCHECK_TOL else 2


def _cmd_report(args) -> int:
    out = _require_out(args)
    path = out / "metrics.json"
    if not path.exists():
        raise ValueError(f"no metrics.json under {out}")
    with open(path) as fh:
        metrics = json.load(fh)
    for key in ("final_cost", "voltage_rel_error", "sigma_rel_error",
                "iterations", "wall_time_s"):
        print(f"{key}: {metrics[key]}")
    return 0


_COMMANDS = {
    "mesh": _cmd_mesh,
    "stage1": _cmd_stage1,
    "stage2": _cmd_stage2,
    "reconstruct": _cmd_reconstruct,
    "gradcheck": _cmd_gradcheck,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except (SolveError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical_error: {_one_line(exc)}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, configparser.Error) as exc:
        print(f"usage_error: {_one_line(exc)}", file=sys.stderr)
        return 1


def _one_line(exc) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
