"""``tsekit`` command line.

Exit codes: 0 ok, 1 input error, 2 infeasible, 3 unreachable,
4 non-convergence, 5 singular.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .config import ConfigError, load_design, preset
from .core import ActuatorVector, DomainError, Pose
from .design import DEFAULT_FRACTIONS, WorkspaceGrid, parameter_sweep, workspace_volume
from .differential import (
    DegenerateDenominator,
    scissor_singularities,
    singularity_matrix,
    structural_singularity_ratio,
)
from .kinematics import (
    InfeasibleSolution,
    NoRealSolution,
    NonConvergence,
    SingularIteration,
    inverse_kinematics,
    forward_kinematics,
)
from .tables import ResultTable, fmt_number, write_xyz

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_UNREACHABLE, EXIT_NONCONVERGENCE, EXIT_SINGULAR = range(6)
SLIDES = ("s_A1", "s_B1", "s_A2", "s_B2", "s_A3", "s_B3")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; argparse would otherwise exit with 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _design(args):
    if args.config:
        return load_design(args.config)
    return preset(args.preset)


def _pose(args, prefix=""):
    g = lambda name: getattr(args, prefix + name)  # noqa: E731
    return Pose(
        (g("x"), g("y"), g("z")),
        roll=math.radians(g("roll")),
        pitch=math.radians(g("pitch")),
        yaw=math.radians(g("yaw")),
    )


def _emit(args, table: ResultTable):
    sys.stdout.write(table.render(args.format))


def _flag_text(flags) -> str:
    from .kinematics import FOLD_ANGLE, NEGATIVE, NO_REAL_SOLUTION, OUT_OF_STROKE

    names = [n for bit, n in ((NEGATIVE, "negative"), (OUT_OF_STROKE, "out_of_stroke"),
                              (NO_REAL_SOLUTION, "no_real_solution"), (FOLD_ANGLE, "fold_angle")) if flags & bit]
    return "|".join(names) if names else "ok"


def cmd_ik(args) -> int:
    design = _design(args)
    pose = _pose(args)
    try:
        sol = inverse_kinematics(design, pose)
    except NoRealSolution as exc:
        sol = exc.solution
        table = ResultTable(["slide", "displacement", "status"], ["", "m", ""])
        for name, f in zip(SLIDES, sol.flags):
            table.add(name, math.nan, _flag_text(f))
        _emit(args, table)
        print(f"unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    table = ResultTable(["slide", "displacement", "status"], ["", "m", ""])
    for name, s, f in zip(SLIDES, sol.actuators.values, sol.flags):
        table.add(name, s, _flag_text(f))
    _emit(args, table)
    return EXIT_OK if sol.is_feasible(check_fold_angle=not args.no_fold_check) else EXIT_INFEASIBLE


def cmd_fk(args) -> int:
    design = _design(args)
    q = ActuatorVector(tuple(args.q))
    seed = _pose(args, "seed_")
    try:
        pose = forward_kinematics(design, q, seed)
    except InfeasibleSolution as exc:
        print(f"infeasible input: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NoRealSolution as exc:
        print(f"unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except NonConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except SingularIteration as exc:
        print(f"singular: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    table = ResultTable(["x", "y", "z", "roll", "pitch", "yaw"], ["m", "m", "m", "deg", "deg", "deg"])
    table.add(*pose.position, math.degrees(pose.roll), math.degrees(pose.pitch), math.degrees(pose.yaw))
    _emit(args, table)
    return EXIT_OK


def _grid(args, L) -> WorkspaceGrid:
    if min(args.nr, args.nphi, args.nz) < 1:
        raise InputError("grid counts must be positive")
    zmin = 0.0 if args.zmin is None else args.zmin / L
    zmax = 1.0 if args.zmax is None else args.zmax / L
    rmax = 0.5 if args.rmax is None else args.rmax / L
    return WorkspaceGrid(
        n_r=args.nr,
        n_phi=args.nphi,
        n_z=args.nz,
        r_range=(0.0, rmax),
        z_range=(zmin, zmax),
        phi_offset=math.radians(args.phi_offset),
        roll=math.radians(args.roll),
        pitch=math.radians(args.pitch),
        yaw=math.radians(args.yaw),
    )


def cmd_workspace(args) -> int:
    design = _design(args)
    grid = _grid(args, design.L)
    res = workspace_volume(
        design, grid, check_stroke=not args.no_stroke_check, check_fold_angle=not args.no_fold_check
    )
    if args.out:
        try:
            write_xyz(args.out, res.valid_points)
        except OSError as exc:
            print(f"cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_INPUT
    table = ResultTable(["ws_fraction", "n_valid", "n_total"], ["", "", ""])
    table.add(res.fraction, res.n_valid, res.n_total)
    _emit(args, table)
    return EXIT_OK


def _parse_values(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--values must be a comma separated list of numbers, got {text!r}") from None
    if not vals:
        raise InputError("--values is empty")
    return vals


def cmd_sweep(args) -> int:
    design = _design(args)
    raw = _parse_values(args.values)
    values = [math.radians(v) for v in raw] if args.param == "k2" else raw
    grid = None if args.no_workspace else _grid(args, design.L)
    fractions = np.linspace(0.1, 0.9, args.nsamples) if args.nsamples else DEFAULT_FRACTIONS
    res = parameter_sweep(design, args.param, values, grid, fractions=fractions, definition=args.sigma)
    cols = ["param_value", "HAF", "ws_percent"] + [f"sigma_z@{f:.3f}" for f in res.fractions] + ["error"]
    units = ["deg" if args.param == "k2" else ""] + ["", ""] + [""] * len(res.fractions) + [""]
    table = ResultTable(cols, units)
    for v, row in zip(raw, res.rows):
        prof = row.sigma_z if row.sigma_z else [math.nan] * len(res.fractions)
        table.add(v, row.haf, row.ws, *prof, row.error)
    text = table.render(args.format)
    if args.out:
        try:
            with open(args.out, "w", newline="") as f:
                f.write(text)
        except OSError as exc:
            print(f"cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_singularity(args) -> int:
    design = _design(args)
    table = ResultTable(
        ["scissor", "a11", "a12", "a21", "a22", "det", "det_normalized", "critical_ratio", "design_ratio", "singular"],
        ["", "m", "m", "m", "m", "m^2", "", "", "", ""],
    )
    if args.local:
        s_A, s_B, *apex = args.local
        try:
            ratio = structural_singularity_ratio(design, s_A, s_B, apex)
        except DegenerateDenominator:
            ratio = None
        rows = [(1, singularity_matrix(design, s_A, s_B, apex), ratio)]
    else:
        pose = _pose(args)
        try:
            sol = inverse_kinematics(design, pose)
        except NoRealSolution as exc:
            print(f"unreachable: {exc}", file=sys.stderr)
            return EXIT_UNREACHABLE
        rows = [(i + 1, sm, r) for i, (sm, r) in enumerate(scissor_singularities(design, pose, sol.actuators))]
    any_singular = False
    for i, sm, ratio in rows:
        any_singular |= sm.is_singular
        table.add(
            i, sm.a11, sm.a12, sm.a21, sm.a22, sm.det, sm.normalized_det,
            math.nan if ratio is None else ratio, design.length_ratio_sq, sm.is_singular,
        )
    _emit(args, table)
    return EXIT_SINGULAR if any_singular else EXIT_OK


def _add_design_args(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="YAML design file")
    src.add_argument("--preset", default="prototype", help="bundled design (default: prototype)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_pose_args(p, prefix="", z_default=0.0, help_prefix=""):
    for name, unit in (("x", "m"), ("y", "m"), ("z", "m"), ("roll", "deg"), ("pitch", "deg"), ("yaw", "deg")):
        default = z_default if name == "z" else 0.0
        p.add_argument(f"--{prefix}{name}", type=float, default=default, help=f"{help_prefix}{name} [{unit}]")


def _add_grid_args(p):
    p.add_argument("--nr", type=int, default=25)
    p.add_argument("--nphi", type=int, default=60)
    p.add_argument("--nz", type=int, default=50)
    p.add_argument("--rmax", type=float, default=None, help="outer test radius [m] (default L/2)")
    p.add_argument("--zmin", type=float, default=None, help="lowest test height [m]")
    p.add_argument("--zmax", type=float, default=None, help="highest test height [m]")
    p.add_argument("--phi-offset", type=float, default=0.0, help="angular origin of the grid [deg]")
    p.add_argument("--no-stroke-check", action="store_true")
    p.add_argument("--no-fold-check", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tsekit", description="Triple Scissor Extender kinematics and design studies")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ik", help="inverse kinematics for one plate pose")
    _add_design_args(p)
    _add_pose_args(p)
    p.add_argument("--no-fold-check", action="store_true", help="ignore fold-angle stops for the exit code")
    p.set_defaults(func=cmd_ik)

    p = sub.add_parser("fk", help="forward kinematics from six slide displacements")
    _add_design_args(p)
    p.add_argument("--q", type=float, nargs=6, required=True, metavar="S", help="s_A1 s_B1 s_A2 s_B2 s_A3 s_B3 [m]")
    _add_pose_args(p, prefix="seed-", z_default=0.9, help_prefix="seed ")
    p.set_defaults(func=cmd_fk)

    p = sub.add_parser("workspace", help="workspace volume percentage and point cloud")
    _add_design_args(p)
    _add_grid_args(p)
    p.add_argument("--roll", type=float, default=0.0, help="plate roll [deg]")
    p.add_argument("--pitch", type=float, default=0.0, help="plate pitch [deg]")
    p.add_argument("--yaw", type=float, default=0.0, help="plate yaw [deg]")
    p.add_argument("--out", help="write valid points as XYZ text")
    p.set_defaults(func=cmd_workspace)

    p = sub.add_parser("sweep", help="one-parameter design sweep")
    _add_design_args(p)
    _add_grid_args(p)
    p.set_defaults(roll=0.0, pitch=0.0, yaw=0.0)
    p.add_argument("--param", choices=("k1", "k2", "k3", "k4"), required=True)
    p.add_argument("--values", required=True, help="comma separated values (k2 in degrees)")
    p.add_argument("--nsamples", type=int, default=0, help="number of matched heights (default 10)")
    p.add_argument("--sigma", choices=("gear", "svd"), default="gear", help="sigma_z definition")
    p.add_argument("--no-workspace", action="store_true", help="skip the workspace volume")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("singularity", help="per-scissor singularity matrix and critical length ratio")
    _add_design_args(p)
    _add_pose_args(p, z_default=0.9)
    p.add_argument("--local", type=float, nargs=5, metavar=("S_A", "S_B", "XC", "YC", "ZC"),
                   help="evaluate one scissor at slide/apex values in its local frame [m]")
    p.set_defaults(func=cmd_singularity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
