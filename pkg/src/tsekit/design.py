"""Design-space studies: dimensionless constraints, workspace volume,
height amplification and one-at-a-time parameter sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import ActuatorVector, Pose, TseDesign, rotation_rpy
from .differential import DegenerateInverseJacobian, ScissorSingular, jacobian_analysis
from .kinematics import NO_REAL_SOLUTION, NEGATIVE, inverse_kinematics_batch

HAF_SPREAD_TOL = 0.02
DEFAULT_FRACTIONS = tuple(np.linspace(0.1, 0.9, 10))
PARAMETERS = ("k1", "k2", "k3", "k4")
BASELINES = {"k1": 1.0, "k2": 0.0}


class NonConstantRatio(ValueError):
    def __init__(self, message, ratios):
        super().__init__(message)
        self.ratios = ratios


@dataclass(frozen=True)
class NdConfiguration:
    """Slides and apex divided by ``L``.

    ``y_hat`` is measured from the base centre along the scissor's outward
    axis, so the scissor-local apex y-coordinate is ``(y_hat - k3) * L``.
    """

    x_hat: float
    y_hat: float
    z_hat: float
    S_A: float
    S_B: float
    k1: float
    k2: float
    k3: float
    k4: float

    @classmethod
    def from_dimensional(cls, design: TseDesign, s_A, s_B, apex_local) -> "NdConfiguration":
        L = design.L
        x, y, z = (float(v) for v in apex_local)
        return cls(
            x_hat=x / L,
            y_hat=y / L + design.k3,
            z_hat=z / L,
            S_A=s_A / L,
            S_B=s_B / L,
            k1=design.k1,
            k2=design.k2,
            k3=design.k3,
            k4=design.k4,
        )

    def to_dimensional(self, L: float):
        """``(s_A, s_B, apex_local)`` for total scissor length ``L``."""
        apex = np.array([self.x_hat * L, (self.y_hat - self.k3) * L, self.z_hat * L])
        return self.S_A * L, self.S_B * L, apex


def nd_constraint_residuals(nd: NdConfiguration) -> np.ndarray:
    c, s, c2 = math.cos(nd.k2), math.sin(nd.k2), math.cos(2.0 * nd.k2)
    SA, SB, x, y, z, k3 = nd.S_A, nd.S_B, nd.x_hat, nd.y_hat, nd.z_hat, nd.k3
    lhs1 = SA**2 - 2 * x * SA * c + 2 * (k3 - y) * SA * s
    rhs1 = SB**2 + 2 * x * SB * c + 2 * (k3 - y) * SB * s
    lhs2 = SA**2 + 2 * (k3 - y) * SA * s + k3**2 - 2 * y * k3 + x**2 + y**2 + z**2
    rhs2 = 1 + 2 * x * SA * c + 0.25 * (1 - (1 / nd.k1) ** 2) * (SA**2 + SB**2 + 2 * SA * SB * c2)
    return np.array([lhs1 - rhs1, lhs2 - rhs2])


@dataclass(frozen=True)
class WorkspaceGrid:
    """Cylindrical test points; radial and height ranges are fractions of ``L``."""

    n_r: int = 25
    n_phi: int = 60
    n_z: int = 50
    r_range: tuple[float, float] = (0.0, 0.5)
    z_range: tuple[float, float] = (0.0, 1.0)
    phi_offset: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        if min(self.n_r, self.n_phi, self.n_z) < 1:
            raise ValueError("grid counts must be positive")

    @property
    def size(self) -> int:
        return self.n_r * self.n_phi * self.n_z

    def points(self, L: float) -> np.ndarray:
        r = np.linspace(self.r_range[0], self.r_range[1], self.n_r) * L
        phi = self.phi_offset + 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        z = np.linspace(self.z_range[0], self.z_range[1], self.n_z) * L
        R, P, Z = np.meshgrid(r, phi, z, indexing="ij")
        return np.stack([R * np.cos(P), R * np.sin(P), Z], axis=-1).reshape(-1, 3)

    @property
    def rotation(self) -> np.ndarray:
        return rotation_rpy(self.roll, self.pitch, self.yaw)


@dataclass(frozen=True)
class WorkspaceResult:
    fraction: float
    n_valid: int
    n_total: int
    valid_points: np.ndarray


def workspace_volume(
    design: TseDesign,
    grid: WorkspaceGrid = WorkspaceGrid(),
    check_stroke: bool = True,
    check_fold_angle: bool = True,
    chunk: int = 20000,
) -> WorkspaceResult:
    """Fraction of grid points whose IK has valid slide displacements.

    A point is invalid when any slide is negative, unreachable, outside the
    stroke, or (optionally) any scissor fold angle leaves its limits.
    """
    pts = grid.points(design.L)
    R = grid.rotation
    valid = np.zeros(len(pts), dtype=bool)
    for start in range(0, len(pts), chunk):
        b = inverse_kinematics_batch(design, pts[start : start + chunk], R)
        valid[start : start + chunk] = b.valid(
            check_sign=True, check_stroke=check_stroke, check_fold_angle=check_fold_angle
        )
    n = int(valid.sum())
    return WorkspaceResult(fraction=n / len(pts), n_valid=n, n_total=len(pts), valid_points=pts[valid])


def _on_axis_ok(design: TseDesign, z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    pts = np.zeros((len(z), 3))
    pts[:, 2] = z
    b = inverse_kinematics_batch(design, pts, np.eye(3))
    return ~np.any(b.flags & (NO_REAL_SOLUTION | NEGATIVE), axis=-1) & (z > 0)


def on_axis_interval(design: TseDesign, n_scan: int = 400) -> tuple[float, float]:
    """Heights along the Z axis (level plate) with real, non-negative slides.

    Actuator stroke and fold-angle stops are deliberately ignored: this is the
    kinematic reach used to match heights between different designs.
    """
    L = design.L
    z = np.linspace(0.0, L, n_scan + 1)[1:]
    ok = _on_axis_ok(design, z)
    if not ok.any():
        raise ValueError("design has no reachable on-axis height")
    # longest contiguous run
    edges = np.diff(np.concatenate([[0], ok.astype(int), [0]]))
    starts, stops = np.nonzero(edges == 1)[0], np.nonzero(edges == -1)[0]
    k = int(np.argmax(stops - starts))
    i0, i1 = starts[k], stops[k] - 1

    def refine(good, bad):
        for _ in range(50):
            mid = 0.5 * (good + bad)
            if _on_axis_ok(design, mid)[0]:
                good = mid
            else:
                bad = mid
        return good

    lo = z[i0] if i0 == 0 else refine(z[i0], z[i0 - 1])
    if i0 == 0:
        lo = refine(z[0], 0.0)
    hi = z[i1] if i1 == len(z) - 1 else refine(z[i1], z[i1 + 1])
    return float(lo), float(hi)


def matched_heights(design: TseDesign, fractions: Sequence[float] = DEFAULT_FRACTIONS) -> np.ndarray:
    lo, hi = on_axis_interval(design)
    return lo + np.asarray(fractions, dtype=float) * (hi - lo)


@dataclass(frozen=True)
class ProfileRow:
    z: float
    sigma_z: float
    sigma_z_svd: float
    error: str = ""


def sigma_z_profile(design: TseDesign, z_samples: Sequence[float]) -> list[ProfileRow]:
    """Vertical gear ratio along the Z axis with a level plate, sorted by height.

    Heights where IK or the Jacobian fails are kept with NaN values and an
    error note.
    """
    z_sorted = np.sort(np.asarray(z_samples, dtype=float))
    pts = np.zeros((len(z_sorted), 3))
    pts[:, 2] = z_sorted
    b = inverse_kinematics_batch(design, pts, np.eye(3))
    rows = []
    for z, q, flags in zip(z_sorted, b.q, b.flags):
        if np.any(flags & NO_REAL_SOLUTION):
            rows.append(ProfileRow(float(z), math.nan, math.nan, "unreachable"))
            continue
        try:
            ja = jacobian_analysis(design, Pose((0.0, 0.0, float(z))), ActuatorVector(tuple(q)))
        except (ScissorSingular, DegenerateInverseJacobian) as exc:
            rows.append(ProfileRow(float(z), math.nan, math.nan, f"singular: {exc}"))
            continue
        rows.append(ProfileRow(float(z), ja.sigma_z, ja.sigma_z_svd))
    return rows


@dataclass(frozen=True)
class HafResult:
    value: float
    ratios: np.ndarray
    spread: float
    z_design: np.ndarray
    z_baseline: np.ndarray


def height_amplification(
    design: TseDesign,
    baseline: TseDesign,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    definition: str = "gear",
) -> HafResult:
    """Ratio of vertical gear ratios at matched fractions of the on-axis reach."""
    if definition not in ("gear", "svd"):
        raise ValueError(f"unknown sigma_z definition {definition!r}")
    zd = matched_heights(design, fractions)
    zb = matched_heights(baseline, fractions)
    pd_ = sigma_z_profile(design, zd)
    pb = sigma_z_profile(baseline, zb)
    attr = "sigma_z" if definition == "gear" else "sigma_z_svd"
    num = np.array([getattr(r, attr) for r in pd_])
    den = np.array([getattr(r, attr) for r in pb])
    ratios = num / den
    if not np.all(np.isfinite(ratios)):
        raise NonConstantRatio("sigma_z undefined at some matched heights", ratios)
    spread = float(ratios.max() / ratios.min() - 1.0)
    return HafResult(float(ratios.mean()), ratios, spread, zd, zb)


def height_amplification_factor(
    design: TseDesign,
    baseline: TseDesign,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    definition: str = "gear",
) -> float:
    """HAF of ``design`` against ``baseline``.

    Raises :class:`NonConstantRatio` if the ratio varies by more than 2 %
    over the sampled heights.
    """
    if design == baseline:
        return 1.0
    res = height_amplification(design, baseline, fractions, definition)
    if res.spread > HAF_SPREAD_TOL:
        raise NonConstantRatio(f"HAF ratio spread {res.spread:.2%} exceeds 2%", res.ratios)
    return res.value


def with_parameter(base: TseDesign, parameter: str, value: float, stroke=None) -> TseDesign:
    """Copy of ``base`` with one dimensionless parameter replaced (``k2`` in radians)."""
    if parameter not in PARAMETERS:
        raise ValueError(f"unknown parameter {parameter!r}")
    ks = {"k1": base.k1, "k2": base.k2, "k3": base.k3, "k4": base.k4}
    ks[parameter] = value
    if stroke is None:
        stroke = (base.layout.stroke_min, base.layout.stroke_max)
    return TseDesign.from_parameters(
        ks["k1"],
        ks["k2"],
        ks["k3"],
        ks["k4"],
        L=base.L,
        stroke=stroke,
        alpha_limits=(base.scissor.alpha_min, base.scissor.alpha_max),
        n_links=max(base.scissor.n_links, 1),
    )


def check_parameter_value(parameter: str, value: float) -> None:
    if parameter == "k1" and not 0 < value <= 1:
        raise ValueError(f"k1 must lie in (0, 1], got {value}")
    if parameter == "k2" and not -math.pi / 2 < value < math.pi / 2:
        raise ValueError(f"k2 must lie in (-90, 90) deg, got {math.degrees(value)}")
    if parameter in ("k3", "k4") and not value >= 0:
        raise ValueError(f"{parameter} must be non-negative, got {value}")


@dataclass
class SweepRow:
    value: float
    haf: float = math.nan
    ws: float = math.nan
    sigma_z: list[float] = field(default_factory=list)
    error: str = ""


@dataclass
class SweepResult:
    parameter: str
    baseline_value: float
    fractions: tuple[float, ...]
    rows: list[SweepRow]

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    @property
    def haf(self) -> np.ndarray:
        return np.array([r.haf for r in self.rows])

    @property
    def ws(self) -> np.ndarray:
        return np.array([r.ws for r in self.rows])


def _stroke_for(base: TseDesign, parameter: str, value: float, stroke_mode: str):
    if stroke_mode == "fixed":
        return None
    # scale the base stroke with the slide travel needed at the stop angle
    lay = base.layout
    k1, eta = base.k1, base.k2
    new_k1 = value if parameter == "k1" else k1
    new_eta = value if parameter == "k2" else eta
    f = (new_k1 / k1) * (math.cos(eta) / math.cos(new_eta))
    return (lay.stroke_min * f, lay.stroke_max * f)


def parameter_sweep(
    base: TseDesign,
    parameter: str,
    values: Sequence[float],
    grid: WorkspaceGrid | None = WorkspaceGrid(),
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    definition: str = "gear",
    baseline_value: float | None = None,
    stroke_mode: str = "scaled",
) -> SweepResult:
    """Vary one parameter of ``base`` and tabulate HAF, %ws and the sigma_z profile.

    Per-value failures are recorded in the row's ``error`` field.  The k4
    sweep carries no HAF.  With ``grid=None`` the workspace is skipped.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"unknown parameter {parameter!r}")
    if baseline_value is None:
        baseline_value = BASELINES.get(parameter, getattr(base, parameter))
    baseline = with_parameter(base, parameter, baseline_value, _stroke_for(base, parameter, baseline_value, stroke_mode))
    rows = []
    for v in values:
        row = SweepRow(value=float(v))
        rows.append(row)
        try:
            check_parameter_value(parameter, v)
            design = with_parameter(base, parameter, v, _stroke_for(base, parameter, v, stroke_mode))
        except ValueError as exc:
            row.error = str(exc)
            continue
        errors = []
        try:
            z = matched_heights(design, fractions)
            prof = sigma_z_profile(design, z)
            row.sigma_z = [r.sigma_z if definition == "gear" else r.sigma_z_svd for r in prof]
            errors += sorted({r.error for r in prof if r.error})
        except ValueError as exc:
            errors.append(str(exc))
        if parameter != "k4":
            try:
                if math.isclose(v, baseline_value, rel_tol=0, abs_tol=1e-15):
                    row.haf = 1.0
                else:
                    res = height_amplification(design, baseline, fractions, definition)
                    row.haf = res.value
                    if res.spread > HAF_SPREAD_TOL:
                        errors.append(f"HAF ratio spread {res.spread:.2%} exceeds 2%")
            except ValueError as exc:
                errors.append(str(exc))
        if grid is not None:
            row.ws = workspace_volume(design, grid).fraction
        row.error = "; ".join(errors)
    return SweepResult(parameter, float(baseline_value), tuple(float(f) for f in fractions), rows)
