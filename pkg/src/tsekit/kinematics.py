"""Apex placement, constraint residuals, and numerical inverse/forward kinematics.

Each scissor is governed by two implicit constraints on its slide
displacements ``(s_A, s_B)`` and its apex ``(x_C, y_C, z_C)`` (local frame):

* equal reach:  ``|A - H|^2 - |B - H|^2 = 0`` where ``H`` is the apex projection;
* height:       ``|A - H|^2 + z_C^2 - L^2 - (1 - (L/l0)^2)/4 * |A - B|^2 = 0``.

The per-scissor solve is a vectorised damped Newton iteration started from a
small set of symmetric seeds, so whole workspaces can be evaluated at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ActuatorVector,
    Pose,
    TopPlate,
    TseDesign,
    angular_velocity_map,
    fold_angle_from_width,
    rotation_rpy,
    scissor_frames,
    world_to_scissor_local,
)

RESIDUAL_TOL = 1e-10  # times L**2
STEP_CAP = 0.1  # times L
MAX_ITER = 100
SEED_ALPHAS = np.linspace(0.1, 1.45, 5)

# per-slide status bits
NEGATIVE = 1
OUT_OF_STROKE = 2
NO_REAL_SOLUTION = 4
FOLD_ANGLE = 8


class KinematicsError(Exception):
    pass


class NoRealSolution(KinematicsError):
    """No root of the constraint pair was found: the apex is unreachable."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class InfeasibleSolution(KinematicsError):
    """A root exists but violates the sign or stroke limits of a slide."""

    def __init__(self, message, s_A, s_B, flags):
        super().__init__(message)
        self.s_A = s_A
        self.s_B = s_B
        self.flags = flags


class NonConvergence(KinematicsError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class SingularIteration(KinematicsError):
    pass


@dataclass(frozen=True)
class ApexSet:
    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack([self.C1, self.C2, self.C3])

    def __iter__(self):
        return iter((self.C1, self.C2, self.C3))


def _apex_offsets(rotation: np.ndarray, r_top: float) -> np.ndarray:
    """Plate-centre to apex vectors, shape ``(..., 3, 3)`` indexed ``[..., apex, xyz]``."""
    n = rotation[..., :, 0]
    t = rotation[..., :, 1]
    h = math.sqrt(3.0) / 2.0
    return r_top * np.stack([n, -0.5 * n + h * t, -0.5 * n - h * t], axis=-2)


def apex_positions(pose: Pose, plate: TopPlate) -> ApexSet:
    X = np.asarray(pose.position, dtype=float)
    C = X + _apex_offsets(pose.rotation, plate.r_top)
    return ApexSet(C[0], C[1], C[2])


def constraint_residuals(design: TseDesign, s_A, s_B, apex_local) -> np.ndarray:
    """Both constraint residuals (units of length squared), shape ``(..., 2)``."""
    eta = design.layout.eta
    c = np.asarray(apex_local, dtype=float)
    s_A = np.asarray(s_A, dtype=float)
    s_B = np.asarray(s_B, dtype=float)
    xC, yC, zC = c[..., 0], c[..., 1], c[..., 2]
    ce, se = math.cos(eta), math.sin(eta)
    xA, yA = s_A * ce, s_A * se
    xB, yB = -s_B * ce, s_B * se
    rA2 = (xA - xC) ** 2 + (yA - yC) ** 2
    rB2 = (xB - xC) ** 2 + (yB - yC) ** 2
    w2 = (xA - xB) ** 2 + (yA - yB) ** 2
    L = design.L
    r1 = rA2 - rB2
    r2 = rA2 + zC**2 - L**2 - design.width_coefficient * w2
    return np.stack([r1, r2], axis=-1)


def _slide_jacobian(design: TseDesign, s_A, s_B, apex_local) -> np.ndarray:
    """d(residuals)/d(s_A, s_B), shape ``(..., 2, 2)``."""
    eta = design.layout.eta
    ce, se, c2 = math.cos(eta), math.sin(eta), math.cos(2.0 * eta)
    c = np.asarray(apex_local, dtype=float)
    xC, yC = c[..., 0], c[..., 1]
    K = design.width_coefficient
    dA = 2.0 * (s_A - xC * ce - yC * se)
    dB = 2.0 * (s_B + xC * ce - yC * se)
    dwA = 2.0 * (s_A + s_B * c2)
    dwB = 2.0 * (s_B + s_A * c2)
    J = np.empty(np.shape(s_A) + (2, 2))
    J[..., 0, 0] = dA
    J[..., 0, 1] = -dB
    J[..., 1, 0] = dA - K * dwA
    J[..., 1, 1] = -K * dwB
    return J


def _solve2(J, r):
    """Regularised Newton step ``-J^-1 r`` for stacks of 2x2 systems."""
    a, b, c, d = J[..., 0, 0], J[..., 0, 1], J[..., 1, 0], J[..., 1, 1]
    det = a * d - b * c
    scale = np.maximum(np.abs(a) * np.abs(d) + np.abs(b) * np.abs(c), 1e-300)
    ok = np.abs(det) > 1e-13 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = np.where(ok, -(d * r[..., 0] - b * r[..., 1]) / det, 0.0)
        dy = np.where(ok, -(-c * r[..., 0] + a * r[..., 1]) / det, 0.0)
    if not ok.all():
        # Levenberg-Marquardt fallback on (near) singular steps
        JT = np.swapaxes(J, -1, -2)
        H = JT @ J
        mu = 1e-8 * np.maximum(np.trace(H, axis1=-2, axis2=-1), 1e-300)
        H = H + mu[..., None, None] * np.eye(2)
        g = (JT @ r[..., None])[..., 0]
        lm = -np.linalg.solve(H[~ok], g[~ok][..., None])[..., 0]
        dx[~ok] = lm[:, 0]
        dy[~ok] = lm[:, 1]
    return np.stack([dx, dy], axis=-1)


def _newton(design: TseDesign, s0: np.ndarray, apex: np.ndarray):
    """Damped Newton from seeds ``s0`` ``(N, 2)`` on apexes ``(N, 3)``."""
    L = design.L
    s = s0.copy()
    r = constraint_residuals(design, s[:, 0], s[:, 1], apex)
    rn = np.hypot(r[:, 0], r[:, 1])
    active = np.isfinite(rn)
    slow = np.zeros(len(s), dtype=np.int64)
    polish_tol = 1e-14 * L * L
    for _ in range(MAX_ITER):
        active &= rn > polish_tol
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        sa, ra, ca = s[idx], r[idx], apex[idx]
        step = _solve2(_slide_jacobian(design, sa[:, 0], sa[:, 1], ca), ra)
        norm = np.hypot(step[:, 0], step[:, 1])
        step *= np.minimum(1.0, STEP_CAP * L / np.maximum(norm, 1e-300))[:, None]
        done = np.zeros(len(idx), dtype=bool)
        new_s, new_r = sa.copy(), ra.copy()
        base = rn[idx]
        todo = np.arange(len(idx))
        lam = 1.0
        for _ in range(30):
            trial = sa[todo] + lam * step[todo]
            tr = constraint_residuals(design, trial[:, 0], trial[:, 1], ca[todo])
            tn = np.hypot(tr[:, 0], tr[:, 1])
            acc = tn < (1.0 - 1e-4 * lam) * base[todo]
            hit = todo[acc]
            new_s[hit], new_r[hit] = trial[acc], tr[acc]
            done[hit] = True
            todo = todo[~acc]
            if not len(todo):
                break
            lam *= 0.5
        s[idx], r[idx] = new_s, new_r
        new_rn = np.hypot(new_r[:, 0], new_r[:, 1])
        # seeds creeping towards a non-zero residual minimum are unreachable
        slow[idx] = np.where(new_rn > 0.99 * base, slow[idx] + 1, 0)
        rn[idx] = new_rn
        stalled = np.zeros(len(s), dtype=bool)
        stalled[idx[~done]] = True
        active &= ~stalled & (slow < 5)
    return s, rn


@dataclass(frozen=True)
class ScissorSolveBatch:
    s_A: np.ndarray
    s_B: np.ndarray
    residual: np.ndarray
    flags: np.ndarray  # (N, 2) status bits per slide
    alpha: np.ndarray

    @property
    def reachable(self) -> np.ndarray:
        return ~np.any(self.flags & NO_REAL_SOLUTION, axis=-1)


def slide_flags(design: TseDesign, s_A, s_B, alpha=None, check_fold_angle=True) -> np.ndarray:
    lay = design.layout
    eps = 1e-12 * design.L
    s = np.stack([np.asarray(s_A, dtype=float), np.asarray(s_B, dtype=float)], axis=-1)
    flags = np.zeros(s.shape, dtype=np.int64)
    flags |= np.where(s < -eps, NEGATIVE, 0)
    flags |= np.where((s < lay.stroke_min - eps) | (s > lay.stroke_max + eps), OUT_OF_STROKE, 0)
    if check_fold_angle and alpha is not None:
        g = design.scissor
        a = np.asarray(alpha, dtype=float)
        bad = ~((a >= g.alpha_min - 1e-12) & (a <= g.alpha_max + 1e-12))
        flags |= np.where(bad[..., None], FOLD_ANGLE, 0)
    return flags


def fold_angle(design: TseDesign, s_A, s_B):
    """Scissor fold angle implied by the slide displacements (via the base width)."""
    c2 = math.cos(2.0 * design.layout.eta)
    w2 = np.asarray(s_A) ** 2 + np.asarray(s_B) ** 2 + 2.0 * np.asarray(s_A) * np.asarray(s_B) * c2
    w = np.sqrt(np.maximum(w2, 0.0))
    return fold_angle_from_width(design.scissor, np.minimum(w, 2.0 * design.scissor.l0))


def solve_scissor_batch(design: TseDesign, apex_local) -> ScissorSolveBatch:
    """Solve the constraint pair for many local apexes ``(N, 3)`` at once.

    Among converged roots the one with both slides non-negative and minimal
    ``|(s_A, s_B)|`` is kept; ties go to the larger fold angle.
    """
    apex = np.atleast_2d(np.asarray(apex_local, dtype=float))
    N = len(apex)
    L = design.L
    eta = design.layout.eta
    seeds = design.scissor.l0 * np.cos(SEED_ALPHAS) / math.cos(eta)
    k = len(seeds)
    s0 = np.repeat(seeds, 2).reshape(k, 2)
    S0 = np.tile(s0, (N, 1))
    C = np.repeat(apex, k, axis=0)
    s, rn = _newton(design, S0, C)
    s = s.reshape(N, k, 2)
    rn = rn.reshape(N, k)
    conv = rn < RESIDUAL_TOL * L * L

    nonneg = np.all(s >= -1e-12 * L, axis=-1)
    norm = np.linalg.norm(s, axis=-1)
    alpha = fold_angle(design, s[..., 0], s[..., 1])
    # lexicographic: converged, non-negative, min norm (1e-9 L buckets), max alpha
    bucket = np.round(norm / (1e-9 * L))
    key_alpha = np.nan_to_num(alpha, nan=-1.0)
    order = np.lexsort((-key_alpha, bucket, ~nonneg, ~conv), axis=-1)
    best = order[:, 0]
    rows = np.arange(N)
    sb = s[rows, best]
    found = conv[rows, best]
    res = rn[rows, best]
    a_best = alpha[rows, best]

    flags = slide_flags(design, sb[:, 0], sb[:, 1], a_best)
    flags[~found] = NO_REAL_SOLUTION
    sA = np.where(found, sb[:, 0], np.nan)
    sB = np.where(found, sb[:, 1], np.nan)
    return ScissorSolveBatch(sA, sB, np.where(found, res, np.nan), flags, np.where(found, a_best, np.nan))


def _describe(flags) -> str:
    names = []
    for bit, name in ((NEGATIVE, "negative"), (OUT_OF_STROKE, "out of stroke"), (FOLD_ANGLE, "fold angle")):
        if np.any(np.asarray(flags) & bit):
            names.append(name)
    return ", ".join(names)


def solve_scissor_ik(design: TseDesign, apex_local, strict: bool = True):
    """Slide displacements ``(s_A, s_B, flags)`` for one scissor apex.

    Raises :class:`NoRealSolution` when no seed converges.  With ``strict``,
    a root violating the sign/stroke limits raises :class:`InfeasibleSolution`.
    """
    out = solve_scissor_batch(design, np.asarray(apex_local, dtype=float)[None, :])
    flags = out.flags[0]
    if np.any(flags & NO_REAL_SOLUTION):
        raise NoRealSolution(f"no real root for apex {tuple(apex_local)}")
    sA, sB = float(out.s_A[0]), float(out.s_B[0])
    if strict and np.any(flags & (NEGATIVE | OUT_OF_STROKE)):
        raise InfeasibleSolution(f"root ({sA}, {sB}) infeasible: {_describe(flags)}", sA, sB, flags)
    return sA, sB, flags


@dataclass(frozen=True)
class IkSolution:
    actuators: ActuatorVector | None
    residuals: tuple[float, float, float]
    flags: tuple[int, ...]  # one status bitmask per slide, same order as q
    fold_angles: tuple[float, float, float]

    @property
    def reachable(self) -> bool:
        return not any(f & NO_REAL_SOLUTION for f in self.flags)

    def is_feasible(self, check_fold_angle: bool = True) -> bool:
        mask = NEGATIVE | OUT_OF_STROKE | NO_REAL_SOLUTION
        if check_fold_angle:
            mask |= FOLD_ANGLE
        return not any(f & mask for f in self.flags)

    @property
    def feasible(self) -> bool:
        return self.is_feasible(check_fold_angle=False)

    def describe(self) -> str:
        return _describe(self.flags)


@dataclass(frozen=True)
class IkBatch:
    q: np.ndarray  # (N, 6), NaN where unreachable
    flags: np.ndarray  # (N, 6)
    residuals: np.ndarray  # (N, 3)
    fold_angles: np.ndarray  # (N, 3)

    def valid(self, check_sign=True, check_stroke=True, check_fold_angle=True) -> np.ndarray:
        mask = NO_REAL_SOLUTION
        if check_sign:
            mask |= NEGATIVE
        if check_stroke:
            mask |= OUT_OF_STROKE
        if check_fold_angle:
            mask |= FOLD_ANGLE
        return ~np.any(self.flags & mask, axis=-1)


def local_apexes(design: TseDesign, positions, rotations) -> np.ndarray:
    """Apexes of many plate poses in their scissor frames, shape ``(N, 3, 3)``."""
    X = np.atleast_2d(np.asarray(positions, dtype=float))
    R = np.asarray(rotations, dtype=float)
    C = X[:, None, :] + _apex_offsets(R, design.plate.r_top)
    frames = scissor_frames(design.layout)
    return np.stack([world_to_scissor_local(f, C[:, i, :]) for i, f in enumerate(frames)], axis=1)


def inverse_kinematics_batch(design: TseDesign, positions, rotations) -> IkBatch:
    """IK for ``N`` plate positions sharing one rotation ``(3, 3)`` or with ``(N, 3, 3)``."""
    local = local_apexes(design, positions, rotations)
    N = local.shape[0]
    out = solve_scissor_batch(design, local.reshape(N * 3, 3))
    q = np.stack([out.s_A, out.s_B], axis=-1).reshape(N, 6)
    return IkBatch(
        q=q,
        flags=out.flags.reshape(N, 6),
        residuals=out.residual.reshape(N, 3),
        fold_angles=out.alpha.reshape(N, 3),
    )


def inverse_kinematics(design: TseDesign, pose: Pose) -> IkSolution:
    """Six slide displacements for a plate pose.

    Infeasible roots are reported through the per-slide flags; only an
    unreachable apex raises :class:`NoRealSolution`.
    """
    b = inverse_kinematics_batch(design, np.asarray(pose.position)[None, :], pose.rotation)
    flags = tuple(int(f) for f in b.flags[0])
    reachable = not any(f & NO_REAL_SOLUTION for f in flags)
    sol = IkSolution(
        actuators=ActuatorVector(tuple(b.q[0])) if reachable else None,
        residuals=tuple(float(v) for v in b.residuals[0]),
        flags=flags,
        fold_angles=tuple(float(v) for v in b.fold_angles[0]),
    )
    if not reachable:
        bad = [i + 1 for i in range(3) if flags[2 * i] & NO_REAL_SOLUTION]
        raise NoRealSolution(f"scissor(s) {bad} cannot reach their apex", solution=sol)
    return sol


def _ik_vector(design: TseDesign, p: np.ndarray) -> np.ndarray | None:
    b = inverse_kinematics_batch(design, p[None, :3], rotation_rpy(*p[3:]))
    if np.any(b.flags[0] & NO_REAL_SOLUTION):
        return None
    return b.q[0]


def forward_kinematics(design: TseDesign, q: ActuatorVector, seed: Pose, tol: float = 1e-12) -> Pose:
    """Plate pose reproducing the slide displacements ``q``.

    Damped Newton on ``IK(p) - q`` over ``(x, y, z, roll, pitch, yaw)`` with the
    analytic inverse Jacobian.  ``tol`` is relative to ``L``.
    """
    from .differential import ScissorSingular, inverse_jacobian

    L = design.L
    target = q.as_array()
    flags = slide_flags(design, target[0::2], target[1::2])
    if np.any(flags):
        raise InfeasibleSolution(f"q outside the slide limits: {_describe(flags)}", target[0::2], target[1::2], flags)

    p = seed.as_vector().astype(float)
    qp = _ik_vector(design, p)
    if qp is None:
        raise NoRealSolution("seed pose is unreachable")
    r = qp - target
    rn = np.max(np.abs(r))
    for _ in range(MAX_ITER):
        if rn <= tol * L:
            return Pose.from_vector(p)
        pose = Pose.from_vector(p)
        try:
            Jinv = inverse_jacobian(design, pose, ActuatorVector(tuple(qp)))
        except ScissorSingular as exc:
            raise SingularIteration(str(exc)) from exc
        D = Jinv.copy()
        D[:, 3:] = Jinv[:, 3:] @ angular_velocity_map(*p[3:])
        try:
            step = -np.linalg.solve(D, r)
        except np.linalg.LinAlgError as exc:
            raise SingularIteration("inverse Jacobian is singular at iterate") from exc
        if not np.all(np.isfinite(step)):
            raise SingularIteration("inverse Jacobian is singular at iterate")
        pos_norm = np.linalg.norm(step[:3])
        cap = STEP_CAP * L
        if pos_norm > cap:
            step *= cap / pos_norm
        ang_norm = np.max(np.abs(step[3:]))
        if ang_norm > 0.2:
            step *= 0.2 / ang_norm
        lam = 1.0
        for _ in range(30):
            trial = p + lam * step
            qt = _ik_vector(design, trial)
            if qt is not None:
                rt = qt - target
                rtn = np.max(np.abs(rt))
                if rtn < rn or rtn <= tol * L:
                    p, qp, r, rn = trial, qt, rt, rtn
                    break
            lam *= 0.5
        else:
            break
    if rn <= tol * L or rn <= 1e-10 * L:
        return Pose.from_vector(p)
    raise NonConvergence(f"forward kinematics did not converge (max residual {rn:.3e} m)", rn)


def rotate_pose_about_z(pose: Pose, angle: float) -> Pose:
    """Rigidly rotate the whole plate configuration about world Z.

    Position is rotated and the orientation conjugated, ``R' = Rz R Rz^T``.
    For a rotation by 120 deg apex ``C_(i+1)`` lands where the rotated
    ``C_i`` was, so scissor ``i+1`` takes over the slide pair of scissor ``i``.
    """
    c, s = math.cos(angle), math.sin(angle)
    Rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    X = Rz @ np.asarray(pose.position)
    R = Rz @ pose.rotation @ Rz.T
    return Pose(tuple(X), *rpy_from_rotation(R))


def mirror_pose_xz(pose: Pose) -> Pose:
    """Reflect the plate configuration across the world X-Z plane."""
    x, y, z = pose.position
    return Pose((x, -y, z), roll=-pose.roll, pitch=pose.pitch, yaw=-pose.yaw)


def rpy_from_rotation(R: np.ndarray) -> tuple[float, float, float]:
    """Inverse of :func:`rotation_rpy` away from pitch = +-90 deg."""
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return roll, pitch, yaw
