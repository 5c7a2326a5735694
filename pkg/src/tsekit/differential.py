"""Differential kinematics: implicit-differentiation Jacobians, spatial gear
ratios and type-1 (input) singularities of the individual scissors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ActuatorVector, Pose, TseDesign, scissor_frames, world_to_scissor_local
from .kinematics import _apex_offsets, _slide_jacobian

SINGULAR_DET_TOL = 1e-9


class ScissorSingular(Exception):
    """The slide block of a scissor's constraint derivative is singular."""

    def __init__(self, message, scissor=None):
        super().__init__(message)
        self.scissor = scissor


class DegenerateInverseJacobian(Exception):
    pass


class DegenerateDenominator(ZeroDivisionError):
    pass


def scissor_velocity_map(design: TseDesign, s_A, s_B, apex_local):
    """Partial derivatives of the two constraint residuals.

    Returns ``(A, B)`` with ``A @ (ds_A, ds_B) + B @ (dx_C, dy_C, dz_C) = 0``
    along any motion preserving both constraints.
    """
    eta = design.layout.eta
    ce, se = math.cos(eta), math.sin(eta)
    xC, yC, zC = (float(v) for v in apex_local)
    xA, yA = s_A * ce, s_A * se
    xB, yB = -s_B * ce, s_B * se
    A = _slide_jacobian(design, float(s_A), float(s_B), np.asarray(apex_local, dtype=float))
    B = np.array(
        [
            [-2.0 * (xA - xB), -2.0 * (yA - yB), 0.0],
            [-2.0 * (xA - xC), -2.0 * (yA - yC), 2.0 * zC],
        ]
    )
    return A, B


@dataclass(frozen=True)
class SingularityMatrix:
    a11: float
    a12: float
    a21: float
    a22: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def normalized_det(self) -> float:
        """``det`` divided by the product of the row norms (|sin| of the row angle)."""
        n1 = math.hypot(self.a11, self.a12)
        n2 = math.hypot(self.a21, self.a22)
        if n1 == 0.0 or n2 == 0.0:
            return 0.0
        return self.det / (n1 * n2)

    @property
    def is_singular(self) -> bool:
        return abs(self.normalized_det) < SINGULAR_DET_TOL

    def null_vector(self) -> np.ndarray:
        """Unit slide-velocity direction closest to the matrix null space."""
        _, _, vt = np.linalg.svd(self.matrix)
        return vt[-1]


def singularity_matrix(design: TseDesign, s_A, s_B, apex_local) -> SingularityMatrix:
    """Slide-velocity matrix with the apex held still.

    Its determinant vanishes exactly when some non-zero slide velocity leaves
    the apex at rest.  The matrix equals ``-1/2`` times the slide block of
    :func:`scissor_velocity_map`.
    """
    eta = design.layout.eta
    ce, se, c2 = math.cos(eta), math.sin(eta), math.cos(2.0 * eta)
    xC, yC = float(apex_local[0]), float(apex_local[1])
    K = 0.25 * (1.0 - design.length_ratio_sq)
    a11 = -s_A + xC * ce + yC * se
    a12 = s_B + xC * ce - yC * se
    a21 = a11 + K * (s_A + s_B * c2)
    a22 = K * (s_B + s_A * c2)
    return SingularityMatrix(float(a11), float(a12), float(a21), float(a22))


def structural_singularity_ratio(design: TseDesign, s_A, s_B, apex_local) -> float:
    """Value of ``(L/l0)**2`` at which this slide/apex configuration is singular."""
    eta = design.layout.eta
    c2 = math.cos(2.0 * eta)
    m = singularity_matrix(design, s_A, s_B, apex_local)
    u = s_A + s_B * c2
    v = s_B + s_A * c2
    denom = m.a12 * u - m.a11 * v
    scale = abs(m.a12 * u) + abs(m.a11 * v)
    if scale == 0.0 or abs(denom) <= 1e-14 * scale:
        raise DegenerateDenominator("singularity condition has a vanishing denominator")
    return 1.0 + 4.0 * m.a11 * m.a12 / denom


def _skew(d):
    return np.array([[0.0, -d[2], d[1]], [d[2], 0.0, -d[0]], [-d[1], d[0], 0.0]])


def inverse_jacobian(design: TseDesign, pose: Pose, q: ActuatorVector) -> np.ndarray:
    """``dq/dt = J_inv @ (v, omega)`` with plate linear and world angular velocity."""
    X = np.asarray(pose.position, dtype=float)
    d_all = _apex_offsets(pose.rotation, design.plate.r_top)
    Jinv = np.zeros((6, 6))
    for i, frame in enumerate(scissor_frames(design.layout)):
        d = d_all[i]
        local = world_to_scissor_local(frame, X + d)
        s_A, s_B = q.pair(i + 1)
        sm = singularity_matrix(design, s_A, s_B, local)
        if sm.is_singular:
            raise ScissorSingular(f"scissor {i + 1} is at a type-1 singularity", scissor=i + 1)
        A, B = scissor_velocity_map(design, s_A, s_B, local)
        # world apex velocity = [I, -skew(d)] @ (v, omega)
        G = np.hstack([np.eye(3), -_skew(d)])
        Jinv[2 * i : 2 * i + 2] = -np.linalg.solve(A, B @ frame.rotation.T @ G)
    return Jinv


@dataclass(frozen=True)
class JacobianAnalysis:
    J: np.ndarray
    J_inv: np.ndarray
    singular_values: np.ndarray
    sigma_z: float
    sigma_z_svd: float
    sigma_translation: np.ndarray
    sigma_rotation: np.ndarray
    singular_scissors: tuple[int, ...] = ()


def jacobian_analysis(design: TseDesign, pose: Pose, q: ActuatorVector) -> JacobianAnalysis:
    """Forward Jacobian, its singular values and the vertical gear ratio.

    Rotation rows are scaled by ``r_top`` before the SVD so all rows carry
    length units.  ``sigma_z`` is plate vertical speed per unit actuator
    speed, ``1 / |J_inv e_z|``; ``sigma_z_svd`` is the singular value whose
    left singular vector leans most towards ``Z``.
    """
    Jinv = inverse_jacobian(design, pose, q)
    sv_inv = np.linalg.svd(Jinv, compute_uv=False)
    if sv_inv[-1] <= 1e-12 * sv_inv[0]:
        raise DegenerateInverseJacobian("inverse Jacobian is rank deficient; forward Jacobian does not exist")
    J = np.linalg.inv(Jinv)
    scale = np.array([1.0, 1.0, 1.0] + [design.plate.r_top] * 3)
    U, sv, _ = np.linalg.svd(scale[:, None] * J)
    k = int(np.argmax(np.abs(U[2, :])))
    sigma_z = 1.0 / np.linalg.norm(Jinv[:, 2])
    return JacobianAnalysis(
        J=J,
        J_inv=Jinv,
        singular_values=sv,
        sigma_z=float(sigma_z),
        sigma_z_svd=float(sv[k]),
        sigma_translation=np.linalg.svd(J[:3], compute_uv=False),
        sigma_rotation=np.linalg.svd(J[3:], compute_uv=False),
    )


def scissor_singularities(design: TseDesign, pose: Pose, q: ActuatorVector):
    """Per-scissor ``(SingularityMatrix, critical (L/l0)**2 or None)``."""
    X = np.asarray(pose.position, dtype=float)
    d_all = _apex_offsets(pose.rotation, design.plate.r_top)
    out = []
    for i, frame in enumerate(scissor_frames(design.layout)):
        local = world_to_scissor_local(frame, X + d_all[i])
        s_A, s_B = q.pair(i + 1)
        sm = singularity_matrix(design, s_A, s_B, local)
        try:
            ratio = structural_singularity_ratio(design, s_A, s_B, local)
        except DegenerateDenominator:
            ratio = None
        out.append((sm, ratio))
    return out
