"""Domain types, frame conventions and single-scissor planar geometry.

Frames
------
World frame ``O_0-XYZ`` sits at the centre of the base plate.  Scissor ``i``
(1, 2, 3) has a local frame ``O_i-x_i y_i z_i`` whose ``+y_i`` axis points
radially outward at angle ``gamma_i = (i-1)*120 deg`` from world ``+X``,
``z_i`` is parallel to world ``Z`` and ``x_i = y_i x z_i``.  ``O_i`` lies at
``r_actuator`` along ``+y_i``.  Slide A runs at angle ``eta`` from ``+x_i``,
slide B at ``pi - eta``.

Plate orientation uses roll/pitch/yaw with ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``;
the plate unit vectors ``n, t, b`` are the columns of ``R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the admissible domain of an operation."""


# Back-computed from the prototype heights (1.619 m extended, 0.324 m retracted)
# with L = 1.727 m; plate thicknesses are unknown so these are approximate.
PROTOTYPE_LENGTH = 1.727
DEFAULT_ALPHA_MAX = math.asin(1.619 / PROTOTYPE_LENGTH)
DEFAULT_ALPHA_MIN = math.asin(0.324 / PROTOTYPE_LENGTH)


@dataclass(frozen=True)
class ScissorGeometry:
    l0: float
    link_lengths: tuple[float, ...]
    alpha_min: float = DEFAULT_ALPHA_MIN
    alpha_max: float = DEFAULT_ALPHA_MAX

    def __post_init__(self):
        object.__setattr__(self, "link_lengths", tuple(float(v) for v in self.link_lengths))
        if not self.l0 > 0:
            raise DomainError(f"l0 must be positive, got {self.l0}")
        if any(not v > 0 for v in self.link_lengths):
            raise DomainError(f"link lengths must be positive, got {self.link_lengths}")
        if not 0 < self.alpha_min < self.alpha_max < math.pi / 2:
            raise DomainError(
                f"need 0 < alpha_min < alpha_max < pi/2, got {self.alpha_min}, {self.alpha_max}"
            )

    @property
    def total_length(self) -> float:
        return self.l0 + 2.0 * sum(self.link_lengths)

    @property
    def n_links(self) -> int:
        return len(self.link_lengths)

    @property
    def k1(self) -> float:
        return self.l0 / self.total_length

    @classmethod
    def from_ratio(cls, total_length, k1, n_links=3, **kwargs) -> "ScissorGeometry":
        """Build a geometry with equal parallelogram links for a given ``L`` and ``l0/L``."""
        l0 = k1 * total_length
        if k1 >= 1.0:
            return cls(l0=total_length, link_lengths=(), **kwargs)
        link = (total_length - l0) / (2.0 * n_links)
        return cls(l0=l0, link_lengths=(link,) * n_links, **kwargs)


@dataclass(frozen=True)
class ActuatorLayout:
    eta: float
    r_actuator: float
    stroke_min: float
    stroke_max: float

    def __post_init__(self):
        if not -math.pi / 2 < self.eta < math.pi / 2:
            raise DomainError(f"eta must lie in (-pi/2, pi/2), got {self.eta}")
        if self.r_actuator < 0:
            raise DomainError(f"r_actuator must be non-negative, got {self.r_actuator}")
        if not 0 <= self.stroke_min < self.stroke_max:
            raise DomainError(
                f"need 0 <= stroke_min < stroke_max, got {self.stroke_min}, {self.stroke_max}"
            )


@dataclass(frozen=True)
class TopPlate:
    r_top: float

    def __post_init__(self):
        if not self.r_top > 0:
            raise DomainError(f"r_top must be positive, got {self.r_top}")


@dataclass(frozen=True)
class TseDesign:
    scissor: ScissorGeometry
    layout: ActuatorLayout
    plate: TopPlate

    @property
    def L(self) -> float:
        return self.scissor.total_length

    @property
    def k1(self) -> float:
        return self.scissor.l0 / self.L

    @property
    def k2(self) -> float:
        return self.layout.eta

    @property
    def k3(self) -> float:
        return self.layout.r_actuator / self.L

    @property
    def k4(self) -> float:
        return self.plate.r_top / self.L

    @property
    def length_ratio_sq(self) -> float:
        """``(L / l0)**2``, the structural parameter of the singularity condition."""
        return (self.L / self.scissor.l0) ** 2

    @property
    def width_coefficient(self) -> float:
        """Coefficient ``(1 - (L/l0)**2) / 4`` multiplying ``w**2`` in the height constraint."""
        return 0.25 * (1.0 - self.length_ratio_sq)

    @classmethod
    def from_parameters(
        cls,
        k1: float,
        k2: float,
        k3: float,
        k4: float,
        L: float = PROTOTYPE_LENGTH,
        stroke: tuple[float, float] | None = None,
        alpha_limits: tuple[float, float] = (DEFAULT_ALPHA_MIN, DEFAULT_ALPHA_MAX),
        n_links: int = 3,
    ) -> "TseDesign":
        """Build a design from the dimensionless parameters (``k2`` in radians).

        Without an explicit ``stroke`` the slides span
        ``[0, L/2 * cos(alpha_min) / cos(eta)]``.
        """
        if not 0 < k1 <= 1:
            raise DomainError(f"k1 must lie in (0, 1], got {k1}")
        scissor = ScissorGeometry.from_ratio(
            L, k1, n_links=n_links, alpha_min=alpha_limits[0], alpha_max=alpha_limits[1]
        )
        if stroke is None:
            stroke = (0.0, 0.5 * L * math.cos(alpha_limits[0]) / math.cos(k2))
        layout = ActuatorLayout(eta=k2, r_actuator=k3 * L, stroke_min=stroke[0], stroke_max=stroke[1])
        return cls(scissor=scissor, layout=layout, plate=TopPlate(r_top=k4 * L))


def rotation_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def angular_velocity_map(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Matrix ``E`` with ``omega_world = E @ (roll_dot, pitch_dot, yaw_dot)``."""
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    return np.array(
        [
            [cy * cp, -sy, 0.0],
            [sy * cp, cy, 0.0],
            [-sp, 0.0, 1.0],
        ]
    )


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float, float]
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))

    @classmethod
    def from_vector(cls, p: Sequence[float]) -> "Pose":
        return cls(position=(p[0], p[1], p[2]), roll=p[3], pitch=p[4], yaw=p[5])

    def as_vector(self) -> np.ndarray:
        return np.array([*self.position, self.roll, self.pitch, self.yaw])

    @property
    def rotation(self) -> np.ndarray:
        return rotation_rpy(self.roll, self.pitch, self.yaw)

    @property
    def n_hat(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def t_hat(self) -> np.ndarray:
        return self.rotation[:, 1]

    @property
    def b_hat(self) -> np.ndarray:
        return self.rotation[:, 2]


@dataclass(frozen=True)
class ActuatorVector:
    """Slide displacements ordered ``(s_A1, s_B1, s_A2, s_B2, s_A3, s_B3)``."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != 6:
            raise ValueError(f"expected 6 displacements, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"displacements must be finite, got {vals}")
        object.__setattr__(self, "values", vals)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def pair(self, i: int) -> tuple[float, float]:
        """``(s_A, s_B)`` for scissor ``i`` in 1..3."""
        if i not in (1, 2, 3):
            raise IndexError(f"scissor index must be 1, 2 or 3, got {i}")
        return self.values[2 * (i - 1)], self.values[2 * (i - 1) + 1]


@dataclass(frozen=True)
class ScissorFrame:
    index: int
    r_actuator: float
    gamma: float = field(init=False)

    def __post_init__(self):
        if self.index not in (1, 2, 3):
            raise ValueError(f"scissor index must be 1, 2 or 3, got {self.index}")
        object.__setattr__(self, "gamma", (self.index - 1) * 2.0 * math.pi / 3.0)

    @property
    def rotation(self) -> np.ndarray:
        """Columns are the local x, y, z axes in world coordinates."""
        c, s = math.cos(self.gamma), math.sin(self.gamma)
        return np.array([[s, c, 0.0], [-c, s, 0.0], [0.0, 0.0, 1.0]])

    @property
    def origin(self) -> np.ndarray:
        return self.r_actuator * np.array([math.cos(self.gamma), math.sin(self.gamma), 0.0])


def scissor_frames(layout: ActuatorLayout) -> tuple[ScissorFrame, ScissorFrame, ScissorFrame]:
    return tuple(ScissorFrame(i, layout.r_actuator) for i in (1, 2, 3))


def world_to_scissor_local(frame: ScissorFrame, point) -> np.ndarray:
    """Express world point(s) of shape ``(..., 3)`` in the scissor-local frame."""
    p = np.asarray(point, dtype=float)
    return (p - frame.origin) @ frame.rotation


def scissor_local_to_world(frame: ScissorFrame, point) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    return p @ frame.rotation.T + frame.origin


def _check_alpha(geom: ScissorGeometry, alpha: float) -> None:
    if alpha < geom.alpha_min:
        raise DomainError(f"alpha={alpha} below alpha_min={geom.alpha_min}")
    if alpha > geom.alpha_max:
        raise DomainError(f"alpha={alpha} above alpha_max={geom.alpha_max}")


def scissor_width(geom: ScissorGeometry, alpha: float) -> float:
    """Base width ``w = 2 l0 cos(alpha)``."""
    _check_alpha(geom, alpha)
    return 2.0 * geom.l0 * math.cos(alpha)


def scissor_height(geom: ScissorGeometry, alpha: float) -> float:
    """Apex height above the base line, ``h = L sin(alpha)``."""
    _check_alpha(geom, alpha)
    return geom.total_length * math.sin(alpha)


def fold_angle_from_width(geom: ScissorGeometry, width):
    """Inverse of :func:`scissor_width` without range checks; NaN when ``w > 2 l0``."""
    with np.errstate(invalid="ignore"):
        return np.arccos(np.asarray(width, dtype=float) / (2.0 * geom.l0))


def slide_to_local_xy(layout: ActuatorLayout, s_A, s_B):
    """Local (x, y) of the base points A and B for slide displacements ``s_A``, ``s_B``."""
    eta = layout.eta
    s_A = np.asarray(s_A, dtype=float)
    s_B = np.asarray(s_B, dtype=float)
    A = np.stack([s_A * math.cos(eta), s_A * math.sin(eta)], axis=-1)
    B = np.stack([s_B * math.cos(math.pi - eta), s_B * math.sin(math.pi - eta)], axis=-1)
    return A, B
