"""Serial-chain kinematics using distal (standard) Denavit-Hartenberg parameters.

Matrix order for one joint, with ``theta = q + theta_offset``::

    A_i = Rz(theta) @ Tz(d) @ Tx(a) @ Rx(alpha)

Joint ``i`` rotates about the z axis of frame ``i - 1``. A chain may carry fixed
transforms before the first joint (``base``), after the last joint (``tool``)
and between joints (produced by :func:`compose_chains`).

Units: millimetres and radians everywhere in this module.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._validation import check_finite_scalar, check_rotation, check_vector

_PI_TOL = 1e-12


class Transform:
    """Rigid transform stored as a 4x4 homogeneous matrix (read-only)."""

    __slots__ = ("_m",)

    def __init__(self, rotation=None, translation=None):
        m = np.eye(4)
        if rotation is not None:
            m[:3, :3] = np.asarray(rotation, dtype=float)
        if translation is not None:
            m[:3, 3] = check_vector(translation, 3, "translation")
        m.setflags(write=False)
        self._m = m

    @classmethod
    def from_matrix(cls, matrix) -> "Transform":
        m = np.asarray(matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def identity(cls) -> "Transform":
        return cls()

    @classmethod
    def rot_x(cls, angle: float) -> "Transform":
        return cls(rot_x(angle))

    @classmethod
    def rot_z(cls, angle: float) -> "Transform":
        return cls(rot_z(angle))

    @classmethod
    def from_rpy(cls, rpy, translation=None) -> "Transform":
        """Build from roll/pitch/yaw (rad), applied as Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
        r, p, y = check_vector(rpy, 3, "rpy")
        return cls(rot_z(y) @ rot_y(p) @ rot_x(r), translation)

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def rotation(self) -> np.ndarray:
        return self._m[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self._m[:3, 3]

    def __matmul__(self, other: "Transform") -> "Transform":
        if not isinstance(other, Transform):
            return NotImplemented
        return Transform.from_matrix(self._m @ other._m)

    def inverse(self) -> "Transform":
        R = self.rotation
        return Transform(R.T, -R.T @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Map points (3,) or (n, 3) through the transform."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def allclose(self, other: "Transform", atol: float = 1e-9) -> bool:
        return bool(np.allclose(self._m, other._m, rtol=0.0, atol=atol))

    def is_proper(self, tol: float = 1e-9) -> bool:
        try:
            check_rotation(self.rotation, tol)
        except ValueError:
            return False
        return True

    def rpy(self) -> np.ndarray:
        """Inverse of :meth:`from_rpy` (yaw-pitch-roll, ZYX)."""
        R = self.rotation
        pitch = math.atan2(-R[2, 0], math.hypot(R[0, 0], R[1, 0]))
        if abs(math.cos(pitch)) < 1e-12:
            roll = 0.0
            yaw = math.atan2(-R[0, 1], R[1, 1])
        else:
            roll = math.atan2(R[2, 1], R[2, 2])
            yaw = math.atan2(R[1, 0], R[0, 0])
        return np.array([roll, pitch, yaw])

    def __repr__(self) -> str:
        t = np.array2string(self.translation, precision=4, suppress_small=True)
        return f"Transform(translation={t})"


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle(R) -> np.ndarray:
    """Rotation vector (axis * angle, rad) of a rotation matrix."""
    R = np.asarray(R, dtype=float)
    cos_t = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = math.acos(cos_t)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-7:
        return 0.5 * w
    if math.pi - theta < 1e-4:
        # near pi the antisymmetric part vanishes; recover the axis from R + I
        B = (R + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k] / math.sqrt(max(B[k, k], 1e-300))
        if np.dot(axis, w) < 0:
            axis = -axis
        return axis / np.linalg.norm(axis) * theta
    return w * (theta / (2.0 * math.sin(theta)))


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit ``axis``."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def pose_error(target: Transform, current: Transform) -> np.ndarray:
    """Stacked [position (mm), orientation (rad)] error, both in the base frame."""
    dp = target.translation - current.translation
    dw = axis_angle(target.rotation @ current.rotation.T)
    return np.concatenate([dp, dw])


def _in_half_open_pi(x: float) -> bool:
    return -math.pi + _PI_TOL < x <= math.pi + _PI_TOL


@dataclass(frozen=True)
class DHParam:
    """One distal DH row: ``a`` and ``d`` in mm, ``alpha`` and ``theta_offset`` in rad."""

    a: float
    alpha: float
    d: float
    theta_offset: float = 0.0

    def __post_init__(self):
        for name in ("a", "alpha", "d", "theta_offset"):
            check_finite_scalar(getattr(self, name), name)
        if self.a < 0:
            raise ValueError(f"a must be >= 0, got {self.a}")
        if not _in_half_open_pi(self.alpha):
            raise ValueError(f"alpha must lie in (-pi, pi], got {self.alpha}")
        if not _in_half_open_pi(self.theta_offset):
            raise ValueError(f"theta_offset must lie in (-pi, pi], got {self.theta_offset}")


def _dh_matrix(a: float, alpha: float, d: float, theta: float) -> np.ndarray:
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def dh_transform(row: DHParam, q: float) -> Transform:
    """Rz(q + theta_offset) @ Tz(d) @ Tx(a) @ Rx(alpha)."""
    q = check_finite_scalar(q, "q")
    return Transform.from_matrix(_dh_matrix(row.a, row.alpha, row.d, q + row.theta_offset))


@dataclass(frozen=True)
class KinematicChain:
    """Ordered DH rows with per-joint limits (rad) and maximum speeds (rad/s).

    ``fixed`` holds ``n + 1`` constant transforms: ``fixed[0]`` precedes joint 1,
    ``fixed[i]`` follows joint ``i``. Defaults to identities.
    """

    rows: tuple
    joint_limits: np.ndarray
    joint_speeds: np.ndarray
    fixed: tuple = field(default=())
    name: str = ""

    def __post_init__(self):
        rows = tuple(self.rows)
        if not rows:
            raise ValueError("a kinematic chain needs at least one row")
        if not all(isinstance(r, DHParam) for r in rows):
            raise TypeError("rows must be DHParam instances")
        n = len(rows)
        limits = np.array(self.joint_limits, dtype=float).reshape(n, 2)
        if not np.all(np.isfinite(limits)) or np.any(limits[:, 0] >= limits[:, 1]):
            raise ValueError("joint limits must be finite with min < max")
        speeds = check_vector(self.joint_speeds, n, "joint_speeds").copy()
        if np.any(speeds <= 0):
            raise ValueError("joint speeds must be > 0")
        fixed = tuple(self.fixed) or tuple(Transform() for _ in range(n + 1))
        if len(fixed) != n + 1 or not all(isinstance(f, Transform) for f in fixed):
            raise ValueError(f"fixed must hold {n + 1} Transform objects")
        limits.setflags(write=False)
        speeds.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "joint_limits", limits)
        object.__setattr__(self, "joint_speeds", speeds)
        object.__setattr__(self, "fixed", fixed)

    @property
    def n_joints(self) -> int:
        return len(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def base(self) -> Transform:
        return self.fixed[0]

    @property
    def tool(self) -> Transform:
        return self.fixed[-1]

    def with_fixed(self, base: Transform | None = None, tool: Transform | None = None) -> "KinematicChain":
        fixed = list(self.fixed)
        if base is not None:
            fixed[0] = base
        if tool is not None:
            fixed[-1] = tool
        return KinematicChain(self.rows, self.joint_limits, self.joint_speeds, tuple(fixed), self.name)

    def within_limits(self, q, margin: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        lo, hi = self.joint_limits[:, 0] + margin, self.joint_limits[:, 1] - margin
        return bool(np.all(q >= lo - 1e-12) and np.all(q <= hi + 1e-12))

    def frames(self, q) -> list[np.ndarray]:
        """4x4 matrices of frames 0..n, then the tool frame.

        Frame ``i < n`` already includes the fixed transform that follows joint ``i``.
        """
        q = check_vector(q, self.n_joints, "q")
        T = self.fixed[0].matrix.copy()
        out = [T]
        for i, row in enumerate(self.rows):
            T = T @ _dh_matrix(row.a, row.alpha, row.d, q[i] + row.theta_offset)
            if i + 1 < self.n_joints:
                T = T @ self.fixed[i + 1].matrix
            out.append(T)
        out.append(T @ self.fixed[-1].matrix)
        return out


def forward_kinematics(chain: KinematicChain, q) -> Transform:
    """Base frame to distal (tool) frame."""
    return Transform.from_matrix(chain.frames(q)[-1])


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Geometric Jacobian (6 x n) of the tool-frame origin.

    Rows 0-2: linear velocity in mm/rad; rows 3-5: angular velocity in rad/rad,
    both expressed in the base frame.
    """
    F = chain.frames(q)
    p_tool = F[-1][:3, 3]
    n = chain.n_joints
    J = np.empty((6, n))
    for i in range(n):
        # F[i] already includes fixed[i], so its z axis is joint i+1's axis
        z = F[i][:3, 2]
        J[:3, i] = np.cross(z, p_tool - F[i][:3, 3])
        J[3:, i] = z
    return J


def compose_chains(proximal: KinematicChain, distal: KinematicChain) -> KinematicChain:
    """Mount ``distal`` on the tool frame of ``proximal``."""
    fixed = proximal.fixed[:-1] + (proximal.tool @ distal.base,) + distal.fixed[1:]
    return KinematicChain(
        proximal.rows + distal.rows,
        np.vstack([proximal.joint_limits, distal.joint_limits]),
        np.concatenate([proximal.joint_speeds, distal.joint_speeds]),
        fixed,
        name="+".join(x for x in (proximal.name, distal.name) if x),
    )


# -- chain definition files -------------------------------------------------
#
# JSON object:
#   name: str (optional)
#   base, tool: {"translation_mm": [x, y, z], "rpy_deg": [roll, pitch, yaw]} (optional)
#   rows: list of {a_mm, alpha_deg, d_mm, theta_offset_deg,
#                  limit_min_deg, limit_max_deg, speed_deg_s}


def _transform_from_dict(d: dict | None) -> Transform:
    if not d:
        return Transform()
    rpy = np.radians(d.get("rpy_deg", [0.0, 0.0, 0.0]))
    return Transform.from_rpy(rpy, d.get("translation_mm", [0.0, 0.0, 0.0]))


def _transform_to_dict(T: Transform) -> dict:
    return {
        "translation_mm": [round(float(v), 9) for v in T.translation],
        "rpy_deg": [round(float(v), 9) for v in np.degrees(T.rpy())],
    }


ROW_KEYS = ("a_mm", "alpha_deg", "d_mm", "theta_offset_deg", "limit_min_deg", "limit_max_deg", "speed_deg_s")


def chain_from_dict(spec: dict) -> KinematicChain:
    try:
        raw_rows = spec["rows"]
    except (KeyError, TypeError):
        raise ValueError("chain definition needs a 'rows' list") from None
    rows, limits, speeds = [], [], []
    for k, r in enumerate(raw_rows, start=1):
        missing = [key for key in ROW_KEYS if key not in r]
        if missing:
            raise ValueError(f"row {k}: missing keys {missing}")
        rows.append(
            DHParam(
                a=float(r["a_mm"]),
                alpha=math.radians(r["alpha_deg"]),
                d=float(r["d_mm"]),
                theta_offset=math.radians(r["theta_offset_deg"]),
            )
        )
        limits.append((math.radians(r["limit_min_deg"]), math.radians(r["limit_max_deg"])))
        speeds.append(math.radians(r["speed_deg_s"]))
    n = len(rows)
    if n == 0:
        raise ValueError("chain definition has no rows")
    fixed = [_transform_from_dict(spec.get("base"))]
    fixed += [Transform() for _ in range(n - 1)]
    fixed.append(_transform_from_dict(spec.get("tool")))
    return KinematicChain(tuple(rows), limits, speeds, tuple(fixed), name=spec.get("name", ""))


def chain_to_dict(chain: KinematicChain) -> dict:
    if any(not f.allclose(Transform()) for f in chain.fixed[1:-1]):
        raise ValueError("chains with interior fixed transforms cannot be serialised")
    rows = []
    for row, (lo, hi), v in zip(chain.rows, chain.joint_limits, chain.joint_speeds):
        rows.append(
            {
                "a_mm": row.a,
                "alpha_deg": math.degrees(row.alpha),
                "d_mm": row.d,
                "theta_offset_deg": math.degrees(row.theta_offset),
                "limit_min_deg": math.degrees(lo),
                "limit_max_deg": math.degrees(hi),
                "speed_deg_s": math.degrees(v),
            }
        )
    return {
        "name": chain.name,
        "base": _transform_to_dict(chain.base),
        "tool": _transform_to_dict(chain.tool),
        "rows": rows,
    }


def load_chain(path) -> KinematicChain:
    with open(path, encoding="utf-8") as fh:
        return chain_from_dict(json.load(fh))


def save_chain(chain: KinematicChain, path) -> None:
    Path(path).write_text(json.dumps(chain_to_dict(chain), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def chain_from_rows(rows: Sequence[DHParam], limits=None, speeds=None, name: str = "") -> KinematicChain:
    """Convenience constructor; unlimited joints default to +-2 pi at pi rad/s."""
    n = len(rows)
    if limits is None:
        limits = [(-2 * math.pi, 2 * math.pi)] * n
    if speeds is None:
        speeds = [math.pi] * n
    return KinematicChain(tuple(rows), limits, speeds, name=name)
