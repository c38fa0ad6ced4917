"""Wrist and hand model of the SoftHand-W: 2-DoF RR wrist, hand constants, synergy.

Wrist joint 1 is ulnar/radial deviation, joint 2 is flexion/extension. The
palm centre sits 34 mm past the deviation axis (between the two axes) and
48 mm past the flexion axis.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _svg
from ._validation import check_array_2d, check_finite_scalar, check_unit_interval
from .kinematics import DHParam, KinematicChain, Transform, forward_kinematics

DEVIATION_OFFSET_MM = 34.0
PALM_OFFSET_MM = 48.0

WRIST_ROWS = (
    DHParam(a=DEVIATION_OFFSET_MM, alpha=math.pi / 2, d=0.0, theta_offset=0.0),
    DHParam(a=PALM_OFFSET_MM, alpha=0.0, d=0.0, theta_offset=0.0),
)

# 12-bit servo at 500 ticks/s through a 1:1 spool/cam ratio; see transmission defaults
DEFAULT_WRIST_SPEED = 500 * 2 * math.pi / 4096


@dataclass(frozen=True)
class RangeOfMotion:
    """Symmetric wrist limits in degrees."""

    deviation_deg: float = 30.0
    flexion_deg: float = 90.0

    @property
    def limits(self) -> np.ndarray:
        d, f = math.radians(self.deviation_deg), math.radians(self.flexion_deg)
        return np.array([[-d, d], [-f, f]])


DEFAULT_ROM = RangeOfMotion()
# repositioned fastening bolts free the deviation cams to 45 degrees
EXTENDED_ROM = RangeOfMotion(deviation_deg=45.0, flexion_deg=90.0)


@dataclass(frozen=True)
class WristState:
    theta1: float  # deviation, rad
    theta2: float  # flexion/extension, rad

    @classmethod
    def from_degrees(cls, theta1_deg: float, theta2_deg: float) -> "WristState":
        return cls(math.radians(theta1_deg), math.radians(theta2_deg))

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2])


def wrist_chain(rom: RangeOfMotion = DEFAULT_ROM, speed: float = DEFAULT_WRIST_SPEED) -> KinematicChain:
    """The bare two-row wrist chain, base at the deviation axis, tool at the palm centre."""
    return KinematicChain(WRIST_ROWS, rom.limits, [speed, speed], name="wrist")


_WRIST = wrist_chain()
_ROM_TOL = 1e-12


def validate_rom(w: WristState, rom: RangeOfMotion = DEFAULT_ROM) -> bool:
    t1 = check_finite_scalar(w.theta1, "theta1")
    t2 = check_finite_scalar(w.theta2, "theta2")
    return bool(
        abs(t1) <= math.radians(rom.deviation_deg) + _ROM_TOL
        and abs(t2) <= math.radians(rom.flexion_deg) + _ROM_TOL
    )


def rom_violation(w: WristState, rom: RangeOfMotion = DEFAULT_ROM) -> str | None:
    """Name the violated limit, or None when the state is inside the ROM."""
    if abs(w.theta1) > math.radians(rom.deviation_deg) + _ROM_TOL:
        return f"deviation |theta1| <= {rom.deviation_deg:g} deg (got {math.degrees(w.theta1):.3f})"
    if abs(w.theta2) > math.radians(rom.flexion_deg) + _ROM_TOL:
        return f"flexion |theta2| <= {rom.flexion_deg:g} deg (got {math.degrees(w.theta2):.3f})"
    return None


def wrist_fk(w: WristState) -> Transform:
    """Palm-centre pose relative to the wrist base. ROM is not enforced."""
    return forward_kinematics(_WRIST, [w.theta1, w.theta2])


# -- hand -------------------------------------------------------------------

FINGERS = ("thumb", "index", "middle", "ring", "little")
FINGER_JOINTS = ("MCP", "PIP", "DIP")


@dataclass(frozen=True)
class HandGeometry:
    finger_length_mm: float = 81.6
    hand_height_mm: float = 164.6
    # degrees from the vertical
    finger_base_angles_deg: tuple = (
        ("thumb", -146.8),
        ("index", -10.0),
        ("middle", 0.0),
        ("ring", 8.0),
        ("little", 12.2),
    )
    wrist_height_mm: float = 54.5
    wrist_width_mm: float = 69.3
    wrist_depth_mm: float = 41.0

    def base_angle(self, finger: str) -> float:
        return dict(self.finger_base_angles_deg)[finger]


HAND = HandGeometry()

DEFAULT_JOINT_MAX_DEG = (90.0, 100.0, 80.0)


def synergy_expand(s: float, joint_max_deg=DEFAULT_JOINT_MAX_DEG) -> np.ndarray:
    """Map the synergy value s (0 open, 1 closed) to 15 joint angles in rad.

    Order: fingers thumb..little, each (MCP, PIP, DIP).
    """
    s = check_unit_interval(s, "s")
    per_finger = np.radians(np.asarray(joint_max_deg, dtype=float))
    if per_finger.shape != (3,) or np.any(per_finger < 0):
        raise ValueError("joint_max_deg must be three non-negative angles")
    return s * np.tile(per_finger, len(FINGERS))


@dataclass(frozen=True)
class HandState:
    synergy: float
    joint_angles: np.ndarray = field(repr=False)

    @classmethod
    def from_synergy(cls, s: float, joint_max_deg=DEFAULT_JOINT_MAX_DEG) -> "HandState":
        return cls(float(s), synergy_expand(s, joint_max_deg))


# -- workspace --------------------------------------------------------------


def rom_grid(step_deg: float, rom: RangeOfMotion = DEFAULT_ROM) -> np.ndarray:
    """Wrist angle grid (deg): multiples of ``step_deg`` plus both ROM limits, per joint."""
    step = check_finite_scalar(step_deg, "step_deg")
    if not step > 0.0:
        raise ValueError(f"step must be > 0, got {step}")

    def axis(limit: float) -> np.ndarray:
        k = math.floor(limit / step + 1e-9)
        vals = np.arange(-k, k + 1) * step
        vals = np.concatenate([vals, [-limit, limit]])
        return np.unique(np.round(vals, 9))

    t1, t2 = axis(rom.deviation_deg), axis(rom.flexion_deg)
    g1, g2 = np.meshgrid(t1, t2, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def _palm_points(angles_rad: np.ndarray) -> np.ndarray:
    return np.array([wrist_fk(WristState(a, b)).translation for a, b in angles_rad])


def palm_workspace(step_deg: float, rom: RangeOfMotion = DEFAULT_ROM) -> np.ndarray:
    """Palm-centre points (mm) over the ROM grid, sorted lexicographically by (x, y, z)."""
    step = check_finite_scalar(step_deg, "step_deg")
    if not 0.0 < step:
        raise ValueError(f"step must be > 0, got {step}")
    pts = _palm_points(np.radians(rom_grid(step, rom)))
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    return pts[order]


class PalmWorkspace(TransformerMixin, BaseEstimator):
    """Palm-centre workspace sampler.

    ``fit`` samples the ROM grid (``grid_deg_``, ``points_``); ``transform`` maps
    wrist angles (n, 2) in rad to palm-centre positions (n, 3) in mm.
    """

    def __init__(self, step_deg: float = 5.0, deviation_deg: float = 30.0, flexion_deg: float = 90.0):
        self.step_deg = step_deg
        self.deviation_deg = deviation_deg
        self.flexion_deg = flexion_deg

    def fit(self, X=None, y=None):
        step = check_finite_scalar(self.step_deg, "step_deg")
        if not 0.0 < step <= 10.0:
            raise ValueError(f"step_deg must lie in (0, 10], got {step}")
        rom = RangeOfMotion(self.deviation_deg, self.flexion_deg)
        self.grid_deg_ = rom_grid(step, rom)
        self.points_ = _palm_points(np.radians(self.grid_deg_))
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "points_")
        X = check_array_2d(X, 2)
        return _palm_points(X)

    def extremes(self) -> dict:
        check_is_fitted(self, "points_")
        norms = np.linalg.norm(self.points_, axis=1)
        return {
            "max_reach_mm": float(norms.max()),
            "z_min_mm": float(self.points_[:, 2].min()),
            "z_max_mm": float(self.points_[:, 2].max()),
        }

    def to_csv(self, path) -> None:
        check_is_fitted(self, "points_")
        write_workspace_csv(path, self.grid_deg_, self.points_)


WORKSPACE_HEADER = ("theta1_deg", "theta2_deg", "x_mm", "y_mm", "z_mm")


def write_workspace_csv(path, grid_deg: np.ndarray, points: np.ndarray) -> None:
    rows = sorted(
        zip(map(tuple, np.round(grid_deg, 9)), map(tuple, points)),
        key=lambda r: r[0],
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WORKSPACE_HEADER)
        for (t1, t2), (x, y, z) in rows:
            w.writerow([f"{v:.6f}" for v in (t1, t2, _nz(x), _nz(y), _nz(z))])


def _nz(v: float) -> float:
    # avoid "-0.000000" in fixed-point output
    return 0.0 if abs(v) < 5e-7 else float(v)


def workspace_svg(points: np.ndarray) -> str:
    """Side-by-side xy and xz scatter projections."""
    pts = np.asarray(points, dtype=float)
    return _svg.projections(
        [("xy", pts[:, [0, 1]]), ("xz", pts[:, [0, 2]])],
        title="palm centre workspace (mm)",
        mode="points",
    )


def write_workspace_svg(path, points) -> None:
    Path(path).write_text(workspace_svg(points), encoding="utf-8")


# -- ROM against the functional ideal ----------------------------------------

# Ideal functional ROM (deg). The source lists the four values without naming
# which deviation is which; the flexion, extension, ulnar, radial order is assumed.
IDEAL_ROM_DEG = (("flexion", 54.0), ("extension", 60.0), ("ulnar", 40.0), ("radial", 17.0))


def ideal_rom_coverage(rom: RangeOfMotion = DEFAULT_ROM) -> list[dict]:
    achieved = {
        "flexion": rom.flexion_deg,
        "extension": rom.flexion_deg,
        "ulnar": rom.deviation_deg,
        "radial": rom.deviation_deg,
    }
    return [
        {
            "direction": name,
            "achieved_deg": achieved[name],
            "ideal_deg": ideal,
            "met": achieved[name] >= ideal,
            "mapping_assumed": name in ("ulnar", "radial"),
        }
        for name, ideal in IDEAL_ROM_DEG
    ]
