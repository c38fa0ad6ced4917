"""Servo tick <-> joint angle mapping and tendon displacement accounting.

The wrist cams and the tendon spools both have constant radii, so joint angle
is linear in servo position: ``angle = (ticks - center) * gain``. Commands are
open loop: a requested angle is divided by the gain and offset by the
calibrated centre, nothing more.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_array_2d, check_finite_scalar, check_unit_interval
from .hand import DEFAULT_ROM, RangeOfMotion, WristState, rom_violation

TICK_MIN, TICK_MAX = 0, 4095
TICKS_PER_REV = 4096
TICK_RESOLUTION = 2 * math.pi / TICKS_PER_REV  # rad of servo horn per tick (12-bit encoder)

ROLES = ("finger_flex", "finger_ext", "wrist_dev", "wrist_flex")


class OutOfRangeError(ValueError):
    """A command or reading falls outside the servo's tick range."""


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def geometric_gain(spool_radius_mm: float, cam_radius_mm: float) -> float:
    """Joint rad per servo tick: tendon travel spool_r * dphi turns the cam by spool_r/cam_r * dphi."""
    if spool_radius_mm <= 0 or cam_radius_mm <= 0:
        raise ValueError("radii must be > 0")
    return spool_radius_mm / cam_radius_mm * TICK_RESOLUTION


@dataclass(frozen=True)
class ServoCalibration:
    center_ticks: int = 2048
    gain: float = TICK_RESOLUTION  # rad per tick
    servo_id: int = 1
    role: str = "wrist_dev"

    def __post_init__(self):
        check_finite_scalar(self.gain, "gain")
        if self.gain == 0:
            raise ValueError("gain must be non-zero")
        if not TICK_MIN <= self.center_ticks <= TICK_MAX:
            raise ValueError(f"center_ticks {self.center_ticks} outside [{TICK_MIN}, {TICK_MAX}]")
        if self.role not in ROLES:
            raise ValueError(f"unknown servo role {self.role!r}")


def servo_to_angle(ticks: int, cal: ServoCalibration) -> float:
    if isinstance(ticks, float) and not ticks.is_integer():
        raise ValueError(f"ticks must be an integer, got {ticks}")
    ticks = int(ticks)
    if not TICK_MIN <= ticks <= TICK_MAX:
        raise OutOfRangeError(f"servo {cal.servo_id} ({cal.role}): tick {ticks} outside [{TICK_MIN}, {TICK_MAX}]")
    return (ticks - cal.center_ticks) * cal.gain


def angle_to_servo(angle: float, cal: ServoCalibration) -> int:
    """Nearest tick (half away from zero) to ``center + angle / gain``."""
    angle = check_finite_scalar(angle, "angle")
    t = cal.center_ticks + round_half_away(angle / cal.gain)
    if not TICK_MIN <= t <= TICK_MAX:
        raise OutOfRangeError(
            f"servo {cal.servo_id} ({cal.role}): {math.degrees(angle):.3f} deg maps to tick {t}, "
            f"outside [{TICK_MIN}, {TICK_MAX}]"
        )
    return t


@dataclass(frozen=True)
class TransmissionConfig:
    """``mode`` is "sheathed" or "unsheathed". ``coupling`` (mm/rad) only acts unsheathed."""

    mode: str = "sheathed"
    coupling: tuple = (2.0, 5.0)
    full_stroke_mm: float = 40.0
    cam_radius_mm: float = 10.0
    spool_radius_mm: float = 10.0

    def __post_init__(self):
        if self.mode not in ("sheathed", "unsheathed"):
            raise ValueError(f"mode must be 'sheathed' or 'unsheathed', got {self.mode!r}")
        if self.cam_radius_mm <= 0 or self.spool_radius_mm <= 0:
            raise ValueError("radii must be > 0")
        if len(self.coupling) != 2:
            raise ValueError("coupling needs one coefficient per wrist joint")

    @property
    def effective_coupling(self) -> tuple:
        # the sheath ends move with the wrist, so the tendon path length is constant
        return (0.0, 0.0) if self.mode == "sheathed" else tuple(float(k) for k in self.coupling)

    @property
    def gain(self) -> float:
        return geometric_gain(self.spool_radius_mm, self.cam_radius_mm)


def finger_tendon_displacement(s: float, w: WristState, cfg: TransmissionConfig) -> tuple[float, float]:
    """(flexor, extensor) tendon displacement in mm at synergy ``s`` and wrist state ``w``."""
    s = check_unit_interval(s, "s")
    t1 = check_finite_scalar(w.theta1, "theta1")
    t2 = check_finite_scalar(w.theta2, "theta2")
    k1, k2 = cfg.effective_coupling
    wrist_term = k1 * t1 + k2 * t2
    return s * cfg.full_stroke_mm + wrist_term, (1.0 - s) * cfg.full_stroke_mm - wrist_term


class RomError(ValueError):
    """Requested wrist pose lies outside the range of motion."""


def _by_role(calibs) -> dict:
    out = {c.role: c for c in calibs}
    for role in ("wrist_dev", "wrist_flex"):
        if role not in out:
            raise ValueError(f"no calibration for role {role!r}")
    return out


def wrist_command(theta1: float, theta2: float, calibs, rom: RangeOfMotion = DEFAULT_ROM) -> dict:
    """Open-loop tick targets {servo_id: tick} for the two wrist servos."""
    w = WristState(check_finite_scalar(theta1, "theta1"), check_finite_scalar(theta2, "theta2"))
    problem = rom_violation(w, rom)
    if problem:
        raise RomError(f"wrist command rejected: {problem}")
    cal = _by_role(calibs)
    dev, flex = cal["wrist_dev"], cal["wrist_flex"]
    return {
        dev.servo_id: angle_to_servo(w.theta1, dev),
        flex.servo_id: angle_to_servo(w.theta2, flex),
    }


def default_calibrations(gain: float = TICK_RESOLUTION, center: int = 2048) -> tuple:
    return tuple(ServoCalibration(center, gain, servo_id=i + 1, role=r) for i, r in enumerate(ROLES))


def calibrations_from_dict(spec: dict) -> tuple:
    """Calibration file: {"servos": [{"id", "role", "center_ticks", "gain_rad_per_tick"}, ...]}."""
    servos = spec.get("servos")
    if not servos:
        raise ValueError("calibration file needs a non-empty 'servos' list")
    out = []
    for s in servos:
        out.append(
            ServoCalibration(
                center_ticks=int(s["center_ticks"]),
                gain=float(s["gain_rad_per_tick"]),
                servo_id=int(s["id"]),
                role=s["role"],
            )
        )
    ids = [c.servo_id for c in out]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate servo ids in calibration")
    return tuple(out)


def load_calibrations(path) -> tuple:
    with open(path, encoding="utf-8") as fh:
        return calibrations_from_dict(json.load(fh))


class ServoTransmission(TransformerMixin, BaseEstimator):
    """Joint angles (n, k) in rad <-> servo ticks (n, k), one column per calibration.

    ``transform`` rounds to the nearest tick; ``inverse_transform`` is exact.
    """

    def __init__(self, calibrations=None):
        self.calibrations = calibrations

    def fit(self, X=None, y=None):
        cal = tuple(self.calibrations) if self.calibrations is not None else default_calibrations()
        if not cal:
            raise ValueError("at least one calibration is required")
        self.calibrations_ = cal
        self.n_features_in_ = len(cal)
        return self

    def transform(self, X):
        check_is_fitted(self, "calibrations_")
        X = check_array_2d(X, self.n_features_in_)
        return np.array([[angle_to_servo(a, c) for a, c in zip(row, self.calibrations_)] for row in X], dtype=int)

    def inverse_transform(self, X):
        check_is_fitted(self, "calibrations_")
        X = np.asarray(X)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return np.array([[servo_to_angle(int(t), c) for t, c in zip(row, self.calibrations_)] for row in X])
