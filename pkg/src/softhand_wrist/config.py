"""Run configuration: chain, calibration and scenario files plus solver settings.

A top-level config is a JSON object whose ``arm``, ``wrist``, ``calibration``,
``rotation`` and ``stacking`` entries are either file names (relative to the
config file) or embedded objects. Missing entries fall back to the shipped
defaults in ``softhand_wrist/data``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .ik import Constraints, IKOptions
from .kinematics import KinematicChain, chain_from_dict, compose_chains
from .transmission import calibrations_from_dict

WRIST_JOINTS = (6, 7)  # indices of deviation and flexion in the composite chain


class ConfigError(ValueError):
    """A configuration file is missing, unreadable or invalid."""


def data_path(name: str) -> Path:
    return Path(str(resources.files("softhand_wrist") / "data" / name))


def default_config_path() -> Path:
    return data_path("config.json")


def _read_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _section(raw: dict, key: str, base_dir: Path) -> dict:
    entry = raw.get(key, key_default(key))
    if isinstance(entry, dict):
        return entry
    if isinstance(entry, str):
        p = Path(entry)
        if not p.is_absolute():
            p = base_dir / p
            if not p.exists():
                p = data_path(entry)
        return _read_json(p)
    raise ConfigError(f"config entry {key!r} must be a file name or an object")


def key_default(key: str) -> str:
    return {
        "arm": "arm_ur5.json",
        "wrist": "wrist.json",
        "calibration": "calibration.json",
        "rotation": "rotation.json",
        "stacking": "stacking.json",
    }[key]


@dataclass(frozen=True)
class RunConfig:
    arm: KinematicChain
    wrist: KinematicChain
    calibrations: tuple
    rotation: dict
    stacking: dict
    ik: IKOptions = field(default_factory=IKOptions)
    wrist_weight: float = 0.1
    limit_margin_deg: float = 2.0
    singularity_threshold: float = 1e-4
    max_regrasps: int = 3
    retreat_mm: float = 50.0
    grasp_overhead_s: float = 2.0
    ik_restarts: int = 0
    servo_speed_ticks_s: float = 500.0
    seed: int = 0

    @property
    def chain(self) -> KinematicChain:
        return compose_chains(self.arm, self.wrist)

    def constraints(self, **kw) -> Constraints:
        base = dict(
            limit_margin=math.radians(self.limit_margin_deg),
            singularity_threshold=self.singularity_threshold,
        )
        base.update(kw)
        return Constraints(**base)

    def ik_options(self, wrist_enabled: bool) -> IKOptions:
        n = self.arm.n_joints + self.wrist.n_joints
        if wrist_enabled:
            weights = tuple([1.0] * self.arm.n_joints + [self.wrist_weight] * self.wrist.n_joints)
            return self.ik.replace(joint_weights=weights, locked_joints=())
        return self.ik.replace(joint_weights=None, locked_joints={i: 0.0 for i in range(self.arm.n_joints, n)})

    def with_seed(self, seed: int) -> "RunConfig":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw["seed"] = int(seed)
        return RunConfig(**kw)


_IK_KEYS = ("damping", "max_iters", "position_tol", "orientation_tol", "nullspace_weight", "orientation_weight", "max_step")


def config_from_dict(raw: dict, base_dir: Path | None = None, seed: int | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a JSON object")
    base_dir = Path(base_dir or ".")
    try:
        arm = chain_from_dict(_section(raw, "arm", base_dir))
        wrist = chain_from_dict(_section(raw, "wrist", base_dir))
        if wrist.n_joints != 2:
            raise ConfigError("wrist chain must have exactly two joints")
        calibs = calibrations_from_dict(_section(raw, "calibration", base_dir))
        ik_raw = raw.get("ik", {})
        unknown = set(ik_raw) - set(_IK_KEYS) - {"wrist_weight", "restarts"}
        if unknown:
            raise ConfigError(f"unknown ik settings: {sorted(unknown)}")
        ik = IKOptions(**{k: ik_raw[k] for k in _IK_KEYS if k in ik_raw})
        cons = raw.get("constraints", {})
        cfg = RunConfig(
            arm=arm,
            wrist=wrist,
            calibrations=calibs,
            rotation=_section(raw, "rotation", base_dir),
            stacking=_section(raw, "stacking", base_dir),
            ik=ik,
            wrist_weight=float(ik_raw.get("wrist_weight", 0.1)),
            limit_margin_deg=float(cons.get("limit_margin_deg", 2.0)),
            singularity_threshold=float(cons.get("singularity_threshold", 1e-4)),
            max_regrasps=int(raw.get("max_regrasps", 3)),
            retreat_mm=float(raw.get("retreat_mm", 50.0)),
            grasp_overhead_s=float(raw.get("grasp_overhead_s", 2.0)),
            ik_restarts=int(ik_raw.get("restarts", 0)),
            servo_speed_ticks_s=float(raw.get("servo_speed_ticks_s", 500.0)),
            seed=int(raw.get("seed", 0) if seed is None else seed),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    if cfg.wrist_weight <= 0:
        raise ConfigError("ik.wrist_weight must be > 0")
    return cfg


def load_config(path=None, seed: int | None = None) -> RunConfig:
    path = Path(path) if path is not None else default_config_path()
    return config_from_dict(_read_json(path), path.parent, seed)
