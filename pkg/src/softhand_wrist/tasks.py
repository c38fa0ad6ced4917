"""Disc-rotation and cube-stacking scenarios, run with the wrist actuated or locked.

World frame: robot base at the origin, z up, table plane at ``table_z_mm``.
The bench rectangle is centred at ``bench.center_mm`` with its depth along +y.
Tool frame (palm centre): x along the fingers, z along the palm normal. A
top-down grasp therefore has tool z = -Z.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _svg
from .config import WRIST_JOINTS, RunConfig, load_config
from .ik import (
    Box,
    ConfigChangeEvent,
    Constraints,
    IKOptions,
    check_configuration,
    classify_failure,
    joint_travel,
    solve_ik,
    time_proxy,
    track_trajectory,
)
from .kinematics import KinematicChain, Transform, axis_angle, forward_kinematics, rot_z, rotation_about

AXES = {"yaw": (0.0, 0.0, 1.0), "roll": (0.0, 1.0, 0.0), "pitch": (1.0, 0.0, 0.0)}
REFERENCE_CUBE_AXES = ("yaw", "yaw", "roll", "roll", "pitch", "pitch")

# tool x = +Y (fingers pointing away from the robot), tool z = -Z
TOP_DOWN = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])

# frames watched for table / obstacle clearance: last arm joint, wrist base, palm
WATCHED_FRAMES = (5, 6, -1)

ATTACH_SYNERGY = 0.7
CAPTURE_RADIUS_MM = 30.0
PLACE_POS_TOL_MM = 5.0
PLACE_ANGLE_TOL_DEG = 5.0


class TaskError(ValueError):
    """The scenario is malformed or its start configuration is unreachable."""


def top_down(yaw_deg: float = 0.0) -> np.ndarray:
    return rot_z(math.radians(yaw_deg)) @ TOP_DOWN


# -- scenario ------------------------------------------------------------------


@dataclass(frozen=True)
class Bench:
    center_mm: tuple = (0.0, 420.0)
    width_mm: float = 100.0
    depth_mm: float = 130.0
    approach_margin_mm: float = 60.0

    def world(self, x: float, y: float) -> np.ndarray:
        return np.array([self.center_mm[0] + x, self.center_mm[1] + y])

    def tool_bounds(self) -> tuple:
        m = self.approach_margin_mm
        cx, cy = self.center_mm
        hw, hd = self.width_mm / 2 + m, self.depth_mm / 2 + m
        return ((cx - hw, cx + hw), (cy - hd, cy + hd))

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        """Bench coordinates (relative to the centre)."""
        return abs(x) <= self.width_mm / 2 + margin and abs(y) <= self.depth_mm / 2 + margin

    @classmethod
    def from_dict(cls, d: dict) -> "Bench":
        return cls(
            center_mm=tuple(float(v) for v in d.get("center_mm", (0.0, 420.0))),
            width_mm=float(d.get("width_mm", 100.0)),
            depth_mm=float(d.get("depth_mm", 130.0)),
            approach_margin_mm=float(d.get("approach_margin_mm", 60.0)),
        )


@dataclass(frozen=True)
class CubeSpec:
    id: int
    start_mm: tuple  # bench coordinates of the cube centre
    axis: str
    angle_deg: float
    slot_mm: tuple  # bench coordinates of the stack slot
    layer: int  # 1 = on the table

    def __post_init__(self):
        if self.axis not in AXES:
            raise TaskError(f"cube {self.id}: axis must be one of {sorted(AXES)}, got {self.axis!r}")
        if self.layer < 1:
            raise TaskError(f"cube {self.id}: layer must be >= 1")


@dataclass(frozen=True)
class TaskScenario:
    """Declarative description of one task under one wrist condition.

    Rotation scenarios use the ``disc_*``/``rotation_*`` fields, stacking
    scenarios use ``cube_size_mm`` and ``cubes``. ``seed_deg`` is the arm
    configuration (6 joints) used as the initial guess for the start pose.
    """

    kind: str
    wrist_enabled: bool = True
    bench: Bench = field(default_factory=Bench)
    seed_deg: tuple = (0.0,) * 6
    grasp_yaw_deg: float = 0.0
    table_z_mm: float = 0.0
    # rotation
    disc_diameter_mm: float = 90.0
    disc_thickness_mm: float = 20.0
    disc_top_mm: float = 60.0
    rotation_deg: float = 90.0
    direction: str = "anticlockwise"
    rotation_step_deg: float = 2.0
    wrist_flexion_deg: float = 88.0  # flexion held during the turn; deviation stays free
    palm_height_mm: float = 40.0  # palm centre above the disc top in the flexed grasp
    # stacking
    cube_size_mm: float = 50.0
    cubes: tuple = ()
    home_height_mm: float = 200.0
    approach_mm: float = 60.0
    transport_steps: int = 30
    descent_step_mm: float = 5.0
    raise_step_mm: float = 10.0
    max_raise_mm: float = 150.0
    clearance_mm: float = 20.0

    def __post_init__(self):
        if self.kind not in ("rotation", "stacking"):
            raise TaskError(f"kind must be 'rotation' or 'stacking', got {self.kind!r}")
        if self.direction not in ("clockwise", "anticlockwise"):
            raise TaskError(f"direction must be 'clockwise' or 'anticlockwise', got {self.direction!r}")
        if len(self.seed_deg) != 6:
            raise TaskError("seed_deg needs six arm joint angles")
        if self.rotation_step_deg <= 0 or self.transport_steps < 1 or self.descent_step_mm <= 0:
            raise TaskError("step sizes must be positive")
        if self.rotation_deg < 0:
            raise TaskError("rotation_deg must be >= 0; use 'direction' for the sense")
        for c in self.cubes:
            for label, (x, y) in (("start", c.start_mm), ("slot", c.slot_mm)):
                if not self.bench.contains(x, y):
                    raise TaskError(f"cube {c.id}: {label} position ({x:g}, {y:g}) lies outside the bench")

    @property
    def sign(self) -> float:
        # anticlockwise seen from above = positive rotation about +Z
        return 1.0 if self.direction == "anticlockwise" else -1.0

    @classmethod
    def from_dict(cls, d: dict, wrist_enabled: bool = True) -> "TaskScenario":
        d = dict(d)
        kind = d.pop("kind", None)
        d.pop("note", None)
        try:
            bench = Bench.from_dict(d.pop("bench", {}))
            disc = d.pop("disc", {})
            cubes = tuple(
                CubeSpec(
                    id=int(c["id"]),
                    start_mm=tuple(float(v) for v in c["start_mm"]),
                    axis=c["axis"],
                    angle_deg=float(c["angle_deg"]),
                    slot_mm=tuple(float(v) for v in c["slot_mm"]),
                    layer=int(c["layer"]),
                )
                for c in d.pop("cubes", [])
            )
            kw = {k: v for k, v in d.items()}
            if "seed_deg" in kw:
                kw["seed_deg"] = tuple(float(v) for v in kw["seed_deg"])
            for src, dst in (("diameter_mm", "disc_diameter_mm"), ("thickness_mm", "disc_thickness_mm"), ("top_mm", "disc_top_mm")):
                if src in disc:
                    kw[dst] = float(disc[src])
            return cls(kind=kind, wrist_enabled=wrist_enabled, bench=bench, cubes=cubes, **kw)
        except TaskError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise TaskError(f"invalid scenario: {exc}") from None


# -- grasp ---------------------------------------------------------------------


@dataclass
class GraspAttachment:
    """Rigid palm-object coupling: object pose = palm pose @ offset while attached."""

    object_id: str
    offset: Transform = field(default_factory=Transform)
    attached: bool = False

    def attach(self, palm: Transform, obj: Transform, synergy: float = 1.0,
               threshold: float = ATTACH_SYNERGY, capture_mm: float = CAPTURE_RADIUS_MM) -> bool:
        if synergy < threshold:
            return False
        if np.linalg.norm(obj.translation - palm.translation) > capture_mm:
            return False
        self.offset = palm.inverse() @ obj
        self.attached = True
        return True

    def object_pose(self, palm: Transform) -> Transform:
        if not self.attached:
            raise RuntimeError(f"object {self.object_id} is not attached")
        return palm @ self.offset

    def palm_for(self, obj: Transform) -> Transform:
        return obj @ self.offset.inverse()

    def release(self) -> None:
        self.attached = False


# -- report --------------------------------------------------------------------


@dataclass
class CubeOutcome:
    id: int
    axis: str
    angle_deg: float
    achieved_deg: float
    reoriented: bool
    stacked: bool
    position_error_mm: float
    orientation_error_deg: float


@dataclass
class TaskReport:
    kind: str
    wrist_enabled: bool
    path: np.ndarray
    labels: list
    tool_positions: np.ndarray
    events: list
    event_rows: list
    grasp_events: int
    time_proxy_s: float
    travel_cumulative: np.ndarray
    travel_max: np.ndarray
    aborted: bool = False
    completed: bool = True
    rotation_achieved_deg: float = 0.0
    cubes: list = field(default_factory=list)

    @property
    def config_change_count(self) -> int:
        return len(self.events)

    @property
    def success(self) -> bool:
        if self.aborted:
            return False
        if self.kind == "rotation":
            return self.completed
        return all(c.reoriented and c.stacked for c in self.cubes)

    @property
    def status(self) -> str:
        return "aborted" if self.aborted else ("success" if self.success else "partial")

    def counts(self) -> dict:
        return {
            "reoriented": sum(c.reoriented for c in self.cubes),
            "stacked": sum(c.stacked for c in self.cubes),
            "total": len(self.cubes),
        }

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "wrist_enabled": self.wrist_enabled,
            "status": self.status,
            "config_change_count": self.config_change_count,
            "completed": self.completed,
            "aborted": self.aborted,
            "rotation_achieved_deg": _r6(self.rotation_achieved_deg),
            "grasp_events": self.grasp_events,
            "time_proxy_s": _r6(self.time_proxy_s),
            "travel_cumulative_deg": [_r6(v) for v in np.degrees(self.travel_cumulative)],
            "travel_max_deg": [_r6(v) for v in np.degrees(self.travel_max)],
            "cubes": [
                {
                    "id": c.id,
                    "axis": c.axis,
                    "angle_deg": _r6(c.angle_deg),
                    "achieved_deg": _r6(c.achieved_deg),
                    "reoriented": c.reoriented,
                    "stacked": c.stacked,
                    "position_error_mm": _r6(c.position_error_mm),
                    "orientation_error_deg": _r6(c.orientation_error_deg),
                }
                for c in self.cubes
            ],
            "counts": self.counts(),
            "events": [dict(ev.to_dict(), row=r) for ev, r in zip(self.events, self.event_rows)],
            "path_deg": [[_r6(v) for v in row] for row in np.degrees(self.path)],
            "labels": list(self.labels),
            "tool_positions_mm": [[_r6(v) for v in row] for row in self.tool_positions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskReport":
        try:
            events = [ConfigChangeEvent(e["cause"], int(e["step"]), e.get("joint_index"), e.get("value")) for e in d["events"]]
            rows = [int(e.get("row", 0)) for e in d["events"]]
            path = np.radians(np.asarray(d["path_deg"], dtype=float))
            return cls(
                kind=d["kind"],
                wrist_enabled=bool(d["wrist_enabled"]),
                path=path.reshape(len(d["path_deg"]), -1) if len(path) else np.zeros((0, 0)),
                labels=list(d["labels"]),
                tool_positions=np.asarray(d["tool_positions_mm"], dtype=float).reshape(-1, 3),
                events=events,
                event_rows=rows,
                grasp_events=int(d["grasp_events"]),
                time_proxy_s=float(d["time_proxy_s"]),
                travel_cumulative=np.radians(np.asarray(d["travel_cumulative_deg"], dtype=float)),
                travel_max=np.radians(np.asarray(d["travel_max_deg"], dtype=float)),
                aborted=bool(d["aborted"]),
                completed=bool(d["completed"]),
                rotation_achieved_deg=float(d["rotation_achieved_deg"]),
                cubes=[CubeOutcome(**c) for c in d["cubes"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"not a task report: {exc}") from None


def _r6(v: float) -> float:
    v = round(float(v), 6)
    return 0.0 if v == 0 else v


def _finish_report(kind, wrist_enabled, chain, path, labels, tools, events, rows, grasp_events, overhead, **kw) -> TaskReport:
    P = np.asarray(path, dtype=float).reshape(-1, chain.n_joints)
    if len(P):
        cum, mx = joint_travel(P)
    else:
        cum = mx = np.zeros(chain.n_joints)
    return TaskReport(
        kind=kind,
        wrist_enabled=wrist_enabled,
        path=P,
        labels=list(labels),
        tool_positions=np.asarray(tools, dtype=float).reshape(-1, 3),
        events=list(events),
        event_rows=list(rows),
        grasp_events=grasp_events,
        time_proxy_s=time_proxy(P, chain.joint_speeds, grasp_events, overhead),
        travel_cumulative=cum,
        travel_max=mx,
        **kw,
    )


# -- shared helpers ------------------------------------------------------------


def _start_configuration(chain: KinematicChain, target: Transform, scenario: TaskScenario, config: RunConfig,
                         wrist=(0.0, 0.0)) -> np.ndarray:
    """IK from ``seed_deg`` to ``target`` with the wrist held at ``wrist`` (rad)."""
    guess = np.radians(list(scenario.seed_deg) + [0.0, 0.0])
    guess[list(WRIST_JOINTS)] = wrist
    opts = config.ik_options(False).replace(
        max_iters=max(config.ik.max_iters, 500),
        locked_joints={j: float(v) for j, v in zip(WRIST_JOINTS, wrist)},
    )
    res = solve_ik(chain, target, guess, opts)
    if not res.success:
        raise TaskError(
            f"start pose unreachable from seed_deg (position error {res.position_error:.3f} mm)"
        )
    cons = config.constraints()
    if not chain.within_limits(res.q, cons.limit_margin):
        raise TaskError("start configuration lies inside the joint-limit margin; adjust seed_deg or grasp_yaw_deg")
    return res.q


def _perturbed_retry(chain, target, q, opts, rng, restarts, scale=0.05):
    """Best of the plain solve and ``restarts`` solves from jittered seeds."""
    res = solve_ik(chain, target, q, opts)
    if res.success or restarts <= 0:
        return res
    lo, hi = chain.joint_limits[:, 0] + opts.limit_margin, chain.joint_limits[:, 1] - opts.limit_margin
    for _ in range(restarts):
        trial = np.clip(q + rng.normal(0.0, scale, size=q.shape), lo, hi)
        for i, v in opts.locked.items():
            trial[i] = v
        r = solve_ik(chain, target, trial, opts, rest=q)
        if r.success:
            return r
    return res


# -- rotation ------------------------------------------------------------------


def run_rotation_task(wrist_enabled: bool, config: RunConfig | None = None, scenario: TaskScenario | None = None) -> TaskReport:
    """Grasp the disc from above and turn it about its vertical axis.

    Wrist locked: the palm is centred on the disc with the wrist at (0, 0) and
    only the arm turns it. Wrist enabled: the hand is flexed to
    ``wrist_flexion_deg`` and the disc is taken so that its axis runs along
    the deviation axis; deviation then adds its range to the last arm
    joint before a regrasp is needed. Flexion is held during the turn.
    """
    config = config or load_config()
    sc = scenario or TaskScenario.from_dict(config.rotation, wrist_enabled)
    if sc.kind != "rotation":
        raise TaskError("run_rotation_task needs a rotation scenario")
    chain = config.chain
    centre = np.array([*sc.bench.center_mm, sc.disc_top_mm])
    disc0 = Transform(np.eye(3), centre)
    grasp_tool = Transform(top_down(sc.grasp_yaw_deg), centre)
    wrist = (0.0, 0.0)
    if wrist_enabled:
        wrist = (0.0, math.radians(sc.wrist_flexion_deg))
        hand = config.wrist.with_fixed(base=Transform())
        # wrist base keeps the orientation it has in the neutral grasp
        R_base = (grasp_tool @ forward_kinematics(hand, [0.0, 0.0]).inverse()).rotation
        local = forward_kinematics(hand, list(wrist))
        z_base = sc.disc_top_mm + sc.palm_height_mm - float((R_base @ local.translation)[2])
        grasp_tool = Transform(R_base, np.array([*sc.bench.center_mm, z_base])) @ local
    q0 = _start_configuration(chain, grasp_tool, sc, config, wrist)

    n = int(math.ceil(sc.rotation_deg / sc.rotation_step_deg - 1e-9))
    total = math.radians(sc.rotation_deg) * sc.sign
    poses = [Transform(rot_z(total * k / n if n else 0.0), centre) for k in range(n + 1)]
    cons = config.constraints(
        bench_xy=sc.bench.tool_bounds(), table_z=sc.table_z_mm, watched_frames=WATCHED_FRAMES
    )
    opts = config.ik_options(wrist_enabled)
    if wrist_enabled:
        opts = opts.replace(locked_joints={WRIST_JOINTS[1]: math.radians(sc.wrist_flexion_deg)})
    tr = track_trajectory(
        chain,
        poses,
        q0,
        opts,
        cons,
        neutral=q0,
        grasp=grasp_tool.inverse() @ disc0,
        max_regrasps=config.max_regrasps,
        retreat_mm=config.retreat_mm,
        retreat_axis=(0.0, 0.0, 1.0),  # lift clear of the disc whatever the palm direction
    )
    done = tr.completed_steps == len(poses) and not tr.aborted
    achieved = sc.rotation_deg * (max(tr.completed_steps - 1, 0) / n if n else 0.0)
    return _finish_report(
        "rotation",
        wrist_enabled,
        chain,
        tr.path,
        tr.labels,
        [T.translation for T in tr.tool_poses],
        tr.events,
        tr.event_rows,
        tr.grasp_events,
        config.grasp_overhead_s,
        aborted=tr.aborted,
        completed=done,
        rotation_achieved_deg=achieved,
    )


# -- stacking ------------------------------------------------------------------


class _Motion:
    """Accumulates the joint path of a stacking run."""

    def __init__(self, chain: KinematicChain, q0: np.ndarray, rng, restarts: int):
        self.chain = chain
        self.q = q0.copy()
        self.path = [q0.copy()]
        self.labels = ["start"]
        self.tools = [forward_kinematics(chain, q0).translation]
        self.events: list[ConfigChangeEvent] = []
        self.rows: list[int] = []
        self.rng = rng
        self.restarts = restarts

    def move(self, target: Transform, opts: IKOptions, cons: Constraints, label: str):
        """Try one step; on success record it and return None, else return the problem."""
        opts = opts.replace(limit_margin=max(opts.limit_margin, cons.limit_margin))
        res = _perturbed_retry(self.chain, target, self.q, opts, self.rng, self.restarts)
        if not res.success:
            return classify_failure(res)
        problem = check_configuration(self.chain, res.q, cons, tuple(opts.locked))
        if problem is not None:
            return problem
        self.q = res.q
        self.path.append(res.q.copy())
        self.labels.append(label)
        self.tools.append(target.translation)
        return None

    def event(self, problem, step: int) -> None:
        cause, joint_index, value = problem
        self.events.append(ConfigChangeEvent(cause, step, joint_index, value))
        self.rows.append(len(self.path) - 1)

    def line(self, start: Transform, end: Transform, steps: int, opts, cons, label):
        """Straight-line move with orientation slerp; returns the first problem or None.

        Locked joints are ramped from their current values to the locked
        values over the move rather than snapped at the first step.
        """
        R0, R1 = start.rotation, end.rotation
        w = axis_angle(R1 @ R0.T)
        ang = float(np.linalg.norm(w))
        lock_from = {i: float(self.q[i]) for i in opts.locked}
        for j in range(1, steps + 1):
            t = j / steps
            R = rotation_about(w / ang, t * ang) @ R0 if ang > 1e-12 else R1
            T = Transform(R, (1 - t) * start.translation + t * end.translation)
            step_opts = opts
            if lock_from:
                step_opts = opts.replace(
                    locked_joints={i: (1 - t) * lock_from[i] + t * v for i, v in opts.locked.items()}
                )
            problem = self.move(T, step_opts, cons, label)
            if problem is not None:
                self.event(problem, len(self.path) - 1)
                return problem
        return None


def _lift(T: Transform, dz: float) -> Transform:
    return Transform(T.rotation, T.translation + np.array([0.0, 0.0, dz]))


def _tilt_deg(R: np.ndarray) -> float:
    """Angle between world Z and the cube axis closest to it (resting-face tilt)."""
    return math.degrees(math.acos(min(1.0, float(np.max(np.abs(R[2, :]))))))


def _rotation_angle_deg(R: np.ndarray) -> float:
    return math.degrees(float(np.linalg.norm(axis_angle(R))))


def run_stacking_task(wrist_enabled: bool, config: RunConfig | None = None, scenario: TaskScenario | None = None) -> TaskReport:
    """Pick each cube from above, turn it by its required rotation, and stack it.

    Picking, lifting and retreating use the neutral wrist in both conditions;
    the wrist is only free (when enabled) while transporting, reorienting and
    placing. A blocked reorientation step keeps the rotation reached so far; a
    step blocked by the table or the stack raises the rest of the transport.
    A cube released more than the placement tolerance above its slot counts
    as dropped.
    """
    config = config or load_config()
    sc = scenario or TaskScenario.from_dict(config.stacking, wrist_enabled)
    if sc.kind != "stacking":
        raise TaskError("run_stacking_task needs a stacking scenario")
    chain = config.chain
    if not sc.cubes:
        return _finish_report("stacking", wrist_enabled, chain, [], [], [], [], [], 0, config.grasp_overhead_s)

    half = sc.cube_size_mm / 2
    R_grasp = top_down(sc.grasp_yaw_deg)
    home = Transform(R_grasp, np.array([*sc.bench.center_mm, sc.home_height_mm]))
    q0 = _start_configuration(chain, home, sc, config)
    run = _Motion(chain, q0, np.random.default_rng(config.seed), config.ik_restarts)

    neutral_opts = config.ik_options(False)
    task_opts = config.ik_options(wrist_enabled)
    base_cons = config.constraints(
        bench_xy=sc.bench.tool_bounds(), table_z=sc.table_z_mm, watched_frames=WATCHED_FRAMES,
        clearance=sc.clearance_mm,
    )
    placed: list[Box] = []
    outcomes: list[CubeOutcome] = []
    grasp_events = 0
    approach_steps = max(1, int(math.ceil(sc.approach_mm / 20.0)))

    for cube in sc.cubes:
        cons = base_cons.with_obstacles(placed)
        R_req = rotation_about(AXES[cube.axis], math.radians(cube.angle_deg))
        R_start = R_req.T  # the required rotation brings the cube to the reference orientation
        p_start = np.array([*sc.bench.world(*cube.start_mm), sc.table_z_mm + half])
        p_slot = np.array([*sc.bench.world(*cube.slot_mm), sc.table_z_mm + (2 * cube.layer - 1) * half])
        obj0 = Transform(R_start, p_start)
        palm_pick = Transform(R_grasp, p_start + np.array([0.0, 0.0, half]))
        current = forward_kinematics(chain, run.q)

        # transit over the stack, descend, grasp, lift: neutral wrist
        top = max([b.hi[2] for b in placed], default=sc.table_z_mm)
        z_safe = max(sc.home_height_mm, top + sc.clearance_mm + sc.approach_mm)
        up = Transform(current.rotation, np.array([*current.translation[:2], max(z_safe, current.translation[2])]))
        over = Transform(R_grasp, np.array([*palm_pick.translation[:2], up.translation[2]]))
        failed = None
        if up.translation[2] > current.translation[2] + 1e-9:
            failed = run.line(current, up, approach_steps, task_opts, cons, "transit")
        failed = failed or run.line(up, over, 5, neutral_opts, cons, "transit")
        failed = failed or run.line(over, _lift(palm_pick, sc.approach_mm), approach_steps, neutral_opts, cons, "transit")
        failed = failed or run.line(_lift(palm_pick, sc.approach_mm), palm_pick, approach_steps, neutral_opts, cons, "descend")
        grip = GraspAttachment(f"cube{cube.id}")
        if failed or not grip.attach(palm_pick, obj0, synergy=1.0):
            outcomes.append(CubeOutcome(cube.id, cube.axis, cube.angle_deg, 0.0, False, False, math.nan, math.nan))
            continue
        grasp_events += 1
        failed = run.line(palm_pick, _lift(palm_pick, sc.approach_mm), approach_steps, neutral_opts, cons, "lift")

        # transport with reorientation
        p_from = p_start + np.array([0.0, 0.0, sc.approach_mm])
        p_to = p_slot + np.array([0.0, 0.0, sc.approach_mm])
        frozen = None
        reached = 0.0
        raise_mm = 0.0
        k = 1
        obj = Transform(R_start, p_from)
        while not failed and k <= sc.transport_steps:
            t = k / sc.transport_steps
            f = t if frozen is None else frozen
            target_obj = Transform(
                rotation_about(AXES[cube.axis], f * math.radians(cube.angle_deg)) @ R_start,
                (1 - t) * p_from + t * p_to + np.array([0.0, 0.0, raise_mm]),
            )
            problem = run.move(grip.palm_for(target_obj), task_opts, cons, "transport")
            if problem is None:
                obj, reached = target_obj, f
                k += 1
                continue
            run.event(problem, len(run.path) - 1)
            if problem[0] == "workspace_bound" and raise_mm + sc.raise_step_mm <= sc.max_raise_mm:
                raise_mm += sc.raise_step_mm
            elif frozen is None:
                frozen = reached
            else:
                failed = problem
        # descend onto the slot; stop where the next step is blocked
        if not failed:
            drop = sc.approach_mm + raise_mm
            n_desc = max(1, int(math.ceil(drop / sc.descent_step_mm - 1e-9)))
            for j in range(1, n_desc + 1):
                target_obj = Transform(obj.rotation, p_slot + np.array([0.0, 0.0, drop * (1 - j / n_desc)]))
                problem = run.move(grip.palm_for(target_obj), task_opts, cons, "place")
                if problem is not None:
                    run.event(problem, len(run.path) - 1)
                    break
                obj = target_obj
        grip.release()
        grasp_events += 1

        height = float(obj.translation[2] - p_slot[2])
        lateral = float(np.linalg.norm(obj.translation[:2] - p_slot[:2]))
        orient_err = _rotation_angle_deg(obj.rotation)  # reference orientation is the identity
        if failed or height > PLACE_POS_TOL_MM:
            # released above the stack: the cube tumbles, neither stacked nor reoriented
            stacked = reoriented = False
            pos_err = float(np.linalg.norm(obj.translation - p_slot))
        else:
            pos_err = math.hypot(lateral, max(height, 0.0))
            stacked = pos_err <= PLACE_POS_TOL_MM and _tilt_deg(obj.rotation) <= PLACE_ANGLE_TOL_DEG
            reoriented = stacked and orient_err <= PLACE_ANGLE_TOL_DEG
        outcomes.append(
            CubeOutcome(cube.id, cube.axis, cube.angle_deg, reached * cube.angle_deg, reoriented, stacked, pos_err, orient_err)
        )
        # back off along world +Z with the wrist as it is; the palm starts in
        # contact with the cube it just released, so that cube is not an obstacle yet
        palm_now = forward_kinematics(chain, run.q)
        run.line(palm_now, _lift(palm_now, sc.approach_mm), approach_steps, task_opts, cons, "retreat")
        if stacked:
            placed.append(Box(tuple(p_slot - half), tuple(p_slot + half)))

    return _finish_report(
        "stacking",
        wrist_enabled,
        chain,
        run.path,
        run.labels,
        run.tools,
        run.events,
        run.rows,
        grasp_events,
        config.grasp_overhead_s,
        cubes=outcomes,
    )


def run_task(kind: str, wrist_enabled: bool, config: RunConfig | None = None) -> TaskReport:
    if kind in ("rotation", "rotate"):
        return run_rotation_task(wrist_enabled, config)
    if kind in ("stacking", "stack"):
        return run_stacking_task(wrist_enabled, config)
    raise TaskError(f"unknown task kind {kind!r}")


# -- comparison ----------------------------------------------------------------


@dataclass
class ComparisonReport:
    """Positive travel differences mean a joint moved more with the wrist locked."""

    kind: str
    travel_max_diff: np.ndarray  # off - on, rad
    travel_cumulative_diff: np.ndarray
    event_diff: int  # off - on
    time_ratio: float | None  # on / off
    joint4_max_ratio: float | None  # on / off

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "travel_max_diff_deg": [_r6(v) for v in np.degrees(self.travel_max_diff)],
            "travel_cumulative_diff_deg": [_r6(v) for v in np.degrees(self.travel_cumulative_diff)],
            "event_diff": self.event_diff,
            "time_ratio": None if self.time_ratio is None else _r6(self.time_ratio),
            "joint4_max_ratio": None if self.joint4_max_ratio is None else _r6(self.joint4_max_ratio),
        }


def _ratio(a: float, b: float) -> float | None:
    if b == 0:
        return 1.0 if a == 0 else None
    return a / b


def compare_conditions(report_on: TaskReport, report_off: TaskReport) -> ComparisonReport:
    if report_on.kind != report_off.kind:
        raise ValueError(f"cannot compare a {report_on.kind} report with a {report_off.kind} report")
    if len(report_on.travel_max) != len(report_off.travel_max):
        raise ValueError("reports come from chains with different joint counts")
    j4 = 3
    return ComparisonReport(
        kind=report_on.kind,
        travel_max_diff=report_off.travel_max - report_on.travel_max,
        travel_cumulative_diff=report_off.travel_cumulative - report_on.travel_cumulative,
        event_diff=report_off.config_change_count - report_on.config_change_count,
        time_ratio=_ratio(report_on.time_proxy_s, report_off.time_proxy_s),
        joint4_max_ratio=_ratio(float(report_on.travel_max[j4]), float(report_off.travel_max[j4]))
        if len(report_on.travel_max) > j4
        else None,
    )


# -- export --------------------------------------------------------------------

FORMATS = ("csv", "json", "svg")


def _f6(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def report_text(report: TaskReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        n = report.path.shape[1] if report.path.ndim == 2 and report.path.size else len(report.travel_max)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "label"] + [f"q{i + 1}" for i in range(n)] + ["x_mm", "y_mm", "z_mm", "event"])
        causes: dict[int, list] = {}
        for ev, row in zip(report.events, report.event_rows):
            causes.setdefault(row, []).append(ev.cause)
        for k, (q, label, p) in enumerate(zip(report.path, report.labels, report.tool_positions)):
            w.writerow(
                [k, label] + [_f6(v) for v in np.degrees(q)] + [_f6(v) for v in p] + [";".join(causes.get(k, []))]
            )
        return buf.getvalue()
    if fmt == "svg":
        P = report.tool_positions
        return _svg.projections(
            [("xy", P[:, [0, 1]]), ("xz", P[:, [0, 2]]), ("yz", P[:, [1, 2]])],
            title=f"{report.kind} tool path, wrist {'on' if report.wrist_enabled else 'off'} (mm)",
        )
    raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")


def export_report(report: TaskReport, path, fmt: str = "json") -> Path:
    text = report_text(report, fmt)
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


__all__ = [
    "AXES",
    "Bench",
    "ComparisonReport",
    "CubeOutcome",
    "CubeSpec",
    "GraspAttachment",
    "TaskError",
    "TaskReport",
    "TaskScenario",
    "WRIST_JOINTS",
    "compare_conditions",
    "export_report",
    "report_text",
    "run_rotation_task",
    "run_stacking_task",
    "run_task",
    "top_down",
]
