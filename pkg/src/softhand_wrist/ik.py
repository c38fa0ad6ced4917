"""Damped-least-squares IK, constraint monitoring and regrasp-aware trajectory tracking."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_vector
from .kinematics import KinematicChain, Transform, forward_kinematics, pose_error

logger = logging.getLogger(__name__)

CAUSES = ("joint_limit", "singularity", "workspace_bound", "no_convergence")


@dataclass(frozen=True)
class IKOptions:
    """Solver settings.

    ``locked_joints`` maps joint index -> fixed value (rad); those joints are
    excluded from the update. ``limit_margin`` shrinks every joint range on both
    sides (rad). ``joint_weights`` scales the cost of moving each joint in the
    minimum-norm step (larger = more reluctant).
    """

    damping: float = 1.0
    max_iters: int = 200
    position_tol: float = 0.01
    orientation_tol: float = 1e-4
    nullspace_weight: float = 0.1
    locked_joints: tuple = ()
    orientation_weight: float = 100.0
    limit_margin: float = 0.0
    joint_weights: tuple | None = None
    max_step: float = 0.2

    def __post_init__(self):
        if not self.damping > 0:
            raise ValueError("damping must be > 0")
        if not (self.position_tol > 0 and self.orientation_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_iters < 0 or self.limit_margin < 0 or self.max_step <= 0:
            raise ValueError("max_iters, limit_margin must be >= 0 and max_step > 0")
        locked = self.locked_joints
        if isinstance(locked, dict):
            locked = tuple(sorted(locked.items()))
        object.__setattr__(self, "locked_joints", tuple((int(i), float(v)) for i, v in locked))

    @property
    def locked(self) -> dict:
        return dict(self.locked_joints)

    def replace(self, **changes) -> "IKOptions":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return IKOptions(**kw)


@dataclass
class IKResult:
    q: np.ndarray
    success: bool
    iterations: int
    position_error: float
    orientation_error: float
    saturated: tuple = ()
    reason: str = ""


def _soft_bounds(chain: KinematicChain, margin: float) -> tuple[np.ndarray, np.ndarray]:
    lo = chain.joint_limits[:, 0] + margin
    hi = chain.joint_limits[:, 1] - margin
    bad = lo > hi
    mid = chain.joint_limits.mean(axis=1)
    return np.where(bad, mid, lo), np.where(bad, mid, hi)


def _jacobian_from_frames(F: list, n: int) -> np.ndarray:
    p = F[-1][:3, 3]
    J = np.empty((6, n))
    for i in range(n):
        z = F[i][:3, 2]
        J[:3, i] = np.cross(z, p - F[i][:3, 3])
        J[3:, i] = z
    return J


def solve_ik(chain: KinematicChain, target: Transform, seed, opts: IKOptions | None = None, rest=None) -> IKResult:
    """Damped least squares with joint-limit clamping and a null-space pull toward ``rest``.

    Per iteration (in joint coordinates scaled by ``joint_weights``)::

        dq = J^T (J J^T + damping^2 I)^-1 e + (I - J^+ J) k (rest - q)

    where ``e`` stacks the position error (mm) and ``orientation_weight`` times the
    axis-angle orientation error (rad). Joints sitting on a bound and pushed
    outwards are dropped from the step. ``rest`` defaults to ``seed``. An
    unreachable target is reported through ``success=False``, never raised.
    """
    opts = opts or IKOptions()
    n = chain.n_joints
    seed = check_vector(seed, n, "seed")
    if not np.all(np.isfinite(target.matrix)):
        raise ValueError("target must be finite")
    if not chain.within_limits(seed):
        raise ValueError("seed lies outside the joint limits")
    lo, hi = _soft_bounds(chain, opts.limit_margin)
    locked = opts.locked
    free = np.ones(n, dtype=bool)
    q = np.clip(seed, lo, hi)
    for i, v in locked.items():
        free[i] = False
        q[i] = v
    rest = q.copy() if rest is None else np.asarray(rest, dtype=float)
    w = np.ones(n) if opts.joint_weights is None else np.asarray(opts.joint_weights, dtype=float)
    sw = 1.0 / np.sqrt(w)
    lam2 = opts.damping**2
    ow = opts.orientation_weight

    best = math.inf
    stall = 0
    it = 0
    ep = eo = math.inf
    while True:
        F = chain.frames(q)
        e = pose_error(target, Transform.from_matrix(F[-1]))
        ep, eo = float(np.linalg.norm(e[:3])), float(np.linalg.norm(e[3:]))
        if ep < opts.position_tol and eo < opts.orientation_tol:
            return IKResult(q, True, it, ep, eo)
        if it >= opts.max_iters:
            break
        cost = ep + ow * eo
        if cost < best * (1 - 1e-6):
            best, stall = cost, 0
        else:
            stall += 1
            if stall > 25:
                break
        J = _jacobian_from_frames(F, n)
        J[3:] *= ow
        ew = e.copy()
        ew[3:] *= ow
        active = free.copy()
        dq = np.zeros(n)
        for _ in range(n):
            if not active.any():
                dq[:] = 0.0
                break
            Ja = J[:, active] * sw[active]
            dqs = Ja.T @ np.linalg.solve(Ja @ Ja.T + lam2 * np.eye(6), ew)
            if opts.nullspace_weight > 0:
                N = np.eye(int(active.sum())) - np.linalg.pinv(Ja, rcond=1e-10) @ Ja
                dqs = dqs + N @ (opts.nullspace_weight * (rest - q)[active] / sw[active])
            dq = np.zeros(n)
            dq[active] = dqs * sw[active]
            pushing = active & (((q <= lo + 1e-12) & (dq < 0)) | ((q >= hi - 1e-12) & (dq > 0)))
            if not pushing.any():
                break
            active &= ~pushing
        m = np.max(np.abs(dq))
        if m > opts.max_step:
            dq *= opts.max_step / m
        q = np.clip(q + dq, lo, hi)
        it += 1

    sat = tuple(int(i) for i in np.flatnonzero(free & ((q <= lo + 1e-9) | (q >= hi - 1e-9))))
    return IKResult(q, False, it, ep, eo, sat, "max_iters" if it >= opts.max_iters else "stalled")


def manipulability(J) -> float:
    """sqrt(det(J J^T)) for a 6 x n Jacobian, n >= 6."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != 6:
        raise ValueError(f"expected a 6 x n Jacobian, got shape {J.shape}")
    if J.shape[1] < 6:
        raise ValueError(f"manipulability needs n >= 6 columns, got {J.shape[1]}")
    return math.sqrt(max(float(np.linalg.det(J @ J.T)), 0.0))


class DampedLeastSquaresIK(BaseEstimator):
    """Estimator wrapper around :func:`solve_ik`.

    ``fit(chain)`` binds a kinematic chain; ``predict(targets, seed)`` solves a
    sequence of target transforms, seeding each with the previous solution.
    Infeasible targets come back as rows of NaN.
    """

    def __init__(
        self,
        damping=1.0,
        max_iters=200,
        position_tol=0.01,
        orientation_tol=1e-4,
        nullspace_weight=0.1,
        orientation_weight=100.0,
        locked_joints=None,
        limit_margin=0.0,
        joint_weights=None,
        max_step=0.2,
    ):
        self.damping = damping
        self.max_iters = max_iters
        self.position_tol = position_tol
        self.orientation_tol = orientation_tol
        self.nullspace_weight = nullspace_weight
        self.orientation_weight = orientation_weight
        self.locked_joints = locked_joints
        self.limit_margin = limit_margin
        self.joint_weights = joint_weights
        self.max_step = max_step

    def options(self) -> IKOptions:
        return IKOptions(
            damping=self.damping,
            max_iters=self.max_iters,
            position_tol=self.position_tol,
            orientation_tol=self.orientation_tol,
            nullspace_weight=self.nullspace_weight,
            orientation_weight=self.orientation_weight,
            locked_joints=self.locked_joints or (),
            limit_margin=self.limit_margin,
            joint_weights=None if self.joint_weights is None else tuple(self.joint_weights),
            max_step=self.max_step,
        )

    def fit(self, chain: KinematicChain, y=None):
        if not isinstance(chain, KinematicChain):
            raise TypeError("fit expects a KinematicChain")
        self.options()  # validate parameters eagerly
        self.chain_ = chain
        self.n_joints_ = chain.n_joints
        return self

    def solve(self, target: Transform, seed) -> IKResult:
        check_is_fitted(self, "chain_")
        return solve_ik(self.chain_, target, seed, self.options())

    def predict(self, targets: Sequence[Transform], seed=None) -> np.ndarray:
        check_is_fitted(self, "chain_")
        q = np.zeros(self.n_joints_) if seed is None else check_vector(seed, self.n_joints_, "seed")
        out = np.full((len(targets), self.n_joints_), np.nan)
        for k, target in enumerate(targets):
            res = self.solve(target, q)
            if res.success:
                out[k] = res.q
                q = res.q
        return out


# -- constraint monitoring ---------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the chain base frame (mm)."""

    lo: tuple
    hi: tuple

    def contains(self, p, clearance: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p > np.asarray(self.lo) - clearance) and np.all(p < np.asarray(self.hi) + clearance))


@dataclass(frozen=True)
class Constraints:
    """Monitored quantities for tracking.

    ``bench_xy`` bounds the tool position in x/y; ``table_z`` and ``obstacles``
    apply to every frame index in ``watched_frames`` (indices into
    ``KinematicChain.frames``; -1 is the tool frame).
    """

    limit_margin: float = math.radians(2.0)
    singularity_threshold: float = 1e-4
    bench_xy: tuple | None = None  # ((xmin, xmax), (ymin, ymax))
    table_z: float | None = None
    obstacles: tuple = ()
    clearance: float = 0.0
    watched_frames: tuple = (-1,)

    def with_obstacles(self, obstacles) -> "Constraints":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw["obstacles"] = tuple(obstacles)
        return Constraints(**kw)


@dataclass(frozen=True)
class ConfigChangeEvent:
    cause: str
    step: int
    joint_index: int | None = None
    value: float | None = None

    def __post_init__(self):
        if self.cause not in CAUSES:
            raise ValueError(f"unknown cause {self.cause!r}")

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "cause": self.cause,
            "joint_index": self.joint_index,
            "value": None if self.value is None else round(float(self.value), 6),
        }


def check_configuration(chain: KinematicChain, q, constraints: Constraints, locked=()) -> tuple | None:
    """Return (cause, joint_index, value) for the first violated constraint, else None.

    ``joint_index`` is 1-based to match the usual joint numbering in reports.
    """
    q = np.asarray(q, dtype=float)
    lim = chain.joint_limits
    locked = set(locked)
    margin = constraints.limit_margin - 1e-9
    for i in range(chain.n_joints):
        if i in locked:
            continue
        if q[i] - lim[i, 0] < margin or lim[i, 1] - q[i] < margin:
            return ("joint_limit", i + 1, float(q[i]))
    F = chain.frames(q)
    J = _jacobian_from_frames(F, chain.n_joints)
    active = [i for i in range(chain.n_joints) if i not in locked]
    if len(active) >= 6:
        mu = manipulability(J[:, active])
        if mu < constraints.singularity_threshold:
            return ("singularity", None, mu)
    p_tool = F[-1][:3, 3]
    if constraints.bench_xy is not None:
        (x0, x1), (y0, y1) = constraints.bench_xy
        if not (x0 <= p_tool[0] <= x1):
            return ("workspace_bound", None, float(p_tool[0]))
        if not (y0 <= p_tool[1] <= y1):
            return ("workspace_bound", None, float(p_tool[1]))
    for idx in constraints.watched_frames:
        p = F[idx][:3, 3]
        if constraints.table_z is not None and p[2] < constraints.table_z:
            return ("workspace_bound", None, float(p[2]))
        for box in constraints.obstacles:
            if box.contains(p, constraints.clearance):
                return ("workspace_bound", None, float(p[2]))
    return None


def classify_failure(res: IKResult) -> tuple:
    if res.saturated:
        return ("joint_limit", res.saturated[0] + 1, float(res.q[res.saturated[0]]))
    return ("no_convergence", None, float(res.position_error))


# -- trajectory tracking -----------------------------------------------------


@dataclass
class TrackResult:
    path: np.ndarray
    labels: list
    events: list
    tool_poses: list
    aborted: bool = False
    grasp_events: int = 0
    completed_steps: int = 0
    object_poses: list = field(default_factory=list)
    event_rows: list = field(default_factory=list)  # path row at which each event fired


def _back_off(T: Transform, dist: float, axis=None) -> Transform:
    # default direction is tool -z (away from the palm)
    d = -T.rotation[:, 2] if axis is None else axis
    return Transform(T.rotation, T.translation + dist * d)


def track_trajectory(
    chain: KinematicChain,
    poses: Sequence[Transform],
    seed,
    opts: IKOptions | None = None,
    constraints: Constraints | None = None,
    neutral=None,
    grasp: Transform | None = None,
    max_regrasps: int = 3,
    retreat_mm: float = 50.0,
    retreat_axis=None,
) -> TrackResult:
    """Follow a sequence of held-object poses, regrasping when a step is blocked.

    The object is rigidly attached: tool pose = object pose @ inv(grasp), with
    ``grasp`` defaulting to the tool->object offset at ``seed``. Each step is
    seeded with the previous solution. A failed solve or a violated constraint
    emits a :class:`ConfigChangeEvent`, then the hand releases, retreats along
    tool -z, returns to the ``neutral`` configuration's tool orientation at the
    initial hand-object offset, re-approaches and grasps again before retrying the same step. More than
    ``max_regrasps`` consecutive regrasps without progress aborts the run.
    ``retreat_axis`` replaces tool -z with a fixed world direction.
    """
    opts = opts or IKOptions()
    constraints = constraints or Constraints()
    seed = check_vector(seed, chain.n_joints, "seed")
    if not poses:
        raise ValueError("poses must be non-empty")
    neutral = seed.copy() if neutral is None else check_vector(neutral, chain.n_joints, "neutral")
    if grasp is None:
        grasp = forward_kinematics(chain, seed).inverse() @ poses[0]
    locked = tuple(opts.locked)
    solve_opts = opts.replace(limit_margin=max(opts.limit_margin, constraints.limit_margin))
    R_neutral = forward_kinematics(chain, neutral).rotation
    if retreat_axis is not None:
        retreat_axis = check_vector(retreat_axis, 3, "retreat_axis")
        norm = np.linalg.norm(retreat_axis)
        if norm == 0:
            raise ValueError("retreat_axis must be non-zero")
        retreat_axis = retreat_axis / norm

    q = seed.copy()
    path, labels, tools, objects = [q.copy()], ["start"], [forward_kinematics(chain, q)], [poses[0]]
    grasp_offset = tools[0].translation - poses[0].translation
    events: list[ConfigChangeEvent] = []
    event_rows: list[int] = []
    grasp_events = 1
    retries = 0
    aborted = False
    k = 0
    while k < len(poses):
        target = poses[k] @ grasp.inverse()
        res = solve_ik(chain, target, q, solve_opts, rest=neutral)
        problem = classify_failure(res) if not res.success else check_configuration(chain, res.q, constraints, locked)
        if problem is None:
            q = res.q
            path.append(q.copy())
            labels.append("track")
            tools.append(target)
            objects.append(poses[k])
            retries = 0
            k += 1
            continue

        cause, joint_index, value = problem
        events.append(ConfigChangeEvent(cause, k, joint_index, value))
        event_rows.append(len(path) - 1)
        logger.debug("step %d blocked: %s (joint %s)", k, cause, joint_index)
        retries += 1
        if retries > max_regrasps:
            aborted = True
            break
        current_obj = poses[k - 1] if k > 0 else poses[0]
        tool_now = forward_kinematics(chain, q)
        retreat = _back_off(tool_now, retreat_mm, retreat_axis)
        # regrasp where the hand first took the object, relative to its current position
        regrasp_tool = Transform(R_neutral, current_obj.translation + grasp_offset)
        waypoints = [
            ("retreat", retreat, q),
            ("reorient", _back_off(regrasp_tool, retreat_mm, retreat_axis), neutral),
            ("reapproach", regrasp_tool, None),
        ]
        ok = True
        for label, pose, start in waypoints:
            # the retreat keeps the current posture; later legs drift back to neutral
            rest = q if label == "retreat" else neutral
            r = solve_ik(chain, pose, q if start is None else start, solve_opts, rest=rest)
            if not r.success:
                ok = False
                break
            q = r.q
            path.append(q.copy())
            labels.append(label)
            tools.append(pose)
            objects.append(current_obj)
        if not ok:
            events.append(ConfigChangeEvent("no_convergence", k, None, None))
            event_rows.append(len(path) - 1)
            aborted = True
            break
        grasp = regrasp_tool.inverse() @ current_obj
        grasp_events += 2
    grasp_events += 1  # final release
    return TrackResult(
        path=np.array(path),
        labels=labels,
        events=events,
        tool_poses=tools,
        aborted=aborted,
        grasp_events=grasp_events,
        completed_steps=k,
        object_poses=objects,
        event_rows=event_rows,
    )


# -- metrics -----------------------------------------------------------------


def joint_travel(path) -> tuple[np.ndarray, np.ndarray]:
    """Per-joint cumulative |dq| and per-joint max |q - q0|."""
    P = np.asarray(path, dtype=float)
    if P.ndim != 2 or len(P) == 0:
        raise ValueError("path must be a non-empty (steps, joints) array")
    cumulative = np.abs(np.diff(P, axis=0)).sum(axis=0)
    max_dev = np.abs(P - P[0]).max(axis=0)
    return cumulative, max_dev


def time_proxy(path, joint_speeds, grasp_events: int = 0, overhead_s: float = 2.0) -> float:
    """Sum over steps of the slowest joint's move time, plus a fixed cost per grasp/release."""
    speeds = np.asarray(joint_speeds, dtype=float)
    if np.any(speeds <= 0):
        raise ValueError("joint speeds must be > 0")
    P = np.asarray(path, dtype=float)
    motion = 0.0
    if len(P) > 1:
        motion = float(np.sum(np.max(np.abs(np.diff(P, axis=0)) / speeds, axis=1)))
    return motion + grasp_events * overhead_s


# -- trajectory / event files ------------------------------------------------


def write_trajectory_csv(path, joint_path) -> None:
    """CSV ``step,q1..qn`` in degrees, fixed six decimals."""
    P = np.degrees(np.asarray(joint_path, dtype=float))
    n = P.shape[1] if P.ndim == 2 else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step"] + [f"q{i + 1}" for i in range(n)])
        for k, row in enumerate(P):
            w.writerow([k] + [_f6(v) for v in row])


def read_trajectory_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[0] != "step":
        raise ValueError("trajectory CSV must start with a 'step' column")
    return np.radians(np.array([[float(v) for v in r[1:]] for r in body]).reshape(len(body), len(header) - 1))


def write_events_jsonl(path, events) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")


def _f6(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s
