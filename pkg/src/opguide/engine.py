"""Real-time instruction loop: track the operator's primitive, query the
policy, emit per-axis instructions, and score completed cycles.

Register semantics: the operator's instantaneous primitive must persist for
a debounce window before it commits as the current run; the previously
committed run becomes the "previous primitive" the policy conditions on. The
policy query uses the subgoal most likely at the committed run's start pose
(matching how training attributed segments to subgoals), so the instruction
stays stable while the pose crosses between subgoal regions mid-run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .kinematics import (
    DEFAULT_HOME_Q,
    DEFAULT_MAX_SPEEDS,
    EndEffectorPose,
    JointState,
    LinkParams,
    SimState,
    TaskConfig,
    forward_kinematics,
    sand_events,
)
from .policy import InstructionPolicyModel, next_primitive, velocity_mean
from .primitives import ActionPrimitive
from .segmentation import DEFAULT_MIN_LEN, VelocityClusterModel, classify_primitive
from .subgoals import most_likely_subgoal
from .trajectory import Trajectory

# radius of the cycle-anchor ball, meters; one to two frame-steps of tip
# motion at nominal speed
CYCLE_ANCHOR_RADIUS = 0.05

_DIRECTION_OF_STATE = {1: 1, 2: 0, 3: -1}


@dataclass(frozen=True)
class AxisInstruction:
    direction: int  # -1, 0, +1
    magnitude: float  # [0, 1] fraction of full stick
    matched: bool


@dataclass(frozen=True)
class Instruction:
    seq: int
    t: float
    subgoal: int
    desired: ActionPrimitive
    per_axis: tuple[AxisInstruction, ...]
    style: str = "bars"

    def to_dict(self) -> dict:
        return {
            "type": "instruction",
            "seq": self.seq,
            "t": self.t,
            "subgoal": self.subgoal,
            "desired": {"e": list(self.desired.e), "id": self.desired.id},
            "per_axis": [
                {
                    "direction": ax.direction,
                    "magnitude": ax.magnitude,
                    "matched": ax.matched,
                }
                for ax in self.per_axis
            ],
            "style": self.style,
        }


@dataclass
class SessionRecord:
    seq: int
    t: float
    q: np.ndarray
    v: np.ndarray
    pose: EndEffectorPose
    instruction: Instruction
    committed_id: int
    events: tuple[str, ...] = ()
    axes: np.ndarray | None = None


@dataclass
class SessionLog:
    records: list[SessionRecord] = field(default_factory=list)
    style: str = "bars"
    seed: int = 0


@dataclass
class Metrics:
    cycle_times: list[float] = field(default_factory=list)
    actions_per_cycle: list[int] = field(default_factory=list)
    erroneous_actions_per_cycle: list[int] = field(default_factory=list)
    dump_heights: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "cycle_times": self.cycle_times,
            "actions_per_cycle": self.actions_per_cycle,
            "erroneous_actions_per_cycle": self.erroneous_actions_per_cycle,
            "dump_heights": self.dump_heights,
        }


@dataclass
class Session:
    model: InstructionPolicyModel
    clusters: VelocityClusterModel
    task: TaskConfig
    links: LinkParams
    seed: int
    style: str = "bars"
    min_len: int = DEFAULT_MIN_LEN
    max_speeds: np.ndarray = field(default_factory=lambda: DEFAULT_MAX_SPEEDS.copy())

    sim: SimState | None = None
    log: SessionLog = field(default_factory=SessionLog)
    seq: int = 0

    # debounced-primitive registers
    committed: ActionPrimitive | None = None
    run_subgoal: int = 0
    prev_completed: ActionPrimitive | None = None
    _pending_id: int = -1
    _pending_count: int = 0
    _pending_pose: EndEffectorPose | None = None
    _bucket_load: float = 0.0


def start_session(model: InstructionPolicyModel, clusters: VelocityClusterModel,
                  task: TaskConfig, links: LinkParams, seed: int = 0,
                  style: str = "bars", min_len: int = DEFAULT_MIN_LEN,
                  home_q=DEFAULT_HOME_Q,
                  max_speeds=DEFAULT_MAX_SPEEDS) -> Session:
    """Fresh session at the home pose with the entry instruction computed.

    Raises when the model's task objects do not match the served task, or
    when the policy has no chain for the home subgoal (too few demos).
    """
    model_names = [o.name for o in model.subgoals.task.objects]
    task_names = [o.name for o in task.objects]
    if model_names != task_names:
        raise ValueError(
            f"model was learned for objects {model_names}, task has {task_names}"
        )
    home_q = np.asarray(home_q, dtype=float)
    pose = forward_kinematics(home_q, links)
    joint = JointState(t=0.0, q=home_q, v=np.zeros(4))
    session = Session(
        model=model, clusters=clusters, task=task, links=links, seed=seed,
        style=style, min_len=min_len,
        max_speeds=np.asarray(max_speeds, dtype=float),
        sim=SimState(joint=joint, pose=pose),
        log=SessionLog(style=style, seed=seed),
    )
    on_state_update(session, joint, pose)
    return session


def _desired_instruction(session: Session, code: ActionPrimitive, seq: int,
                         t: float) -> Instruction:
    _, desired = next_primitive(session.model, session.run_subgoal,
                                session.prev_completed)
    mean_v = velocity_mean(session.model, session.run_subgoal, desired)
    per_axis = []
    for j, ej in enumerate(desired.e):
        mag = abs(float(mean_v[j])) / float(session.max_speeds[j])
        per_axis.append(
            AxisInstruction(
                direction=_DIRECTION_OF_STATE[ej],
                magnitude=min(1.0, max(0.0, mag)) if ej != 2 else 0.0,
                matched=code.e[j] == ej,
            )
        )
    return Instruction(
        seq=seq, t=t, subgoal=session.run_subgoal, desired=desired,
        per_axis=tuple(per_axis), style=session.style,
    )


def on_state_update(session: Session, joint: JointState,
                    pose: EndEffectorPose) -> Instruction:
    """Consume one state sample; emit the instruction for this frame.

    Also derives scoop/dump events from the observed stream so that replayed
    demonstrations and live simulator sessions score identically.
    """
    code = classify_primitive(joint.v, session.clusters)

    if session.committed is None:
        session.committed = code
        session.run_subgoal = most_likely_subgoal(pose, session.model.subgoals)
        session._pending_id = -1
        session._pending_count = 0
    elif code.id == session.committed.id:
        session._pending_id = -1
        session._pending_count = 0
    else:
        if code.id == session._pending_id:
            session._pending_count += 1
        else:
            session._pending_id = code.id
            session._pending_count = 1
            session._pending_pose = pose
        if session._pending_count >= session.min_len:
            session.prev_completed = session.committed
            session.committed = code
            session.run_subgoal = most_likely_subgoal(
                session._pending_pose, session.model.subgoals
            )
            session._pending_id = -1
            session._pending_count = 0

    instruction = _desired_instruction(session, code, session.seq, joint.t)

    kind, session._bucket_load, _, _ = sand_events(
        pose, float(joint.v[3]), session._bucket_load, session.task
    )
    events = (kind,) if kind is not None else ()

    session.log.records.append(
        SessionRecord(
            seq=session.seq,
            t=joint.t,
            q=np.asarray(joint.q, dtype=float).copy(),
            v=np.asarray(joint.v, dtype=float).copy(),
            pose=pose,
            instruction=instruction,
            committed_id=session.committed.id,
            events=events,
        )
    )
    session.seq += 1
    return instruction


def replay_trajectory(model: InstructionPolicyModel,
                      clusters: VelocityClusterModel, traj: Trajectory,
                      task: TaskConfig, links: LinkParams, seed: int = 0,
                      min_len: int = DEFAULT_MIN_LEN) -> Session:
    """Feed a recorded demonstration through the live engine frame by frame."""
    session = None
    for k in range(traj.n_frames):
        joint = JointState(t=float(traj.t[k]), q=traj.q[k], v=traj.v[k])
        pose = EndEffectorPose.from_vec(traj.ee[k])
        if session is None:
            session = Session(
                model=model, clusters=clusters, task=task, links=links,
                seed=seed, min_len=min_len,
                log=SessionLog(seed=seed),
            )
        on_state_update(session, joint, pose)
    if session is None:
        raise ValueError("trajectory has no frames")
    return session


def _committed_runs(records: list[SessionRecord]):
    runs = []
    start = 0
    for k in range(1, len(records) + 1):
        if k == len(records) or records[k].committed_id != records[start].committed_id:
            runs.append((start, k - 1, records[start].committed_id))
            start = k
    return runs


def compute_metrics(log: SessionLog, sgs,
                    anchor_radius: float = CYCLE_ANCHOR_RADIUS) -> Metrics:
    """Score a session: cycle boundaries are post-dump returns into the
    anchor ball around the session's starting subgoal.

    A cycle's action count is the number of committed primitive runs starting
    inside it; a run is erroneous when its primitive differs from the
    instruction active at its first record. The dump height per cycle is
    taken at that cycle's final dump event.
    """
    if not log.records:
        raise ValueError("empty session log")
    records = log.records
    anchor_sg = most_likely_subgoal(records[0].pose, sgs)
    anchor_pos = sgs.mean_in_base_frame(anchor_sg)[:3]

    bed_height = None
    for obj in sgs.task.objects:
        if obj.bed_height is not None:
            bed_height = obj.bed_height
            break

    boundaries = []
    dump_since_boundary: list[int] = []
    dumps_in_window: list[int] = []
    for k, rec in enumerate(records):
        if "dumped" in rec.events:
            dumps_in_window.append(k)
        if dumps_in_window and np.linalg.norm(rec.pose.position - anchor_pos) <= anchor_radius:
            boundaries.append(k)
            dump_since_boundary.append(dumps_in_window[-1])
            dumps_in_window = []

    metrics = Metrics()
    if not boundaries:
        return metrics

    runs = _committed_runs(records)
    prev = 0
    for b, last_dump in zip(boundaries, dump_since_boundary):
        metrics.cycle_times.append(records[b].t - records[prev].t)
        cycle_runs = [r for r in runs if prev <= r[0] < b] if b > prev else []
        metrics.actions_per_cycle.append(len(cycle_runs))
        erroneous = 0
        for start, _, pid in cycle_runs:
            if records[start].instruction.desired.id != pid:
                erroneous += 1
        metrics.erroneous_actions_per_cycle.append(erroneous)
        if bed_height is not None:
            metrics.dump_heights.append(records[last_dump].pose.z - bed_height)
        prev = b
    return metrics


def mean_update_latency(session_factory, traj: Trajectory, links: LinkParams) -> float:
    """Average wall-clock seconds per on_state_update over a replayed demo."""
    session = session_factory()
    t0 = time.perf_counter()
    for k in range(traj.n_frames):
        joint = JointState(t=float(traj.t[k]), q=traj.q[k], v=traj.v[k])
        on_state_update(session, joint, EndEffectorPose.from_vec(traj.ee[k]))
    return (time.perf_counter() - t0) / traj.n_frames
