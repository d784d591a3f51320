"""4-joint excavator kinematics, a small task-space simulator, and a scripted
expert that generates ground-truth-labeled truck-loading demonstrations.

The arm is a planar boom/arm/bucket chain mounted on a rotating turret. Joint
order everywhere is (turret, boom, arm, bucket). The sand model is two scalars
(bucket_load, truck_fill); scoop and dump are threshold events, not physics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .primitives import ActionPrimitive

JOINT_NAMES = ("turret", "boom", "arm", "bucket")
DEMO_RATE_HZ = 25.0

# per-joint angular speed at full stick, rad/s; scale-free for learning
DEFAULT_MAX_SPEEDS = np.array([0.5, 0.5, 0.5, 0.5])
DEFAULT_JOINT_LIMITS = np.array(
    [[-1.2, 1.2], [-0.6, 1.0], [-1.0, 0.2], [-0.2, 1.0]]
)
DEFAULT_HOME_Q = np.array([0.0, 0.5, -0.7, 0.25])

# bucket open/close detection threshold, rad/s; well above demo velocity noise
_BUCKET_EVENT_EPS = 0.1


@dataclass(frozen=True)
class LinkParams:
    boom_length: float = 1.0
    arm_length: float = 1.0
    bucket_length: float = 0.2
    base_height: float = 0.5

    def __post_init__(self):
        for name in ("boom_length", "arm_length", "bucket_length", "base_height"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def reach(self) -> float:
        return self.boom_length + self.arm_length + self.bucket_length


@dataclass(frozen=True)
class JointState:
    t: float
    q: np.ndarray  # (4,) rad
    v: np.ndarray  # (4,) rad/s


@dataclass(frozen=True)
class EndEffectorPose:
    x: float
    y: float
    z: float
    phi: float  # absolute bucket attitude

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.phi])

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @staticmethod
    def from_vec(v) -> "EndEffectorPose":
        x, y, z, phi = (float(c) for c in v)
        return EndEffectorPose(x, y, z, phi)


@dataclass(frozen=True)
class TaskObject:
    name: str
    center: np.ndarray  # (3,) object frame origin in base frame
    bed_height: float | None = None  # set for dump targets (the truck)
    radius: float = 0.5  # interaction region around center


@dataclass(frozen=True)
class TaskConfig:
    objects: tuple[TaskObject, ...]

    def __post_init__(self):
        if not self.objects:
            raise ValueError("task needs at least one object")
        names = [o.name for o in self.objects]
        if len(set(names)) != len(names):
            raise ValueError(f"object names must be unique, got {names}")

    @property
    def centers(self) -> np.ndarray:
        return np.stack([o.center for o in self.objects])

    def object_index(self, name: str) -> int:
        for i, o in enumerate(self.objects):
            if o.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class SimState:
    joint: JointState
    pose: EndEffectorPose
    bucket_load: float = 0.0
    truck_fill: float = 0.0
    events: tuple[tuple[float, str], ...] = ()


def forward_kinematics(q, links: LinkParams) -> EndEffectorPose:
    """Bucket-tip pose for joint angles q = (turret, boom, arm, bucket).

    The boom/arm/bucket chain lives in the vertical plane selected by the
    turret angle; link angles are relative, so the bucket attitude phi is
    their running sum.
    """
    q = np.asarray(q, dtype=float)
    a1 = q[1]
    a2 = q[1] + q[2]
    a3 = q[1] + q[2] + q[3]
    r = (
        links.boom_length * np.cos(a1)
        + links.arm_length * np.cos(a2)
        + links.bucket_length * np.cos(a3)
    )
    z = (
        links.base_height
        + links.boom_length * np.sin(a1)
        + links.arm_length * np.sin(a2)
        + links.bucket_length * np.sin(a3)
    )
    return EndEffectorPose(
        x=float(r * np.cos(q[0])),
        y=float(r * np.sin(q[0])),
        z=float(z),
        phi=float(a3),
    )


def sand_events(pose: EndEffectorPose, v_bucket: float, bucket_load: float,
                config: TaskConfig) -> tuple[str | None, float, float, float]:
    """Scoop/dump predicate shared by the simulator and log replay.

    Returns (event kind or None, new bucket_load, truck_fill increment,
    dump height). Scooping requires the bucket to be closing inside an
    object's interaction ball with an empty bucket; dumping requires opening
    above a bed-height object while loaded.
    """
    pos = pose.position
    if v_bucket > _BUCKET_EVENT_EPS and bucket_load <= 0.0:
        for obj in config.objects:
            if obj.bed_height is None and np.linalg.norm(pos - obj.center) <= obj.radius:
                return "scooped", 1.0, 0.0, 0.0
    if v_bucket < -_BUCKET_EVENT_EPS and bucket_load > 0.0:
        for obj in config.objects:
            if obj.bed_height is None:
                continue
            horiz = np.linalg.norm(pos[:2] - obj.center[:2])
            if horiz <= obj.radius + 0.2 and pose.z > obj.bed_height:
                return "dumped", 0.0, bucket_load * 0.2, pose.z - obj.bed_height
    return None, bucket_load, 0.0, 0.0


def step_sim(state: SimState, axis_commands, dt: float, config: TaskConfig,
             links: LinkParams, max_speeds=DEFAULT_MAX_SPEEDS,
             joint_limits=DEFAULT_JOINT_LIMITS) -> SimState:
    """Advance one tick: v = command * max speed, integrate q with clamping.

    Joint-limit hits clamp the angle and append a "collision" event on the
    transition; they never raise.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    cmd = np.clip(np.asarray(axis_commands, dtype=float), -1.0, 1.0)
    v = cmd * max_speeds
    q_new = state.joint.q + v * dt
    clamped = (q_new < joint_limits[:, 0]) | (q_new > joint_limits[:, 1])
    q_new = np.clip(q_new, joint_limits[:, 0], joint_limits[:, 1])
    t_new = state.joint.t + dt

    events = state.events
    if clamped.any():
        was_at_limit = (state.joint.q <= joint_limits[:, 0]) | (
            state.joint.q >= joint_limits[:, 1]
        )
        if (clamped & ~was_at_limit).any():
            events = events + ((t_new, "collision"),)

    pose = forward_kinematics(q_new, links)
    kind, load, fill_inc, _ = sand_events(pose, float(v[3]), state.bucket_load, config)
    fill = min(1.0, state.truck_fill + fill_inc)
    if kind is not None:
        events = events + ((t_new, kind),)
    return SimState(
        joint=JointState(t=t_new, q=q_new, v=v),
        pose=pose,
        bucket_load=load,
        truck_fill=fill,
        events=events,
    )


# ---------------------------------------------------------------------------
# scripted expert
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScriptPhase:
    primitive: ActionPrimitive
    frames: int
    name: str = ""


def load_script(source=None) -> list[ScriptPhase]:
    """Load an expert script: ordered (primitive code, duration) pairs.

    `source` may be a path or file object; None loads the bundled
    truck-loading script.
    """
    if source is None:
        text = resources.files("opguide.data").joinpath("truck_loading.json").read_text()
        raw = json.loads(text)
    elif hasattr(source, "read"):
        raw = json.load(source)
    else:
        with open(source) as fh:
            raw = json.load(fh)
    phases = []
    for entry in raw["phases"]:
        phases.append(
            ScriptPhase(
                primitive=ActionPrimitive(tuple(entry["e"])),
                frames=int(entry["frames"]),
                name=entry.get("name", ""),
            )
        )
    if not phases:
        raise ValueError("script has no phases")
    return phases


def script_cycle_frames(script: list[ScriptPhase]) -> int:
    return sum(p.frames for p in script)


def default_links() -> LinkParams:
    return LinkParams()


def default_task(links: LinkParams | None = None) -> TaskConfig:
    """Pile and truck placed where the bundled script scoops and dumps.

    Derived from forward kinematics at the script's scoop and dump poses, so
    the scripted expert interacts with both objects by construction.
    """
    links = links or default_links()
    home = DEFAULT_HOME_Q
    # scoop pose: turret over the pile, boom lowered, arm extended
    q_scoop = home + np.array([0.9, -0.7, 0.7, 0.0])
    p_scoop = forward_kinematics(q_scoop, links)
    # dump pose: turret over the truck, carry config, bucket loaded
    q_dump = home + np.array([-0.9, 0.0, 0.0, 0.6])
    p_dump = forward_kinematics(q_dump, links)
    bed = p_dump.z - 0.45
    return TaskConfig(
        objects=(
            TaskObject("pile", np.array([p_scoop.x, p_scoop.y, p_scoop.z]), radius=0.5),
            TaskObject(
                "truck",
                np.array([p_dump.x, p_dump.y, bed]),
                bed_height=bed,
                radius=0.6,
            ),
        )
    )


def task_to_dict(config: TaskConfig, links: LinkParams,
                 max_speeds=DEFAULT_MAX_SPEEDS, home_q=DEFAULT_HOME_Q) -> dict:
    return {
        "objects": [
            {
                "name": o.name,
                "center": o.center.tolist(),
                "bed_height": o.bed_height,
                "radius": o.radius,
            }
            for o in config.objects
        ],
        "links": {
            "boom_length": links.boom_length,
            "arm_length": links.arm_length,
            "bucket_length": links.bucket_length,
            "base_height": links.base_height,
        },
        "max_speeds": np.asarray(max_speeds, dtype=float).tolist(),
        "home_q": np.asarray(home_q, dtype=float).tolist(),
    }


def task_from_dict(doc: dict):
    """Returns (TaskConfig, LinkParams, max_speeds, home_q)."""
    objects = tuple(
        TaskObject(
            name=o["name"],
            center=np.array(o["center"], dtype=float),
            bed_height=o.get("bed_height"),
            radius=float(o.get("radius", 0.5)),
        )
        for o in doc["objects"]
    )
    links = LinkParams(**doc["links"])
    max_speeds = np.array(doc.get("max_speeds", DEFAULT_MAX_SPEEDS), dtype=float)
    home_q = np.array(doc.get("home_q", DEFAULT_HOME_Q), dtype=float)
    return TaskConfig(objects=objects), links, max_speeds, home_q


@dataclass
class DemoOracle:
    """Ground-truth labels carried alongside a generated demonstration."""

    frame_codes: np.ndarray  # (n, 4) ternary joint states per frame
    runs: list[tuple[ActionPrimitive, int, int]]  # (code, start, end) inclusive
    waypoints: list[dict]  # per run: start pose, phase name, frame
    cycle_frames: int
    cycles: int
    events: list[tuple[float, str]] = field(default_factory=list)

    @property
    def boundaries(self) -> list[int]:
        return [start for _, start, _ in self.runs]


def generate_expert_demo(config: TaskConfig, links: LinkParams, cycles: int = 5,
                         noise_std: float = 0.0, seed: int = 0,
                         script: list[ScriptPhase] | None = None,
                         max_speeds=DEFAULT_MAX_SPEEDS):
    """Run the scripted expert and record a 25 Hz trajectory plus oracle labels.

    Recorded velocities are the commanded ones plus Gaussian noise; joint
    angles integrate the noisy velocities, as a real recording would. Returns
    (Trajectory, DemoOracle). Adjacent script phases with equal codes (the
    return swing flowing into the next cycle's approach swing) merge into one
    oracle run, since the code stream cannot distinguish them.
    """
    from .trajectory import Trajectory  # local import to avoid a cycle

    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    script = script or load_script()
    rng = np.random.default_rng(seed)
    dt = 1.0 / DEMO_RATE_HZ

    phase_seq: list[ScriptPhase] = list(script) * cycles
    n = sum(p.frames for p in phase_seq)
    codes = np.empty((n, 4), dtype=np.int8)
    commanded = np.empty((n, 4))
    phase_of_frame: list[ScriptPhase] = []
    k = 0
    for phase in phase_seq:
        sign = np.array(phase.primitive.signs())
        codes[k : k + phase.frames] = phase.primitive.e
        commanded[k : k + phase.frames] = sign * max_speeds
        phase_of_frame.extend([phase] * phase.frames)
        k += phase.frames

    noise = rng.normal(0.0, noise_std, size=(n, 4)) if noise_std > 0 else np.zeros((n, 4))
    v = commanded + noise

    q = np.empty((n, 4))
    q[0] = DEFAULT_HOME_Q
    for k in range(1, n):
        q[k] = q[k - 1] + v[k - 1] * dt
    t = np.arange(n) * dt

    ee = np.empty((n, 4))
    poses = [forward_kinematics(q[k], links) for k in range(n)]
    for k, p in enumerate(poses):
        ee[k] = p.vec

    # replay the sand model over the recorded stream to collect events
    events: list[tuple[float, str]] = []
    load = 0.0
    for k in range(n):
        kind, load, _, _ = sand_events(poses[k], float(commanded[k, 3]), load, config)
        if kind is not None:
            events.append((t[k], kind))

    # oracle runs: maximal constant-code intervals
    runs: list[tuple[ActionPrimitive, int, int]] = []
    waypoints: list[dict] = []
    start = 0
    for k in range(1, n + 1):
        if k == n or (codes[k] != codes[start]).any():
            prim = ActionPrimitive(tuple(int(c) for c in codes[start]))
            runs.append((prim, start, k - 1))
            waypoints.append(
                {
                    "frame": start,
                    "pose": poses[start],
                    "phase": phase_of_frame[start].name,
                }
            )
            start = k

    traj = Trajectory(
        rate_hz=DEMO_RATE_HZ,
        joints=JOINT_NAMES,
        t=t,
        q=q,
        v=v,
        ee=ee,
        meta={"seed": seed, "noise_std": noise_std, "cycles": cycles},
    )
    oracle = DemoOracle(
        frame_codes=codes,
        runs=runs,
        waypoints=waypoints,
        cycle_frames=script_cycle_frames(script),
        cycles=cycles,
        events=events,
    )
    return traj, oracle


def generate_demo_set(config: TaskConfig, links: LinkParams, n_demos: int = 6,
                      cycles: int = 5, noise_std: float = 0.0, seed: int = 0):
    """Independent demonstrations with per-demo derived seeds."""
    out = []
    for i in range(n_demos):
        traj, oracle = generate_expert_demo(
            config, links, cycles=cycles, noise_std=noise_std, seed=seed + 101 * i
        )
        traj.meta["demo"] = i
        out.append((traj, oracle))
    return out
