"""Velocity clustering and action-primitive segmentation.

Each joint's sampled velocities are clustered with k-means (k=3) into
counterclockwise / stationary / clockwise Gaussians. Frames classify to a
ternary code per joint; maximal constant-code runs become segments, and each
segment contributes one (start pose, primitive) observation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import EndEffectorPose
from .primitives import ActionPrimitive, N_JOINTS, decode
from .trajectory import Trajectory

# a joint whose pooled velocity span is below this never left stationary
DEGENERATE_RANGE = 1e-4
_VAR_FLOOR = 1e-10
DEFAULT_MIN_LEN = 3
_KMEANS_RESTARTS = 5
_KMEANS_MAX_ITERS = 100


@dataclass
class VelocityClusterModel:
    """Per-joint 3-component Gaussian velocity model.

    mu/var rows are ordered by label: index 0 is label 1 (counterclockwise,
    largest mean), 1 is stationary, 2 is clockwise. label_map records the
    fitted-cluster -> label permutation. eta holds the per-joint stationary
    density threshold.
    """

    mu: np.ndarray  # (4, 3)
    var: np.ndarray  # (4, 3)
    label_map: np.ndarray  # (4, 3) fitted index of each label slot
    eta: np.ndarray  # (4,)
    always_stationary: np.ndarray  # (4,) bool

    def __post_init__(self):
        if (self.var <= 0).any():
            raise ValueError("cluster variances must be positive")
        for j in range(self.mu.shape[0]):
            if sorted(self.label_map[j].tolist()) != [0, 1, 2]:
                raise ValueError("label_map rows must be permutations of {0,1,2}")
        d = np.diff(self.mu, axis=1)
        if (d > 1e-12).any():
            raise ValueError("label means must be non-increasing from label 1 to 3")

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "var": self.var.tolist(),
            "label_map": self.label_map.tolist(),
            "eta": self.eta.tolist(),
            "always_stationary": self.always_stationary.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "VelocityClusterModel":
        return VelocityClusterModel(
            mu=np.array(d["mu"], dtype=float),
            var=np.array(d["var"], dtype=float),
            label_map=np.array(d["label_map"], dtype=int),
            eta=np.array(d["eta"], dtype=float),
            always_stationary=np.array(d["always_stationary"], dtype=bool),
        )


@dataclass(frozen=True)
class PrimitiveSegment:
    primitive: ActionPrimitive
    start_frame: int
    end_frame: int  # inclusive
    s: EndEffectorPose  # pose at start_frame
    mean_v: np.ndarray
    var_v: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class Observation:
    """One (s_i, a_i) pair plus the pose-space motion direction of the
    segment it came from (unit 4-vector; zero when stationary)."""

    s: EndEffectorPose
    a: ActionPrimitive
    direction: np.ndarray
    traj_id: str = ""


@dataclass
class ObservationSet:
    items: list[Observation]
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.items:
            raise ValueError("observation set must be nonempty")

    def __len__(self) -> int:
        return len(self.items)

    def states(self) -> np.ndarray:
        return np.stack([o.s.vec for o in self.items])

    def directions(self) -> np.ndarray:
        return np.stack([o.direction for o in self.items])


def _kmeans_1d(x: np.ndarray, k: int, rng: np.random.Generator):
    """Seeded k-means++ on scalars; returns (centers, inertia)."""
    n = len(x)
    centers = np.empty(k)
    centers[0] = x[rng.integers(n)]
    for i in range(1, k):
        d2 = np.min((x[:, None] - centers[None, :i]) ** 2, axis=1)
        total = d2.sum()
        if total <= 0:
            centers[i:] = x[rng.integers(n, size=k - i)]
            break
        centers[i] = x[rng.choice(n, p=d2 / total)]
    assign = None
    for _ in range(_KMEANS_MAX_ITERS):
        d2 = (x[:, None] - centers[None, :]) ** 2
        new_assign = d2.argmin(axis=1)
        if assign is not None and (new_assign == assign).all():
            break
        assign = new_assign
        for c in range(k):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean()
            else:
                # reseed an empty cluster at the worst-fit point
                centers[c] = x[d2.min(axis=1).argmax()]
    inertia = float(((x - centers[assign]) ** 2).sum())
    return centers, assign, inertia


def fit_velocity_clusters(trajs: list[Trajectory], seed: int = 0,
                          eta: float | np.ndarray | None = None) -> VelocityClusterModel:
    """Fit the per-joint 3-cluster velocity model on pooled demonstrations.

    Clusters are relabeled by descending mean so label 1 is the most positive
    (counterclockwise). eta defaults per joint to the stationary Gaussian's
    density two standard deviations from its mean; pass a scalar or 4-vector
    to override. A joint whose velocity never leaves a DEGENERATE_RANGE band
    is flagged always-stationary instead of being force-fit.
    """
    if not trajs:
        raise ValueError("need at least one trajectory")
    pooled = np.concatenate([tr.v for tr in trajs], axis=0)
    if pooled.shape[0] < 3:
        raise ValueError("need at least 3 pooled samples per joint")
    rng = np.random.default_rng(seed)

    mu = np.zeros((N_JOINTS, 3))
    var = np.ones((N_JOINTS, 3))
    label_map = np.tile(np.arange(3), (N_JOINTS, 1))
    always_stationary = np.zeros(N_JOINTS, dtype=bool)

    for j in range(N_JOINTS):
        x = pooled[:, j]
        if x.max() - x.min() < DEGENERATE_RANGE:
            always_stationary[j] = True
            center = float(x.mean())
            mu[j] = [center + DEGENERATE_RANGE, center, center - DEGENERATE_RANGE]
            var[j] = _VAR_FLOOR
            continue
        best = None
        for r in range(_KMEANS_RESTARTS):
            sub_rng = np.random.default_rng(
                np.random.SeedSequence([seed, j, r]).generate_state(1)[0]
            )
            centers, assign, inertia = _kmeans_1d(x, 3, sub_rng)
            if best is None or inertia < best[2]:
                best = (centers, assign, inertia)
        centers, assign, _ = best
        order = np.argsort(-centers)  # descending mean -> labels 1, 2, 3
        label_map[j] = order
        for slot, c in enumerate(order):
            members = x[assign == c]
            mu[j, slot] = members.mean() if len(members) else centers[c]
            var[j, slot] = max(members.var() if len(members) else 0.0, _VAR_FLOOR)

    if eta is None:
        eta_vec = _gauss_pdf(mu[:, 1] + 2.0 * np.sqrt(var[:, 1]), mu[:, 1], var[:, 1])
    else:
        eta_vec = np.broadcast_to(np.asarray(eta, dtype=float), (N_JOINTS,)).copy()
    return VelocityClusterModel(
        mu=mu, var=var, label_map=label_map, eta=eta_vec,
        always_stationary=always_stationary,
    )


def _gauss_pdf(x, mean, variance):
    return np.exp(-0.5 * (x - mean) ** 2 / variance) / np.sqrt(2.0 * np.pi * variance)


_CLASSIFY_CHUNK = 8192


def classify_frames(v: np.ndarray, model: VelocityClusterModel) -> np.ndarray:
    """Vectorized ternary classification: (n, 4) velocities -> (n, 4) codes.

    Per joint: stationary when the stationary density exceeds eta; otherwise
    whichever of the ccw/cw densities is larger, ties to ccw. Long inputs are
    processed in fixed-size chunks to keep temporaries allocator-friendly.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n = v.shape[0]
    codes = np.full((n, N_JOINTS), 2, dtype=np.int8)
    for lo in range(0, n, _CLASSIFY_CHUNK):
        hi = min(lo + _CLASSIFY_CHUNK, n)
        for j in range(N_JOINTS):
            if model.always_stationary[j]:
                continue
            vj = v[lo:hi, j]
            p1 = _gauss_pdf(vj, model.mu[j, 0], model.var[j, 0])
            p2 = _gauss_pdf(vj, model.mu[j, 1], model.var[j, 1])
            p3 = _gauss_pdf(vj, model.mu[j, 2], model.var[j, 2])
            moving = p2 <= model.eta[j]
            codes[lo:hi, j][moving] = np.where(p1[moving] >= p3[moving], 1, 3)
    return codes


def classify_primitive(v, model: VelocityClusterModel) -> ActionPrimitive:
    """Classify a single 4-vector of joint velocities."""
    code = classify_frames(np.asarray(v, dtype=float).reshape(1, 4), model)[0]
    return ActionPrimitive(tuple(int(c) for c in code))


def _runs_from_codes(ids: np.ndarray) -> list[tuple[int, int]]:
    """Maximal constant-value runs of a 1-D array as (start, end) inclusive."""
    n = len(ids)
    changes = np.flatnonzero(ids[1:] != ids[:-1]) + 1
    starts = np.concatenate(([0], changes))
    ends = np.concatenate((changes - 1, [n - 1]))
    return list(zip(starts.tolist(), ends.tolist()))


def segment_trajectory(traj: Trajectory, model: VelocityClusterModel,
                       min_len: int = DEFAULT_MIN_LEN):
    """Cut a trajectory into primitive segments and observations.

    Runs shorter than min_len are absorbed into the preceding segment (the
    following one for a short leading run), then adjacent equal-code segments
    coalesce. The observation direction is the mean pose-space velocity over
    the segment, normalized; differencing the recorded end-effector stream is
    the chain-rule equivalent of pushing joint velocities through the
    kinematic Jacobian.
    """
    if traj.n_frames < 2:
        raise ValueError("need at least 2 frames to segment")
    codes = classify_frames(traj.v, model)
    weights = 3 ** np.arange(N_JOINTS)
    ids = ((codes.astype(int) - 1) * weights).sum(axis=1)

    runs = _runs_from_codes(ids)
    if min_len > 1:
        kept: list[list[int]] = []
        for start, end in runs:
            if end - start + 1 >= min_len or not kept:
                kept.append([start, end, ids[start]])
            else:
                kept[-1][1] = end  # absorb into predecessor
        if len(kept) > 1 and kept[0][1] - kept[0][0] + 1 < min_len:
            kept[1][0] = kept[0][0]
            kept[1][1] = max(kept[1][1], kept[0][1])
            kept.pop(0)
        merged: list[list[int]] = []
        for start, end, pid in kept:
            if merged and merged[-1][2] == pid:
                merged[-1][1] = end
            else:
                merged.append([start, end, pid])
        runs = [(s, e) for s, e, _ in merged]
        run_ids = [pid for _, _, pid in merged]
    else:
        run_ids = [int(ids[s]) for s, _ in runs]

    # per-run velocity moments in bulk
    starts = np.array([s for s, _ in runs])
    counts = np.array([e - s + 1 for s, e in runs], dtype=float)[:, None]
    v_means = np.add.reduceat(traj.v, starts, axis=0) / counts
    v_sq = np.add.reduceat(traj.v**2, starts, axis=0) / counts
    v_vars = np.maximum(v_sq - v_means**2, 0.0)
    # mean pose-space velocity over a run telescopes to its endpoint
    # difference; normalizing yields the motion direction the kinematic
    # Jacobian maps the joint velocities onto
    ends = np.minimum(np.array([e for _, e in runs]) + 1, traj.n_frames - 1)
    dir_means = traj.ee[ends] - traj.ee[starts]
    dir_norms = np.linalg.norm(dir_means, axis=1)
    safe = dir_norms > 1e-9
    directions = np.where(safe[:, None], dir_means / np.where(safe, dir_norms, 1.0)[:, None], 0.0)

    segments: list[PrimitiveSegment] = []
    observations: list[Observation] = []
    traj_id = str(traj.meta.get("demo", traj.meta.get("id", "")))
    for i, ((start, end), pid) in enumerate(zip(runs, run_ids)):
        prim = decode(int(pid))
        pose = EndEffectorPose.from_vec(traj.ee[start])
        segments.append(
            PrimitiveSegment(
                primitive=prim,
                start_frame=int(start),
                end_frame=int(end),
                s=pose,
                mean_v=v_means[i],
                var_v=v_vars[i],
            )
        )
        observations.append(
            Observation(s=pose, a=prim, direction=directions[i], traj_id=traj_id)
        )
    return segments, ObservationSet(items=observations, provenance=[traj_id])


def segment_demos(trajs: list[Trajectory], model: VelocityClusterModel,
                  min_len: int = DEFAULT_MIN_LEN):
    """Segment several demos; returns (per-demo segment lists, pooled observations)."""
    all_segments = []
    pooled: list[Observation] = []
    provenance: list[str] = []
    for tr in trajs:
        segs, obs = segment_trajectory(tr, model, min_len=min_len)
        all_segments.append(segs)
        pooled.extend(obs.items)
        provenance.extend(obs.provenance)
    return all_segments, ObservationSet(items=pooled, provenance=provenance)


def calibrate_eta(model: VelocityClusterModel, v: np.ndarray, labels: np.ndarray,
                  n_grid: int = 36) -> VelocityClusterModel:
    """Pick eta from labeled frames by a 1-D sweep over stationary-band widths.

    The grid spans the stationary density evaluated 0.5 to 4 sigma out; the
    width maximizing frame-level code accuracy wins (ties to the narrower
    band).
    """
    v = np.asarray(v, dtype=float).reshape(-1, N_JOINTS)
    labels = np.asarray(labels, dtype=int).reshape(-1, N_JOINTS)
    best_eta, best_acc = model.eta, -1.0
    for width in np.linspace(0.5, 4.0, n_grid):
        eta_vec = _gauss_pdf(
            model.mu[:, 1] + width * np.sqrt(model.var[:, 1]), model.mu[:, 1], model.var[:, 1]
        )
        trial = VelocityClusterModel(
            mu=model.mu, var=model.var, label_map=model.label_map,
            eta=eta_vec, always_stationary=model.always_stationary,
        )
        acc = float((classify_frames(v, trial) == labels).mean())
        if acc > best_acc:
            best_acc, best_eta = acc, eta_vec
    return VelocityClusterModel(
        mu=model.mu.copy(), var=model.var.copy(), label_map=model.label_map.copy(),
        eta=best_eta, always_stationary=model.always_stationary.copy(),
    )
