"""Subgoal discovery: per-object nonparametric clustering of observation states.

Observation start poses are split by nearest task object, re-expressed in that
object's frame (translation only; the bucket angle stays absolute), and
clustered with the penalized hard-clustering routine. Each cluster becomes a
multivariate Gaussian subgoal, which supports likelihood queries for any pose.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dp_means import DpMeansConfig, dp_means_cluster
from .kinematics import EndEffectorPose, TaskConfig
from .segmentation import ObservationSet

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class Subgoal:
    id: int
    object_index: int
    mu: np.ndarray  # (4,) x, y, z in object frame; phi absolute
    sigma: np.ndarray  # (4, 4) regularized covariance
    member_count: int

    # cached Cholesky pieces for fast likelihood queries
    _chol: np.ndarray | None = field(default=None, repr=False)
    _logdet: float | None = field(default=None, repr=False)

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.member_count < 1:
            raise ValueError("subgoal needs at least one member state")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-9):
            raise ValueError("covariance must be symmetric")
        self._chol = np.linalg.cholesky(self.sigma)
        self._logdet = 2.0 * float(np.log(np.diag(self._chol)).sum())

    def log_density(self, state4: np.ndarray) -> float:
        """Gaussian log density of a 4-vector already in this object's frame."""
        diff = np.asarray(state4, dtype=float) - self.mu
        y = np.linalg.solve(self._chol, diff)
        return -0.5 * (4 * _LOG_2PI + self._logdet + float(y @ y))


@dataclass
class SubgoalSet:
    subgoals: list[Subgoal]
    task: TaskConfig
    lambda_used: float
    # cluster membership of the observations that built this set
    assignment: np.ndarray | None = None

    def __post_init__(self):
        ids = [sg.id for sg in self.subgoals]
        if ids != list(range(len(ids))):
            raise ValueError(f"subgoal ids must be dense 0..p-1, got {ids}")

    def __len__(self) -> int:
        return len(self.subgoals)

    def mean_in_base_frame(self, sg_id: int) -> np.ndarray:
        sg = self.subgoals[sg_id]
        center = self.task.objects[sg.object_index].center
        out = sg.mu.copy()
        out[:3] += center
        return out


@dataclass
class ObjectSubset:
    object_index: int
    obs_indices: np.ndarray  # indices into the observation set
    states: np.ndarray  # (m, 4) in object frame


def to_object_frame(states: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Translate positions into the object frame; phi is left absolute."""
    out = np.array(states, dtype=float)
    out[..., :3] -= center
    return out


def partition_by_object(obs: ObservationSet, task: TaskConfig) -> list[ObjectSubset]:
    """Split observations by nearest object center (position only).

    Ties go to the lower object index. Every observation lands in exactly one
    subset; empty subsets are kept so indices line up with task.objects.
    """
    states = obs.states()
    centers = task.centers  # (M, 3)
    d2 = ((states[:, None, :3] - centers[None, :, :]) ** 2).sum(axis=2)
    nearest = d2.argmin(axis=1)  # argmin takes the first (lowest) on ties
    subsets = []
    for j in range(len(task.objects)):
        idx = np.flatnonzero(nearest == j)
        subsets.append(
            ObjectSubset(
                object_index=j,
                obs_indices=idx,
                states=to_object_frame(states[idx], centers[j]),
            )
        )
    return subsets


def default_lambda(task: TaskConfig, states: np.ndarray | None = None) -> float:
    """(0.25 x nearest object-center separation)^2.

    With a single object there is no separation; fall back to a quarter of
    the observation spread instead.
    """
    centers = task.centers
    if len(centers) >= 2:
        d = np.linalg.norm(centers[:, None] - centers[None, :], axis=2)
        np.fill_diagonal(d, np.inf)
        return float((0.25 * d.min()) ** 2)
    if states is None or len(states) < 2:
        raise ValueError("single-object task needs states to derive lambda")
    spread = np.linalg.norm(states.max(axis=0) - states.min(axis=0))
    return float((0.25 * spread) ** 2)


def _regularized_cov(members: np.ndarray, lam: float) -> np.ndarray:
    # a cluster of coincident points is as degenerate as a singleton: give
    # both the isotropic floor so the subgoal has a usable neighborhood
    if len(members) == 1:
        return np.eye(4) * (lam / 16.0)
    cov = np.cov(members, rowvar=False, bias=True)
    tr = float(np.trace(cov))
    if tr < 1e-12:
        return np.eye(4) * (lam / 16.0)
    return cov + (1e-6 * tr / 4.0) * np.eye(4)


def infer_subgoals(obs: ObservationSet, task: TaskConfig,
                   lam: float | None = None) -> SubgoalSet:
    """Cluster states per object and fit one Gaussian subgoal per cluster.

    Subgoal ids are dense, ordered by (object index, cluster index). The
    returned set also carries the observation -> subgoal assignment.
    """
    if lam is None:
        lam = default_lambda(task, obs.states())
    subsets = partition_by_object(obs, task)
    subgoals: list[Subgoal] = []
    assignment = -np.ones(len(obs), dtype=int)
    for subset in subsets:
        if len(subset.obs_indices) == 0:
            continue
        result = dp_means_cluster(subset.states, DpMeansConfig(lam=lam))
        for c in range(result.k):
            members = subset.states[result.assignment == c]
            sg = Subgoal(
                id=len(subgoals),
                object_index=subset.object_index,
                mu=result.centroids[c],
                sigma=_regularized_cov(members, lam),
                member_count=len(members),
            )
            assignment[subset.obs_indices[result.assignment == c]] = sg.id
            subgoals.append(sg)
    return SubgoalSet(subgoals=subgoals, task=task, lambda_used=float(lam),
                      assignment=assignment)


def subgoal_loglik(pose: EndEffectorPose, sg: Subgoal, task: TaskConfig) -> float:
    """Log density of a base-frame pose under one subgoal's Gaussian."""
    state = to_object_frame(pose.vec, task.objects[sg.object_index].center)
    return sg.log_density(state)


def most_likely_subgoal(pose: EndEffectorPose, sgs: SubgoalSet) -> int:
    """Highest-log-likelihood subgoal id; ties break to the lowest id."""
    if not sgs.subgoals:
        raise ValueError("empty subgoal set")
    best_id, best_ll = 0, -np.inf
    for sg in sgs.subgoals:
        ll = subgoal_loglik(pose, sg, sgs.task)
        if ll > best_ll + 1e-12:
            best_id, best_ll = sg.id, ll
    return best_id


def save_subgoals(sgs: SubgoalSet) -> str:
    doc = {
        "lambda": sgs.lambda_used,
        "subgoals": [
            {
                "id": sg.id,
                "object": sg.object_index,
                "mu": sg.mu.tolist(),
                "sigma": sg.sigma.reshape(-1).tolist(),
            }
            for sg in sgs.subgoals
        ],
    }
    return json.dumps(doc, indent=1)


def load_subgoals(text: str, task: TaskConfig) -> SubgoalSet:
    doc = json.loads(text)
    subgoals = [
        Subgoal(
            id=int(e["id"]),
            object_index=int(e["object"]),
            mu=np.array(e["mu"], dtype=float),
            sigma=np.array(e["sigma"], dtype=float).reshape(4, 4),
            member_count=1,
        )
        for e in doc["subgoals"]
    ]
    return SubgoalSet(subgoals=subgoals, task=task, lambda_used=float(doc["lambda"]))
