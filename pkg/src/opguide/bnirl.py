"""Partition-based baseline: CRP-prior Gibbs sampling with an
action-comparison likelihood.

Each observation is explained by a candidate subgoal (one of the observed
states). The likelihood compares the observed motion direction against the
unit pose error toward the subgoal; the exponential weight favors directions
that point at the subgoal. Sampling follows the standard collapsed scheme
with one auxiliary candidate for the new-partition case, plus per-partition
subgoal resampling.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .segmentation import ObservationSet


@dataclass(frozen=True)
class BnirlConfig:
    alpha: float = 5.0  # demonstrator rationality; 0 reduces to the prior
    concentration: float = 1.0  # CRP new-partition weight
    iterations: int = 2000
    burn_in: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.concentration <= 0:
            raise ValueError("concentration must be > 0")
        if not self.iterations > self.burn_in >= 0:
            raise ValueError("need iterations > burn_in >= 0")


@dataclass
class PartitionSample:
    z: np.ndarray  # (n,) dense partition labels
    subgoal_of_partition: np.ndarray  # (k,) candidate-state index per partition

    def canonical(self) -> tuple[int, ...]:
        """Relabel by first occurrence so label permutations compare equal."""
        seen: dict[int, int] = {}
        out = []
        for label in self.z:
            if label not in seen:
                seen[label] = len(seen)
            out.append(seen[label])
        return tuple(out)


def unit_pose_error(state: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Unit direction from state toward goal in pose space; zero at the goal."""
    diff = np.asarray(goal, dtype=float) - np.asarray(state, dtype=float)
    norm = np.linalg.norm(diff)
    return diff / norm if norm > 1e-12 else np.zeros_like(diff)


def action_comparison_loglik(direction: np.ndarray, state: np.ndarray,
                             goal: np.ndarray, alpha: float) -> float:
    """-alpha * || observed direction - controller direction ||.

    Both directions are unit pose-space vectors (or zero when stationary /
    already at the goal), so the value lies in [-2 alpha, 0], with 0 when the
    observed motion points exactly at the goal.
    """
    a_cl = unit_pose_error(state, goal)
    return -alpha * float(np.linalg.norm(np.asarray(direction, dtype=float) - a_cl))


def _loglik_matrix(obs: ObservationSet, alpha: float) -> np.ndarray:
    """(n, n) table: loglik of observation i explained by candidate state j."""
    states = obs.states()
    dirs = obs.directions()
    n = len(states)
    diff = states[None, :, :] - states[:, None, :]  # [i, j] = s_j - s_i
    norms = np.linalg.norm(diff, axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        a_cl = np.where(norms[:, :, None] > 1e-12, diff / norms[:, :, None], 0.0)
    return -alpha * np.linalg.norm(dirs[:, None, :] - a_cl, axis=2)


def gibbs_sample_partitions(obs: ObservationSet, config: BnirlConfig) -> list[PartitionSample]:
    """Collapsed Gibbs over partition assignments; returns post-burn-in samples.

    Existing-partition weight: size x likelihood under that partition's
    subgoal. New-partition weight: concentration x likelihood under one
    auxiliary candidate drawn uniformly from the observed states. After each
    z sweep every partition's subgoal is resampled from its conditional over
    the candidate set.
    """
    n = len(obs)
    rng = np.random.default_rng(config.seed)
    ll = _loglik_matrix(obs, config.alpha)
    log_conc = np.log(config.concentration)

    z = np.zeros(n, dtype=int)
    subgoals = [int(np.argmax(ll.sum(axis=0)))]  # best single explanation

    samples: list[PartitionSample] = []
    for it in range(config.iterations):
        for i in range(n):
            # remove i; drop its partition if now empty
            old = z[i]
            z[i] = -1
            if not (z == old).any():
                subgoals.pop(old)
                z[z > old] -= 1
            k = len(subgoals)
            sizes = np.bincount(z[z >= 0], minlength=k)
            aux = int(rng.integers(n))
            logw = np.empty(k + 1)
            for c in range(k):
                logw[c] = np.log(sizes[c]) + ll[i, subgoals[c]]
            logw[k] = log_conc + ll[i, aux]
            logw -= logw.max()
            w = np.exp(logw)
            choice = int(rng.choice(k + 1, p=w / w.sum()))
            if choice == k:
                subgoals.append(aux)
            z[i] = choice

        # resample each partition's subgoal from its conditional
        for c in range(len(subgoals)):
            members = np.flatnonzero(z == c)
            logp = ll[members].sum(axis=0)
            logp = logp - logp.max()
            p = np.exp(logp)
            subgoals[c] = int(rng.choice(n, p=p / p.sum()))

        if it >= config.burn_in:
            samples.append(
                PartitionSample(z=z.copy(), subgoal_of_partition=np.array(subgoals))
            )
    return samples


def posterior_mode(samples: list[PartitionSample]) -> PartitionSample:
    """Most frequent partition up to label permutation.

    Ties break to the lexicographically smallest canonical labeling; the
    returned sample is the first one matching the winning partition.
    """
    if not samples:
        raise ValueError("need at least one sample")
    counts = Counter(s.canonical() for s in samples)
    top = max(counts.items(), key=lambda kv: (kv[1], tuple(-c for c in kv[0])))
    key = top[0]
    for s in samples:
        if s.canonical() == key:
            return s
    raise AssertionError("unreachable")


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected partition agreement in [-1, 1]; 1 means identical."""
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if len(a) != len(b):
        raise ValueError("label vectors must have equal length")
    n = len(a)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)), dtype=int)
    for x, y in zip(ia, ib):
        table[x, y] += 1

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def crp_log_prior(partition_labels, concentration: float) -> float:
    """Log CRP probability of a partition given by dense labels."""
    labels = np.asarray(partition_labels, dtype=int)
    n = len(labels)
    sizes = np.bincount(labels)
    sizes = sizes[sizes > 0]
    k = len(sizes)
    log_p = k * np.log(concentration)
    for s in sizes:
        log_p += sum(np.log(range(1, int(s))))  # (s-1)!
    for i in range(n):
        log_p -= np.log(concentration + i)
    return float(log_p)


def exact_posterior_mode(obs: ObservationSet, config: BnirlConfig):
    """Exhaustive MAP partition for small n, marginalizing subgoals.

    The model draws each partition's subgoal uniformly from the candidate
    states, so a block's marginal likelihood is the mean over candidates of
    the product of member likelihoods. Feasible for n <= 8 or so.
    """
    from .dp_means import set_partitions

    n = len(obs)
    ll = _loglik_matrix(obs, config.alpha)
    best_lp, best = -np.inf, None
    for partition in set_partitions(n):
        labels = np.empty(n, dtype=int)
        for c, block in enumerate(partition):
            labels[list(block)] = c
        lp = crp_log_prior(labels, config.concentration)
        for block in partition:
            block_ll = ll[list(block)].sum(axis=0)
            m = block_ll.max()
            lp += m + np.log(np.exp(block_ll - m).mean())
        if lp > best_lp:
            best_lp, best = lp, labels
    return best, best_lp
