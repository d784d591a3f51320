"""Hierarchical instruction model: a subgoal transition chain on top,
per-subgoal primitive transition chains below, and Gaussian velocity
emissions per (subgoal, primitive) at the leaves.

Learning is transition counting over segmented demonstrations with add-one
smoothing restricted to each subgoal's observed primitive vocabulary. A
chain's entry row holds the first primitive seen after arriving at that
subgoal; primitives last seen before leaving a subgoal are marked terminal,
which is what lets a generative rollout hand over to the next subgoal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .primitives import ActionPrimitive, decode
from .segmentation import PrimitiveSegment, VelocityClusterModel
from .subgoals import SubgoalSet, most_likely_subgoal

_ROW_TOL = 1e-9
_VAR_FLOOR = 1e-8


@dataclass
class SubgoalChain:
    subgoal: int
    vocab: list[int]  # sorted primitive ids
    entry: np.ndarray  # (V,) distribution over vocab
    trans: np.ndarray  # (V, V) row-stochastic
    terminal: set[int] = field(default_factory=set)

    def index_of(self, prim_id: int) -> int | None:
        try:
            return self.vocab.index(prim_id)
        except ValueError:
            return None


@dataclass
class InstructionPolicyModel:
    subgoal_trans: np.ndarray  # (p, p) row-stochastic
    chains: dict[int, SubgoalChain]
    emissions: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]
    pooled_emissions: dict[int, tuple[np.ndarray, np.ndarray]]
    subgoals: SubgoalSet

    def __post_init__(self):
        self.validate()

    def validate(self):
        p = len(self.subgoals)
        if self.subgoal_trans.shape != (p, p):
            raise ValueError("subgoal transition matrix shape mismatch")
        if np.abs(self.subgoal_trans.sum(axis=1) - 1.0).max() > _ROW_TOL:
            raise ValueError("subgoal transition rows must sum to 1")
        for chain in self.chains.values():
            if not chain.vocab:
                raise ValueError(f"subgoal {chain.subgoal} has empty vocabulary")
            if abs(chain.entry.sum() - 1.0) > _ROW_TOL:
                raise ValueError("entry row must sum to 1")
            if np.abs(chain.trans.sum(axis=1) - 1.0).max() > _ROW_TOL:
                raise ValueError("primitive transition rows must sum to 1")
        for mean, var in self.emissions.values():
            if (var <= 0).any():
                raise ValueError("emission variances must be positive")


def _smooth_rows(counts: np.ndarray) -> np.ndarray:
    return (counts + 1.0) / (counts.sum(axis=-1, keepdims=True) + counts.shape[-1])


def learn_policy(segments_per_demo: list[list[PrimitiveSegment]],
                 sgs: SubgoalSet) -> InstructionPolicyModel:
    """Count subgoal and primitive transitions over per-demo segment lists.

    Each segment is attributed to the subgoal most likely at its start pose.
    Counting never crosses demo boundaries.
    """
    if not segments_per_demo or all(not s for s in segments_per_demo):
        raise ValueError("need at least one demo with segments")
    p = len(sgs)

    sg_counts = np.zeros((p, p))
    vocab_sets: dict[int, set[int]] = {}
    entry_counts: dict[int, dict[int, float]] = {}
    trans_counts: dict[int, dict[tuple[int, int], float]] = {}
    terminal: dict[int, set[int]] = {}
    frames: dict[tuple[int, int], list] = {}
    pooled_frames: dict[int, list] = {}

    for segs in segments_per_demo:
        labels = [most_likely_subgoal(seg.s, sgs) for seg in segs]
        for k, (seg, label) in enumerate(zip(segs, labels)):
            pid = seg.primitive.id
            vocab_sets.setdefault(label, set()).add(pid)
            key = (label, pid)
            # per-segment sufficient statistics; pooled exactly in moments()
            frames.setdefault(key, []).append((seg.mean_v, seg.var_v, seg.n_frames))
            pooled_frames.setdefault(pid, []).append((seg.mean_v, seg.var_v, seg.n_frames))

            if k == 0 or labels[k - 1] != label:
                entry_counts.setdefault(label, {})
                entry_counts[label][pid] = entry_counts[label].get(pid, 0.0) + 1.0
            else:
                prev_pid = segs[k - 1].primitive.id
                trans_counts.setdefault(label, {})
                trans_counts[label][(prev_pid, pid)] = (
                    trans_counts[label].get((prev_pid, pid), 0.0) + 1.0
                )
            if k + 1 < len(segs):
                if labels[k + 1] != label:
                    sg_counts[label, labels[k + 1]] += 1.0
                    terminal.setdefault(label, set()).add(pid)

    chains: dict[int, SubgoalChain] = {}
    for label, vocab in vocab_sets.items():
        vocab_list = sorted(vocab)
        v = len(vocab_list)
        pos = {pid: i for i, pid in enumerate(vocab_list)}
        entry = np.zeros(v)
        for pid, c in entry_counts.get(label, {}).items():
            entry[pos[pid]] = c
        trans = np.zeros((v, v))
        for (a, b), c in trans_counts.get(label, {}).items():
            trans[pos[a], pos[b]] = c
        chains[label] = SubgoalChain(
            subgoal=label,
            vocab=vocab_list,
            entry=_smooth_rows(entry[None, :])[0],
            trans=_smooth_rows(trans),
            terminal=terminal.get(label, set()),
        )

    def moments(acc):
        """Pool per-segment (mean, var, n) into frame-weighted moments."""
        n_total = sum(n for _, _, n in acc)
        mean = sum(m * n for m, _, n in acc) / n_total
        second = sum((v + m**2) * n for m, v, n in acc) / n_total
        var = np.maximum(second - mean**2, _VAR_FLOOR)
        return mean, var

    emissions = {key: moments(acc) for key, acc in frames.items()}
    pooled = {pid: moments(acc) for pid, acc in pooled_frames.items()}

    return InstructionPolicyModel(
        subgoal_trans=_smooth_rows(sg_counts),
        chains=chains,
        emissions=emissions,
        pooled_emissions=pooled,
        subgoals=sgs,
    )


def next_primitive(model: InstructionPolicyModel, subgoal_id: int,
                   prev: ActionPrimitive | None):
    """Distribution over the subgoal's vocabulary and its argmax.

    prev=None (or a primitive outside the vocabulary) selects the entry row.
    Raises on a subgoal never visited in training: there is nothing to
    instruct there without more demonstrations.
    """
    if not 0 <= subgoal_id < len(model.subgoals):
        raise ValueError(f"subgoal id {subgoal_id} out of range")
    chain = model.chains.get(subgoal_id)
    if chain is None:
        raise ValueError(
            f"subgoal {subgoal_id} was never visited in the demonstrations; "
            "insufficient data to instruct from it"
        )
    row = chain.entry
    if prev is not None:
        idx = chain.index_of(prev.id)
        if idx is not None:
            row = chain.trans[idx]
    dist = {pid: float(pr) for pid, pr in zip(chain.vocab, row)}
    best = chain.vocab[int(np.argmax(row))]  # first max = lowest id (sorted vocab)
    return dist, decode(best)


def next_subgoal(model: InstructionPolicyModel, subgoal_id: int) -> np.ndarray:
    if not 0 <= subgoal_id < len(model.subgoals):
        raise ValueError(f"subgoal id {subgoal_id} out of range")
    return model.subgoal_trans[subgoal_id]


def velocity_mean(model: InstructionPolicyModel, subgoal_id: int,
                  prim: ActionPrimitive) -> np.ndarray:
    """Emission mean; falls back to the primitive pooled over subgoals."""
    key = (subgoal_id, prim.id)
    if key in model.emissions:
        return model.emissions[key][0]
    if prim.id in model.pooled_emissions:
        return model.pooled_emissions[prim.id][0]
    raise KeyError(f"no emission parameters for subgoal {subgoal_id}, "
                   f"primitive {prim}")


def sample_velocity(model: InstructionPolicyModel, subgoal_id: int,
                    prim: ActionPrimitive, seed: int = 0) -> np.ndarray:
    key = (subgoal_id, prim.id)
    if key in model.emissions:
        mean, var = model.emissions[key]
    elif prim.id in model.pooled_emissions:
        mean, var = model.pooled_emissions[prim.id]
    else:
        raise KeyError(f"no emission parameters for subgoal {subgoal_id}, "
                       f"primitive {prim}")
    rng = np.random.default_rng(seed)
    return rng.normal(mean, np.sqrt(var))


def rollout(model: InstructionPolicyModel, start_subgoal: int, steps: int,
            seed: int = 0, greedy: bool = False):
    """Generate (subgoal, primitive) pairs from the two-level chain.

    Primitives come from the active subgoal's chain; when a terminal
    primitive is emitted the subgoal advances along the top-level chain and
    the next subgoal's chain restarts at its entry row.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = np.random.default_rng(seed)
    sg = start_subgoal
    prev: ActionPrimitive | None = None
    out: list[tuple[int, ActionPrimitive]] = []
    for _ in range(steps):
        dist, best = next_primitive(model, sg, prev)
        if greedy:
            prim = best
        else:
            ids = list(dist.keys())
            probs = np.array(list(dist.values()))
            prim = decode(int(rng.choice(ids, p=probs / probs.sum())))
        out.append((sg, prim))
        if prim.id in model.chains[sg].terminal:
            row = next_subgoal(model, sg)
            sg = int(np.argmax(row)) if greedy else int(rng.choice(len(row), p=row))
            prev = None
        else:
            prev = prim
    return out


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_policy(model: InstructionPolicyModel, subgoals_ref: str = "",
                clusters: VelocityClusterModel | None = None) -> str:
    doc = {
        "subgoals_ref": subgoals_ref,
        "Pi": model.subgoal_trans.tolist(),
        "chains": [
            {
                "subgoal": c.subgoal,
                "vocab": c.vocab,
                "entry": c.entry.tolist(),
                "trans": c.trans.tolist(),
                "terminal": sorted(c.terminal),
            }
            for c in model.chains.values()
        ],
        "emissions": [
            {
                "subgoal": sg,
                "primitive": pid,
                "mean": mean.tolist(),
                "var": var.tolist(),
            }
            for (sg, pid), (mean, var) in model.emissions.items()
        ]
        + [
            {
                "subgoal": None,
                "primitive": pid,
                "mean": mean.tolist(),
                "var": var.tolist(),
            }
            for pid, (mean, var) in model.pooled_emissions.items()
        ],
    }
    if clusters is not None:
        doc["clusters"] = clusters.to_dict()
    return json.dumps(doc, indent=1)


def load_policy(text: str, sgs: SubgoalSet):
    """Returns (model, clusters-or-None, subgoals_ref)."""
    doc = json.loads(text)
    chains = {}
    for c in doc["chains"]:
        chains[int(c["subgoal"])] = SubgoalChain(
            subgoal=int(c["subgoal"]),
            vocab=[int(x) for x in c["vocab"]],
            entry=np.array(c["entry"], dtype=float),
            trans=np.array(c["trans"], dtype=float),
            terminal=set(int(x) for x in c["terminal"]),
        )
    emissions = {}
    pooled = {}
    for e in doc["emissions"]:
        mean = np.array(e["mean"], dtype=float)
        var = np.array(e["var"], dtype=float)
        if e["subgoal"] is None:
            pooled[int(e["primitive"])] = (mean, var)
        else:
            emissions[(int(e["subgoal"]), int(e["primitive"]))] = (mean, var)
    model = InstructionPolicyModel(
        subgoal_trans=np.array(doc["Pi"], dtype=float),
        chains=chains,
        emissions=emissions,
        pooled_emissions=pooled,
        subgoals=sgs,
    )
    clusters = (
        VelocityClusterModel.from_dict(doc["clusters"]) if "clusters" in doc else None
    )
    return model, clusters, doc.get("subgoals_ref", "")
