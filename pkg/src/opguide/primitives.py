"""Ternary per-joint action codes.

Each joint is in one of three motion states: 1 = counterclockwise (positive
velocity), 2 = stationary / noisy perturbation, 3 = clockwise (negative
velocity). A robot-level action is the tuple of these states over all joints,
packed into a single integer id for hashing and serialization.
"""

from __future__ import annotations

from dataclasses import dataclass

N_JOINTS = 4

# axis command sign for each joint state
_STATE_TO_SIGN = {1: 1.0, 2: 0.0, 3: -1.0}


@dataclass(frozen=True)
class ActionPrimitive:
    """Per-joint ternary motion code, e.g. (1, 2, 2, 2) = turret ccw only."""

    e: tuple[int, ...]

    def __post_init__(self):
        if not self.e:
            raise ValueError("action primitive needs at least one joint")
        if any(ej not in (1, 2, 3) for ej in self.e):
            raise ValueError(f"joint states must be in {{1,2,3}}, got {self.e}")

    @property
    def id(self) -> int:
        return encode(self.e)

    @property
    def n_joints(self) -> int:
        return len(self.e)

    def signs(self) -> tuple[float, ...]:
        """Map states to axis directions: 1 -> +1, 2 -> 0, 3 -> -1."""
        return tuple(_STATE_TO_SIGN[ej] for ej in self.e)

    def __str__(self) -> str:
        return "[" + ",".join(str(ej) for ej in self.e) + "]"


def encode(e) -> int:
    """Pack joint states into an integer: sum of (e_j - 1) * 3**j."""
    code = 0
    for j, ej in enumerate(e):
        if ej not in (1, 2, 3):
            raise ValueError(f"joint state {ej} out of range")
        code += (ej - 1) * 3**j
    return code


def decode(code: int, n_joints: int = N_JOINTS) -> ActionPrimitive:
    """Inverse of :func:`encode` for a fixed joint count."""
    if not 0 <= code < 3**n_joints:
        raise ValueError(f"id {code} out of range for {n_joints} joints")
    e = []
    for _ in range(n_joints):
        e.append(code % 3 + 1)
        code //= 3
    return ActionPrimitive(tuple(e))


def vocabulary_size(n_joints: int = N_JOINTS) -> int:
    return 3**n_joints
