"""Demonstration trajectory container and file formats.

Primary format is JSONL: a header line declaring the sample rate and joint
names, then one record per frame. CSV with columns t,q1..q4,v1..v4,x,y,z,phi
is accepted with a leading `# rate_hz=... joints=...` comment line. Velocity
columns may be omitted in either format, in which case v is reconstructed by
central differences of q.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

_TIME_TOL = 1e-6


@dataclass
class Trajectory:
    rate_hz: float
    joints: tuple[str, ...]
    t: np.ndarray  # (n,)
    q: np.ndarray  # (n, 4)
    v: np.ndarray  # (n, 4)
    ee: np.ndarray  # (n, 4) x, y, z, phi
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        n = len(self.t)
        self.q = np.asarray(self.q, dtype=float).reshape(n, -1 if n else 4)
        self.v = np.asarray(self.v, dtype=float).reshape(n, -1 if n else 4)
        self.ee = np.asarray(self.ee, dtype=float).reshape(n, -1 if n else 4)
        self.joints = tuple(self.joints)
        self.validate()

    @property
    def n_frames(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if self.n_frames else 0.0

    def validate(self):
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be > 0")
        if len(self.joints) != 4:
            raise ValueError(f"expected 4 joint names, got {len(self.joints)}")
        for name, arr in (("q", self.q), ("v", self.v), ("ee", self.ee)):
            if arr.shape != (self.n_frames, 4):
                raise ValueError(f"{name} must be (n, 4), got {arr.shape}")
            if self.n_frames and not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
        if self.n_frames > 1:
            dt = np.diff(self.t)
            if (dt <= 0).any():
                k = int(np.argmax(dt <= 0))
                raise ValueError(f"time not strictly increasing at frame {k + 1}")
            period = 1.0 / self.rate_hz
            if np.abs(dt - period).max() > _TIME_TOL:
                raise ValueError(
                    f"non-uniform sampling: max deviation "
                    f"{np.abs(dt - period).max():.3g} s from {period:.6g} s"
                )


def central_difference_velocity(t: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Per-joint dq/dt; one-sided at the endpoints."""
    n = len(t)
    if n < 2:
        return np.zeros_like(q)
    v = np.empty_like(q)
    v[1:-1] = (q[2:] - q[:-2]) / (t[2:] - t[:-2])[:, None]
    v[0] = (q[1] - q[0]) / (t[1] - t[0])
    v[-1] = (q[-1] - q[-2]) / (t[-1] - t[-2])
    return v


def _as_text_lines(source) -> list[str]:
    if hasattr(source, "read"):
        data = source.read()
    elif isinstance(source, (bytes, bytearray)):
        data = source
    else:  # path
        with open(source, "rb") as fh:
            data = fh.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data.splitlines()


def load_trajectory(source, format: str = "jsonl") -> Trajectory:
    """Parse a trajectory from a byte stream, path, or bytes.

    Raises ValueError naming the offending line on malformed input.
    """
    lines = _as_text_lines(source)
    if format == "jsonl":
        return _load_jsonl(lines)
    if format == "csv":
        return _load_csv(lines)
    raise ValueError(f"unknown format {format!r} (expected jsonl or csv)")


def _load_jsonl(lines: list[str]) -> Trajectory:
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise ValueError("empty document: missing header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValueError(f"line 1: bad header JSON ({exc})") from exc
    if "rate_hz" not in header or "joints" not in header:
        raise ValueError("line 1: header must declare rate_hz and joints")

    t, q, v, ee = [], [], [], []
    have_v = True
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: bad JSON ({exc})") from exc
        try:
            t.append(float(rec["t"]))
            q.append(_vec4(rec["q"], lineno, "q"))
            ee.append(_vec4(rec["ee"], lineno, "ee"))
        except KeyError as exc:
            raise ValueError(f"line {lineno}: missing field {exc}") from exc
        if "v" in rec:
            v.append(_vec4(rec["v"], lineno, "v"))
        else:
            have_v = False
    t = np.array(t)
    q = np.array(q).reshape(len(t), 4)
    ee = np.array(ee).reshape(len(t), 4)
    if have_v and v:
        v = np.array(v)
    else:
        v = central_difference_velocity(t, q)
    return Trajectory(
        rate_hz=float(header["rate_hz"]),
        joints=tuple(header["joints"]),
        t=t,
        q=q,
        v=v,
        ee=ee,
        meta=dict(header.get("meta", {})),
    )


def _vec4(value, lineno: int, name: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ValueError(f"line {lineno}: field {name} must be a 4-vector")
    return [float(c) for c in value]


_CSV_Q = [f"q{i}" for i in range(1, 5)]
_CSV_V = [f"v{i}" for i in range(1, 5)]
_CSV_EE = ["x", "y", "z", "phi"]


def _load_csv(lines: list[str]) -> Trajectory:
    lines = [ln for ln in lines if ln.strip()]
    if len(lines) < 2:
        raise ValueError("csv needs a comment header and a column header")
    head = lines[0].strip()
    if not head.startswith("#"):
        raise ValueError("line 1: expected '# rate_hz=... joints=a|b|c|d' comment")
    rate_hz = None
    joints = None
    for token in head.lstrip("#").split():
        if token.startswith("rate_hz="):
            rate_hz = float(token.split("=", 1)[1])
        elif token.startswith("joints="):
            joints = tuple(token.split("=", 1)[1].split("|"))
    if rate_hz is None or joints is None:
        raise ValueError("line 1: header must declare rate_hz and joints")

    cols = [c.strip() for c in lines[1].split(",")]
    required = ["t"] + _CSV_Q + _CSV_EE
    missing = [c for c in required if c not in cols]
    if missing:
        raise ValueError(f"line 2: missing columns {missing}")
    have_v = all(c in cols for c in _CSV_V)
    idx = {c: i for i, c in enumerate(cols)}

    rows = []
    for lineno, ln in enumerate(lines[2:], start=3):
        parts = ln.split(",")
        if len(parts) != len(cols):
            raise ValueError(
                f"line {lineno}: expected {len(cols)} fields, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: non-numeric field ({exc})") from exc
    data = np.array(rows).reshape(len(rows), len(cols))
    t = data[:, idx["t"]]
    q = data[:, [idx[c] for c in _CSV_Q]]
    ee = data[:, [idx[c] for c in _CSV_EE]]
    v = data[:, [idx[c] for c in _CSV_V]] if have_v else central_difference_velocity(t, q)
    return Trajectory(rate_hz=rate_hz, joints=joints, t=t, q=q, v=v, ee=ee)


def save_trajectory(traj: Trajectory, format: str = "jsonl") -> bytes:
    """Serialize so that load_trajectory(save_trajectory(x)) == x."""
    buf = io.StringIO()
    if format == "jsonl":
        header = {"rate_hz": traj.rate_hz, "joints": list(traj.joints)}
        if traj.meta:
            header["meta"] = traj.meta
        buf.write(json.dumps(header) + "\n")
        for k in range(traj.n_frames):
            rec = {
                "t": traj.t[k],
                "q": traj.q[k].tolist(),
                "v": traj.v[k].tolist(),
                "ee": traj.ee[k].tolist(),
            }
            buf.write(json.dumps(rec) + "\n")
    elif format == "csv":
        buf.write(f"# rate_hz={traj.rate_hz:g} joints={'|'.join(traj.joints)}\n")
        buf.write(",".join(["t"] + _CSV_Q + _CSV_V + _CSV_EE) + "\n")
        for k in range(traj.n_frames):
            row = np.concatenate(([traj.t[k]], traj.q[k], traj.v[k], traj.ee[k]))
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
    else:
        raise ValueError(f"unknown format {format!r} (expected jsonl or csv)")
    return buf.getvalue().encode("utf-8")


def resample(traj: Trajectory, target_hz: float) -> Trajectory:
    """Linear interpolation of q and ee onto a uniform target grid.

    Velocities are recomputed by central differences at the new rate. First
    and last timestamps are preserved to within one target period.
    """
    if target_hz <= 0:
        raise ValueError("target_hz must be > 0")
    if traj.n_frames < 2:
        raise ValueError("resample needs at least 2 frames")
    if abs(target_hz - traj.rate_hz) < 1e-12:
        return Trajectory(
            rate_hz=traj.rate_hz,
            joints=traj.joints,
            t=traj.t.copy(),
            q=traj.q.copy(),
            v=traj.v.copy(),
            ee=traj.ee.copy(),
            meta=dict(traj.meta),
        )
    period = 1.0 / target_hz
    n_new = int(np.floor(traj.duration / period + 1e-9)) + 1
    t_new = traj.t[0] + np.arange(n_new) * period
    q_new = np.column_stack(
        [np.interp(t_new, traj.t, traj.q[:, j]) for j in range(4)]
    )
    ee_new = np.column_stack(
        [np.interp(t_new, traj.t, traj.ee[:, j]) for j in range(4)]
    )
    return Trajectory(
        rate_hz=target_hz,
        joints=traj.joints,
        t=t_new,
        q=q_new,
        v=central_difference_velocity(t_new, q_new),
        ee=ee_new,
        meta=dict(traj.meta),
    )
