import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opguide.trajectory import (
    Trajectory,
    central_difference_velocity,
    load_trajectory,
    resample,
    save_trajectory,
)

JOINTS = ("turret", "boom", "arm", "bucket")


def make_traj(n=10, rate=25.0, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / rate
    q = rng.normal(size=(n, 4))
    v = rng.normal(size=(n, 4))
    ee = rng.normal(size=(n, 4))
    return Trajectory(rate_hz=rate, joints=JOINTS, t=t, q=q, v=v, ee=ee)


def test_load_two_frame_jsonl():
    doc = (
        '{"rate_hz": 25, "joints": ["turret", "boom", "arm", "bucket"]}\n'
        '{"t": 0.0, "q": [0,0,0,0], "v": [1,0,0,0], "ee": [2.2,0,0.5,0]}\n'
        '{"t": 0.04, "q": [0.02,0,0,0], "v": [1,0,0,0], "ee": [2.2,0.04,0.5,0]}\n'
    )
    traj = load_trajectory(io.BytesIO(doc.encode()), "jsonl")
    assert traj.n_frames == 2
    assert traj.rate_hz == 25
    assert traj.joints == JOINTS


def test_csv_missing_time_column_errors():
    doc = (
        "# rate_hz=25 joints=turret|boom|arm|bucket\n"
        "q1,q2,q3,q4,x,y,z,phi\n"
        "0,0,0,0,2.2,0,0.5,0\n"
    )
    with pytest.raises(ValueError, match="missing columns.*t"):
        load_trajectory(doc.encode(), "csv")


def test_jsonl_bad_row_names_line():
    doc = (
        '{"rate_hz": 25, "joints": ["turret", "boom", "arm", "bucket"]}\n'
        '{"t": 0.0, "q": [0,0,0,0], "v": [0,0,0,0], "ee": [0,0,0,0]}\n'
        "not json\n"
    )
    with pytest.raises(ValueError, match="line 3"):
        load_trajectory(doc.encode(), "jsonl")


def test_nonmonotone_time_rejected():
    doc = (
        '{"rate_hz": 25, "joints": ["turret", "boom", "arm", "bucket"]}\n'
        '{"t": 0.04, "q": [0,0,0,0], "v": [0,0,0,0], "ee": [0,0,0,0]}\n'
        '{"t": 0.0, "q": [0,0,0,0], "v": [0,0,0,0], "ee": [0,0,0,0]}\n'
    )
    with pytest.raises(ValueError, match="time not strictly increasing"):
        load_trajectory(doc.encode(), "jsonl")


def test_wrong_arity_rejected():
    doc = (
        '{"rate_hz": 25, "joints": ["turret", "boom", "arm", "bucket"]}\n'
        '{"t": 0.0, "q": [0,0,0], "v": [0,0,0,0], "ee": [0,0,0,0]}\n'
    )
    with pytest.raises(ValueError, match="4-vector"):
        load_trajectory(doc.encode(), "jsonl")


def test_empty_trajectory_saves_header_only():
    traj = make_traj(0)
    data = save_trajectory(traj, "jsonl")
    assert len(data.splitlines()) == 1
    again = load_trajectory(data, "jsonl")
    assert again.n_frames == 0


@pytest.mark.parametrize("fmt", ["jsonl", "csv"])
def test_roundtrip_bitwise(fmt):
    traj = make_traj(50)
    again = load_trajectory(save_trajectory(traj, fmt), fmt)
    assert np.array_equal(again.t, traj.t)
    assert np.array_equal(again.q, traj.q)
    assert np.array_equal(again.v, traj.v)
    assert np.array_equal(again.ee, traj.ee)
    assert again.joints == traj.joints


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 40), st.integers(0, 2**31 - 1))
def test_roundtrip_property(n, seed):
    traj = make_traj(n, seed=seed)
    again = load_trajectory(save_trajectory(traj, "jsonl"), "jsonl")
    assert np.array_equal(again.q, traj.q)
    assert np.array_equal(again.v, traj.v)


def test_missing_velocity_central_differences():
    n = 8
    t = np.arange(n) / 25.0
    q = np.linspace(0, 1, n)[:, None] * np.array([1.0, 2.0, -1.0, 0.5])
    lines = ['{"rate_hz": 25, "joints": ["turret", "boom", "arm", "bucket"]}']
    for k in range(n):
        lines.append(
            '{"t": %r, "q": %s, "ee": [0,0,0,0]}' % (float(t[k]), q[k].tolist())
        )
    traj = load_trajectory("\n".join(lines).encode(), "jsonl")
    assert np.allclose(traj.v, central_difference_velocity(t, q))


def test_resample_identity():
    traj = make_traj(20)
    out = resample(traj, 25.0)
    assert np.array_equal(out.q, traj.q)
    assert np.array_equal(out.v, traj.v)


def test_resample_linear_ramp_exact():
    n = 21
    t = np.arange(n) / 50.0
    ramp = np.linspace(0.0, 1.0, n)
    q = ramp[:, None] * np.array([1.0, -0.5, 0.25, 2.0])
    traj = Trajectory(rate_hz=50.0, joints=JOINTS, t=t, q=q,
                      v=np.zeros((n, 4)), ee=q.copy())
    out = resample(traj, 25.0)
    assert np.allclose(out.q, q[::2], atol=1e-12)


def test_resample_up_down_roundtrip():
    n = 26
    t = np.arange(n) / 25.0
    q = np.cumsum(np.ones((n, 4)) * 0.01, axis=0)  # piecewise-linear
    traj = Trajectory(rate_hz=25.0, joints=JOINTS, t=t, q=q,
                      v=np.zeros((n, 4)), ee=q.copy())
    back = resample(resample(traj, 50.0), 25.0)
    assert back.n_frames == traj.n_frames
    assert np.abs(back.q - traj.q).max() < 1e-9


def test_resample_preserves_endpoints_within_period():
    traj = make_traj(40)
    out = resample(traj, 10.0)
    assert out.t[0] == traj.t[0]
    assert traj.t[-1] - out.t[-1] <= 1.0 / 10.0 + 1e-12


def test_resample_needs_two_frames():
    with pytest.raises(ValueError):
        resample(make_traj(1), 50.0)


def test_invariants_enforced_on_load():
    # uniform-spacing violation cannot produce a Trajectory
    doc = (
        '{"rate_hz": 25, "joints": ["turret", "boom", "arm", "bucket"]}\n'
        '{"t": 0.0, "q": [0,0,0,0], "v": [0,0,0,0], "ee": [0,0,0,0]}\n'
        '{"t": 0.1, "q": [0,0,0,0], "v": [0,0,0,0], "ee": [0,0,0,0]}\n'
    )
    with pytest.raises(ValueError, match="non-uniform"):
        load_trajectory(doc.encode(), "jsonl")
