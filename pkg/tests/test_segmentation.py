import numpy as np
import pytest

from opguide import segmentation as S
from opguide.trajectory import Trajectory

JOINTS = ("turret", "boom", "arm", "bucket")


def traj_from_v(v, rate=25.0):
    v = np.asarray(v, dtype=float)
    n = len(v)
    t = np.arange(n) / rate
    q = np.cumsum(v, axis=0) / rate
    return Trajectory(rate_hz=rate, joints=JOINTS, t=t, q=q, v=v, ee=q.copy())


def three_level_velocities(rng, n_per=1000, means=(0.5, 0.0, -0.5), std=0.02):
    chunks = [rng.normal(m, std, size=(n_per, 4)) for m in means]
    return np.concatenate(chunks, axis=0)


def test_cluster_means_recovered():
    rng = np.random.default_rng(0)
    v = three_level_velocities(rng)
    model = S.fit_velocity_clusters([traj_from_v(v)], seed=1)
    for j in range(4):
        assert np.abs(model.mu[j] - np.array([0.5, 0.0, -0.5])).max() < 0.02


def test_label_means_descending():
    rng = np.random.default_rng(1)
    model = S.fit_velocity_clusters([traj_from_v(three_level_velocities(rng))], seed=1)
    assert (np.diff(model.mu, axis=1) <= 1e-12).all()


def test_all_zero_joint_flagged_stationary():
    rng = np.random.default_rng(2)
    v = three_level_velocities(rng)
    v[:, 2] = 0.0
    model = S.fit_velocity_clusters([traj_from_v(v)], seed=1)
    assert model.always_stationary[2]
    assert not model.always_stationary[0]
    # degenerate joint always classifies stationary
    assert S.classify_primitive([0.5, 0.0, 99.0, 0.0], model).e[2] == 2


def test_fit_requires_samples():
    tiny = traj_from_v(np.zeros((2, 4)))
    with pytest.raises(ValueError, match="at least 3"):
        S.fit_velocity_clusters([tiny], seed=0)


def test_fit_deterministic():
    rng = np.random.default_rng(3)
    v = three_level_velocities(rng)
    a = S.fit_velocity_clusters([traj_from_v(v)], seed=9)
    b = S.fit_velocity_clusters([traj_from_v(v)], seed=9)
    assert np.array_equal(a.mu, b.mu)
    assert np.array_equal(a.var, b.var)


def fitted_model(seed=0):
    rng = np.random.default_rng(seed)
    return S.fit_velocity_clusters([traj_from_v(three_level_velocities(rng))], seed=1)


def test_classify_at_stationary_mean():
    model = fitted_model()
    prim = S.classify_primitive(model.mu[:, 1], model)
    assert prim.e == (2, 2, 2, 2)


def test_classify_near_positive_cluster():
    """At v=0.45 the three densities order as ccw > cw, stationary below eta."""
    mu = np.tile(np.array([0.5, 0.0, -0.5]), (4, 1))
    var = np.full((4, 3), 0.1**2)
    eta = np.exp(-2.0) / (0.1 * np.sqrt(2 * np.pi))
    model = S.VelocityClusterModel(
        mu=mu, var=var, label_map=np.tile(np.arange(3), (4, 1)),
        eta=np.full(4, eta), always_stationary=np.zeros(4, dtype=bool),
    )
    # independent density evaluation
    def pdf(x, m, s2):
        return np.exp(-0.5 * (x - m) ** 2 / s2) / np.sqrt(2 * np.pi * s2)

    assert pdf(0.45, 0.0, 0.01) < eta
    assert pdf(0.45, 0.5, 0.01) > pdf(0.45, -0.5, 0.01)
    assert S.classify_primitive([0.45, 0, 0, 0], model).e == (1, 2, 2, 2)


def test_single_joint_motion_matches_paper_style():
    model = fitted_model()
    prim = S.classify_primitive([0.45, 0.0, 0.0, 0.0], model)
    assert prim.e == (1, 2, 2, 2)


def test_segment_constant_velocity_single_segment():
    model = fitted_model()
    v = np.tile(np.array([0.5, 0.0, 0.0, 0.0]), (40, 1))
    segments, obs = S.segment_trajectory(traj_from_v(v), model)
    assert len(segments) == 1
    assert segments[0].start_frame == 0
    assert segments[0].end_frame == 39
    assert len(obs) == 1


def test_segment_debounce_absorbs_blips():
    model = fitted_model()
    v = np.tile(np.array([0.5, 0.0, 0.0, 0.0]), (60, 1))
    v[30] = [0.0, 0.5, 0.0, 0.0]  # single-frame blip
    segments, _ = S.segment_trajectory(traj_from_v(v), model, min_len=3)
    assert len(segments) == 1
    assert segments[0].primitive.e == (1, 2, 2, 2)


def test_segment_short_leading_run_merges_forward():
    model = fitted_model()
    v = np.concatenate([
        np.tile(np.array([0.5, 0, 0, 0]), (2, 1)),
        np.tile(np.array([-0.5, 0, 0, 0]), (30, 1)),
    ])
    segments, _ = S.segment_trajectory(traj_from_v(v), model, min_len=3)
    assert len(segments) == 1
    assert segments[0].start_frame == 0


def test_noiseless_demo_recovers_oracle(clean_demos, clean_pipeline):
    traj, oracle = clean_demos[0]
    model = clean_pipeline["clusters"]
    segments, _ = S.segment_trajectory(traj, model)
    assert len(segments) == len(oracle.runs)
    for seg, (prim, start, end) in zip(segments, oracle.runs):
        assert seg.primitive.e == prim.e
        assert seg.start_frame == start
        assert seg.end_frame == end


def test_vocabulary_bound(clean_pipeline):
    ids = {o.a.id for o in clean_pipeline["obs"].items}
    assert len(ids) <= 81


def test_frame_label_soundness(clean_demos, clean_pipeline):
    """Frames inside a segment classify to the segment's primitive."""
    traj, _ = clean_demos[1]
    model = clean_pipeline["clusters"]
    segments, _ = S.segment_trajectory(traj, model)
    codes = S.classify_frames(traj.v, model)
    weights = 3 ** np.arange(4)
    ids = ((codes.astype(int) - 1) * weights).sum(axis=1)
    for seg in segments:
        inside = ids[seg.start_frame : seg.end_frame + 1]
        assert (inside == seg.primitive.id).all()


def test_segmentation_deterministic(clean_demos):
    traj, _ = clean_demos[0]
    a = S.fit_velocity_clusters([traj], seed=5)
    b = S.fit_velocity_clusters([traj], seed=5)
    segs_a, _ = S.segment_trajectory(traj, a)
    segs_b, _ = S.segment_trajectory(traj, b)
    assert [(s.start_frame, s.end_frame, s.primitive.id) for s in segs_a] == [
        (s.start_frame, s.end_frame, s.primitive.id) for s in segs_b
    ]


def test_noise_robust_frame_accuracy(task, links):
    """noise_std at 10% of the cluster separation keeps accuracy >= 95%."""
    from opguide import kinematics as K

    traj, oracle = K.generate_expert_demo(task, links, cycles=3,
                                          noise_std=0.05, seed=11)
    model = S.fit_velocity_clusters([traj], seed=1)
    segments, _ = S.segment_trajectory(traj, model)
    labels = np.zeros(traj.n_frames, dtype=int)
    for seg in segments:
        labels[seg.start_frame : seg.end_frame + 1] = seg.primitive.id
    weights = 3 ** np.arange(4)
    truth = ((oracle.frame_codes.astype(int) - 1) * weights).sum(axis=1)
    assert (labels == truth).mean() >= 0.95


def test_calibrate_eta_improves_or_matches():
    rng = np.random.default_rng(4)
    v = three_level_velocities(rng, n_per=400)
    codes = np.where(v > 0.25, 1, np.where(v < -0.25, 3, 2))
    model = S.fit_velocity_clusters([traj_from_v(v)], seed=1)
    base_acc = (S.classify_frames(v, model) == codes).mean()
    tuned = S.calibrate_eta(model, v, codes)
    tuned_acc = (S.classify_frames(v, tuned) == codes).mean()
    assert tuned_acc >= base_acc


def test_observation_set_requires_items():
    with pytest.raises(ValueError):
        S.ObservationSet(items=[])
