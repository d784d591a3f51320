import numpy as np
import pytest

from opguide import subgoals as G
from opguide.kinematics import EndEffectorPose, TaskConfig, TaskObject
from opguide.segmentation import Observation, ObservationSet


def obs_from_states(states):
    return ObservationSet(items=[
        Observation(s=EndEffectorPose.from_vec(s), a=None, direction=np.zeros(4))
        for s in states
    ])


def planted_instance(d_between=1.0, sigma=0.1, members=40, seed=0,
                     n_per_object=3):
    """Two objects, n_per_object planted subgoals each.

    Per-dim scatter sigma/6 truncated at ||noise|| <= 1.3 sigma keeps every
    point inside the spawn radius at the smallest admissible lambda (2
    sigma^2) and keeps the within-blob split gain below it, so exactly one
    cluster per plant is optimal across the whole interval."""
    rng = np.random.default_rng(seed)
    centers_a = [np.array([i * d_between, 0.0, 0.0, 0.0]) for i in range(n_per_object)]
    centers_b = [np.array([10.0 + i * d_between, 5.0, 0.0, 0.0])
                 for i in range(n_per_object)]
    task = TaskConfig(objects=(
        TaskObject("a", np.array([d_between, 0.0, 0.0])),
        TaskObject("b", np.array([10.0 + d_between, 5.0, 0.0])),
    ))
    states, truth = [], []
    for gi, c in enumerate(centers_a + centers_b):
        for _ in range(members):
            while True:
                noise = rng.normal(0.0, sigma / 6.0, size=4)
                if np.linalg.norm(noise) <= 1.3 * sigma:
                    break
            states.append(c + noise)
            truth.append(gi)
    return task, np.array(states), np.array(truth), centers_a + centers_b


def test_partition_single_object():
    task = TaskConfig(objects=(TaskObject("only", np.zeros(3)),))
    obs = obs_from_states([[0, 0, 0, 0], [5, 5, 5, 0]])
    subsets = G.partition_by_object(obs, task)
    assert len(subsets) == 1
    assert len(subsets[0].obs_indices) == 2


def test_partition_tie_breaks_low_index():
    task = TaskConfig(objects=(
        TaskObject("left", np.array([-1.0, 0.0, 0.0])),
        TaskObject("right", np.array([1.0, 0.0, 0.0])),
    ))
    obs = obs_from_states([[0, 0, 0, 0]])  # equidistant
    subsets = G.partition_by_object(obs, task)
    assert len(subsets[0].obs_indices) == 1
    assert len(subsets[1].obs_indices) == 0


def test_partition_disjoint_cover(clean_pipeline, task):
    obs = clean_pipeline["obs"]
    subsets = G.partition_by_object(obs, task)
    all_idx = np.concatenate([s.obs_indices for s in subsets])
    assert sorted(all_idx.tolist()) == list(range(len(obs)))


def test_partition_object_frame_reexpression():
    task = TaskConfig(objects=(TaskObject("o", np.array([1.0, 2.0, 3.0])),))
    obs = obs_from_states([[1.0, 2.0, 3.0, 0.7]])
    subsets = G.partition_by_object(obs, task)
    assert np.allclose(subsets[0].states[0], [0, 0, 0, 0.7])


def test_scoop_and_dump_states_split_by_object(clean_pipeline, task, clean_demos):
    obs = clean_pipeline["obs"]
    subsets = G.partition_by_object(obs, task)
    pile_idx = set(subsets[0].obs_indices.tolist())
    # scoop-primitive observations (bucket closing) start at the pile
    for i, o in enumerate(obs.items):
        if o.a.e == (2, 2, 2, 1):
            assert i in pile_idx


def test_infer_single_subgoal_with_huge_lambda(clean_pipeline, task):
    obs = clean_pipeline["obs"]
    sgs = G.infer_subgoals(obs, task, lam=1e4)
    per_object = {}
    for sg in sgs.subgoals:
        per_object[sg.object_index] = per_object.get(sg.object_index, 0) + 1
    assert all(v == 1 for v in per_object.values())


def test_planted_recovery_exact_counts():
    task, states, truth, centers = planted_instance(seed=1)
    obs = obs_from_states(states)
    sigma, d = 0.1, 1.0
    lams = np.geomspace(2.2 * sigma**2, 0.9 * (d / 2) ** 2, 5)
    for lam in lams:
        sgs = G.infer_subgoals(obs, task, lam=float(lam))
        assert len(sgs) == 6, f"lambda={lam}: got {len(sgs)} subgoals"
        # centroid error bound
        for sg in sgs.subgoals:
            mu_base = sgs.mean_in_base_frame(sg.id)
            best = min(np.linalg.norm(mu_base - c) for c in centers)
            assert best < 3 * sigma / np.sqrt(sg.member_count)


def test_planted_assignment_matches_truth():
    task, states, truth, _ = planted_instance(seed=2)
    obs = obs_from_states(states)
    sgs = G.infer_subgoals(obs, task, lam=0.05)
    from opguide.bnirl import adjusted_rand_index

    assert adjusted_rand_index(sgs.assignment, truth) == pytest.approx(1.0)


def test_object_frame_generalization(clean_pipeline, task):
    """Rigidly translating an object and its states leaves that object's
    subgoal means in object frame unchanged."""
    obs = clean_pipeline["obs"]
    lam = G.default_lambda(task)
    base = G.infer_subgoals(obs, task, lam=lam)

    shift = np.array([5.0, -3.0, 1.0])
    subsets = G.partition_by_object(obs, task)
    moved_idx = set(subsets[1].obs_indices.tolist())
    new_items = []
    for i, o in enumerate(obs.items):
        vec = o.s.vec.copy()
        if i in moved_idx:
            vec[:3] += shift
        new_items.append(Observation(s=EndEffectorPose.from_vec(vec), a=o.a,
                                     direction=o.direction))
    moved_obs = ObservationSet(items=new_items)
    objs = list(task.objects)
    objs[1] = TaskObject(objs[1].name, objs[1].center + shift,
                         bed_height=objs[1].bed_height, radius=objs[1].radius)
    moved_task = TaskConfig(objects=tuple(objs))
    moved = G.infer_subgoals(moved_obs, moved_task, lam=lam)

    base_mus = sorted(
        [sg.mu.tolist() for sg in base.subgoals if sg.object_index == 1]
    )
    moved_mus = sorted(
        [sg.mu.tolist() for sg in moved.subgoals if sg.object_index == 1]
    )
    assert np.abs(np.array(base_mus) - np.array(moved_mus)).max() < 1e-9


def test_loglik_at_mean():
    sg = G.Subgoal(id=0, object_index=0, mu=np.zeros(4), sigma=np.eye(4) * 0.25,
                   member_count=3)
    task = TaskConfig(objects=(TaskObject("o", np.zeros(3)),))
    ll = G.subgoal_loglik(EndEffectorPose(0, 0, 0, 0), sg, task)
    expected = -0.5 * np.log((2 * np.pi) ** 4 * np.linalg.det(np.eye(4) * 0.25))
    assert ll == pytest.approx(expected)


def test_loglik_one_sigma_drop():
    sg = G.Subgoal(id=0, object_index=0, mu=np.zeros(4), sigma=np.eye(4) * 0.25,
                   member_count=3)
    task = TaskConfig(objects=(TaskObject("o", np.zeros(3)),))
    at_mean = G.subgoal_loglik(EndEffectorPose(0, 0, 0, 0), sg, task)
    one_sigma = G.subgoal_loglik(EndEffectorPose(0.5, 0, 0, 0), sg, task)
    assert at_mean - one_sigma == pytest.approx(0.5)


def test_most_likely_tie_breaks_low_id():
    task = TaskConfig(objects=(TaskObject("o", np.zeros(3)),))
    sg0 = G.Subgoal(id=0, object_index=0, mu=np.array([-1.0, 0, 0, 0]),
                    sigma=np.eye(4) * 0.1, member_count=1)
    sg1 = G.Subgoal(id=1, object_index=0, mu=np.array([1.0, 0, 0, 0]),
                    sigma=np.eye(4) * 0.1, member_count=1)
    sgs = G.SubgoalSet(subgoals=[sg0, sg1], task=task, lambda_used=1.0)
    assert G.most_likely_subgoal(EndEffectorPose(0, 0, 0, 0), sgs) == 0
    assert G.most_likely_subgoal(EndEffectorPose(0.9, 0, 0, 0), sgs) == 1


def test_subgoal_visits_follow_waypoints(clean_pipeline, clean_demos):
    """Replaying a demo's segment-start poses visits subgoals in a periodic
    order matching the oracle waypoints."""
    sgs = clean_pipeline["sgs"]
    traj, oracle = clean_demos[0]
    visit = []
    for w in oracle.waypoints:
        sg = G.most_likely_subgoal(w["pose"], sgs)
        if not visit or visit[-1] != sg:
            visit.append(sg)
    # first cycle: home-ish, pile block, truck block; afterwards periodic
    assert len(set(visit)) == len(sgs)
    period = visit[1:3]
    assert visit[1:-1] == period * ((len(visit) - 2) // 2) + visit[1:1 + (len(visit) - 2) % 2]


def test_serialization_roundtrip(clean_pipeline, task):
    sgs = clean_pipeline["sgs"]
    text = G.save_subgoals(sgs)
    again = G.load_subgoals(text, task)
    assert len(again) == len(sgs)
    for a, b in zip(again.subgoals, sgs.subgoals):
        assert a.id == b.id
        assert a.object_index == b.object_index
        assert np.allclose(a.mu, b.mu)
        assert np.allclose(a.sigma, b.sigma)


def test_subgoal_ids_dense(clean_pipeline):
    sgs = clean_pipeline["sgs"]
    assert [sg.id for sg in sgs.subgoals] == list(range(len(sgs)))
    assert (sgs.assignment >= 0).all()
