import numpy as np
import pytest

from opguide import kinematics as K
from opguide import policy as P
from opguide import segmentation as S
from opguide import subgoals as G


@pytest.fixture(scope="session")
def links():
    return K.default_links()


@pytest.fixture(scope="session")
def task(links):
    return K.default_task(links)


@pytest.fixture(scope="session")
def clean_demos(task, links):
    """Six noiseless scripted demos with oracle labels."""
    return K.generate_demo_set(task, links, n_demos=6, cycles=5,
                               noise_std=0.0, seed=0)


@pytest.fixture(scope="session")
def noisy_demos(task, links):
    """Six demos at the acceptance noise level."""
    return K.generate_demo_set(task, links, n_demos=6, cycles=5,
                               noise_std=0.02, seed=0)


@pytest.fixture(scope="session")
def clean_pipeline(task, links, clean_demos):
    """Clusters, segments, subgoals, and policy learned from clean demos."""
    trajs = [t for t, _ in clean_demos]
    clusters = S.fit_velocity_clusters(trajs, seed=2000)
    segments, obs = S.segment_demos(trajs, clusters)
    sgs = G.infer_subgoals(obs, task)
    model = P.learn_policy(segments, sgs)
    return {
        "trajs": trajs,
        "clusters": clusters,
        "segments": segments,
        "obs": obs,
        "sgs": sgs,
        "model": model,
    }


@pytest.fixture(scope="session")
def two_target_toy():
    """Six observations in two tight spatial groups, each aimed at an
    in-group anchor state (the n=6 comparison instance)."""
    items = []
    for base in (np.zeros(4), np.array([2.0, 2.0, 0.0, 0.0])):
        for off in (np.zeros(4), np.array([0.4, 0.0, 0.0, 0.0]),
                    np.array([0.0, 0.4, 0.0, 0.0])):
            s = base + off
            d = base - s
            n = np.linalg.norm(d)
            items.append(S.Observation(
                s=K.EndEffectorPose.from_vec(s), a=None,
                direction=d / n if n > 1e-12 else np.zeros(4),
            ))
    return S.ObservationSet(items=items)


@pytest.fixture(scope="session")
def toy_task():
    return K.TaskConfig(objects=(
        K.TaskObject("a", np.zeros(3)),
        K.TaskObject("b", np.array([2.0, 2.0, 0.0])),
    ))
