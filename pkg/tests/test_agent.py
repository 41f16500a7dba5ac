import math

import numpy as np
import pytest
from scipy import integrate

from planrefine import env, nn
from planrefine.agent import (ActorCritic, FeatureScales, GnnPolicy, GraphBatch, encode_graph, entropy,
                              log_prob, sample_action, squash_log_prob_terms)
from planrefine.model import Circle, PlanInstance, Polygon, SkeletonStep
from planrefine.ppo import PpoConfig, Sample, ppo_loss
from gradcheck import max_relative_error


def batch_of(instance):
    state = env.reset(instance)
    return encode_graph(state.graph, FeatureScales.for_instance(instance))


def test_output_shapes(three_step, sailing_like):
    model = ActorCritic(0)
    for inst in (three_step, sailing_like):
        b = batch_of(inst)
        out = model(b)
        assert out.mean.shape == (b.n_edges, 2)
        assert out.log_std.shape == (b.n_edges, 2)
        assert out.value.shape == (1, 1)


def test_features_are_bounded(three_step):
    b = batch_of(three_step)
    for x in (b.node_x, b.edge_x):
        assert np.all(np.isfinite(x)) and np.all(np.abs(x) <= 10.0)


def test_sailing_masks_second_axis(sailing_like):
    b = batch_of(sailing_like)
    assert np.all(b.axis_mask[:, 0] == 1) and np.all(b.axis_mask[:, 1] == 0)


def test_fresh_policy_means_are_near_zero(three_step):
    out = ActorCritic(4)(batch_of(three_step))
    assert np.max(np.abs(out.mean.data)) < 0.1


def test_init_log_std_sets_spread(three_step):
    out = ActorCritic(4, init_log_std=-1.0)(batch_of(three_step))
    assert np.allclose(out.log_std.data, -1.0, atol=0.1)


def test_merged_batch_matches_separate_passes(three_step, sailing_like, one_edge):
    model = ActorCritic(2)
    parts = [batch_of(i) for i in (three_step, sailing_like, one_edge)]
    merged = model(GraphBatch.merge(parts))
    means = np.concatenate([model(p).mean.data for p in parts])
    values = np.concatenate([model(p).value.data for p in parts])
    assert np.allclose(merged.mean.data, means, atol=1e-12)
    assert np.allclose(merged.value.data, values, atol=1e-12)


def _permute_nodes(b: GraphBatch, perm: np.ndarray) -> GraphBatch:
    """Store node ``i`` at row ``perm[i]``."""
    inv = np.argsort(perm)
    return GraphBatch(b.node_x[inv], b.edge_x, perm[b.src], perm[b.dst], b.node_graph[inv], b.edge_graph,
                      b.n_graphs, b.axis_mask, b.box_x, perm[b.box_node], b.box_slot, b.vert_x, b.vert_poly,
                      perm[b.poly_node])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_node_storage_order_does_not_matter(three_step, sailing_like, seed):
    model = ActorCritic(seed)
    for inst in (three_step, sailing_like):
        b = batch_of(inst)
        perm = np.random.default_rng(seed).permutation(b.n_nodes)
        a, c = model(b), model(_permute_nodes(b, perm))
        assert np.allclose(a.mean.data, c.mean.data, atol=1e-12)
        assert np.allclose(a.value.data, c.value.data, atol=1e-12)


def test_polygon_vertex_order_does_not_matter(sailing_like):
    poly = sailing_like.skeleton[0].regions[0]
    rolled = Polygon(poly.vertices[2:] + poly.vertices[:2])
    inst2 = PlanInstance(sailing_like.dynamics, sailing_like.start,
                         (SkeletonStep((rolled,)),) + sailing_like.skeleton[1:], sailing_like.axis_bounds)
    model = ActorCritic(0)
    assert np.allclose(model(batch_of(sailing_like)).mean.data, model(batch_of(inst2)).mean.data, atol=1e-12)


def test_duplicate_circle_encodes_like_one(one_edge):
    circle = one_edge.skeleton[0].regions[0]
    doubled = PlanInstance(one_edge.dynamics, one_edge.start, (SkeletonStep((circle, circle)),),
                           one_edge.axis_bounds)
    model = ActorCritic(0)
    a = model.encode_regions(batch_of(one_edge)).data
    b = model.encode_regions(batch_of(doubled)).data
    assert np.allclose(a, b, atol=1e-12)


def test_nodes_without_regions_encode_to_zero(three_step):
    b = batch_of(three_step)
    enc = ActorCritic(0).encode_regions(b).data
    has_region = np.zeros(b.n_nodes, bool)
    has_region[b.box_node] = True
    has_region[b.poly_node] = True
    assert np.all(enc[~has_region] == 0.0)
    assert np.all(np.abs(enc[has_region]).sum(axis=1) > 0)


def test_mode_action_maximises_pre_squash_density():
    mean = nn.tensor(np.array([[0.7, -1.2]]))
    log_std = nn.tensor(np.array([[-0.5, 0.3]]))
    mode = sample_action(mean.data, log_std.data, None)
    assert np.allclose(mode, 1.0 / (1.0 + np.exp(-mean.data)))

    def z_density(a):
        return squash_log_prob_terms(a, mean, log_std).data + np.log(a * (1.0 - a))
    best = z_density(mode)
    for delta in (-1e-3, 1e-3, -0.1, 0.1):
        assert np.all(z_density(np.clip(mode + delta, 1e-6, 1 - 1e-6)) < best)


@pytest.mark.parametrize("mu,ls", [(0.0, 0.0), (1.5, -1.0), (-0.8, 0.5), (0.3, -3.0)])
def test_squashed_density_integrates_to_one(mu, ls):
    mean, log_std = nn.tensor(np.array([[mu]])), nn.tensor(np.array([[ls]]))

    def pdf(a):
        return math.exp(squash_log_prob_terms(np.array([[a]]), mean, log_std).item())
    mode = 1.0 / (1.0 + math.exp(-mu))
    total, _ = integrate.quad(pdf, 0.0, 1.0, points=[mode], limit=200)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_samples_stay_inside_the_open_interval():
    rng = np.random.default_rng(0)
    a = sample_action(np.full((1000, 2), 30.0), np.full((1000, 2), 2.0), rng)
    assert np.all(a > 0.0) and np.all(a < 1.0)
    lp = log_prob(a, nn.tensor(np.full((1000, 2), 30.0)), nn.tensor(np.full((1000, 2), 2.0)), np.ones((1000, 2)))
    assert np.isfinite(lp.item())


def test_masked_axis_does_not_contribute():
    mean, log_std = nn.tensor(np.zeros((3, 2))), nn.tensor(np.zeros((3, 2)))
    a = np.full((3, 2), 0.4)
    other = a.copy()
    other[:, 1] = 0.9
    mask = np.array([[1.0, 0.0]] * 3)
    assert log_prob(a, mean, log_std, mask).item() == log_prob(other, mean, log_std, mask).item()


def test_entropy_increases_with_log_std():
    mask = np.ones((2, 2))
    values = [entropy(nn.tensor(np.full((2, 2), s)), mask).item() for s in (-2.0, -1.0, 0.0, 1.0)]
    assert values == sorted(values) and len(set(values)) == 4
    assert values[2] == pytest.approx(4 * (0.5 + 0.5 * math.log(2 * math.pi)))


def test_per_graph_log_prob_sums_edges():
    mean = nn.tensor(np.random.default_rng(1).normal(size=(5, 2)))
    log_std = nn.tensor(np.full((5, 2), -0.3))
    a = np.random.default_rng(2).uniform(0.1, 0.9, size=(5, 2))
    graph = np.array([0, 0, 1, 1, 1])
    per = log_prob(a, mean, log_std, np.ones((5, 2)), graph, 2).data
    assert per.sum() == pytest.approx(log_prob(a, mean, log_std, np.ones((5, 2))).item())


def test_end_to_end_loss_gradient(one_edge):
    model = ActorCritic(3, init_log_std=-0.5)
    policy = GnnPolicy(model, np.random.default_rng(0))
    state = env.reset(one_edge)
    action, extra = policy(state)
    sample = Sample(extra["batch"], action, extra["log_prob"] - 0.05, extra["value"], 0.4, False, True)

    def loss():
        return ppo_loss(model, [sample], np.array([0.7]), np.array([0.9]), 0.2, PpoConfig())[0]
    params = list(model.store.params.values())
    assert max_relative_error(loss, params, per_param=6) < 1e-4


def test_mixed_region_gradient(three_step, sailing_like):
    model = ActorCritic(5)
    b = GraphBatch.merge([batch_of(three_step), batch_of(sailing_like)])

    def loss():
        out = model(b)
        return out.mean.square().sum() + out.value.sum()
    params = [model.store[k] for k in ("region.box.W", "region.intersect.W", "region.poly_in.W", "mp1.W")]
    assert max_relative_error(loss, params, per_param=10) < 1e-4


def test_policy_is_seed_deterministic(three_step):
    def act():
        return GnnPolicy(ActorCritic(7), np.random.default_rng(11))(env.reset(three_step))[0]
    assert act().tobytes() == act().tobytes()
