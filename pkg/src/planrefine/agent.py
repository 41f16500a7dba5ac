"""Graph actor-critic over plan graphs.

Several graphs are processed at once as a disjoint union; index arrays carry
the structure, so a minibatch costs one forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .graph import EDGE_FEATURES, NODE_FEATURES, PlanGraph
from .model import PlanInstance, Polygon

REGION_WIDTH = 16
NODE_WIDTH = 32
EDGE_WIDTH = 32
LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
ACTION_EPS = 1e-6
FEATURE_CLIP = 10.0
REGION_SLOTS = ("circle", "rectangle", "polygon")


@dataclass(frozen=True)
class FeatureScales:
    """Divisors that bring positions, velocities and times to order one."""

    length: float
    speed: float

    @property
    def time(self) -> float:
        return self.length / self.speed

    @classmethod
    def for_instance(cls, instance: PlanInstance) -> "FeatureScales":
        coords = [abs(c) for c in instance.start]
        for step in instance.skeleton:
            for r in step.regions:
                if isinstance(r, Polygon):
                    coords.extend(abs(c) for v in r.vertices for c in v)
                else:
                    coords.extend(abs(c) for c in r.center)
        return cls(max(1.0, max(coords)), max(1.0, instance.dynamics.vel_max))


@dataclass
class GraphBatch:
    """Disjoint union of plan graphs as flat arrays."""

    node_x: np.ndarray
    edge_x: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    node_graph: np.ndarray
    edge_graph: np.ndarray
    n_graphs: int
    axis_mask: np.ndarray  # (E, 2), 1 where the action component is used
    box_x: np.ndarray  # circle and rectangle encodings
    box_node: np.ndarray
    box_slot: np.ndarray
    vert_x: np.ndarray
    vert_poly: np.ndarray
    poly_node: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.node_x.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_x.shape[0]

    @classmethod
    def merge(cls, batches: list["GraphBatch"]) -> "GraphBatch":
        n_off = np.cumsum([0] + [b.n_nodes for b in batches])
        p_off = np.cumsum([0] + [b.poly_node.shape[0] for b in batches])
        return cls(
            np.concatenate([b.node_x for b in batches]),
            np.concatenate([b.edge_x for b in batches]),
            np.concatenate([b.src + o for b, o in zip(batches, n_off)]),
            np.concatenate([b.dst + o for b, o in zip(batches, n_off)]),
            np.concatenate([np.zeros(b.n_nodes, int) + g for g, b in enumerate(batches)]),
            np.concatenate([np.zeros(b.n_edges, int) + g for g, b in enumerate(batches)]),
            len(batches),
            np.concatenate([b.axis_mask for b in batches]),
            np.concatenate([b.box_x for b in batches]),
            np.concatenate([b.box_node + o for b, o in zip(batches, n_off)]),
            np.concatenate([b.box_slot for b in batches]),
            np.concatenate([b.vert_x for b in batches]),
            np.concatenate([b.vert_poly + o for b, o in zip(batches, p_off)]),
            np.concatenate([b.poly_node + o for b, o in zip(batches, n_off)]),
        )


def _finite(x: np.ndarray) -> np.ndarray:
    return np.clip(np.nan_to_num(x, posinf=FEATURE_CLIP, neginf=-FEATURE_CLIP), -FEATURE_CLIP, FEATURE_CLIP)


def encode_graph(graph: PlanGraph, scales: FeatureScales) -> GraphBatch:
    L, S, T = scales.length, scales.speed, scales.time
    node_x = graph.node_features() / np.array([L, L, S, S, T, T, T])
    edge_x = graph.edge_features() / np.array([S, S, S, S, S, T, T, T, L])
    box_x, box_node, box_slot, verts, vert_poly, poly_node = [], [], [], [], [], []
    for i, node in enumerate(graph.nodes):
        for r in node.regions:
            if isinstance(r, Polygon):
                verts.extend(np.asarray(r.vertices) / L)
                vert_poly.extend([len(poly_node)] * len(r.vertices))
                poly_node.append(i)
            else:
                enc = np.array(r.encoding())
                enc[:4] /= L
                box_x.append(enc)
                box_node.append(i)
                box_slot.append(REGION_SLOTS.index(r.kind))
    mask = np.ones((graph.n_edges, 2))
    if graph.axis_count == 1:
        mask[:, 1] = 0.0
    return GraphBatch(
        _finite(node_x), _finite(edge_x),
        np.array([e.source for e in graph.edges], dtype=int),
        np.array([e.target for e in graph.edges], dtype=int),
        np.zeros(graph.n_nodes, int), np.zeros(graph.n_edges, int), 1, mask,
        np.array(box_x, dtype=float).reshape(-1, 5), np.array(box_node, dtype=int),
        np.array(box_slot, dtype=int),
        np.array(verts, dtype=float).reshape(-1, 2), np.array(vert_poly, dtype=int),
        np.array(poly_node, dtype=int),
    )


@dataclass
class PolicyOutput:
    mean: nn.Tensor  # (E, 2)
    log_std: nn.Tensor  # (E, 2)
    value: nn.Tensor  # (G, 1)


class ActorCritic:
    def __init__(self, seed: int = 0, init_log_std: float = 0.0):
        rng = np.random.default_rng(seed)
        self.store = store = nn.ParamStore()
        relu_gain = math.sqrt(2.0)
        self.box = nn.Linear(store, "region.box", 5, REGION_WIDTH, rng, relu_gain)
        self.vert = nn.Linear(store, "region.poly_in", 2, REGION_WIDTH, rng, relu_gain)
        self.poly = nn.Linear(store, "region.poly_out", REGION_WIDTH, REGION_WIDTH, rng, relu_gain)
        self.intersect = nn.Linear(store, "region.intersect", 3 * REGION_WIDTH, REGION_WIDTH, rng, relu_gain)
        self.node = nn.Linear(store, "node", len(NODE_FEATURES) + REGION_WIDTH, NODE_WIDTH, rng, relu_gain)
        self.edge = nn.Linear(store, "edge", len(EDGE_FEATURES), EDGE_WIDTH, rng, relu_gain)
        self.msg1 = nn.Linear(store, "mp1", NODE_WIDTH + EDGE_WIDTH + NODE_WIDTH, NODE_WIDTH, rng, relu_gain)
        self.msg2 = nn.Linear(store, "mp2", 2 * NODE_WIDTH, NODE_WIDTH, rng, relu_gain)
        self.actor1 = nn.Linear(store, "actor.hidden", 2 * NODE_WIDTH, 32, rng, relu_gain)
        self.actor2 = nn.Linear(store, "actor.out", 32, 4, rng, 0.01)
        self.actor2.b.data[0, 2:] = init_log_std
        self.critic1 = nn.Linear(store, "critic.hidden", NODE_WIDTH, 32, rng, relu_gain)
        self.critic2 = nn.Linear(store, "critic.out", 32, 1, rng, 1.0)

    def encode_regions(self, b: GraphBatch) -> nn.Tensor:
        n = b.n_nodes
        slots = []
        present = np.zeros((n, len(REGION_SLOTS)), dtype=bool)
        if b.box_x.shape[0]:
            emb = self.box(nn.tensor(b.box_x))
        for s in range(2):
            rows = np.flatnonzero(b.box_slot == s)
            if rows.size:
                slots.append(nn.segment_mean(emb[rows], b.box_node[rows], n))
                present[b.box_node[rows], s] = True
            else:
                slots.append(nn.tensor(np.zeros((n, REGION_WIDTH))))
        if b.poly_node.size:
            per_vertex = self.vert(nn.tensor(b.vert_x)).relu()
            pooled = nn.segment_mean(per_vertex, b.vert_poly, b.poly_node.size)
            slots.append(nn.segment_mean(self.poly(pooled), b.poly_node, n))
            present[b.poly_node, 2] = True
        else:
            slots.append(nn.tensor(np.zeros((n, REGION_WIDTH))))
        mixed = (present.sum(axis=1) > 1).astype(float)[:, None]
        single = slots[0] + slots[1] + slots[2]
        if not mixed.any():
            return single
        return single * (1.0 - mixed) + self.intersect(nn.concat(slots, axis=1)) * mixed

    def __call__(self, b: GraphBatch) -> PolicyOutput:
        n = b.n_nodes
        h = self.node(nn.concat([nn.tensor(b.node_x), self.encode_regions(b)], axis=1))
        e = self.edge(nn.tensor(b.edge_x))
        ends = np.concatenate([b.src, b.dst])
        others = np.concatenate([b.dst, b.src])
        edge_ids = np.concatenate([np.arange(b.n_edges)] * 2)
        agg_e = nn.segment_mean(e[edge_ids], ends, n)
        agg_n = nn.segment_mean(h[others], ends, n)
        h = self.msg1(nn.concat([h, agg_e, agg_n], axis=1)).tanh()
        h = self.msg2(nn.concat([h, nn.segment_mean(h[others], ends, n)], axis=1)).tanh()
        out = self.actor2(self.actor1(nn.concat([h[b.src], h[b.dst]], axis=1)).tanh())
        pooled = nn.segment_mean(h, b.node_graph, b.n_graphs)
        value = self.critic2(self.critic1(pooled).tanh())
        return PolicyOutput(out[:, 0:2], out[:, 2:4].clip(LOG_STD_MIN, LOG_STD_MAX), value)


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def logit(a: np.ndarray) -> np.ndarray:
    return np.log(a) - np.log1p(-a)


def sample_action(mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
    """Squashed-Gaussian draw in (0, 1); ``rng=None`` gives the mode sigmoid(mean)."""
    z = mean if rng is None else mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    return np.clip(0.5 * (1.0 + np.tanh(0.5 * z)), ACTION_EPS, 1.0 - ACTION_EPS)


def squash_log_prob_terms(action: np.ndarray, mean: nn.Tensor, log_std: nn.Tensor) -> nn.Tensor:
    """Elementwise log-density of a squashed Gaussian at ``action``."""
    a = np.clip(action, ACTION_EPS, 1.0 - ACTION_EPS)
    z = logit(a)
    norm = (nn.tensor(z) - mean) / log_std.exp()
    # density of z, then divide by da/dz = a (1 - a)
    return norm.square() * -0.5 - log_std - (_LOG_SQRT_2PI + np.log(a * (1.0 - a)))


def log_prob(action: np.ndarray, mean: nn.Tensor, log_std: nn.Tensor, mask: np.ndarray,
             edge_graph: np.ndarray | None = None, n_graphs: int = 1) -> nn.Tensor:
    """Per-graph log-probability, shape (n_graphs,), summing edges and unmasked axes."""
    terms = squash_log_prob_terms(action, mean, log_std) * mask
    per_edge = terms.sum(axis=1, keepdims=True)
    if edge_graph is None:
        return per_edge.sum().reshape(1)
    return nn.segment_sum(per_edge, edge_graph, n_graphs).reshape(n_graphs)


def entropy(log_std: nn.Tensor, mask: np.ndarray, edge_graph: np.ndarray | None = None,
            n_graphs: int = 1) -> nn.Tensor:
    """Per-graph entropy of the Gaussian before squashing."""
    terms = (log_std + (0.5 + _LOG_SQRT_2PI)) * mask
    per_edge = terms.sum(axis=1, keepdims=True)
    if edge_graph is None:
        return per_edge.sum().reshape(1)
    return nn.segment_sum(per_edge, edge_graph, n_graphs).reshape(n_graphs)


class GnnPolicy:
    """Env policy wrapper: samples (or takes the mode) and reports log-prob and value."""

    def __init__(self, model: ActorCritic, rng: np.random.Generator | None = None,
                 deterministic: bool = False):
        self.model = model
        self.rng = rng
        self.deterministic = deterministic
        self._scales: dict[int, FeatureScales] = {}

    def batch_for(self, state) -> GraphBatch:
        key = id(state.instance)
        if key not in self._scales:
            self._scales[key] = FeatureScales.for_instance(state.instance)
        return encode_graph(state.graph, self._scales[key])

    def __call__(self, state):
        b = self.batch_for(state)
        out = self.model(b)
        mean, log_std = out.mean.data, out.log_std.data
        a = sample_action(mean, log_std, None if self.deterministic else self.rng)
        lp = log_prob(a, out.mean, out.log_std, b.axis_mask).item()
        return a, {"batch": b, "log_prob": lp, "value": float(out.value.data[0, 0])}
