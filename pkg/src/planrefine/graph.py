"""Plan-to-graph conversion: static-segment merging, node velocities, features."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import GroundedPlan, PlanInstance, Region

MERGE_THRESHOLD = 1e-6
DWELL_EPS = 1e-6

NODE_FEATURES = ("x", "y", "v_x", "v_y", "t", "tau_low", "tau_high")
EDGE_FEATURES = ("v_x_min", "v_x_max", "v_y_min", "v_y_max", "b_norm", "d_min", "d_max", "duration", "length")


class DegenerateSegments(ValueError):
    """Both segments around a node have zero duration; no weighting is possible."""


@dataclass(frozen=True)
class GraphNode:
    position: tuple[float, float]
    velocity: tuple[float, float]
    time: float
    tau_low: float
    tau_high: float
    dwell: float
    regions: tuple[Region, ...]
    events: tuple[int, ...]


@dataclass(frozen=True)
class GraphEdge:
    source: int
    target: int
    segment: int
    v_max: tuple[float, float]
    b_norm: float
    d_min: float
    d_max: float
    duration: float
    length: float


@dataclass(frozen=True)
class PlanGraph:
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    axis_count: int

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def node_features(self) -> np.ndarray:
        return np.array([[*n.position, *n.velocity, n.time, n.tau_low, n.tau_high] for n in self.nodes],
                        dtype=float).reshape(-1, len(NODE_FEATURES))

    def edge_features(self) -> np.ndarray:
        rows = []
        for e in self.edges:
            vx, vy = e.v_max
            rows.append([-vx, vx, -vy, vy, e.b_norm, e.d_min, e.d_max, e.duration, e.length])
        return np.array(rows, dtype=float).reshape(-1, len(EDGE_FEATURES))

    def total_time(self) -> float:
        return sum(e.duration for e in self.edges) + sum(n.dwell for n in self.nodes)

    def dump(self) -> str:
        lines = []
        for i, n in enumerate(self.nodes):
            kinds = ",".join(r.kind for r in n.regions) or "-"
            lines.append(f"node {i} x={n.position[0]:.9g} y={n.position[1]:.9g} vx={n.velocity[0]:.9g} "
                         f"vy={n.velocity[1]:.9g} t={n.time:.9g} tau_low={n.tau_low:.9g} "
                         f"tau_high={n.tau_high:.9g} dwell={n.dwell:.9g} regions={kinds} "
                         f"events={','.join(map(str, n.events))}")
        for i, e in enumerate(self.edges):
            lines.append(f"edge {i} src={e.source} dst={e.target} segment={e.segment} "
                         f"vx_max={e.v_max[0]:.9g} vy_max={e.v_max[1]:.9g} b_norm={e.b_norm:.9g} "
                         f"d_min={e.d_min:.9g} d_max={e.d_max:.9g} duration={e.duration:.9g} "
                         f"length={e.length:.9g}")
        return "\n".join(lines) + "\n"


def _xy(p) -> tuple[float, float]:
    return (float(p[0]), 0.0) if len(p) == 1 else (float(p[0]), float(p[1]))


def raw_graph(plan: GroundedPlan, instance: PlanInstance) -> PlanGraph:
    """One node per event, one edge per segment, no merging."""
    nodes = [GraphNode(_xy(plan.waypoints[0]), (0.0, 0.0), 0.0, 0.0, 0.0, 0.0, (), (0,))]
    edges = []
    for i, step in enumerate(instance.skeleton):
        nodes.append(GraphNode(_xy(plan.waypoints[i + 1]), (0.0, 0.0), float(plan.timestamps[i + 1]),
                               step.tau_low, step.tau_high, float(plan.dwells[i]), step.regions, (i + 1,)))
        vmax = _xy(plan.axis_bounds[i])
        b_norm = float(plan.norm_bounds[i])
        if not math.isfinite(b_norm):
            b_norm = math.hypot(*vmax)  # implied by the per-axis bounds
        disp = np.subtract(plan.waypoints[i + 1], plan.waypoints[i])
        edges.append(GraphEdge(i, i + 1, i, vmax, b_norm, step.d_min, step.d_max,
                               float(plan.durations[i]), float(np.linalg.norm(disp))))
    return PlanGraph(tuple(nodes), tuple(edges), plan.axis_count)


def merge_static(graph: PlanGraph, threshold: float = MERGE_THRESHOLD) -> PlanGraph:
    """Collapse edges shorter than ``threshold`` into their source node's dwell."""
    nodes = [graph.nodes[0]]
    edges = []
    for e in graph.edges:
        tgt = graph.nodes[e.target]
        cur = nodes[-1]
        if e.length < threshold:
            nodes[-1] = replace(
                cur, position=tgt.position, dwell=cur.dwell + e.duration + tgt.dwell,
                tau_low=cur.tau_low + e.d_min + tgt.tau_low, tau_high=cur.tau_high + e.d_max + tgt.tau_high,
                regions=cur.regions + tgt.regions, events=cur.events + tgt.events)
        else:
            nodes.append(tgt)
            edges.append(replace(e, source=len(nodes) - 2, target=len(nodes) - 1))
    return PlanGraph(tuple(nodes), tuple(edges), graph.axis_count)


def _sign(x: float, threshold: float = MERGE_THRESHOLD) -> float:
    return 0.0 if abs(x) < threshold else math.copysign(1.0, x)


def estimate_node_velocities(graph: PlanGraph, start_velocity=(0.0, 0.0)) -> PlanGraph:
    """Duration-weighted average speed per axis, signed by the next displacement.

    The start node keeps ``start_velocity``; the terminal node and every node
    with a positive dwell are at rest.
    """
    nodes = list(graph.nodes)
    n = len(nodes)
    pos = np.array([nd.position for nd in nodes])
    for i in range(n):
        nd = nodes[i]
        if i == 0:
            vel = _xy(start_velocity) if n > 1 else (0.0, 0.0)
        elif i == n - 1 or nd.dwell > DWELL_EPS:
            vel = (0.0, 0.0)
        else:
            e_in, e_out = graph.edges[i - 1], graph.edges[i]
            total = e_in.duration + e_out.duration
            if not total > 0:
                raise DegenerateSegments(f"node {i}: adjoining segments both have zero duration")
            d_in = np.abs(pos[i] - pos[i - 1])
            d_out = np.abs(pos[i + 1] - pos[i])
            # dt_in * |v_in| + dt_out * |v_out| is the sum of the absolute displacements
            mag = (d_in + d_out) / total
            vel = tuple(float(_sign(pos[i + 1][j] - pos[i][j]) * mag[j]) for j in range(2))
        nodes[i] = replace(nd, velocity=vel)
    return PlanGraph(tuple(nodes), graph.edges, graph.axis_count)


def build_graph(plan: GroundedPlan, instance: PlanInstance) -> PlanGraph:
    graph = merge_static(raw_graph(plan, instance))
    return estimate_node_velocities(graph, instance.start_velocity)


def edge_boundaries(graph: PlanGraph, index: int):
    """Per-axis (start position, end position, start velocity, end velocity) of an edge."""
    e = graph.edges[index]
    a, b = graph.nodes[e.source], graph.nodes[e.target]
    k = graph.axis_count
    return a.position[:k], b.position[:k], a.velocity[:k], b.velocity[:k]
