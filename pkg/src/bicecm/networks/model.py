"""Network reliability problems on undirected graphs.

Every random coordinate ``d`` is attached to one edge. Its states carry a
numeric value: 0/1 (down/up) for connectivity problems, a capacity for
max-flow problems. Edges without a random component keep a fixed value.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..discrete import MixtureParams, SampleSpace

CONNECTIVITY = "connectivity"
MAXFLOW = "maxflow"
ENUMERATION_LIMIT = 2 ** 22


class NetworkError(ValueError):
    """Malformed network definition."""


class EnumerationRefused(RuntimeError):
    """The state space is too large to enumerate."""


class UndefinedMeasureError(ValueError):
    """Birnbaum measure needs a component failure probability strictly in (0, 1)."""


@dataclass(frozen=True)
class Edge:
    id: str
    u: str
    v: str
    value: float | None = None  # fixed value for edges without a random component


@dataclass(frozen=True)
class Component:
    edge: str
    states: tuple
    values: tuple
    probs: tuple

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        n = len(self.states)
        if n < 2 or len(self.values) != n or len(self.probs) != n:
            raise NetworkError(f"component {self.edge}: states, values and probs need equal length >= 2")
        if any(p < 0 for p in self.probs) or abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise NetworkError(f"component {self.edge}: probabilities must sum to one")


@dataclass(frozen=True)
class Problem:
    type: str
    s: str
    t: str
    thr: float = 0.0

    def __post_init__(self):
        if self.type not in (CONNECTIVITY, MAXFLOW):
            raise NetworkError(f"unknown problem type {self.type!r}")
        if self.s == self.t:
            raise NetworkError("source and sink must differ")


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Graph, random edge components and an s-t performance criterion."""

    name: str
    nodes: tuple
    edges: tuple
    components: tuple
    problem: Problem
    provenance: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "components", tuple(self.components))
        if len(set(self.nodes)) != len(self.nodes):
            raise NetworkError("duplicate node names")
        index = {n: i for i, n in enumerate(self.nodes)}
        for node in (self.problem.s, self.problem.t):
            if node not in index:
                raise NetworkError(f"terminal {node!r} is not a node")
        edge_ids = [e.id for e in self.edges]
        if len(set(edge_ids)) != len(edge_ids):
            raise NetworkError("duplicate edge ids")
        for e in self.edges:
            if e.u not in index or e.v not in index:
                raise NetworkError(f"edge {e.id} references an unknown node")
        comp_edges = [c.edge for c in self.components]
        if len(set(comp_edges)) != len(comp_edges):
            raise NetworkError("an edge carries more than one component")
        if not comp_edges:
            raise NetworkError("at least one random component is required")
        unknown = set(comp_edges) - set(edge_ids)
        if unknown:
            raise NetworkError(f"components reference unknown edges: {sorted(unknown)}")
        for e in self.edges:
            if e.id not in comp_edges and e.value is None:
                raise NetworkError(f"edge {e.id} has neither a component nor a fixed value")

        pos = {eid: i for i, eid in enumerate(edge_ids)}
        c = self._cache
        c["tail"] = np.array([index[e.u] for e in self.edges], dtype=np.int64)
        c["head"] = np.array([index[e.v] for e in self.edges], dtype=np.int64)
        c["s"], c["t"] = index[self.problem.s], index[self.problem.t]
        c["comp_pos"] = np.array([pos[e] for e in comp_edges], dtype=np.int64)
        c["base"] = np.array([0.0 if e.value is None else e.value for e in self.edges])
        c["values"] = [np.array(comp.values) for comp in self.components]
        c["space"] = SampleSpace([comp.states for comp in self.components])
        c["input"] = MixtureParams.independent([comp.probs for comp in self.components])

    @property
    def space(self) -> SampleSpace:
        return self._cache["space"]

    @property
    def input_params(self) -> MixtureParams:
        return self._cache["input"]

    @property
    def D(self) -> int:
        return len(self.components)

    def edge_values(self, states) -> np.ndarray:
        """Per-edge value (up flag or capacity) for each state row."""
        x = self.space.check_states(states)
        c = self._cache
        out = np.tile(c["base"], (x.shape[0], 1))
        for d, vals in enumerate(c["values"]):
            out[:, c["comp_pos"][d]] = vals[x[:, d]]
        return out

    def evaluate(self, states) -> np.ndarray:
        if self.problem.type == CONNECTIVITY:
            return connectivity_g(self, states)
        return maxflow_g(self, states)


def connectivity_g(model: NetworkModel, states) -> np.ndarray:
    """+1 where s and t are joined by up edges, -1 otherwise."""
    if model.problem.type != CONNECTIVITY:
        raise NetworkError("model is not a connectivity problem")
    c = model._cache
    up = model.edge_values(states) > 0
    conn = kernels.connected_batch(len(model.nodes), c["tail"], c["head"], up, c["s"], c["t"])
    return np.where(conn, 1.0, -1.0)


def max_flow(n_nodes: int, edges, capacities, s: int, t: int):
    """Maximum s-t flow on an undirected graph.

    ``edges`` is a sequence of ``(u, v)`` node indices. ``capacities`` is one
    row per edge set, or a 2-D batch; the result has the matching shape.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    caps = np.asarray(capacities, dtype=np.float64)
    if np.any(caps < 0):
        raise ValueError("capacities must be nonnegative")
    out = kernels.max_flow_batch(n_nodes, edges[:, 0], edges[:, 1], np.atleast_2d(caps), s, t)
    return float(out[0]) if caps.ndim == 1 else out


def maxflow_g(model: NetworkModel, states) -> np.ndarray:
    """Max-flow margin ``mf(s, t) - thr``; failure when it is <= 0."""
    if model.problem.type != MAXFLOW:
        raise NetworkError("model is not a max-flow problem")
    c = model._cache
    caps = model.edge_values(states)
    mf = kernels.max_flow_batch(len(model.nodes), c["tail"], c["head"], caps, c["s"], c["t"])
    return mf - model.problem.thr


def _state_probs(model: NetworkModel, states) -> np.ndarray:
    p = np.ones(states.shape[0])
    for d, comp in enumerate(model.components):
        p *= np.asarray(comp.probs)[states[:, d]]
    return p


def _check_enumerable(model: NetworkModel):
    if model.space.size > ENUMERATION_LIMIT:
        raise EnumerationRefused(
            f"{model.name}: {model.space.size:.3g} states exceed the enumeration limit "
            f"of {ENUMERATION_LIMIT}")


def _enumerate(model: NetworkModel, fn, chunk: int = 1 << 16):
    _check_enumerable(model)
    states = model.space.all_states()
    for i in range(0, states.shape[0], chunk):
        x = states[i:i + chunk]
        fn(x, _state_probs(model, x), model.evaluate(x) <= 0)


def enumerate_pf(model: NetworkModel) -> float:
    """Exact failure probability by summing ``p_X`` over every failing state."""
    parts = []
    _enumerate(model, lambda x, p, fail: parts.append(math.fsum(p[fail])))
    return math.fsum(parts)


def _failure_mask(model: NetworkModel, d: int, failure_states) -> np.ndarray:
    comp = model.components[d]
    mask = np.zeros(len(comp.states), dtype=bool)
    for s in failure_states:
        mask[model.space.index_of(d, s)] = True
    return mask


def _component_pf(model: NetworkModel, d: int, mask) -> float:
    p_fd = math.fsum(np.asarray(model.components[d].probs)[mask])
    if not 0.0 < p_fd < 1.0:
        raise UndefinedMeasureError(f"component failure probability {p_fd} is not in (0, 1)")
    return p_fd


def birnbaum(model: NetworkModel, run_result, d: int, failure_states) -> float:
    """Birnbaum importance of component ``d`` from the final importance samples.

    ``failure_states`` lists the state labels that count as failure of the
    component. Its failure probability is exact; only the two joint
    expectations are estimated.
    """
    mask = _failure_mask(model, d, failure_states)
    p_fd = _component_pf(model, d, mask)
    w = np.asarray(run_result.final_weights)
    comp_fail = mask[run_result.final_states[:, d]]
    return float(np.mean(w * comp_fail) / p_fd - np.mean(w * ~comp_fail) / (1.0 - p_fd))


def exact_birnbaum(model: NetworkModel, d: int, failure_states) -> float:
    """``P(F | X_d fails) - P(F | X_d safe)`` by enumeration."""
    mask = _failure_mask(model, d, failure_states)
    p_fd = _component_pf(model, d, mask)
    acc = [0.0, 0.0]

    def add(x, p, fail):
        cf = mask[x[:, d]]
        acc[0] += math.fsum(p[fail & cf])
        acc[1] += math.fsum(p[fail & ~cf])

    _enumerate(model, add)
    return acc[0] / p_fd - acc[1] / (1.0 - p_fd)


def state_probability(model: NetworkModel, labels) -> float:
    """``p_X`` of one state given by its component labels."""
    x = model.space.encode(labels)[None, :]
    return float(_state_probs(model, x)[0])
