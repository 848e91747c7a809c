"""Built-in example networks."""
from dataclasses import replace
from importlib import resources

from .io import load
from .model import CONNECTIVITY, MAXFLOW, Component, Edge, NetworkModel, Problem

NAMES = ("toy5", "fishman", "dodecahedron")
TOY5_FAILURE_PROBS = (0.03, 0.03, 1e-3, 0.03, 0.03)


def toy5() -> NetworkModel:
    """Five binary edges A=m1 (two parallel), m1-m2, m2=B (two parallel).

    s-t connectivity fails iff both of 1 and 2, or 3, or both of 4 and 5 fail.
    """
    ends = [("A", "m1"), ("A", "m1"), ("m1", "m2"), ("m2", "B"), ("m2", "B")]
    edges = [Edge(f"e{i + 1}", u, v) for i, (u, v) in enumerate(ends)]
    comps = [Component(e.id, ("down", "up"), (0, 1), (q, 1.0 - q))
             for e, q in zip(edges, TOY5_FAILURE_PROBS)]
    return NetworkModel(
        name="toy5",
        nodes=("A", "m1", "m2", "B"),
        edges=edges,
        components=comps,
        problem=Problem(CONNECTIVITY, "A", "B"),
        provenance="Series arrangement of [1 || 2], [3], [4 || 5]; minimal cut sets "
                   "{1,2}, {3}, {4,5}.",
    )


def capacity_states(p0: float) -> tuple:
    """States, capacities and probabilities for a {0, 100, 200} edge."""
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must lie in (0, 1)")
    q = (1.0 - p0) / 2.0
    return ("0", "100", "200"), (0, 100, 200), (p0, q, q)


def builtin(name: str, p0: float = 1e-3, thr: float = 0.0) -> NetworkModel:
    """Return a built-in network; ``p0`` and ``thr`` apply to the max-flow benchmarks."""
    if name == "toy5":
        return toy5()
    if name not in NAMES:
        raise KeyError(f"unknown built-in network {name!r}; choose from {NAMES}")
    with resources.as_file(resources.files(__package__) / "data" / f"{name}.json") as path:
        base = load(path)
    states, values, probs = capacity_states(p0)
    comps = [Component(c.edge, states, values, probs) for c in base.components]
    return replace(base, components=comps, problem=replace(base.problem, type=MAXFLOW, thr=float(thr)),
                   _cache={})
