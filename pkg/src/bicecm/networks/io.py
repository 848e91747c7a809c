"""JSON network definition files (schema ``bicecm-network/1``).

::

    {
      "schema": "bicecm-network/1",
      "name": "toy5",
      "provenance": "free text",
      "nodes": ["A", "B", ...],
      "edges": [{"id": "e1", "u": "A", "v": "m1"}, ...],   # optional "value"
      "components": [{"element": "edge", "id": "e1", "states": ["down", "up"],
                      "values": [0, 1], "probs": [0.03, 0.97]}, ...],
      "problem": {"type": "connectivity" | "maxflow", "s": "A", "t": "B", "thr": 0.0}
    }

``values`` are up flags for connectivity problems and capacities for max-flow
problems. An edge without a component must carry a fixed ``value``.
"""
import json
from pathlib import Path

from .model import Component, Edge, NetworkError, NetworkModel, Problem

SCHEMA = "bicecm-network/1"
_TOP = {"schema", "name", "provenance", "nodes", "edges", "components", "problem"}


def _keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise NetworkError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise NetworkError(f"{where}: unknown keys {sorted(extra)}")
    missing = required - set(obj)
    if missing:
        raise NetworkError(f"{where}: missing keys {sorted(missing)}")


def from_dict(doc: dict) -> NetworkModel:
    _keys(doc, _TOP, {"schema", "nodes", "edges", "components", "problem"}, "network")
    if doc["schema"] != SCHEMA:
        raise NetworkError(f"unsupported schema {doc['schema']!r}; expected {SCHEMA!r}")
    edges = []
    for i, e in enumerate(doc["edges"]):
        _keys(e, {"id", "u", "v", "value"}, {"id", "u", "v"}, f"edges[{i}]")
        edges.append(Edge(str(e["id"]), str(e["u"]), str(e["v"]), e.get("value")))
    comps = []
    for i, c in enumerate(doc["components"]):
        _keys(c, {"element", "id", "states", "values", "probs"},
              {"element", "id", "states", "values", "probs"}, f"components[{i}]")
        if c["element"] != "edge":
            raise NetworkError(f"components[{i}]: only edge components are supported")
        comps.append(Component(str(c["id"]), c["states"], c["values"], c["probs"]))
    p = doc["problem"]
    _keys(p, {"type", "s", "t", "thr"}, {"type", "s", "t"}, "problem")
    problem = Problem(p["type"], str(p["s"]), str(p["t"]), float(p.get("thr", 0.0)))
    return NetworkModel(
        name=str(doc.get("name", "")),
        nodes=[str(n) for n in doc["nodes"]],
        edges=edges,
        components=comps,
        problem=problem,
        provenance=str(doc.get("provenance", "")),
    )


def to_dict(model: NetworkModel) -> dict:
    edges = []
    for e in model.edges:
        d = {"id": e.id, "u": e.u, "v": e.v}
        if e.value is not None:
            d["value"] = e.value
        edges.append(d)
    return {
        "schema": SCHEMA,
        "name": model.name,
        "provenance": model.provenance,
        "nodes": list(model.nodes),
        "edges": edges,
        "components": [
            {"element": "edge", "id": c.edge, "states": list(c.states),
             "values": list(c.values), "probs": list(c.probs)}
            for c in model.components
        ],
        "problem": {"type": model.problem.type, "s": model.problem.s, "t": model.problem.t,
                    "thr": model.problem.thr},
    }


def load(path) -> NetworkModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkError(f"{path}: {exc}") from exc
    return from_dict(doc)


def save(model: NetworkModel, path):
    Path(path).write_text(json.dumps(to_dict(model), indent=1) + "\n", encoding="utf-8")
