"""Network models, performance functions and exact oracles."""
from .builtin import NAMES, builtin, capacity_states, toy5
from .io import SCHEMA, from_dict, load, save, to_dict
from .model import (
    CONNECTIVITY,
    ENUMERATION_LIMIT,
    MAXFLOW,
    Component,
    Edge,
    EnumerationRefused,
    NetworkError,
    NetworkModel,
    Problem,
    UndefinedMeasureError,
    birnbaum,
    connectivity_g,
    enumerate_pf,
    exact_birnbaum,
    max_flow,
    maxflow_g,
    state_probability,
)

__all__ = [
    "NAMES", "builtin", "capacity_states", "toy5",
    "SCHEMA", "from_dict", "load", "save", "to_dict",
    "CONNECTIVITY", "ENUMERATION_LIMIT", "MAXFLOW", "Component", "Edge", "EnumerationRefused",
    "NetworkError", "NetworkModel", "Problem", "UndefinedMeasureError", "birnbaum",
    "connectivity_g", "enumerate_pf", "exact_birnbaum", "max_flow", "maxflow_g",
    "state_probability",
]
