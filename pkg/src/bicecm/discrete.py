"""Discrete sample spaces and categorical mixture distributions.

States are stored as integer indices into per-component label lists. A
mixture keeps its categorical tables in one flat ``(K, M)`` array where
``M = sum(n_d)``; component ``d`` owns columns ``offsets[d]:offsets[d+1]``.
"""
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.special import logsumexp

SUM_TOL = 1e-12


class StructureError(ValueError):
    """Parameters, states and sample space disagree in shape."""


@dataclass(frozen=True, init=False)
class SampleSpace:
    """Ordered state labels for each of the D components."""

    states: tuple

    def __init__(self, states: Sequence[Sequence[Hashable]]):
        states = tuple(tuple(s) for s in states)
        if len(states) < 1:
            raise StructureError("sample space needs at least one component")
        for d, labels in enumerate(states):
            if len(labels) < 2:
                raise StructureError(f"component {d} has fewer than 2 states")
            if len(set(labels)) != len(labels):
                raise StructureError(f"component {d} has duplicate state labels")
        object.__setattr__(self, "states", states)

    @classmethod
    def uniform(cls, D: int, n: int) -> "SampleSpace":
        return cls([list(range(n))] * D)

    @property
    def D(self) -> int:
        return len(self.states)

    @property
    def sizes(self) -> tuple:
        return tuple(len(s) for s in self.states)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)

    @property
    def n_flat(self) -> int:
        return int(sum(self.sizes))

    @property
    def size(self) -> int:
        """Number of points in the product space."""
        return int(np.prod([float(n) for n in self.sizes]))

    def index_of(self, d: int, label) -> int:
        return self.states[d].index(label)

    def encode(self, labels: Sequence) -> np.ndarray:
        """Label vector -> index vector."""
        if len(labels) != self.D:
            raise StructureError(f"expected {self.D} labels, got {len(labels)}")
        return np.array([self.index_of(d, lab) for d, lab in enumerate(labels)], dtype=np.int64)

    def decode(self, x: Sequence[int]) -> tuple:
        return tuple(self.states[d][int(j)] for d, j in enumerate(x))

    def check_states(self, x) -> np.ndarray:
        """Return ``x`` as a 2-D int64 array, validating index ranges."""
        x = np.asarray(x, dtype=np.int64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.D:
            raise StructureError(f"states must have shape (n, {self.D}), got {x.shape}")
        sizes = np.asarray(self.sizes)
        if np.any(x < 0) or np.any(x >= sizes):
            raise StructureError("state index out of range")
        return x

    def one_hot(self, x) -> np.ndarray:
        """Indicator design matrix of shape (n, M)."""
        x = self.check_states(x)
        out = np.zeros((x.shape[0], self.n_flat))
        out[np.arange(x.shape[0])[:, None], x + self.offsets[:-1]] = 1.0
        return out

    def all_states(self) -> np.ndarray:
        """Every point of the product space, last component varying fastest."""
        grids = np.indices(self.sizes).reshape(self.D, -1).T
        return np.ascontiguousarray(grids, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Weights ``alphas`` (K,) and flat categorical tables ``theta`` (K, M)."""

    alphas: np.ndarray
    theta: np.ndarray
    sizes: tuple = field(repr=False)

    def __post_init__(self):
        alphas = np.array(self.alphas, dtype=np.float64)
        theta = np.array(self.theta, dtype=np.float64)
        sizes = tuple(int(n) for n in self.sizes)
        if alphas.ndim != 1 or theta.ndim != 2 or theta.shape[0] != alphas.shape[0]:
            raise StructureError("alphas must be (K,) and theta (K, M)")
        if theta.shape[1] != sum(sizes):
            raise StructureError("theta width does not match the state counts")
        if np.any(alphas < 0) or abs(alphas.sum() - 1.0) > SUM_TOL:
            raise StructureError("alphas must be a probability vector")
        if np.any(theta < 0):
            raise StructureError("theta entries must be nonnegative")
        seg = np.add.reduceat(theta, _offsets(sizes)[:-1], axis=1)
        if np.any(np.abs(seg - 1.0) > SUM_TOL):
            raise StructureError("every theta table must sum to one")
        alphas.flags.writeable = False
        theta.flags.writeable = False
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def from_tables(cls, alphas, tables) -> "MixtureParams":
        """Build from ``tables[k][d]`` probability vectors."""
        sizes = tuple(len(t) for t in tables[0])
        theta = np.array([np.concatenate([np.asarray(t, float) for t in row]) for row in tables])
        return cls(np.asarray(alphas, float), theta, sizes)

    @classmethod
    def independent(cls, tables) -> "MixtureParams":
        """Single-component mixture from per-component probability vectors."""
        return cls.from_tables([1.0], [tables])

    @property
    def K(self) -> int:
        return self.alphas.shape[0]

    @property
    def D(self) -> int:
        return len(self.sizes)

    def table(self, k: int, d: int) -> np.ndarray:
        off = _offsets(self.sizes)
        return self.theta[k, off[d]:off[d + 1]]

    def check_space(self, space: SampleSpace):
        if self.sizes != space.sizes:
            raise StructureError(f"params sized {self.sizes} do not match space {space.sizes}")


def _offsets(sizes) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def log_theta(theta: np.ndarray):
    """Split ``log(theta)`` into a finite part (0 where theta is 0) and a zero mask."""
    zero = theta <= 0.0
    with np.errstate(divide="ignore"):
        lt = np.where(zero, 0.0, np.log(np.where(zero, 1.0, theta)))
    return lt, zero


def log_joint(alphas: np.ndarray, theta: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    """``log(alpha_k) + log h_c(x_i; theta_k)`` for every sample row and component.

    Zero table entries are kept out of the matrix product (``0 * log 0`` would
    give NaN) and the affected entries are set to ``-inf`` afterwards.
    """
    lt, zero = log_theta(theta)
    out = onehot @ lt.T
    if zero.any():
        out[(onehot @ zero.T.astype(np.float64)) > 0] = -np.inf
    with np.errstate(divide="ignore"):
        out += np.log(alphas)
    return out


def component_log_joint(params: MixtureParams, onehot: np.ndarray) -> np.ndarray:
    return log_joint(params.alphas, params.theta, onehot)


def log_pmf(params: MixtureParams, space: SampleSpace, x) -> np.ndarray | float:
    """Mixture log-probability of one state (scalar) or many states (array)."""
    params.check_space(space)
    single = np.ndim(x) == 1
    lj = component_log_joint(params, space.one_hot(x))
    out = logsumexp(lj, axis=1)
    return float(out[0]) if single else out


def pmf(params: MixtureParams, space: SampleSpace, x):
    return np.exp(log_pmf(params, space, x))


def sample(params: MixtureParams, space: SampleSpace, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` states: a component ``k ~ alpha``, then each coordinate from ``theta_k``.

    Returns an ``(n, D)`` int64 array of state indices.
    """
    params.check_space(space)
    if n < 1:
        raise ValueError("n must be >= 1")
    K, D = params.K, space.D
    ks = rng.choice(K, size=n, p=params.alphas) if K > 1 else np.zeros(n, dtype=np.int64)
    u = rng.random((n, D))
    off = space.offsets
    out = np.empty((n, D), dtype=np.int64)
    for d in range(D):
        seg = params.theta[:, off[d]:off[d + 1]]
        cum = np.cumsum(seg, axis=1)
        # Normalised cumulative sums end exactly at 1.0, so zero-mass states
        # occupy empty intervals and can never be drawn.
        cum = cum / cum[:, -1:]
        out[:, d] = (cum[ks] <= u[:, d:d + 1]).sum(axis=1)
    return out


def uniform_params(space: SampleSpace, K: int) -> MixtureParams:
    if K < 1:
        raise ValueError("K must be >= 1")
    theta = np.concatenate([np.full(n, 1.0 / n) for n in space.sizes])
    return MixtureParams(np.full(K, 1.0 / K), np.tile(theta, (K, 1)), space.sizes)
