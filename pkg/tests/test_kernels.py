import os
import subprocess
import sys

import networkx as nx
import numpy as np
import pytest

from bicecm import _pykernels, kernels

from oracles import min_cut_brute

try:
    from bicecm import _kernels
except ImportError:  # pragma: no cover - extension not built
    _kernels = None

BACKENDS = [pytest.param(_pykernels, id="python"),
            pytest.param(_kernels, id="cython",
                         marks=pytest.mark.skipif(_kernels is None, reason="extension not built"))]


def random_graph(rng, n_nodes, n_edges):
    tail = rng.integers(0, n_nodes, n_edges)
    head = rng.integers(0, n_nodes, n_edges)
    return tail.astype(np.int64), head.astype(np.int64)


def nx_connected(n_nodes, tail, head, up, s, t):
    G = nx.MultiGraph()
    G.add_nodes_from(range(n_nodes))
    G.add_edges_from((u, v) for u, v, ok in zip(tail, head, up) if ok)
    return nx.has_path(G, s, t)


@pytest.mark.parametrize("impl", BACKENDS)
class TestMaxFlow:
    def test_against_min_cut_enumeration(self, impl):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 8))
            tail, head = random_graph(rng, n, int(rng.integers(1, 14)))
            caps = rng.choice([0.0, 1.0, 2.5, 100.0, 200.0], size=(1, tail.size))
            got = impl.max_flow_batch(n, tail, head, caps, 0, n - 1)[0]
            want = min_cut_brute(n, list(zip(tail, head)), caps[0], 0, n - 1)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_doubling_capacities_doubles_flow(self, impl):
        rng = np.random.default_rng(1)
        tail, head = random_graph(rng, 10, 30)
        caps = rng.uniform(0, 5, size=(20, 30))
        a = impl.max_flow_batch(10, tail, head, caps, 0, 9)
        b = impl.max_flow_batch(10, tail, head, 2 * caps, 0, 9)
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12)

    def test_no_path_is_zero(self, impl):
        tail = np.array([0, 2], dtype=np.int64)
        head = np.array([1, 3], dtype=np.int64)
        out = impl.max_flow_batch(4, tail, head, np.ones((1, 2)), 0, 3)
        assert out[0] == 0.0

    def test_batch_rows_independent(self, impl):
        rng = np.random.default_rng(2)
        tail, head = random_graph(rng, 6, 12)
        caps = rng.uniform(0, 3, size=(8, 12))
        batch = impl.max_flow_batch(6, tail, head, caps, 0, 5)
        single = [impl.max_flow_batch(6, tail, head, caps[i:i + 1], 0, 5)[0] for i in range(8)]
        np.testing.assert_array_equal(batch, single)


@pytest.mark.parametrize("impl", BACKENDS)
class TestConnected:
    def test_against_networkx(self, impl):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            tail, head = random_graph(rng, n, int(rng.integers(1, 15)))
            up = rng.random((1, tail.size)) < 0.6
            got = bool(impl.connected_batch(n, tail, head, up, 0, n - 1)[0])
            assert got == nx_connected(n, tail, head, up[0], 0, n - 1)


@pytest.mark.skipif(_kernels is None, reason="extension not built")
class TestBackendsAgree:
    def test_same_outputs(self):
        rng = np.random.default_rng(4)
        tail, head = random_graph(rng, 12, 40)
        caps = rng.choice([0.0, 100.0, 200.0], size=(200, 40))
        np.testing.assert_array_equal(_kernels.max_flow_batch(12, tail, head, caps, 0, 11),
                                      _pykernels.max_flow_batch(12, tail, head, caps, 0, 11))
        up = caps > 0
        np.testing.assert_array_equal(_kernels.connected_batch(12, tail, head, up, 0, 11),
                                      _pykernels.connected_batch(12, tail, head, up, 0, 11))


class TestSelection:
    def test_default_backend(self):
        assert kernels.BACKEND == ("python" if _kernels is None or os.environ.get("BICECM_PURE_PYTHON")
                                   else "cython")

    def test_environment_forces_fallback(self):
        env = dict(os.environ, BICECM_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c", "import bicecm; print(bicecm.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"
