"""Pure-Python graph kernels.

Reference implementations of the routines in ``_kernels.pyx``; used when the
compiled extension is unavailable or ``BICECM_PURE_PYTHON`` is set.
"""
from collections import deque

import numpy as np


def _adjacency(n_nodes, tail, head):
    adj = [[] for _ in range(n_nodes)]
    for e, (u, v) in enumerate(zip(tail, head)):
        adj[u].append((2 * e, v))
        adj[v].append((2 * e + 1, u))
    return adj


def max_flow_batch(n_nodes, tail, head, caps, s, t):
    """Edmonds-Karp max flow on an undirected graph, one row of ``caps`` per call."""
    tail = [int(u) for u in tail]
    head = [int(v) for v in head]
    caps = np.atleast_2d(np.asarray(caps, dtype=np.float64))
    out = np.zeros(caps.shape[0])
    if s == t:
        out[:] = np.inf
        return out
    adj = _adjacency(n_nodes, tail, head)
    arc_tail = []
    for u, v in zip(tail, head):
        arc_tail.extend((u, v))
    for r, row in enumerate(caps.tolist()):
        res = [c for c in row for _ in (0, 1)]
        total = 0.0
        while True:
            parent = [-1] * n_nodes
            parent[s] = -2
            queue = deque([s])
            while queue and parent[t] == -1:
                u = queue.popleft()
                for a, v in adj[u]:
                    if parent[v] == -1 and res[a] > 0.0:
                        parent[v] = a
                        queue.append(v)
            if parent[t] == -1:
                break
            path = []
            v = t
            while v != s:
                a = parent[v]
                path.append(a)
                v = arc_tail[a]
            bottleneck = min(res[a] for a in path)
            for a in path:
                res[a] -= bottleneck
                res[a ^ 1] += bottleneck
            total += bottleneck
        out[r] = total
    return out


def connected_batch(n_nodes, tail, head, up, s, t):
    """Breadth-first s-t reachability over the edges marked up, one row per call."""
    adj = _adjacency(n_nodes, [int(u) for u in tail], [int(v) for v in head])
    up = np.atleast_2d(np.asarray(up, dtype=bool))
    out = np.zeros(up.shape[0], dtype=bool)
    for r, row in enumerate(up.tolist()):
        seen = [False] * n_nodes
        seen[s] = True
        queue = deque([s])
        while queue and not seen[t]:
            u = queue.popleft()
            for a, v in adj[u]:
                if not seen[v] and row[a >> 1]:
                    seen[v] = True
                    queue.append(v)
        out[r] = seen[t]
    return out
