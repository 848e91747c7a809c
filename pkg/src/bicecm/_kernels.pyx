# Compiled graph kernels. Must stay behaviourally identical to _pykernels.py.
import numpy as np


cdef _build_csr(Py_ssize_t n_nodes, const long[::1] tail, const long[::1] head,
                long[::1] start, long[::1] arcs):
    # Undirected edge e becomes arcs 2e (tail->head) and 2e+1 (head->tail).
    cdef Py_ssize_t E = tail.shape[0], e, v, pos
    cdef long[::1] fill = np.zeros(n_nodes, dtype=np.int64)
    for v in range(n_nodes + 1):
        start[v] = 0
    for e in range(E):
        start[tail[e] + 1] += 1
        start[head[e] + 1] += 1
    for v in range(n_nodes):
        start[v + 1] += start[v]
    for e in range(E):
        pos = start[tail[e]] + fill[tail[e]]
        arcs[pos] = 2 * e
        fill[tail[e]] += 1
        pos = start[head[e]] + fill[head[e]]
        arcs[pos] = 2 * e + 1
        fill[head[e]] += 1


def max_flow_batch(Py_ssize_t n_nodes, tail, head, caps, Py_ssize_t s, Py_ssize_t t):
    """Edmonds-Karp max flow on an undirected graph, one row of ``caps`` per call."""
    cdef const long[::1] tl = np.ascontiguousarray(tail, dtype=np.int64)
    cdef const long[::1] hd = np.ascontiguousarray(head, dtype=np.int64)
    cdef const double[:, ::1] cp = np.ascontiguousarray(caps, dtype=np.float64)
    cdef Py_ssize_t n = cp.shape[0], E = tl.shape[0]
    cdef long[::1] start = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef long[::1] arcs = np.zeros(2 * E, dtype=np.int64)
    _build_csr(n_nodes, tl, hd, start, arcs)

    cdef long[::1] arc_head = np.empty(2 * E, dtype=np.int64)
    cdef Py_ssize_t e
    for e in range(E):
        arc_head[2 * e] = hd[e]
        arc_head[2 * e + 1] = tl[e]

    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] flows = out
    cdef double[::1] res = np.empty(2 * E, dtype=np.float64)
    cdef long[::1] parent_arc = np.empty(n_nodes, dtype=np.int64)
    cdef long[::1] queue = np.empty(n_nodes, dtype=np.int64)
    cdef Py_ssize_t r, qh, qt, u, v, k, a
    cdef double total, bottleneck
    if s == t:
        out[:] = np.inf
        return out
    for r in range(n):
        for e in range(E):
            res[2 * e] = cp[r, e]
            res[2 * e + 1] = cp[r, e]
        total = 0.0
        while True:
            for v in range(n_nodes):
                parent_arc[v] = -1
            parent_arc[s] = -2
            qh = 0
            qt = 0
            queue[qt] = s
            qt += 1
            while qh < qt and parent_arc[t] == -1:
                u = queue[qh]
                qh += 1
                for k in range(start[u], start[u + 1]):
                    a = arcs[k]
                    v = arc_head[a]
                    if parent_arc[v] == -1 and res[a] > 0.0:
                        parent_arc[v] = a
                        queue[qt] = v
                        qt += 1
            if parent_arc[t] == -1:
                break
            bottleneck = np.inf
            v = t
            while v != s:
                a = parent_arc[v]
                if res[a] < bottleneck:
                    bottleneck = res[a]
                v = arc_head[a ^ 1]
            v = t
            while v != s:
                a = parent_arc[v]
                res[a] -= bottleneck
                res[a ^ 1] += bottleneck
                v = arc_head[a ^ 1]
            total += bottleneck
        flows[r] = total
    return out


def connected_batch(Py_ssize_t n_nodes, tail, head, up, Py_ssize_t s, Py_ssize_t t):
    """Breadth-first s-t reachability over the edges marked up, one row per call."""
    cdef const long[::1] tl = np.ascontiguousarray(tail, dtype=np.int64)
    cdef const long[::1] hd = np.ascontiguousarray(head, dtype=np.int64)
    cdef const unsigned char[:, ::1] upm = np.ascontiguousarray(up, dtype=np.uint8)
    cdef Py_ssize_t n = upm.shape[0], E = tl.shape[0]
    cdef long[::1] start = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef long[::1] arcs = np.zeros(2 * E, dtype=np.int64)
    _build_csr(n_nodes, tl, hd, start, arcs)

    cdef long[::1] arc_head = np.empty(2 * E, dtype=np.int64)
    cdef Py_ssize_t e
    for e in range(E):
        arc_head[2 * e] = hd[e]
        arc_head[2 * e + 1] = tl[e]

    out = np.zeros(n, dtype=bool)
    cdef unsigned char[::1] reach = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] seen = np.zeros(n_nodes, dtype=np.uint8)
    cdef long[::1] queue = np.empty(n_nodes, dtype=np.int64)
    cdef Py_ssize_t r, qh, qt, u, v, k, a
    for r in range(n):
        for v in range(n_nodes):
            seen[v] = 0
        seen[s] = 1
        qh = 0
        qt = 0
        queue[qt] = s
        qt += 1
        while qh < qt and not seen[t]:
            u = queue[qh]
            qh += 1
            for k in range(start[u], start[u + 1]):
                a = arcs[k]
                v = arc_head[a]
                if not seen[v] and upm[r, a >> 1]:
                    seen[v] = 1
                    queue[qt] = v
                    qt += 1
        reach[r] = seen[t]
    out[:] = np.asarray(reach, dtype=bool)
    return out
