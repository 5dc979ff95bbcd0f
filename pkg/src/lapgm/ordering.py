"""Fill-reducing orderings for symmetric sparse patterns.

``mindeg`` is a straightforward minimum-degree: eliminate the vertex of
smallest current degree, connect its neighbourhood into a clique, repeat.
Quality matches classical MD at the small-to-moderate dimensions this
package targets; ties break on vertex index so results are deterministic.
"""

import heapq

import numpy as np


def natural_order(n):
    return np.arange(n, dtype=np.int64)


def minimum_degree(n, rows, cols):
    """Minimum-degree permutation from upper-triangle pattern arrays.

    Returns ``perm`` such that eliminating ``perm[0], perm[1], ...`` keeps
    fill low; i.e. the permuted matrix is ``A[perm][:, perm]``.
    """
    adj = [set() for _ in range(n)]
    for r, c in zip(rows.tolist(), cols.tolist()):
        if r != c:
            adj[r].add(c)
            adj[c].add(r)

    heap = [(len(adj[v]), v) for v in range(n)]
    heapq.heapify(heap)
    alive = np.ones(n, dtype=bool)
    perm = np.empty(n, dtype=np.int64)
    k = 0
    while heap:
        d, v = heapq.heappop(heap)
        if not alive[v] or d != len(adj[v]):
            continue  # stale heap entry
        alive[v] = False
        perm[k] = v
        k += 1
        nbrs = adj[v]
        for u in nbrs:
            adj[u].discard(v)
        for u in nbrs:
            au = adj[u]
            au |= nbrs
            au.discard(u)
            heapq.heappush(heap, (len(au), u))
        adj[v] = set()
    return perm
