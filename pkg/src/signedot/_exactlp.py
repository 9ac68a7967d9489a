"""Exact rational solvers for tiny balanced transportation problems.

Two independent routes over ``fractions.Fraction`` arithmetic:

* ``transportation_exact``: primal transportation simplex with Bland
  index rules, so it terminates on every degenerate instance and its
  optimality test (nonnegative reduced costs) is checked exactly.
* ``transportation_brute_force``: enumerates every spanning-tree basis
  of the bipartite supply/demand graph and keeps the cheapest feasible
  one. Exponential, only for instances with a handful of cells; it
  exists to certify the simplex above.

Floats passed in are converted with ``Fraction(x)``, which is exact, so
results are exact optima of the binary64 input data.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb


def _as_fractions(values):
    return [Fraction(v) for v in values]


def _cost_matrix(costs):
    return [[Fraction(c) for c in row] for row in costs]


def transportation_exact(costs, supplies, demands):
    """Exact optimum of a balanced transportation problem.

    Parameters are anything ``Fraction`` accepts (floats, ints,
    Fractions). Returns ``(flow, objective)`` with ``flow`` a dict
    mapping ``(i, j)`` to a positive Fraction and ``objective`` a
    Fraction. Raises ``ValueError`` on unbalanced or negative data.
    """
    C = _cost_matrix(costs)
    s = _as_fractions(supplies)
    d = _as_fractions(demands)
    m, n = len(s), len(d)
    if m == 0 or n == 0:
        raise ValueError("need at least one supply and one demand")
    if any(x < 0 for x in s) or any(x < 0 for x in d):
        raise ValueError("negative supply or demand")
    if sum(s) != sum(d):
        raise ValueError("unbalanced transportation problem")

    # Northwest-corner start: walks from (0,0) to (m-1,n-1) advancing one
    # index per allocation, which yields exactly m+n-1 basic cells.
    flow = {}
    basis = []
    rem_s = s[:]
    rem_d = d[:]
    i = j = 0
    while True:
        q = min(rem_s[i], rem_d[j])
        flow[(i, j)] = q
        basis.append((i, j))
        rem_s[i] -= q
        rem_d[j] -= q
        if i == m - 1 and j == n - 1:
            break
        if rem_s[i] == 0 and i < m - 1:
            i += 1
        else:
            j += 1

    while True:
        u, v = _potentials(C, basis, m, n)
        entering = None
        in_basis = set(basis)
        for cell in itertools.product(range(m), range(n)):  # Bland: first index
            if cell in in_basis:
                continue
            if C[cell[0]][cell[1]] - u[cell[0]] - v[cell[1]] < 0:
                entering = cell
                break
        if entering is None:
            obj = sum(C[i][j] * q for (i, j), q in flow.items())
            return {c: q for c, q in flow.items() if q > 0}, obj

        cycle = _pivot_cycle(basis, entering, m, n)
        # cycle[0] is the entering cell; odd positions lose flow.
        losers = cycle[1::2]
        theta = min(flow[c] for c in losers)
        leaving = min(c for c in losers if flow[c] == theta)  # Bland tie-break
        for k, cell in enumerate(cycle):
            delta = theta if k % 2 == 0 else -theta
            flow[cell] = flow.get(cell, Fraction(0)) + delta
        del flow[leaving]
        basis.remove(leaving)
        basis.append(entering)


def _potentials(C, basis, m, n):
    # Solve u_i + v_j = c_ij on the basis tree, rooted at row 0.
    adj = {("r", i): [] for i in range(m)}
    adj.update({("c", j): [] for j in range(n)})
    for (i, j) in basis:
        adj[("r", i)].append(("c", j))
        adj[("c", j)].append(("r", i))
    u = [None] * m
    v = [None] * n
    u[0] = Fraction(0)
    stack = [("r", 0)]
    seen = {("r", 0)}
    while stack:
        node = stack.pop()
        for nxt in adj[node]:
            if nxt in seen:
                continue
            seen.add(nxt)
            if node[0] == "r":
                v[nxt[1]] = C[node[1]][nxt[1]] - u[node[1]]
            else:
                u[nxt[1]] = C[nxt[1]][node[1]] - v[node[1]]
            stack.append(nxt)
    if any(x is None for x in u) or any(x is None for x in v):
        raise RuntimeError("basis does not span the bipartite graph")
    return u, v


def _pivot_cycle(basis, entering, m, n):
    # Unique cycle closed by the entering cell: a path through basis
    # cells from the entering row to the entering column.
    adj = {}
    for (i, j) in basis:
        adj.setdefault(("r", i), []).append((("c", j), (i, j)))
        adj.setdefault(("c", j), []).append((("r", i), (i, j)))
    start = ("r", entering[0])
    goal = ("c", entering[1])
    prev = {start: (None, None)}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nxt, cell in adj.get(node, ()):
            if nxt not in prev:
                prev[nxt] = (node, cell)
                stack.append(nxt)
    if goal not in prev:
        raise RuntimeError("entering cell does not close a cycle")
    path_cells = []
    node = goal
    while prev[node][0] is not None:
        node, cell = prev[node][0], prev[node][1]
        path_cells.append(cell)
    path_cells.reverse()  # row(entering) -> ... -> col(entering)
    return [entering] + path_cells[::-1]


def transportation_brute_force(costs, supplies, demands, max_bases: int = 200_000):
    """Minimum cost by exhaustive vertex enumeration.

    Every vertex of the transportation polytope is supported on a
    spanning tree of the bipartite graph, so enumerating candidate cell
    subsets of size m+n-1, keeping the trees, and solving each tree for
    flows visits every vertex. Refuses instances whose search space
    exceeds ``max_bases`` subsets.
    """
    C = _cost_matrix(costs)
    s = _as_fractions(supplies)
    d = _as_fractions(demands)
    m, n = len(s), len(d)
    if sum(s) != sum(d):
        raise ValueError("unbalanced transportation problem")
    size = m + n - 1
    n_subsets = comb(m * n, size)
    if n_subsets > max_bases:
        raise ValueError(
            f"instance too large for enumeration: {n_subsets} candidate bases"
        )

    cells = list(itertools.product(range(m), range(n)))
    best = None
    for subset in itertools.combinations(cells, size):
        if not _is_spanning_tree(subset, m, n):
            continue
        flows = _solve_tree(subset, s, d, m, n)
        if flows is None:
            continue
        obj = sum(C[i][j] * q for (i, j), q in flows.items())
        if best is None or obj < best:
            best = obj
    if best is None:
        raise RuntimeError("no feasible basis found")
    return best


def _is_spanning_tree(subset, m, n):
    parent = list(range(m + n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (i, j) in subset:
        a, b = find(i), find(m + j)
        if a == b:
            return False
        parent[a] = b
    root = find(0)
    return all(find(k) == root for k in range(m + n))


def _solve_tree(subset, s, d, m, n):
    need = {("r", i): s[i] for i in range(m)}
    need.update({("c", j): d[j] for j in range(n)})
    incident = {}
    for cell in subset:
        incident.setdefault(("r", cell[0]), []).append(cell)
        incident.setdefault(("c", cell[1]), []).append(cell)
    remaining = set(subset)
    flows = {}
    while remaining:
        leaf = None
        for node, cells in incident.items():
            live = [c for c in cells if c in remaining]
            if len(live) == 1:
                leaf = (node, live[0])
                break
        if leaf is None:
            return None
        node, cell = leaf
        q = need[node]
        if q < 0:
            return None
        flows[cell] = q
        other = ("c", cell[1]) if node[0] == "r" else ("r", cell[0])
        need[node] = Fraction(0)
        need[other] -= q
        remaining.discard(cell)
    if any(x < 0 for x in flows.values()):
        return None
    return flows
