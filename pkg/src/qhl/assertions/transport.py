"""Feasibility of bipartite transportation problems.

Supplies flow from sources to sinks along allowed edges; the problem is feasible when
every supply is shipped and every demand met.  Exact when given ``Fraction`` inputs.
"""
from __future__ import annotations

from collections import deque
from fractions import Fraction


def max_flow_bipartite(supply, demand, allowed, eps=0):
    """Edmonds-Karp on source -> supply nodes -> demand nodes -> sink.

    Returns ``(value, flow)`` where ``flow[j][i]`` is the amount shipped from ``j`` to ``i``.
    """
    ns, nd = len(supply), len(demand)
    src, sink = 0, ns + nd + 1
    big = sum(supply) + sum(demand) + 1
    n = ns + nd + 2
    cap = [dict() for _ in range(n)]

    def add(u, v, c):
        cap[u][v] = cap[u].get(v, 0) + c
        cap[v].setdefault(u, 0)

    for j, s in enumerate(supply):
        add(src, 1 + j, s)
    for i, d in enumerate(demand):
        add(1 + ns + i, sink, d)
    for j in range(ns):
        for i in range(nd):
            if allowed[j][i]:
                add(1 + j, 1 + ns + i, big)
    zero = supply[0] * 0 if supply else 0
    total = zero
    while True:
        parent = {src: None}
        q = deque([src])
        while q and sink not in parent:
            u = q.popleft()
            for v, c in cap[u].items():
                if c > eps and v not in parent:
                    parent[v] = u
                    q.append(v)
        if sink not in parent:
            break
        path, v = [], sink
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        aug = min(cap[u][v] for u, v in path)
        for u, v in path:
            cap[u][v] -= aug
            cap[v][u] += aug
        total += aug
    flow = [[zero] * nd for _ in range(ns)]
    for j in range(ns):
        for i in range(nd):
            if allowed[j][i]:
                f = big - cap[1 + j][1 + ns + i]
                flow[j][i] = f if f > eps else zero
    return total, flow


def is_exact(values) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


def transport(supply, demand, allowed, tol: float = 1e-9):
    """Return a feasible flow matrix, or ``None`` when the problem is infeasible."""
    exact = is_exact(supply) and is_exact(demand)
    if exact:
        supply = [Fraction(s) for s in supply]
        demand = [Fraction(d) for d in demand]
        if sum(supply) != sum(demand):
            return None
        value, flow = max_flow_bipartite(supply, demand, allowed)
        return flow if value == sum(demand) else None
    supply = [float(s) for s in supply]
    demand = [float(d) for d in demand]
    scale = max(sum(supply), 1e-300)
    if abs(sum(supply) - sum(demand)) > tol * max(1.0, scale):
        return None
    value, flow = max_flow_bipartite(supply, demand, allowed, eps=tol * scale * 1e-3)
    return flow if abs(value - sum(demand)) <= tol * max(1.0, scale) else None
