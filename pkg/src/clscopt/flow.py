"""Min-cost flow by successive shortest augmenting paths with node potentials."""

from __future__ import annotations

import heapq
import math
from collections.abc import Sequence

import numpy as np

from .model import FORBIDDEN

#: Residual capacities at or below EPS * (total supply) count as saturated.
EPS = 1e-12


class InfeasibleFlowError(ValueError):
    pass


class FlowNetwork:
    """Directed network with real capacities and (possibly negative) costs.

    Nodes are integers ``0..n-1``. Arcs are stored in paired forward/backward
    form for the residual graph; :meth:`add_arc` returns an arc handle usable
    with :meth:`flow`.
    """

    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.head: list[int] = []
        self.cap: list[float] = []
        self.cost: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]
        self.supply = [0.0] * n_nodes
        self._initial_cap: list[float] = []

    def add_node(self) -> int:
        self.adj.append([])
        self.supply.append(0.0)
        self.n += 1
        return self.n - 1

    def add_arc(self, u: int, v: int, capacity: float, cost: float) -> int:
        if capacity < 0:
            raise ValueError("arc capacity must be non-negative")
        e = len(self.head)
        self.head += [v, u]
        self.cap += [float(capacity), 0.0]
        self.cost += [float(cost), -float(cost)]
        self._initial_cap += [float(capacity), 0.0]
        self.adj[u].append(e)
        self.adj[v].append(e + 1)
        return e

    def set_supply(self, node: int, amount: float) -> None:
        """Positive = source of ``amount`` units, negative = sink."""
        self.supply[node] = float(amount)

    def flow(self, arc: int) -> float:
        return self._initial_cap[arc] - self.cap[arc]

    def _bellman_ford(self, source: int) -> list[float]:
        dist = [math.inf] * self.n
        dist[source] = 0.0
        for _ in range(self.n):
            changed = False
            for u in range(self.n):
                du = dist[u]
                if du == math.inf:
                    continue
                for e in self.adj[u]:
                    if self.cap[e] > EPS:
                        v = self.head[e]
                        nd = du + self.cost[e]
                        if nd < dist[v] - 1e-15 * max(1.0, abs(nd)):
                            dist[v] = nd
                            changed = True
            if not changed:
                return dist
        raise ValueError("negative-cost cycle in the residual network")

    def solve(self) -> float:
        """Route all supplies to sinks at minimum cost; returns the total cost.

        Raises :class:`InfeasibleFlowError` if some supply cannot reach a sink.
        """
        total_supply = sum(s for s in self.supply if s > 0)
        total_demand = -sum(s for s in self.supply if s < 0)
        scale = max(1.0, total_supply, total_demand)
        if abs(total_supply - total_demand) > 1e-9 * scale:
            raise ValueError(
                f"unbalanced network: supply {total_supply} vs demand {total_demand}"
            )
        src = self.add_node()
        snk = self.add_node()
        for v in range(self.n - 2):
            s = self.supply[v]
            if s > 0:
                self.add_arc(src, v, s, 0.0)
            elif s < 0:
                self.add_arc(v, snk, -s, 0.0)

        # initial potentials admit negative arc costs (network must be acyclic
        # in its negative arcs, as all ours are)
        dist = self._bellman_ford(src)
        pot = [d if d < math.inf else 0.0 for d in dist]

        remaining = total_supply
        head, cap, cost, adj = self.head, self.cap, self.cost, self.adj
        tol = EPS * scale
        while remaining > tol:
            dist = [math.inf] * self.n
            prev = [-1] * self.n
            dist[src] = 0.0
            heap = [(0.0, src)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                pu = pot[u]
                for e in adj[u]:
                    if cap[e] > tol:
                        v = head[e]
                        rc = cost[e] + pu - pot[v]
                        if rc < 0:
                            rc = 0.0  # rounding; true reduced costs are >= 0
                        nd = d + rc
                        if nd < dist[v]:
                            dist[v] = nd
                            prev[v] = e
                            heapq.heappush(heap, (nd, v))
            if dist[snk] == math.inf:
                raise InfeasibleFlowError(
                    f"{remaining:.6g} units of supply cannot reach any sink"
                )
            for v in range(self.n):
                if dist[v] < math.inf:
                    pot[v] += dist[v]
            push = remaining
            v = snk
            while v != src:
                e = prev[v]
                push = min(push, cap[e])
                v = head[e ^ 1]
            v = snk
            while v != src:
                e = prev[v]
                cap[e] -= push
                cap[e ^ 1] += push
                v = head[e ^ 1]
            remaining -= push

        total = 0.0
        for e in range(0, len(head), 2):
            f = self._initial_cap[e] - cap[e]
            if f:
                total += f * cost[e]
        return total


def min_cost_flow(
    supplies: Sequence[float],
    demands: Sequence[float],
    arc_costs: Sequence[Sequence[float]] | np.ndarray,
    capacities: Sequence[Sequence[float]] | np.ndarray | None = None,
) -> np.ndarray:
    """Minimum-cost transportation plan from supply to demand nodes.

    ``arc_costs[i][j]`` is the unit cost from source i to sink j; entries that
    are infinite or at least :data:`~clscopt.model.FORBIDDEN` are omitted.
    ``capacities`` optionally bounds each arc (default: unbounded).
    Returns the (n_sources, n_sinks) flow matrix.
    """
    supplies = np.asarray(supplies, dtype=float)
    demands = np.asarray(demands, dtype=float)
    costs = np.asarray(arc_costs, dtype=float)
    if costs.shape != (len(supplies), len(demands)):
        raise ValueError(f"arc_costs shape {costs.shape} does not match supplies/demands")
    if (supplies < 0).any() or (demands < 0).any():
        raise ValueError("supplies and demands must be non-negative")
    total = float(supplies.sum())
    big = max(total, float(demands.sum()))
    caps = (
        np.full(costs.shape, big) if capacities is None
        else np.minimum(np.asarray(capacities, dtype=float), big)
    )
    if not np.all(np.isfinite(caps)):
        raise ValueError("capacities must be finite")
    n_src, n_dst = costs.shape
    net = FlowNetwork(n_src + n_dst)
    handles = {}
    for i in range(n_src):
        net.set_supply(i, supplies[i])
        for j in range(n_dst):
            c = costs[i, j]
            if np.isfinite(c) and c < FORBIDDEN:
                handles[i, j] = net.add_arc(i, n_src + j, caps[i, j], c)
    for j in range(n_dst):
        net.set_supply(n_src + j, -demands[j])
    net.solve()
    out = np.zeros(costs.shape)
    for (i, j), e in handles.items():
        out[i, j] = net.flow(e)
    return out
