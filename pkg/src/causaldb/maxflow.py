"""Integer max-flow (Dinic or Edmonds-Karp) with min-cut extraction.

Residual capacities live in a flat list; edge ``e`` and its reverse are
``e`` and ``e ^ 1``.  ``copy()`` shares the topology and duplicates only the
capacities, so a solved network can be warm-started several times.
"""

from __future__ import annotations

from collections import deque


class FlowGraph:
    def __init__(self, n: int = 0):
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.orig: list[int] = []

    @property
    def n(self) -> int:
        return len(self.adj)

    def add_node(self) -> int:
        self.adj.append([])
        return len(self.adj) - 1

    def add_edge(self, u: int, v: int, cap: int) -> int:
        e = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0]
        self.orig += [cap, 0]
        self.adj[u].append(e)
        self.adj[v].append(e + 1)
        return e

    def tail(self, e: int) -> int:
        return self.to[e ^ 1]

    def flow(self, e: int) -> int:
        return self.orig[e] - self.cap[e]

    def copy(self) -> "FlowGraph":
        g = FlowGraph.__new__(FlowGraph)
        g.adj, g.to, g.orig = self.adj, self.to, list(self.orig)
        g.cap = list(self.cap)
        return g

    def set_capacity(self, e: int, cap: int) -> None:
        """Change a forward edge's capacity, keeping the flow already routed.
        Lowering below the current flow is not supported."""
        delta = cap - self.orig[e]
        if self.cap[e] + delta < 0:
            raise ValueError("capacity below current flow")
        self.orig[e] = cap
        self.cap[e] += delta

    # -- algorithms ---------------------------------------------------------

    def max_flow(self, s: int, t: int, method: str = "dinic", limit: int | None = None) -> int:
        """Augment from the current residual; returns the flow added."""
        if method == "dinic":
            return self._dinic(s, t, limit)
        if method == "edmonds-karp":
            return self._edmonds_karp(s, t, limit)
        raise ValueError(f"unknown max-flow method {method}")

    def _edmonds_karp(self, s, t, limit):
        total = 0
        to, cap, adj = self.to, self.cap, self.adj
        while limit is None or total < limit:
            parent = [-1] * self.n
            parent[s] = -2
            q = deque([s])
            while q and parent[t] == -1:
                u = q.popleft()
                for e in adj[u]:
                    if cap[e] > 0 and parent[to[e]] == -1:
                        parent[to[e]] = e
                        q.append(to[e])
            if parent[t] == -1:
                break
            push = None if limit is None else limit - total
            v = t
            while v != s:
                e = parent[v]
                push = cap[e] if push is None else min(push, cap[e])
                v = to[e ^ 1]
            v = t
            while v != s:
                e = parent[v]
                cap[e] -= push
                cap[e ^ 1] += push
                v = to[e ^ 1]
            total += push
        return total

    def _dinic(self, s, t, limit):
        total = 0
        to, cap, adj = self.to, self.cap, self.adj
        n = self.n
        while limit is None or total < limit:
            level = [-1] * n
            level[s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                for e in adj[u]:
                    if cap[e] > 0 and level[to[e]] < 0:
                        level[to[e]] = level[u] + 1
                        q.append(to[e])
            if level[t] < 0:
                break
            it = [0] * n
            while limit is None or total < limit:
                # iterative DFS for one blocking-flow path
                stack = [s]
                path: list[int] = []
                while stack:
                    u = stack[-1]
                    if u == t:
                        break
                    advanced = False
                    while it[u] < len(adj[u]):
                        e = adj[u][it[u]]
                        v = to[e]
                        if cap[e] > 0 and level[v] == level[u] + 1:
                            stack.append(v)
                            path.append(e)
                            advanced = True
                            break
                        it[u] += 1
                    if not advanced:
                        stack.pop()
                        level[u] = -1
                        if path:
                            path.pop()
                            it[stack[-1]] += 1
                if not stack:
                    break
                push = min(cap[e] for e in path)
                if limit is not None:
                    push = min(push, limit - total)
                for e in path:
                    cap[e] -= push
                    cap[e ^ 1] += push
                total += push
        return total

    def reachable(self, s: int) -> set[int]:
        seen = {s}
        q = deque([s])
        while q:
            u = q.popleft()
            for e in self.adj[u]:
                v = self.to[e]
                if self.cap[e] > 0 and v not in seen:
                    seen.add(v)
                    q.append(v)
        return seen

    def min_cut(self, s: int) -> list[int]:
        """Forward edges leaving the residual-reachable side of ``s``."""
        side = self.reachable(s)
        out = []
        for e in range(0, len(self.to), 2):
            if self.tail(e) in side and self.to[e] not in side:
                out.append(e)
        return out
