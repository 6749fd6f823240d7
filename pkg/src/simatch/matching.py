"""Maximum bipartite matching used for completion (feasibility) checks.

``hopcroft_karp`` recomputes a maximum matching from scratch.
``IncrementalMatcher`` keeps a perfect matching of the residual graph and
repairs it with a single alternating-path search per assignment.
"""

from __future__ import annotations

from collections import deque
from typing import Dict, Iterable, Mapping, Optional, Sequence

INF = float("inf")


def hopcroft_karp(
    adj: Mapping[int, Sequence[int]], lefts: Iterable[int], allowed_right=None
) -> Dict[int, int]:
    """Maximum matching ``{left: right}`` of the graph restricted to ``lefts``.

    ``allowed_right``, when given, is a container of usable right vertices.
    """
    lefts = list(lefts)
    nbrs = {
        u: [v for v in adj[u] if allowed_right is None or v in allowed_right] for u in lefts
    }
    pair_l: Dict[int, Optional[int]] = {u: None for u in lefts}
    pair_r: Dict[int, int] = {}
    dist: Dict[Optional[int], float] = {}

    def bfs() -> bool:
        q = deque()
        for u in lefts:
            if pair_l[u] is None:
                dist[u] = 0
                q.append(u)
            else:
                dist[u] = INF
        dist[None] = INF
        while q:
            u = q.popleft()
            if dist[u] < dist[None]:
                for v in nbrs[u]:
                    w = pair_r.get(v)
                    if dist.get(w, INF) == INF:
                        dist[w] = dist[u] + 1
                        if w is not None:
                            q.append(w)
        return dist[None] != INF

    def dfs(u) -> bool:
        # iterative DFS along layered graph
        stack = [(u, iter(nbrs[u]))]
        path = []
        while stack:
            x, it = stack[-1]
            advanced = False
            for v in it:
                w = pair_r.get(v)
                if w is None:
                    if dist[None] == dist[x] + 1:
                        path.append((x, v))
                        for a, b in path:
                            pair_l[a] = b
                            pair_r[b] = a
                        return True
                elif dist.get(w, INF) == dist[x] + 1:
                    path.append((x, v))
                    stack.append((w, iter(nbrs[w])))
                    advanced = True
                    break
            if not advanced:
                dist[x] = INF
                stack.pop()
                if path:
                    path.pop()
        return False

    while bfs():
        for u in lefts:
            if pair_l[u] is None:
                dfs(u)
    return {u: v for u, v in pair_l.items() if v is not None}


class IncrementalMatcher:
    """Perfect matching of the residual graph, maintained under assignments."""

    def __init__(self, adj: Mapping[int, Sequence[int]], lefts: Iterable[int], rights: Iterable[int]):
        self.adj = adj
        self.lefts = set(lefts)
        self.rights = set(rights)
        m = hopcroft_karp(adj, self.lefts, self.rights)
        if len(m) != len(self.lefts) or len(self.lefts) != len(self.rights):
            raise ValueError("residual graph has no perfect matching")
        self.mate_l = dict(m)
        self.mate_r = {v: u for u, v in m.items()}

    def _augment(self, start: int, target: int, blocked_left: int, blocked_right: int):
        """Alternating path from free left ``start`` to free right ``target``."""
        prev = {}
        q = deque([start])
        seen_l = {start}
        while q:
            u = q.popleft()
            for v in self.adj[u]:
                if v not in self.rights or v == blocked_right or v in prev:
                    continue
                prev[v] = u
                if v == target:
                    path = []
                    while True:
                        path.append((prev[v], v))
                        if prev[v] == start:
                            return path
                        v = self.mate_l[prev[v]]
                w = self.mate_r.get(v)
                if w is None or w == blocked_left or w in seen_l:
                    continue
                seen_l.add(w)
                q.append(w)
        return None

    def can_assign(self, i: int, j: int) -> bool:
        if i not in self.lefts or j not in self.rights or j not in self.adj[i]:
            return False
        if self.mate_l[i] == j:
            return True
        return self._augment(self.mate_r[j], self.mate_l[i], i, j) is not None

    def assign(self, i: int, j: int) -> None:
        if not self.can_assign(i, j):
            raise ValueError(f"assignment {i}->{j} admits no completion")
        if self.mate_l[i] != j:
            start, target = self.mate_r[j], self.mate_l[i]
            path = self._augment(start, target, i, j)
            del self.mate_r[target]
            for u, v in path:
                self.mate_l[u] = v
                self.mate_r[v] = u
        del self.mate_l[i]
        del self.mate_r[j]
        self.lefts.discard(i)
        self.rights.discard(j)
