from __future__ import annotations

from collections import deque
from typing import Hashable, Iterable, Mapping, Sequence


def strongly_connected(nodes: Iterable[Hashable], succ: Mapping[Hashable, Sequence[Hashable]]) -> list[list]:
    """Tarjan's algorithm, iterative."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list[list] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            pushed = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    pushed = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if pushed:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def on_accepting_cycle(nodes: Iterable[Hashable], succ: Mapping, accepting: set) -> set:
    """Accepting nodes that can reach themselves in one or more steps."""
    nodes = list(nodes)
    result = set()
    for comp in strongly_connected(nodes, succ):
        members = set(comp)
        if len(comp) == 1:
            v = comp[0]
            if v in accepting and v in succ.get(v, ()):
                result.add(v)
        else:
            result |= members & accepting
    return result


def backward_distances(targets: Iterable[Hashable], pred: Mapping[Hashable, Iterable[Hashable]]) -> dict:
    dist = {}
    q = deque()
    for t in targets:
        if t not in dist:
            dist[t] = 0
            q.append(t)
    while q:
        v = q.popleft()
        for u in pred.get(v, ()):
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def can_reach(targets: Iterable[Hashable], pred: Mapping[Hashable, Iterable[Hashable]]) -> set:
    return set(backward_distances(targets, pred))
