"""Independent oracles used by the tests.

Nothing here calls kernel exploration code: guards and updates are
evaluated directly and the search strategies differ from the checker's.
"""

from __future__ import annotations

import itertools


def naive_successors(sys_, s):
    """Every (name, bindings, post) by brute-force binding enumeration."""
    c = sys_.constants
    out = []
    for a in sys_.actions:
        doms = []
        for pname, dom in a.params:
            doms.append([(pname, v) for v in (dom(c) if callable(dom) else dom)])
        for combo in itertools.product(*doms):
            b = dict(combo)
            if a.guard(s, c, **b):
                out.append((a.name, b, s.replace(a.update(s, c, **b))))
    return out


def naive_reachable(sys_, limit: int = 200_000) -> set:
    """Depth-first worklist reachability."""
    seen = set(sys_.init)
    stack = list(sys_.init)
    while stack:
        s = stack.pop()
        for _, _, t in naive_successors(sys_, s):
            if t not in seen:
                seen.add(t)
                stack.append(t)
                assert len(seen) <= limit, "oracle budget exceeded"
    return seen


def toy_state_space(toy):
    names = [v for v, _ in toy.domains]
    for values in itertools.product(*(range(n) for _, n in toy.domains)):
        yield dict(zip(names, values))


def toy_shortest_violation(toy):
    """Shortest distance from the initial state to a forbidden state.

    Builds the full transition graph over the whole domain product and
    relaxes distances until nothing changes (Bellman-Ford style), so it
    shares no code or strategy with a breadth-first frontier search.
    Returns None if no forbidden state is reachable.
    """
    names = [v for v, _ in toy.domains]
    key = lambda s: tuple(s[v] for v in names)  # noqa: E731
    edges = []
    for s in toy_state_space(toy):
        for _, guard, updates in toy.actions:
            if toy.enabled(s, guard):
                t = dict(s)
                t.update(toy.apply(s, updates))
                edges.append((key(s), key(t)))
    inf = float("inf")
    dist = {key(s): inf for s in toy_state_space(toy)}
    dist[key(dict(toy.init))] = 0
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            if dist[a] + 1 < dist[b]:
                dist[b] = dist[a] + 1
                changed = True
    bad = [d for k, d in dist.items() if d < inf and toy.violates(dict(zip(names, k)))]
    return min(bad) if bad else None


def toy_reachable_count(toy) -> int:
    names = [v for v, _ in toy.domains]
    start = tuple(v for _, v in toy.init)
    seen = {start}
    layer = [start]
    while layer:
        nxt = []
        for k in layer:
            s = dict(zip(names, k))
            for _, guard, updates in toy.actions:
                if toy.enabled(s, guard):
                    t = dict(s)
                    t.update(toy.apply(s, updates))
                    tk = tuple(t[v] for v in names)
                    if tk not in seen:
                        seen.add(tk)
                        nxt.append(tk)
        layer = nxt
    return len(seen)
