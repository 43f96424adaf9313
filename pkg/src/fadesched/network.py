"""Network graphs, binary interference and maximal rate allocations.

Links are addressed internally by their position in ``NetworkGraph.link_ids``;
every tie-break in the package ("lowest link id") means lowest position.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Any, Hashable, Iterable, Mapping, NamedTuple, Sequence

from .errors import CapacityError, GraphError

DEFAULT_ENUMERATION_CAP = 16


@dataclass(frozen=True)
class NetworkGraph:
    """Links with endpoints plus a symmetric conflict relation.

    ``interference[i]`` holds the indices of links that may not be active
    together with link ``i``. Inputs are symmetrized on construction.
    """

    nodes: tuple[Hashable, ...]
    link_ids: tuple[Hashable, ...]
    endpoints: tuple[tuple[Hashable, Hashable], ...]
    interference: tuple[frozenset[int], ...] = field(default=())

    def __post_init__(self) -> None:
        n = len(self.link_ids)
        if len(set(self.link_ids)) != n:
            raise GraphError("duplicate link ids")
        if len(self.endpoints) != n:
            raise GraphError("endpoints and link_ids differ in length")
        known = set(self.nodes)
        for lid, (u, v) in zip(self.link_ids, self.endpoints):
            if u not in known or v not in known:
                raise GraphError(f"link {lid!r} has an endpoint outside the node set")
        interference = self.interference or tuple(frozenset() for _ in range(n))
        if len(interference) != n:
            raise GraphError("one interference set per link is required")
        object.__setattr__(self, "interference", symmetrize(interference))

    @property
    def num_links(self) -> int:
        return len(self.link_ids)

    def index(self, link_id: Hashable) -> int:
        try:
            return self.link_ids.index(link_id)
        except ValueError:
            raise GraphError(f"unknown link id {link_id!r}") from None

    @cached_property
    def conflict_masks(self) -> tuple[int, ...]:
        """Bitmask of ``I_l`` plus ``l`` itself, per link."""
        return conflict_masks(self.interference)

    @classmethod
    def build(
        cls,
        nodes: Iterable[Hashable],
        links: Iterable[tuple[Hashable, Sequence[Hashable]]],
        interference: Mapping[Hashable, Iterable[Hashable]] | None = None,
        khop: int | None = None,
    ) -> NetworkGraph:
        """Build from link ids and either explicit conflicts or a k-hop rule."""
        links = [(lid, (ep[0], ep[1])) for lid, ep in links]
        ids = tuple(lid for lid, _ in links)
        eps = tuple(ep for _, ep in links)
        if (interference is None) == (khop is None):
            raise GraphError("give exactly one of interference or khop")
        if khop is not None:
            sets = build_khop_interference(eps, khop)
        else:
            pos = {lid: i for i, lid in enumerate(ids)}
            sets_l: list[set[int]] = [set() for _ in ids]
            for lid, others in interference.items():
                if lid not in pos:
                    raise GraphError(f"interference refers to unknown link {lid!r}")
                for o in others:
                    if o not in pos:
                        raise GraphError(f"interference of {lid!r} refers to unknown link {o!r}")
                    sets_l[pos[lid]].add(pos[o])
            sets = tuple(frozenset(s) for s in sets_l)
        return cls(tuple(nodes), ids, eps, sets)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> NetworkGraph:
        links = [(item["id"], item["endpoints"]) for item in data["links"]]
        interference = data.get("interference")
        if interference is not None:
            # JSON object keys are strings; map them back onto the declared ids.
            by_str = {str(lid): lid for lid, _ in links}
            interference = {
                by_str.get(str(k), k): [by_str.get(str(o), o) for o in v]
                for k, v in interference.items()
            }
        return cls.build(data["nodes"], links, interference=interference, khop=data.get("khop"))

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": list(self.nodes),
            "links": [
                {"id": lid, "endpoints": list(ep)} for lid, ep in zip(self.link_ids, self.endpoints)
            ],
            "interference": {
                str(lid): [self.link_ids[k] for k in sorted(self.interference[i])]
                for i, lid in enumerate(self.link_ids)
            },
        }


@dataclass(frozen=True)
class RateAllocationVector:
    """Per-link service rates for one slot in channel state ``state``."""

    rates: tuple[float, ...]
    state: int = 0

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.rates) if r > 0)

    def __len__(self) -> int:
        return len(self.rates)


class FeasibilityCheck(NamedTuple):
    feasible: bool
    # "a": two active links interfere, "b": an idle usable link could be added,
    # "rate": an entry differs from the link's rate or lies outside the subset
    violated: str | None = None

    def __bool__(self) -> bool:
        return self.feasible


def symmetrize(interference: Sequence[Iterable[int]]) -> tuple[frozenset[int], ...]:
    """Union each conflict set with its mirror image and drop self-loops."""
    n = len(interference)
    sets: list[set[int]] = [set() for _ in range(n)]
    for i, others in enumerate(interference):
        for k in others:
            if not 0 <= k < n:
                raise GraphError(f"interference of link index {i} refers to unknown index {k}")
            if k != i:
                sets[i].add(k)
                sets[k].add(i)
    return tuple(frozenset(s) for s in sets)


def conflict_masks(interference: Sequence[Iterable[int]]) -> tuple[int, ...]:
    masks = []
    for i, others in enumerate(interference):
        m = 1 << i
        for k in others:
            m |= 1 << k
        masks.append(m)
    return tuple(masks)


def build_khop_interference(
    endpoints: Sequence[Sequence[Hashable]], k: int
) -> tuple[frozenset[int], ...]:
    """Conflict sets of the k-hop model.

    Two links are 1 hop apart when they share an endpoint; ``I_l`` holds every
    link reachable from ``l`` in at most ``k`` such hops. ``k = 1`` is the
    node-exclusive model.
    """
    if int(k) != k or k < 1:
        raise GraphError(f"k must be a positive integer, got {k!r}")
    by_node: dict[Hashable, list[int]] = {}
    for i, ep in enumerate(endpoints):
        if len(ep) != 2:
            raise GraphError(f"link index {i} needs exactly two endpoints")
        for node in set(ep):
            by_node.setdefault(node, []).append(i)

    sets = []
    for start in range(len(endpoints)):
        dist = {start: 0}
        frontier = deque([start])
        while frontier:
            cur = frontier.popleft()
            if dist[cur] == k:
                continue
            for node in endpoints[cur]:
                for nxt in by_node[node]:
                    if nxt not in dist:
                        dist[nxt] = dist[cur] + 1
                        frontier.append(nxt)
        sets.append(frozenset(i for i in dist if i != start))
    return tuple(sets)


def maximal_activation_sets(candidates: Iterable[int], masks: Sequence[int]) -> list[tuple[int, ...]]:
    """All maximal conflict-free subsets of ``candidates``, lexicographically sorted.

    Bron-Kerbosch with pivoting on the complement of the conflict graph.
    """
    cand = 0
    for i in candidates:
        cand |= 1 << i
    if not cand:
        return [()]
    compat = {}
    rest = cand
    while rest:
        low = rest & -rest
        i = low.bit_length() - 1
        compat[i] = cand & ~masks[i]
        rest ^= low

    found: list[int] = []

    def expand(r: int, p: int, x: int) -> None:
        if not p:
            if not x:
                found.append(r)
            return
        px = p | x
        pivot, best = -1, -1
        while px:
            low = px & -px
            u = low.bit_length() - 1
            cnt = (p & compat[u]).bit_count()
            if cnt > best:
                pivot, best = u, cnt
            px ^= low
        todo = p & ~compat[pivot]
        while todo:
            low = todo & -todo
            v = low.bit_length() - 1
            expand(r | low, p & compat[v], x & compat[v])
            p &= ~low
            x |= low
            todo ^= low

    expand(0, cand, 0)
    sets = [tuple(i for i in range(r.bit_length()) if r >> i & 1) for r in found]
    sets.sort()
    return sets


def enumerate_maximal_schedules(
    interference: Sequence[Iterable[int]],
    rates: Sequence[float],
    subset: Iterable[int] | None = None,
    state: int = 0,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> list[RateAllocationVector]:
    """Every non-interfering, maximal rate allocation on ``subset``.

    Vectors have full length with zeros outside ``subset``. Zero-rate links
    never appear active. Order is lexicographic by the sorted active index set.
    """
    n = len(rates)
    if len(interference) != n:
        raise ValueError("rates and interference differ in length")
    links = sorted(set(range(n) if subset is None else subset))
    if len(links) > cap:
        raise CapacityError(f"{len(links)} links exceed the enumeration cap of {cap}")
    for r in rates:
        if not r >= 0 or r == float("inf"):
            raise ValueError(f"rates must be finite and non-negative, got {r!r}")
    masks = conflict_masks(interference)
    positive = [i for i in links if rates[i] > 0]
    out = []
    for active in maximal_activation_sets(positive, masks):
        vec = [0.0] * n
        for i in active:
            vec[i] = float(rates[i])
        out.append(RateAllocationVector(tuple(vec), state))
    return out


def is_feasible(
    vector: RateAllocationVector | Sequence[float],
    rates: Sequence[float],
    interference: Sequence[Iterable[int]],
    subset: Iterable[int] | None = None,
) -> FeasibilityCheck:
    """Check non-interference and maximality; maximality only counts links with positive rate."""
    r = vector.rates if isinstance(vector, RateAllocationVector) else tuple(vector)
    n = len(rates)
    if len(r) != n or len(interference) != n:
        raise ValueError("vector, rates and interference must have the same length")
    links = range(n) if subset is None else sorted(set(subset))
    for i in range(n):
        if r[i] != 0 and (r[i] != rates[i] or i not in links):
            return FeasibilityCheck(False, "rate")
    active = [i for i in links if r[i] > 0]
    for i in active:
        if any(r[k] > 0 for k in interference[i]):
            return FeasibilityCheck(False, "a")
    blocked = set(active)
    for i in active:
        blocked.update(interference[i])
    for k in links:
        if rates[k] > 0 and k not in blocked:
            return FeasibilityCheck(False, "b")
    return FeasibilityCheck(True)


# Reference topologies. Node ids are integers; link ids run 1..n.


def graph_from_edges(edges: Sequence[tuple[Hashable, Hashable]], k: int = 1) -> NetworkGraph:
    nodes = sorted({u for e in edges for u in e}, key=repr)
    return NetworkGraph.build(nodes, [(i + 1, e) for i, e in enumerate(edges)], khop=k)


def path_graph(num_links: int, k: int = 1) -> NetworkGraph:
    return graph_from_edges([(i, i + 1) for i in range(num_links)], k)


def cycle_graph(num_links: int, k: int = 1) -> NetworkGraph:
    return graph_from_edges([(i, (i + 1) % num_links) for i in range(num_links)], k)


def star_graph(num_links: int, k: int = 1) -> NetworkGraph:
    return graph_from_edges([(0, i + 1) for i in range(num_links)], k)


def all_subsets(n: int) -> Iterable[tuple[int, ...]]:
    """Non-empty subsets of ``range(n)`` by size, then lexicographically."""
    for size in range(1, n + 1):
        yield from combinations(range(n), size)
