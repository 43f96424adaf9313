"""Scheduling policies (GFS, GMS, MaxWeight, non-opportunistic) and queue updates.

Every greedy policy shares one loop: pick the highest positive weight among the
remaining links (lowest index on ties), activate it, drop its conflict set,
repeat; then activate any still-free link with a positive rate in index order
so the result is maximal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ModelError
from .fading import FadingModel
from .network import (
    DEFAULT_ENUMERATION_CAP,
    NetworkGraph,
    RateAllocationVector,
    conflict_masks,
    enumerate_maximal_schedules,
)

SCHEDULER_NAMES = ("gfs", "gms", "maxweight", "nonopp")


@dataclass(frozen=True)
class SchedulerKind:
    name: str
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.name not in SCHEDULER_NAMES:
            raise ModelError(f"unknown scheduler {self.name!r}; expected one of {SCHEDULER_NAMES}")
        if not self.beta > 0:
            raise ModelError("beta must be positive")

    @classmethod
    def parse(cls, spec: str | dict | SchedulerKind) -> SchedulerKind:
        """Accept ``"gfs"``, ``"maxweight:2"`` or ``{"kind": "maxweight", "beta": 2}``."""
        if isinstance(spec, SchedulerKind):
            return spec
        if isinstance(spec, dict):
            return cls(spec["kind"], float(spec.get("beta", 1.0)))
        name, _, beta = spec.partition(":")
        return cls(name, float(beta) if beta else 1.0)

    @property
    def label(self) -> str:
        if self.name == "maxweight" and self.beta != 1.0:
            return f"maxweight:{self.beta:g}"
        return self.name


@dataclass
class QueueState:
    """Real FIFO backlogs plus per-(link, state) virtual counters.

    Virtual counters are allocated lazily; ``virtual_total[l]`` tracks their sum.
    """

    real: list[float]
    virtual: list[dict[int, float]] = field(default_factory=list)
    virtual_total: list[float] = field(default_factory=list)

    @classmethod
    def empty(cls, num_links: int) -> QueueState:
        return cls([0.0] * num_links, [{} for _ in range(num_links)], [0.0] * num_links)

    def virtual_queue(self, link: int, state: int) -> float:
        return self.virtual[link].get(state, 0.0)

    def virtual_vector(self, state: int) -> list[float]:
        return [v.get(state, 0.0) for v in self.virtual]


def _masks(interference: NetworkGraph | Sequence[Iterable[int]]) -> tuple[int, ...]:
    if isinstance(interference, NetworkGraph):
        return interference.conflict_masks
    return conflict_masks(interference)


def _interference(interference: NetworkGraph | Sequence[Iterable[int]]):
    if isinstance(interference, NetworkGraph):
        return interference.interference
    return interference


def greedy_active(weights: Sequence[float], rates: Sequence[float], masks: Sequence[int]) -> list[int]:
    """Greedy maximal activation set (indices in activation order)."""
    n = len(rates)
    order = sorted((i for i in range(n) if weights[i] > 0), key=lambda i: (-weights[i], i))
    blocked = 0
    active = []
    for i in order:
        if not blocked >> i & 1:
            active.append(i)
            blocked |= masks[i]
    for i in range(n):
        if rates[i] > 0 and not blocked >> i & 1:
            active.append(i)
            blocked |= masks[i]
    return active


def _vector(active: Iterable[int], rates: Sequence[float], state: int) -> RateAllocationVector:
    vec = [0.0] * len(rates)
    for i in active:
        vec[i] = float(rates[i])
    return RateAllocationVector(tuple(vec), state)


def routing_probabilities(model: FadingModel) -> np.ndarray:
    """``P[l, j] = pi_j c_lj / cbar_l``: chance that a batch for link l joins its state-j queue."""
    return model.pi[None, :] * model.rates / model.mean_rates()[:, None]


def routing_tables(model: FadingModel) -> tuple[np.ndarray, list[int]]:
    """Cumulative routing probabilities per link, plus the last reachable state."""
    probs = routing_probabilities(model)
    cum = np.cumsum(probs, axis=1)
    last = [int(np.flatnonzero(row > 0)[-1]) for row in probs]
    return cum, last


def route_targets(cum: np.ndarray, last: Sequence[int], u: np.ndarray) -> np.ndarray:
    """Map uniforms ``u[t, l]`` onto routing targets; shape follows ``u``."""
    out = np.empty(u.shape, dtype=np.int64)
    for l in range(cum.shape[0]):
        out[..., l] = np.minimum(np.searchsorted(cum[l], u[..., l], side="right"), last[l])
    return out


def gfs_route(
    arrivals: Sequence[float],
    model: FadingModel,
    rng: np.random.Generator,
    queues: QueueState,
) -> QueueState:
    """Place each link's whole batch into one virtual queue, drawn by ``routing_probabilities``.

    One uniform is drawn per link, including links with no arrivals, so the
    stream position does not depend on the arrival amounts.
    """
    cum, last = routing_tables(model)
    targets = route_targets(cum, last, rng.random(model.num_links))
    for l, a in enumerate(arrivals):
        if a > 0:
            j = int(targets[l])
            vq = queues.virtual[l]
            vq[j] = vq.get(j, 0.0) + float(a)
            queues.virtual_total[l] += float(a)
    return queues


def gfs_select(
    state: int,
    queues: QueueState,
    rates: Sequence[float],
    interference: NetworkGraph | Sequence[Iterable[int]],
) -> RateAllocationVector:
    weights = [v.get(state, 0.0) * c for v, c in zip(queues.virtual, rates)]
    return _vector(greedy_active(weights, rates, _masks(interference)), rates, state)


def gms_select(
    real: Sequence[float],
    rates: Sequence[float],
    interference: NetworkGraph | Sequence[Iterable[int]],
    state: int = 0,
) -> RateAllocationVector:
    weights = [q * c for q, c in zip(real, rates)]
    return _vector(greedy_active(weights, rates, _masks(interference)), rates, state)


def nonopp_select(
    real: Sequence[float],
    mean_rates: Sequence[float],
    rates: Sequence[float],
    interference: NetworkGraph | Sequence[Iterable[int]],
    state: int = 0,
) -> RateAllocationVector:
    """Greedy on ``q * cbar``; the chosen links then transmit at their current rate.

    Links whose current rate is zero are not candidates: activating them would
    serve nothing and could block a usable neighbour.
    """
    weights = [q * m if c > 0 else 0.0 for q, m, c in zip(real, mean_rates, rates)]
    return _vector(greedy_active(weights, rates, _masks(interference)), rates, state)


def maxweight_select(
    real: Sequence[float],
    rates: Sequence[float],
    interference: NetworkGraph | Sequence[Iterable[int]],
    beta: float = 1.0,
    state: int = 0,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> RateAllocationVector:
    """Exhaustive argmax of ``sum_l q_l**beta * r_l`` over maximal schedules.

    Ties go to the earliest schedule in enumeration order.
    """
    if not beta > 0:
        raise ModelError("beta must be positive")
    best, best_w = None, -1.0
    for vec in enumerate_maximal_schedules(_interference(interference), rates, state=state, cap=cap):
        w = sum(real[i] ** beta * vec.rates[i] for i in vec.active)
        if w > best_w:
            best, best_w = vec, w
    return best


def apply_departures(r: RateAllocationVector, state: int, queues: QueueState) -> QueueState:
    """Serve ``min(r_l, q)`` from each real queue and from the state's virtual queues."""
    for l, rate in enumerate(r.rates):
        if rate <= 0:
            continue
        q = queues.real[l]
        queues.real[l] = q - rate if q > rate else 0.0
        vq = queues.virtual[l] if queues.virtual else None
        if vq:
            v = vq.get(state, 0.0)
            if v > 0:
                d = rate if v > rate else v
                vq[state] = v - d
                t = queues.virtual_total[l] - d
                queues.virtual_total[l] = t if t > 0 else 0.0
    return queues
