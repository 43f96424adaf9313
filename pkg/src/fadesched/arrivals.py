"""Arrival processes: i.i.d. per-link generators and state-correlated tables.

Amounts are non-negative reals. ``sample_block`` draws one vector per entry of
``states``; the state only matters for the table variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ModelError
from .fading import PROB_TOL


def _vector(values: Sequence[float], what: str) -> np.ndarray:
    a = np.array(values, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ModelError(f"{what} must be a non-empty vector")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise ModelError(f"{what} must be finite and non-negative")
    a.setflags(write=False)
    return a


class ArrivalProcess:
    kind: str = ""

    @property
    def num_links(self) -> int:
        raise NotImplementedError

    def sample_block(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mean_rate_vector(self, pi: Sequence[float] | None = None) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class DeterministicArrivals(ArrivalProcess):
    amounts: np.ndarray
    kind = "deterministic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "amounts", _vector(self.amounts, "amounts"))

    @property
    def num_links(self) -> int:
        return self.amounts.size

    def sample_block(self, states, rng):
        return np.tile(self.amounts, (len(states), 1))

    def mean_rate_vector(self, pi=None):
        return self.amounts.copy()

    def to_dict(self):
        return {"kind": self.kind, "amounts": self.amounts.tolist()}


@dataclass(frozen=True, eq=False)
class BernoulliBatchArrivals(ArrivalProcess):
    """A batch of ``batch[l]`` arrives at link l with probability ``prob[l]``."""

    prob: np.ndarray
    batch: np.ndarray
    kind = "bernoulli-batch"

    def __post_init__(self) -> None:
        prob, batch = _vector(self.prob, "prob"), _vector(self.batch, "batch")
        if prob.shape != batch.shape:
            raise ModelError("prob and batch differ in length")
        if np.any(prob > 1):
            raise ModelError("prob entries must be at most 1")
        object.__setattr__(self, "prob", prob)
        object.__setattr__(self, "batch", batch)

    @property
    def num_links(self) -> int:
        return self.prob.size

    def sample_block(self, states, rng):
        hits = rng.random((len(states), self.num_links)) < self.prob
        return hits * self.batch

    def mean_rate_vector(self, pi=None):
        return self.prob * self.batch

    def to_dict(self):
        return {"kind": self.kind, "prob": self.prob.tolist(), "batch": self.batch.tolist()}


@dataclass(frozen=True, eq=False)
class PoissonArrivals(ArrivalProcess):
    rates: np.ndarray
    kind = "poisson"

    def __post_init__(self) -> None:
        object.__setattr__(self, "rates", _vector(self.rates, "rates"))

    @property
    def num_links(self) -> int:
        return self.rates.size

    def sample_block(self, states, rng):
        return rng.poisson(self.rates, size=(len(states), self.num_links)).astype(float)

    def mean_rate_vector(self, pi=None):
        return self.rates.copy()

    def to_dict(self):
        return {"kind": self.kind, "rates": self.rates.tolist()}


@dataclass(frozen=True, eq=False)
class StateTableArrivals(ArrivalProcess):
    """Per channel state, a finite list of ``(probability, arrival vector)`` outcomes."""

    table: tuple[tuple[tuple[float, tuple[float, ...]], ...], ...]
    kind = "table"

    def __post_init__(self) -> None:
        rows = []
        width = None
        for j, outcomes in enumerate(self.table):
            if not outcomes:
                raise ModelError(f"state {j} has no outcomes")
            probs = []
            row = []
            for p, vec in outcomes:
                v = _vector(vec, f"state {j} outcome")
                width = v.size if width is None else width
                if v.size != width:
                    raise ModelError("all outcome vectors need the same length")
                if not 0 <= p <= 1:
                    raise ModelError(f"state {j}: outcome probability {p!r} outside [0, 1]")
                probs.append(float(p))
                row.append((float(p), tuple(v.tolist())))
            if abs(math.fsum(probs) - 1.0) > PROB_TOL:
                raise ModelError(f"state {j}: outcome probabilities must sum to 1")
            rows.append(tuple(row))
        object.__setattr__(self, "table", tuple(rows))
        cums, vecs = [], []
        for row in rows:
            cums.append(np.cumsum([p for p, _ in row]))
            vecs.append(np.array([v for _, v in row]))
        object.__setattr__(self, "_cums", cums)
        object.__setattr__(self, "_vecs", vecs)

    @property
    def num_links(self) -> int:
        return len(self.table[0][0][1])

    @property
    def num_states(self) -> int:
        return len(self.table)

    def sample_block(self, states, rng):
        states = np.asarray(states)
        u = rng.random(len(states))
        out = np.empty((len(states), self.num_links))
        for j in range(self.num_states):
            mask = states == j
            if not mask.any():
                continue
            cum = self._cums[j]
            idx = np.minimum(np.searchsorted(cum, u[mask], side="right"), len(cum) - 1)
            out[mask] = self._vecs[j][idx]
        return out

    def mean_rate_vector(self, pi=None):
        if pi is None or len(pi) != self.num_states:
            raise ModelError("the table variant needs the state distribution pi")
        mean = np.zeros(self.num_links)
        for j, row in enumerate(self.table):
            for p, vec in row:
                mean += pi[j] * p * np.asarray(vec)
        return mean

    def to_dict(self):
        return {
            "kind": self.kind,
            "table": [
                [{"prob": p, "arrivals": list(v)} for p, v in row] for row in self.table
            ],
        }


def adversarial_table(
    eps: float, delta: float, C: float, mean_rates: Sequence[float]
) -> StateTableArrivals:
    """Two-link state-correlated traffic that defeats mean-rate greedy scheduling.

    State 0: ``(eps, 0)`` w.p. ``1 - delta``, else ``(C/c1 + eps, C/c2)``.
    State 1: ``(0, eps)`` w.p. ``1 - delta``, else ``(C/c1, C/c2 + eps)``.
    """
    if not (eps >= 0 and 0 <= delta <= 1 and C > 0):
        raise ModelError("need eps >= 0, 0 <= delta <= 1 and C > 0")
    c1, c2 = mean_rates
    return StateTableArrivals(
        (
            ((1 - delta, (eps, 0.0)), (delta, (C / c1 + eps, C / c2))),
            ((1 - delta, (0.0, eps)), (delta, (C / c1, C / c2 + eps))),
        )
    )


def iid_process(kind: str, mean: Sequence[float]) -> ArrivalProcess:
    """An i.i.d. process of the given variant with per-link mean ``mean``.

    Bernoulli batches use unit batch size when the mean is at most 1 and
    otherwise a batch of ``2 * mean`` with probability 1/2.
    """
    mean = np.asarray(mean, dtype=float)
    if kind == "poisson":
        return PoissonArrivals(mean)
    if kind == "deterministic":
        return DeterministicArrivals(mean)
    if kind == "bernoulli-batch":
        batch = np.where(mean <= 1, 1.0, 2 * mean)
        prob = np.where(batch > 0, mean / np.where(batch > 0, batch, 1), 0.0)
        return BernoulliBatchArrivals(prob, batch)
    raise ModelError(f"unknown i.i.d. arrival kind {kind!r}")


def sample_arrivals(process: ArrivalProcess, state: int, rng: np.random.Generator) -> np.ndarray:
    return process.sample_block(np.array([state]), rng)[0]


def mean_rate_vector(process: ArrivalProcess, pi: Sequence[float] | None = None) -> np.ndarray:
    return process.mean_rate_vector(pi)
