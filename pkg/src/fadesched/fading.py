"""Finite-state fading channel models and state sequence generators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .errors import CapacityError, ModelError

PROB_TOL = 1e-12
STATIONARY_TOL = 1e-9
DEFAULT_JOINT_CAP = 4096


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_pmf(p: np.ndarray, what: str) -> None:
    if p.ndim != 1 or p.size == 0:
        raise ModelError(f"{what} must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ModelError(f"{what} entries must be finite and non-negative")
    if abs(math.fsum(p) - 1.0) > PROB_TOL:
        raise ModelError(f"{what} must sum to 1 (got {math.fsum(p)!r})")


def _ordered_sum(weights: Sequence[float], values: Sequence[float]) -> float:
    s = 0.0
    for w, v in zip(weights, values):
        s += w * v
    return s


@dataclass(frozen=True, eq=False)
class FadingModel:
    """Joint channel state distribution with per-link rates ``rates[l, j]``.

    ``transition`` is optional and only used for Markov-modulated sequences.
    """

    pi: np.ndarray
    rates: np.ndarray
    transition: np.ndarray | None = None
    _link_means: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        pi = _frozen(self.pi)
        rates = _frozen(np.atleast_2d(self.rates))
        _check_pmf(pi, "pi")
        if rates.shape[1] != pi.size:
            raise ModelError(f"rates need one column per state ({pi.size}), got {rates.shape[1]}")
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise ModelError("rates must be finite and non-negative")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "rates", rates)
        if self._link_means is None:
            means = [_ordered_sum(pi, row) for row in rates]
            object.__setattr__(self, "_link_means", _frozen(means))
        bad = [l for l, m in enumerate(self._link_means) if not m > 0]
        if bad:
            raise ModelError(f"links {bad} have zero mean rate")
        if self.transition is not None:
            P = _frozen(self.transition)
            object.__setattr__(self, "transition", P)
            self._check_transition(P)

    def _check_transition(self, P: np.ndarray) -> None:
        J = self.num_states
        if P.shape != (J, J):
            raise ModelError(f"transition must be {J}x{J}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > PROB_TOL):
            raise ModelError("transition rows must be probability vectors")
        if not _irreducible(P > 0):
            raise ModelError("transition matrix is not irreducible")
        if np.max(np.abs(self.pi @ P - self.pi)) > STATIONARY_TOL:
            raise ModelError("pi is not stationary for the transition matrix")

    @property
    def num_states(self) -> int:
        return self.pi.size

    @property
    def num_links(self) -> int:
        return self.rates.shape[0]

    def state_rates(self, j: int) -> np.ndarray:
        return self.rates[:, j]

    @classmethod
    def static(cls, rates: Sequence[float]) -> FadingModel:
        """Single-state model with rates fixed at ``rates``."""
        return cls(np.ones(1), np.asarray(rates, dtype=float).reshape(-1, 1))

    def mean_model(self) -> FadingModel:
        """The static network with every link at its mean rate."""
        return FadingModel.static(self.mean_rates())

    def mean_rates(self) -> np.ndarray:
        return self._link_means.copy()

    def to_dict(self) -> dict:
        out = {"joint": {"pi": self.pi.tolist(), "rates": self.rates.tolist()}}
        if self.transition is not None:
            out["joint"]["transition"] = self.transition.tolist()
        return out


def _irreducible(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    for start in range(n):
        seen = {start}
        stack = [start]
        while stack:
            i = stack.pop()
            for k in np.flatnonzero(adj[i]):
                if k not in seen:
                    seen.add(int(k))
                    stack.append(int(k))
        if len(seen) != n:
            return False
    return True


def mean_rates(model: FadingModel) -> np.ndarray:
    """Per-link mean rate, summed over states in ascending order."""
    return model.mean_rates()


@dataclass(frozen=True, eq=False)
class FactoredFadingModel:
    """Independent per-link fading; ``pmfs[l][s]`` is the chance link l is in state s."""

    pmfs: tuple[np.ndarray, ...]
    rates: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.pmfs) != len(self.rates) or not self.pmfs:
            raise ModelError("need one pmf and one rate table per link")
        pmfs, rates = [], []
        for l, (p, c) in enumerate(zip(self.pmfs, self.rates)):
            p, c = _frozen(p), _frozen(c)
            _check_pmf(p, f"pmf of link {l}")
            if c.shape != p.shape:
                raise ModelError(f"link {l}: rate table and pmf differ in length")
            if not np.all(np.isfinite(c)) or np.any(c < 0):
                raise ModelError(f"link {l}: rates must be finite and non-negative")
            pmfs.append(p)
            rates.append(c)
        object.__setattr__(self, "pmfs", tuple(pmfs))
        object.__setattr__(self, "rates", tuple(rates))

    @property
    def joint_size(self) -> int:
        return math.prod(p.size for p in self.pmfs)

    def link_means(self) -> np.ndarray:
        return np.array([_ordered_sum(p, c) for p, c in zip(self.pmfs, self.rates)])

    def expand(self, cap: int = DEFAULT_JOINT_CAP) -> FadingModel:
        """Joint model; state index is mixed-radix with link 0 most significant."""
        J = self.joint_size
        if J > cap:
            raise CapacityError(f"joint state count {J} exceeds cap {cap}")
        L = len(self.pmfs)
        pi = np.empty(J)
        rates = np.empty((L, J))
        for j, combo in enumerate(product(*(range(p.size) for p in self.pmfs))):
            prob = 1.0
            for l, s in enumerate(combo):
                prob *= self.pmfs[l][s]
                rates[l, j] = self.rates[l][s]
            pi[j] = prob
        # Normalize away product rounding so the joint pmf passes validation.
        pi /= math.fsum(pi)
        return FadingModel(pi, rates, _link_means=self.link_means())

    def to_dict(self) -> dict:
        return {
            "factored": {
                "links": [
                    {"pmf": p.tolist(), "rates": c.tolist()} for p, c in zip(self.pmfs, self.rates)
                ]
            }
        }


def build_product_model(
    pmfs: Sequence[Sequence[float]],
    rate_tables: Sequence[Sequence[float]],
    cap: int = DEFAULT_JOINT_CAP,
) -> FadingModel:
    return FactoredFadingModel(tuple(pmfs), tuple(rate_tables)).expand(cap)


def two_state_model(eps: float = 0.1, pi: Sequence[float] = (0.5, 0.5)) -> FadingModel:
    """Two links, two states: link 1 is good (rate 1) in state 0, link 2 in state 1."""
    return FadingModel(np.asarray(pi, dtype=float), np.array([[1.0, eps], [eps, 1.0]]))


def max_entropy_pmf(values: Sequence[float], mean: float, iters: int = 200) -> np.ndarray:
    """Maximum-entropy pmf on ``values`` with the given mean (exponential family)."""
    v = np.asarray(values, dtype=float)
    if not v.min() < mean < v.max():
        raise ModelError("mean must lie strictly inside the value range")

    def pmf(theta: float) -> np.ndarray:
        w = theta * v
        w = np.exp(w - w.max())
        return w / w.sum()

    lo, hi = -50.0, 50.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if pmf(mid) @ v < mean:
            lo = mid
        else:
            hi = mid
    return pmf(0.5 * (lo + hi))


# Per-link state distributions for the four-link experiment: rates 1..4, maximum
# entropy subject to means (2.7, 2.1, 2.8, 3.1).
FOUR_LINK_RATE_VALUES = (1.0, 2.0, 3.0, 4.0)
FOUR_LINK_MEANS = (2.7, 2.1, 2.8, 3.1)
FOUR_LINK_PMFS = (
    (0.1931607143206622, 0.22694261285388398, 0.26663263133024484, 0.313264041495209),
    (0.38342743805493107, 0.27572272070833054, 0.19827224441854566, 0.14257759681819274),
    (0.16708687599338073, 0.21326585889044006, 0.2722076542389774, 0.3474396108772017),
    (0.09836032757952361, 0.16465067359432237, 0.27561767007278387, 0.4613713287533701),
)


def four_link_factored() -> FactoredFadingModel:
    return FactoredFadingModel(
        tuple(np.array(p) for p in FOUR_LINK_PMFS),
        tuple(np.array(FOUR_LINK_RATE_VALUES) for _ in FOUR_LINK_PMFS),
    )


def _cumulative(p: np.ndarray) -> tuple[np.ndarray, int]:
    cum = np.cumsum(p)
    last = int(np.flatnonzero(p > 0)[-1])
    return cum, last


def sample_state(model: FadingModel, rng: np.random.Generator, current: int | None = None) -> int:
    """One state draw: i.i.d. by ``pi``, or from row ``current`` of the transition matrix."""
    if current is not None and model.transition is not None:
        p = model.transition[current]
    else:
        p = model.pi
    cum, last = _cumulative(p)
    return min(int(np.searchsorted(cum, rng.random(), side="right")), last)


def sample_states(
    model: FadingModel,
    rng: np.random.Generator,
    size: int,
    previous: int | None = None,
    markov: bool = False,
) -> np.ndarray:
    """A block of states. Markov blocks continue the chain from ``previous``."""
    u = rng.random(size)
    if not markov or model.transition is None:
        cum, last = _cumulative(model.pi)
        return np.minimum(np.searchsorted(cum, u, side="right"), last)
    tables = [_cumulative(row) for row in model.transition]
    out = np.empty(size, dtype=np.int64)
    cur = previous
    if cur is None:
        cum, last = _cumulative(model.pi)
    for t in range(size):
        if cur is not None:
            cum, last = tables[cur]
        cur = min(int(np.searchsorted(cum, u[t], side="right")), last)
        out[t] = cur
    return out
