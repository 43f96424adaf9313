"""Local pooling factor and capacity-region membership via linear programs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import CapacityError, LPError, ModelError
from .fading import FadingModel
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, lp_solve
from .network import (
    DEFAULT_ENUMERATION_CAP,
    NetworkGraph,
    RateAllocationVector,
    all_subsets,
    enumerate_maximal_schedules,
)

DEFAULT_LPF_CAP = 12
CERT_TOL = 1e-9


def schedule_matrix(
    interference: Sequence[Iterable[int]], rates: Sequence[float], subset: Sequence[int]
) -> np.ndarray:
    """Columns are the maximal rate vectors on ``subset``, rows the links of ``subset``."""
    vecs = enumerate_maximal_schedules(interference, rates, subset=subset)
    return np.array([[v.rates[i] for v in vecs] for i in subset])


@dataclass(frozen=True, eq=False)
class SubgraphSigma:
    sigma: float
    subset: tuple[int, ...]
    matrix: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray


def subgraph_sigma(
    subset: Sequence[int],
    interference: NetworkGraph | Sequence[Iterable[int]],
    rates: Sequence[float],
) -> SubgraphSigma:
    """Smallest ``sum(beta)`` with ``M beta >= M gamma`` and ``gamma`` a convex weight.

    Equivalently the largest sigma for which no two convex combinations
    ``mu, nu`` of the subset's maximal schedules satisfy ``sigma * mu >= nu``.
    """
    if isinstance(interference, NetworkGraph):
        interference = interference.interference
    subset = tuple(sorted(set(subset)))
    if not subset:
        raise ValueError("subset must be non-empty")
    if any(not rates[i] > 0 for i in subset):
        raise ModelError("reference rates must be positive on the subset")
    M = schedule_matrix(interference, rates, subset)
    K = M.shape[1]
    c = np.concatenate([np.ones(K), np.zeros(K)])
    A_ub = np.hstack([-M, M])
    A_eq = np.concatenate([np.zeros(K), np.ones(K)])[None, :]
    res = lp_solve(c, A_ub, np.zeros(len(subset)), A_eq, [1.0])
    if res.status != OPTIMAL:
        raise LPError(f"local pooling LP on {subset} ended {res.status}; M=\n{M}")
    return SubgraphSigma(res.fun, subset, M, res.x[:K], res.x[K:])


@dataclass(frozen=True, eq=False)
class LpfReport:
    sigma_star: float
    subset: tuple[int, ...]
    subset_ids: tuple[Any, ...]
    matrix: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    reference_rates: np.ndarray
    subsets_evaluated: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "sigma_star": self.sigma_star,
            "minimizing_subset": list(self.subset_ids),
            "schedules": self.matrix.T.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
            "reference_rates": self.reference_rates.tolist(),
            "subsets_evaluated": self.subsets_evaluated,
        }


def lpf(
    graph: NetworkGraph,
    rates: Sequence[float] | None = None,
    cap: int = DEFAULT_LPF_CAP,
) -> LpfReport:
    """Local pooling factor: minimum of ``subgraph_sigma`` over all non-empty link subsets.

    ``rates`` defaults to all ones; any positive rates give the same value.
    The first subset (by size, then lexicographically) attaining the minimum is reported.
    """
    n = graph.num_links
    if n > cap:
        raise CapacityError(f"{n} links exceed the LPF subset-enumeration cap of {cap}")
    if n == 0:
        raise ValueError("graph has no links")
    ref = np.ones(n) if rates is None else np.asarray(rates, dtype=float)
    if ref.shape != (n,):
        raise ValueError("need one reference rate per link")
    best = None
    count = 0
    for subset in all_subsets(n):
        res = subgraph_sigma(subset, graph.interference, ref)
        count += 1
        if best is None or res.sigma < best.sigma - 1e-12:
            best = res
    return LpfReport(
        sigma_star=min(best.sigma, 1.0),
        subset=best.subset,
        subset_ids=tuple(graph.link_ids[i] for i in best.subset),
        matrix=best.matrix,
        beta=best.beta,
        gamma=best.gamma,
        reference_rates=ref,
        subsets_evaluated=count,
    )


@dataclass(frozen=True, eq=False)
class RegionCertificate:
    """Membership verdict with either convex schedule weights or a separating hyperplane.

    When ``member``: ``alpha[j]`` weights ``schedules[j]`` and ``service`` is the
    resulting mean service vector. Otherwise ``separator`` is a weight vector
    ``w >= 0`` with ``w @ lam`` exceeding the best achievable ``w @ service`` by ``margin``.
    """

    member: bool
    schedules: tuple[tuple[RateAllocationVector, ...], ...]
    alpha: tuple[np.ndarray, ...] | None = None
    service: np.ndarray | None = None
    separator: np.ndarray | None = None
    margin: float | None = None

    @property
    def violated_links(self) -> tuple[int, ...]:
        if self.separator is None:
            return ()
        return tuple(int(i) for i in np.flatnonzero(self.separator > CERT_TOL))

    def to_dict(self, link_ids: Sequence[Any] | None = None) -> dict[str, Any]:
        ids = link_ids or list(range(len(self.schedules[0][0].rates)))
        out: dict[str, Any] = {"member": self.member}
        if self.member:
            out["service"] = self.service.tolist()
            out["alpha"] = [
                [
                    {"active": [ids[i] for i in v.active], "weight": float(a)}
                    for v, a in zip(sched, alpha)
                    if a > CERT_TOL
                ]
                for sched, alpha in zip(self.schedules, self.alpha)
            ]
        else:
            out["separator"] = self.separator.tolist()
            out["margin"] = self.margin
            out["violated_links"] = [ids[i] for i in self.violated_links]
        return out


def _per_state_schedules(model: FadingModel, interference, cap: int):
    return tuple(
        tuple(enumerate_maximal_schedules(interference, model.rates[:, j], state=j, cap=cap))
        for j in range(model.num_states)
    )


def _service_blocks(model: FadingModel, schedules) -> np.ndarray:
    """Matrix mapping stacked alpha onto the mean service vector."""
    cols = []
    for j, sched in enumerate(schedules):
        for v in sched:
            cols.append(model.pi[j] * np.asarray(v.rates))
    return np.array(cols).T


def _state_sum_rows(schedules) -> np.ndarray:
    total = sum(len(s) for s in schedules)
    rows = np.zeros((len(schedules), total))
    start = 0
    for j, s in enumerate(schedules):
        rows[j, start : start + len(s)] = 1.0
        start += len(s)
    return rows


def lambda_membership(
    lam: Sequence[float],
    model: FadingModel,
    interference: NetworkGraph | Sequence[Iterable[int]],
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> RegionCertificate:
    """Is ``lam <= sum_j pi_j psi_j`` for some ``psi_j`` in the hull of the state-j schedules?

    Boundary points count as members.
    """
    if isinstance(interference, NetworkGraph):
        interference = interference.interference
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (model.num_links,):
        raise ValueError("lambda needs one entry per link")
    if np.any(lam < 0):
        raise ValueError("lambda must be non-negative")
    schedules = _per_state_schedules(model, interference, cap)
    S = _service_blocks(model, schedules)
    E = _state_sum_rows(schedules)
    nvar = S.shape[1]
    res = lp_solve(np.zeros(nvar), -S, -lam, E, np.ones(len(schedules)))
    if res.status == OPTIMAL:
        alpha, start = [], 0
        for s in schedules:
            alpha.append(res.x[start : start + len(s)])
            start += len(s)
        return RegionCertificate(True, schedules, tuple(alpha), S @ res.x)
    if res.status != INFEASIBLE:
        raise LPError(f"membership LP ended {res.status}")

    # Separation: max w@lam - sum_j pi_j z_j with w@r <= z_j for every state-j schedule.
    L, J = model.num_links, model.num_states
    rows = []
    for j, sched in enumerate(schedules):
        for v in sched:
            row = np.zeros(L + J)
            row[:L] = v.rates
            row[L + j] = -1.0
            rows.append(row)
    c = np.concatenate([-lam, model.pi])
    A_eq = np.concatenate([np.ones(L), np.zeros(J)])[None, :]
    sep = lp_solve(c, np.array(rows), np.zeros(len(rows)), A_eq, [1.0])
    if sep.status != OPTIMAL:
        raise LPError(f"separation LP ended {sep.status}")
    return RegionCertificate(False, schedules, separator=sep.x[:L], margin=-sep.fun)


def lambdahat_membership(
    lam: Sequence[float],
    mean_rates: Sequence[float],
    interference: NetworkGraph | Sequence[Iterable[int]],
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> RegionCertificate:
    """Membership in the region of the static network with rates fixed at ``mean_rates``."""
    return lambda_membership(lam, FadingModel.static(mean_rates), interference, cap)


def gfs_stability_guaranteed(
    lam: Sequence[float],
    sigma_star: float,
    mean_rates: Sequence[float],
    interference: NetworkGraph | Sequence[Iterable[int]],
) -> bool:
    """True iff ``lam / sigma_star`` lies in the static mean-rate region, where GFS is guaranteed stable."""
    if not 0 < sigma_star <= 1:
        raise ValueError("sigma_star must lie in (0, 1]")
    scaled = np.asarray(lam, dtype=float) / sigma_star
    return lambdahat_membership(scaled, mean_rates, interference).member


def max_load_scale(
    direction: Sequence[float],
    model: FadingModel,
    interference: NetworkGraph | Sequence[Iterable[int]],
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """Largest ``s`` with ``s * direction`` in the region of ``model``.

    Pass ``model.mean_model()`` to get the boundary of the static mean-rate region.
    """
    if isinstance(interference, NetworkGraph):
        interference = interference.interference
    d = np.asarray(direction, dtype=float)
    if np.any(d < 0) or not np.any(d > 0):
        raise ValueError("direction must be non-negative and non-zero")
    schedules = _per_state_schedules(model, interference, cap)
    S = _service_blocks(model, schedules)
    E = _state_sum_rows(schedules)
    nvar = S.shape[1]
    c = np.zeros(nvar + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-S, d[:, None]])
    A_eq = np.hstack([E, np.zeros((E.shape[0], 1))])
    res = lp_solve(c, A_ub, np.zeros(len(d)), A_eq, np.ones(E.shape[0]))
    if res.status == UNBOUNDED:
        raise ValueError("direction has support only on links that are never constrained")
    if res.status != OPTIMAL:
        raise LPError(f"load-scale LP ended {res.status}")
    return float(res.x[-1])
