"""Discrete-time slot loop, stability verdicts and load sweeps.

Slot ``t`` proceeds as: draw the channel state ``j(t)``; place the arrival batch
generated for this slot (GFS also routes it to a virtual queue); pick a rate
allocation; serve; check ``q_l <= sum_j q_lj``; record.

Randomness comes from three child streams of the run seed (states, routing,
arrivals), so schedulers compared under one seed see the same channel and
arrival sample paths. Draws happen in fixed blocks of ``BLOCK`` slots.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .arrivals import ArrivalProcess, StateTableArrivals, iid_process
from .errors import ModelError, VirtualBoundViolation
from .fading import FadingModel, sample_states
from .network import NetworkGraph, maximal_activation_sets
from .schedulers import SchedulerKind, greedy_active, route_targets, routing_tables

log = logging.getLogger(__name__)

BLOCK = 4096


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    seed: int = 0
    warmup_fraction: float = 0.1
    sample_interval: int = 10
    bound_monitor: bool = True
    scheduler: SchedulerKind = SchedulerKind("gfs")
    markov: bool = False

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ModelError("horizon must be at least 1")
        if not 0 <= self.warmup_fraction < 1:
            raise ModelError("warmup_fraction must lie in [0, 1)")
        if self.sample_interval < 1:
            raise ModelError("sample_interval must be at least 1")


@dataclass(frozen=True)
class Thresholds:
    unstable_slope: float = 0.05
    stable_slope: float = 0.005
    trend_to_noise: float = 10.0
    max_growth: float = 5.0
    min_samples: int = 1000


@dataclass(eq=False)
class Metrics:
    scheduler: str
    horizon: int
    seed: int
    sample_slots: np.ndarray
    sample_totals: np.ndarray
    sample_queues: np.ndarray
    time_avg_total: float
    max_total: float
    final_queues: np.ndarray
    slope: float
    arrival_rate: float
    warmup_slots: int
    bound_checks: bool
    bound_violations: int
    state_counts: np.ndarray
    arrived: np.ndarray
    served: np.ndarray
    routed_mass: list[dict[int, float]] | None = None
    routed_batches: list[dict[int, int]] | None = None
    virtual_totals: np.ndarray | None = None
    virtual_queues: list[dict[int, float]] | None = None

    @property
    def final_total(self) -> float:
        return float(self.final_queues.sum())

    def summary(self) -> dict[str, Any]:
        return {
            "scheduler": self.scheduler,
            "horizon": self.horizon,
            "seed": self.seed,
            "time_avg_total_queue": self.time_avg_total,
            "max_total_queue": self.max_total,
            "final_total_queue": self.final_total,
            "final_queues": self.final_queues.tolist(),
            "slope": self.slope,
            "arrival_rate": self.arrival_rate,
            "bound_checks": self.bound_checks,
            "bound_violations": self.bound_violations,
        }


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    state: int
    arrivals: tuple[float, ...]
    active: tuple[int, ...]
    queues: tuple[float, ...]


@dataclass
class RunResult:
    metrics: Metrics
    trace: list[SlotRecord] | None = None


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: str
    slope: float
    normalized_slope: float
    reason: str = ""


def replication_seed(master: int, index: int) -> int:
    """Deterministic 63-bit seed for replication ``index`` of a master seed."""
    ss = np.random.SeedSequence([int(master), int(index)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(3)]


def _second_half_fit(slots: np.ndarray, totals: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope over the second half: (slope, rise across the window, residual std)."""
    if slots.size < 2:
        return 0.0, 0.0, 0.0
    half = slots[-1] / 2.0
    mask = slots > half
    if mask.sum() < 2:
        mask = np.ones_like(slots, dtype=bool)
    x = slots[mask].astype(float)
    y = totals[mask]
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0:
        return 0.0, 0.0, 0.0
    slope = float(xc @ (y - y.mean())) / denom
    resid = y - y.mean() - slope * xc
    return slope, slope * (x[-1] - x[0]), float(np.sqrt(np.mean(resid**2)))


def _check_dims(graph: NetworkGraph, fading: FadingModel, arrivals: ArrivalProcess) -> None:
    L = graph.num_links
    if fading.num_links != L:
        raise ModelError(f"fading model has {fading.num_links} links, graph has {L}")
    if arrivals.num_links != L:
        raise ModelError(f"arrival process has {arrivals.num_links} links, graph has {L}")
    if isinstance(arrivals, StateTableArrivals) and arrivals.num_states != fading.num_states:
        raise ModelError("arrival table needs one row per channel state")


def run(
    config: SimConfig,
    graph: NetworkGraph,
    fading: FadingModel,
    arrivals: ArrivalProcess,
    scheduler: SchedulerKind | str | None = None,
    *,
    trace: bool = False,
    bound_tol: float = 0.0,
    strict: bool = True,
) -> RunResult:
    """Simulate one run.

    With the monitor on (GFS only), a slot where a real queue exceeds its
    virtual total raises ``VirtualBoundViolation``; ``strict=False`` counts instead.
    """
    kind = SchedulerKind.parse(scheduler) if scheduler is not None else config.scheduler
    _check_dims(graph, fading, arrivals)
    L, J, T = graph.num_links, fading.num_states, config.horizon
    state_rng, route_rng, arrival_rng = _streams(config.seed)

    masks = graph.conflict_masks
    rates_by_state = fading.rates.T.tolist()
    means = fading.mean_rates().tolist()
    is_gfs = kind.name == "gfs"
    monitor = config.bound_monitor and is_gfs
    beta = kind.beta

    q = [0.0] * L
    vq: list[dict[int, float]] = [{} for _ in range(L)]
    vtot = [0.0] * L
    routed_mass: list[dict[int, float]] = [{} for _ in range(L)]
    routed_batches: list[dict[int, int]] = [{} for _ in range(L)]
    if is_gfs:
        cum, last = routing_tables(fading)

    sched_cache: dict[tuple[bool, ...], list[tuple[int, ...]]] = {}

    def choose(j: int, rj: list[float]) -> list[int] | tuple[int, ...]:
        if is_gfs:
            w = [vq[l].get(j, 0.0) * rj[l] for l in range(L)]
            return greedy_active(w, rj, masks)
        if kind.name == "gms":
            return greedy_active([q[l] * rj[l] for l in range(L)], rj, masks)
        if kind.name == "nonopp":
            w = [q[l] * means[l] if rj[l] > 0 else 0.0 for l in range(L)]
            return greedy_active(w, rj, masks)
        key = tuple(r > 0 for r in rj)
        scheds = sched_cache.get(key)
        if scheds is None:
            scheds = maximal_activation_sets([l for l in range(L) if key[l]], masks)
            sched_cache[key] = scheds
        if beta == 1.0:
            qb = q
        else:
            qb = [x**beta for x in q]
        best, best_w = scheds[0], -1.0
        for s in scheds:
            w = 0.0
            for l in s:
                w += qb[l] * rj[l]
            if w > best_w:
                best, best_w = s, w
        return best

    warm = int(math.floor(config.warmup_fraction * T))
    interval = config.sample_interval
    sample_slots: list[int] = []
    sample_rows: list[list[float]] = []
    post_sum = 0.0
    max_total = 0.0
    violations = 0
    state_counts = np.zeros(J, dtype=np.int64)
    arrived = [0.0] * L
    served = [0.0] * L
    records: list[SlotRecord] | None = [] if trace else None
    previous_state = None

    for start in range(0, T, BLOCK):
        n = min(BLOCK, T - start)
        states = sample_states(fading, state_rng, BLOCK, previous_state, config.markov)
        batch = arrivals.sample_block(states, arrival_rng)
        if is_gfs:
            targets = route_targets(cum, last, route_rng.random((BLOCK, L))).tolist()
        previous_state = int(states[n - 1])
        state_counts += np.bincount(states[:n], minlength=J)
        states_l = states[:n].tolist()
        batch_l = batch[:n].tolist()

        for i in range(n):
            t = start + i + 1
            j = states_l[i]
            a = batch_l[i]
            for l in range(L):
                x = a[l]
                if x > 0:
                    q[l] += x
                    arrived[l] += x
                    if is_gfs:
                        s = targets[i][l]
                        d = vq[l]
                        d[s] = d.get(s, 0.0) + x
                        vtot[l] += x
                        rm = routed_mass[l]
                        rm[s] = rm.get(s, 0.0) + x
                        rb = routed_batches[l]
                        rb[s] = rb.get(s, 0) + 1

            rj = rates_by_state[j]
            active = choose(j, rj)
            for l in active:
                r = rj[l]
                ql = q[l]
                if ql > r:
                    q[l] = ql - r
                    served[l] += r
                else:
                    q[l] = 0.0
                    served[l] += ql
                if is_gfs:
                    d = vq[l]
                    v = d.get(j, 0.0)
                    if v > 0:
                        dv = r if v > r else v
                        d[j] = v - dv
                        tv = vtot[l] - dv
                        vtot[l] = tv if tv > 0 else 0.0

            if monitor:
                for l in range(L):
                    if q[l] > vtot[l] + bound_tol * max(1.0, vtot[l]):
                        violations += 1
                        if strict:
                            raise VirtualBoundViolation(
                                f"slot {t}, link {graph.link_ids[l]!r}: "
                                f"real {q[l]!r} > virtual {vtot[l]!r}"
                            )

            total = sum(q)
            if t > warm:
                post_sum += total
            if total > max_total:
                max_total = total
            if t % interval == 0 or t == T:
                sample_slots.append(t)
                sample_rows.append(list(q))
            if records is not None:
                records.append(SlotRecord(t, j, tuple(a), tuple(sorted(active)), tuple(q)))

    slots = np.array(sample_slots, dtype=np.int64)
    queues = np.array(sample_rows, dtype=float).reshape(-1, L)
    totals = queues.sum(axis=1)
    slope, _, _ = _second_half_fit(slots, totals)
    lam = arrivals.mean_rate_vector(fading.pi)
    metrics = Metrics(
        scheduler=kind.label,
        horizon=T,
        seed=int(config.seed),
        sample_slots=slots,
        sample_totals=totals,
        sample_queues=queues,
        time_avg_total=post_sum / (T - warm),
        max_total=max_total,
        final_queues=np.array(q),
        slope=slope,
        arrival_rate=float(np.sum(lam)),
        warmup_slots=warm,
        bound_checks=monitor,
        bound_violations=violations,
        state_counts=state_counts,
        arrived=np.array(arrived),
        served=np.array(served),
        routed_mass=routed_mass if is_gfs else None,
        routed_batches=routed_batches if is_gfs else None,
        virtual_totals=np.array(vtot) if is_gfs else None,
        virtual_queues=vq if is_gfs else None,
    )
    return RunResult(metrics, records)


def estimate_stability(metrics: Metrics, thresholds: Thresholds | None = None) -> StabilityVerdict:
    """Classify a run from its sampled total-queue trace.

    unstable: normalized slope above ``unstable_slope`` and the fitted rise over
    the second half exceeds ``trend_to_noise`` residual standard deviations.
    stable: normalized slope below ``stable_slope`` and the second-half maximum
    stays within ``max_growth * (m + 1)``, m the post-warmup first-half maximum.
    """
    th = thresholds or Thresholds()
    return classify_trace(
        metrics.sample_slots, metrics.sample_totals, metrics.arrival_rate, metrics.warmup_slots, th
    )


def classify_trace(
    slots: np.ndarray,
    totals: np.ndarray,
    arrival_rate: float,
    warmup_slots: int = 0,
    thresholds: Thresholds | None = None,
) -> StabilityVerdict:
    th = thresholds or Thresholds()
    slots = np.asarray(slots)
    totals = np.asarray(totals, dtype=float)
    slope, rise, noise = _second_half_fit(slots, totals)
    norm = slope / arrival_rate if arrival_rate > 0 else slope
    if slots.size < th.min_samples:
        return StabilityVerdict("inconclusive", slope, norm, f"only {slots.size} samples")
    if norm > th.unstable_slope and rise > th.trend_to_noise * noise:
        return StabilityVerdict("unstable", slope, norm, "sustained linear growth")
    half = slots[-1] / 2.0
    first = totals[(slots > warmup_slots) & (slots <= half)]
    second = totals[slots > half]
    first_max = float(first.max()) if first.size else 0.0
    bounded = float(second.max(initial=0.0)) <= th.max_growth * (first_max + 1.0)
    if norm < th.stable_slope and bounded:
        return StabilityVerdict("stable", slope, norm, "flat and bounded")
    return StabilityVerdict("inconclusive", slope, norm, "between thresholds")


@dataclass(frozen=True)
class RunSummary:
    load: float
    scheduler: str
    replication: int
    seed: int
    time_avg_total: float
    final_total: float
    max_total: float
    slope: float
    normalized_slope: float
    verdict: str
    bound_checks: bool
    bound_violations: int


@dataclass(frozen=True)
class SweepRow:
    load: float
    scheduler: str
    mean_total_queue: float
    normalized_slope: float
    verdict: str
    stable_reps: int
    unstable_reps: int
    replications: int


@dataclass
class SweepResult:
    rows: list[SweepRow]
    runs: list[RunSummary] = field(default_factory=list)

    def row(self, load: float, scheduler: str) -> SweepRow:
        for r in self.rows:
            if r.load == load and r.scheduler == scheduler:
                return r
        raise KeyError((load, scheduler))

    def runs_for(self, load: float, scheduler: str) -> list[RunSummary]:
        return [r for r in self.runs if r.load == load and r.scheduler == scheduler]


def _sweep_task(args) -> RunSummary:
    load, kind, rep, seed, config, graph, fading, direction, process, thresholds = args
    arrivals = iid_process(process, np.asarray(direction, dtype=float) * load)
    cfg = SimConfig(
        horizon=config.horizon,
        seed=seed,
        warmup_fraction=config.warmup_fraction,
        sample_interval=config.sample_interval,
        bound_monitor=config.bound_monitor,
        scheduler=kind,
        markov=config.markov,
    )
    m = run(cfg, graph, fading, arrivals).metrics
    v = estimate_stability(m, thresholds)
    log.info("load %g %s rep %d: %s (avg queue %.3f)", load, kind.label, rep, v.verdict, m.time_avg_total)
    return RunSummary(
        load, kind.label, rep, seed, m.time_avg_total, m.final_total, m.max_total,
        v.slope, v.normalized_slope, v.verdict, m.bound_checks, m.bound_violations,
    )


def _majority(verdicts: Sequence[str]) -> str:
    counts = Counter(verdicts)
    top, n = counts.most_common(1)[0]
    if n * 2 > len(verdicts):
        return top
    return "inconclusive"


def load_sweep(
    direction: Sequence[float],
    loads: Sequence[float],
    replications: int,
    config: SimConfig,
    graph: NetworkGraph,
    fading: FadingModel,
    schedulers: Sequence[SchedulerKind | str],
    process: str = "poisson",
    jobs: int = 1,
    thresholds: Thresholds | None = None,
) -> SweepResult:
    """Run every (load, scheduler, replication) at ``lam = load * direction``.

    Replication ``r`` uses ``replication_seed(config.seed, r)`` for every load and
    scheduler, so rows share channel sample paths.
    """
    if not loads:
        raise ValueError("load grid is empty")
    if replications < 1:
        raise ValueError("need at least one replication")
    kinds = [SchedulerKind.parse(s) for s in schedulers]
    tasks = [
        (float(load), kind, rep, replication_seed(config.seed, rep), config, graph, fading,
         tuple(direction), process, thresholds)
        for load in loads
        for kind in kinds
        for rep in range(replications)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_sweep_task, tasks))
    else:
        runs = [_sweep_task(t) for t in tasks]

    rows = []
    for load in loads:
        for kind in kinds:
            group = [r for r in runs if r.load == float(load) and r.scheduler == kind.label]
            verdicts = [r.verdict for r in group]
            rows.append(
                SweepRow(
                    load=float(load),
                    scheduler=kind.label,
                    mean_total_queue=float(np.mean([r.time_avg_total for r in group])),
                    normalized_slope=float(np.mean([r.normalized_slope for r in group])),
                    verdict=_majority(verdicts),
                    stable_reps=verdicts.count("stable"),
                    unstable_reps=verdicts.count("unstable"),
                    replications=len(group),
                )
            )
    return SweepResult(rows, runs)


def run_summary_dict(s: RunSummary) -> dict[str, Any]:
    return asdict(s)
