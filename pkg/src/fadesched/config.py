"""JSON experiment configuration, validation and named presets."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .arrivals import (
    ArrivalProcess,
    BernoulliBatchArrivals,
    DeterministicArrivals,
    PoissonArrivals,
    StateTableArrivals,
    adversarial_table,
    iid_process,
)
from .fading import (
    FOUR_LINK_PMFS,
    FOUR_LINK_RATE_VALUES,
    FactoredFadingModel,
    FadingModel,
)
from .network import NetworkGraph
from .schedulers import SCHEDULER_NAMES, SchedulerKind
from .sim import SimConfig, Thresholds

SCHEMA_VERSION = 1

NodeId = Union[int, str]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LinkSpec(_Model):
    id: NodeId
    endpoints: tuple[NodeId, NodeId]


class GraphSpec(_Model):
    nodes: list[NodeId] | None = None  # inferred from link endpoints when omitted
    links: list[LinkSpec] = Field(min_length=1)
    interference: dict[str, list[NodeId]] | None = None
    khop: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _one_rule(self) -> GraphSpec:
        if (self.interference is None) == (self.khop is None):
            raise ValueError("give exactly one of 'interference' or 'khop'")
        return self

    def build(self) -> NetworkGraph:
        data = self.model_dump(exclude_none=True)
        if self.nodes is None:
            seen: dict[NodeId, None] = {}
            for link in self.links:
                seen.update(dict.fromkeys(link.endpoints))
            data["nodes"] = list(seen)
        return NetworkGraph.from_dict(data)


class JointFadingSpec(_Model):
    pi: list[float] = Field(min_length=1)
    rates: list[list[float]] = Field(min_length=1)
    transition: list[list[float]] | None = None


class FactoredLinkSpec(_Model):
    pmf: list[float] = Field(min_length=1)
    rates: list[float] = Field(min_length=1)


class FactoredFadingSpec(_Model):
    links: list[FactoredLinkSpec] = Field(min_length=1)


class FadingSpec(_Model):
    joint: JointFadingSpec | None = None
    factored: FactoredFadingSpec | None = None

    @model_validator(mode="after")
    def _one_form(self) -> FadingSpec:
        if (self.joint is None) == (self.factored is None):
            raise ValueError("give exactly one of 'joint' or 'factored'")
        return self

    @property
    def num_links(self) -> int:
        return len(self.joint.rates) if self.joint else len(self.factored.links)

    @property
    def num_states(self) -> int:
        if self.joint:
            return len(self.joint.pi)
        n = 1
        for link in self.factored.links:
            n *= len(link.pmf)
        return n

    def build(self) -> FadingModel:
        if self.joint:
            j = self.joint
            return FadingModel(j.pi, j.rates, j.transition)
        links = self.factored.links
        return FactoredFadingModel(tuple(l.pmf for l in links), tuple(l.rates for l in links)).expand()


class DeterministicSpec(_Model):
    kind: Literal["deterministic"]
    amounts: list[float]

    def vectors(self):
        return {"amounts": self.amounts}

    def build(self, fading: FadingModel) -> ArrivalProcess:
        return DeterministicArrivals(self.amounts)


class PoissonSpec(_Model):
    kind: Literal["poisson"]
    rates: list[float]

    def vectors(self):
        return {"rates": self.rates}

    def build(self, fading: FadingModel) -> ArrivalProcess:
        return PoissonArrivals(self.rates)


class BernoulliSpec(_Model):
    kind: Literal["bernoulli-batch"]
    prob: list[float]
    batch: list[float]

    def vectors(self):
        return {"prob": self.prob, "batch": self.batch}

    def build(self, fading: FadingModel) -> ArrivalProcess:
        return BernoulliBatchArrivals(self.prob, self.batch)


class OutcomeSpec(_Model):
    prob: float = Field(ge=0, le=1)
    arrivals: list[float]


class TableSpec(_Model):
    kind: Literal["table"]
    table: list[list[OutcomeSpec]] = Field(min_length=1)

    def vectors(self):
        return {
            f"table.{j}.{k}.arrivals": o.arrivals
            for j, row in enumerate(self.table)
            for k, o in enumerate(row)
        }

    def build(self, fading: FadingModel) -> ArrivalProcess:
        return StateTableArrivals(
            tuple(tuple((o.prob, tuple(o.arrivals)) for o in row) for row in self.table)
        )


class AdversarialSpec(_Model):
    """Named two-link state-correlated preset; amounts use the fading model's mean rates."""

    kind: Literal["adversarial-2link"]
    epsilon: float = Field(default=0.1, ge=0)
    delta: float = Field(default=0.1, ge=0, le=1)
    C: float = Field(default=1.0, gt=0)

    def vectors(self):
        return {}

    def build(self, fading: FadingModel) -> ArrivalProcess:
        return adversarial_table(self.epsilon, self.delta, self.C, fading.mean_rates())


ArrivalSpec = Annotated[
    Union[DeterministicSpec, PoissonSpec, BernoulliSpec, TableSpec, AdversarialSpec],
    Field(discriminator="kind"),
]


class SchedulerSpec(_Model):
    kind: Literal["gfs", "gms", "maxweight", "nonopp"]
    beta: float = Field(default=1.0, gt=0)


class SimSpec(_Model):
    horizon: int = Field(default=100_000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    warmup_fraction: float = Field(default=0.1, ge=0, lt=1)
    sample_interval: int = Field(default=10, ge=1)
    bound_monitor: bool = True
    markov: bool = False

    def build(self, scheduler: SchedulerKind | None = None) -> SimConfig:
        return SimConfig(
            horizon=self.horizon,
            seed=self.seed,
            warmup_fraction=self.warmup_fraction,
            sample_interval=self.sample_interval,
            bound_monitor=self.bound_monitor,
            scheduler=scheduler or SchedulerKind("gfs"),
            markov=self.markov,
        )


class SweepSpec(_Model):
    direction: list[float] = Field(min_length=1)
    loads: list[float] = Field(min_length=1)
    replications: int = Field(default=3, ge=1)
    process: Literal["poisson", "deterministic", "bernoulli-batch"] = "poisson"

    @model_validator(mode="after")
    def _non_negative(self) -> SweepSpec:
        if any(x < 0 for x in self.direction) or any(x < 0 for x in self.loads):
            raise ValueError("direction and loads must be non-negative")
        return self


class ThresholdSpec(_Model):
    unstable_slope: float = 0.05
    stable_slope: float = 0.005
    trend_to_noise: float = 10.0
    max_growth: float = 5.0
    min_samples: int = 1000

    def build(self) -> Thresholds:
        return Thresholds(**self.model_dump())


class ExperimentConfig(_Model):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str | None = None
    graph: GraphSpec
    fading: FadingSpec | None = None
    arrivals: ArrivalSpec | None = None
    schedulers: list[Union[Literal["gfs", "gms", "maxweight", "nonopp"], SchedulerSpec]] = ["gfs"]
    sim: SimSpec = SimSpec()
    sweep: SweepSpec | None = None
    thresholds: ThresholdSpec = ThresholdSpec()
    lam: list[float] | None = Field(default=None, alias="lambda")
    reference_rates: list[float] | None = None

    @model_validator(mode="after")
    def _cross_references(self) -> ExperimentConfig:
        L = len(self.graph.links)

        def need(path: str, n: int, expected: int = L) -> None:
            if n != expected:
                raise ValueError(f"{path}: expected {expected} entries, got {n}")

        if self.fading is not None:
            f = self.fading
            if f.joint:
                need("fading.joint.rates", len(f.joint.rates))
                for l, row in enumerate(f.joint.rates):
                    need(f"fading.joint.rates.{l}", len(row), len(f.joint.pi))
            else:
                need("fading.factored.links", len(f.factored.links))
        if self.arrivals is not None:
            for key, vec in self.arrivals.vectors().items():
                need(f"arrivals.{key}", len(vec))
            if isinstance(self.arrivals, TableSpec) and self.fading is not None:
                need("arrivals.table", len(self.arrivals.table), self.fading.num_states)
            if isinstance(self.arrivals, AdversarialSpec):
                need("graph.links", L, 2)
                if self.fading is not None:
                    need("fading.joint.pi", self.fading.num_states, 2)
        if self.sweep is not None:
            need("sweep.direction", len(self.sweep.direction))
        if self.lam is not None:
            need("lambda", len(self.lam))
            if any(x < 0 for x in self.lam):
                raise ValueError("lambda: entries must be non-negative")
        if self.reference_rates is not None:
            need("reference_rates", len(self.reference_rates))
        return self

    def scheduler_kinds(self) -> list[SchedulerKind]:
        out = []
        for s in self.schedulers:
            if isinstance(s, str):
                out.append(SchedulerKind(s))
            else:
                out.append(SchedulerKind(s.kind, s.beta))
        return out

    def echo(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)


def load_config(path: str | Path) -> ExperimentConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "graph" not in data and "links" in data:
        data = {"graph": data}
    return ExperimentConfig.model_validate(data)


def arrivals_for_load(cfg: ExperimentConfig, load: float) -> ArrivalProcess:
    if cfg.sweep is None:
        raise ValueError("scaling arrivals by load needs a 'sweep' section with a direction")
    return iid_process(cfg.sweep.process, [load * d for d in cfg.sweep.direction])


# -- presets --------------------------------------------------------------------------


def _path_graph_spec(num_links: int) -> dict:
    return {
        "nodes": list(range(num_links + 1)),
        "links": [{"id": i + 1, "endpoints": [i, i + 1]} for i in range(num_links)],
        "khop": 1,
    }


def _cycle_graph_spec(num_links: int) -> dict:
    return {
        "nodes": list(range(num_links)),
        "links": [{"id": i + 1, "endpoints": [i, (i + 1) % num_links]} for i in range(num_links)],
        "khop": 1,
    }


PRESETS: dict[str, dict] = {
    "fig2b": {
        "name": "fig2b",
        "graph": _path_graph_spec(4),
        "fading": {
            "factored": {
                "links": [{"pmf": list(p), "rates": list(FOUR_LINK_RATE_VALUES)} for p in FOUR_LINK_PMFS]
            }
        },
        "arrivals": {"kind": "poisson", "rates": [1.0, 1.0, 1.0, 1.0]},
        "schedulers": ["gfs", "gms"],
        "sim": {"horizon": 200_000, "seed": 2011, "warmup_fraction": 0.1, "sample_interval": 20},
        "sweep": {
            "direction": [1.0, 1.0, 1.0, 1.0],
            "loads": [0.5, 0.9, 1.0, 2.1],
            "replications": 3,
            "process": "poisson",
        },
        "lambda": [1.0, 1.0, 1.0, 1.0],
    },
    "adversarial-2link": {
        "name": "adversarial-2link",
        "graph": _path_graph_spec(2),
        # The link that receives the eps-sized batch in a state is the one in its poor state.
        "fading": {"joint": {"pi": [0.5, 0.5], "rates": [[0.1, 1.0], [1.0, 0.1]]}},
        "arrivals": {"kind": "adversarial-2link", "epsilon": 0.1, "delta": 0.1, "C": 1.0},
        "schedulers": ["nonopp", "maxweight"],
        "sim": {"horizon": 100_000, "seed": 7, "warmup_fraction": 0.1, "sample_interval": 10},
    },
    "six-cycle": {
        "name": "six-cycle",
        "graph": _cycle_graph_spec(6),
        "fading": {"joint": {"pi": [1.0], "rates": [[1.0]] * 6}},
        "arrivals": {"kind": "poisson", "rates": [0.3] * 6},
        "schedulers": ["gfs", "gms", "maxweight"],
        "sim": {"horizon": 100_000, "seed": 6, "warmup_fraction": 0.1, "sample_interval": 10},
        "sweep": {"direction": [1.0] * 6, "loads": [0.2, 0.3, 0.45], "replications": 3},
        "lambda": [0.3] * 6,
    },
    "two-state-2link": {
        "name": "two-state-2link",
        "graph": _path_graph_spec(2),
        "fading": {"joint": {"pi": [0.5, 0.5], "rates": [[1.0, 0.1], [0.1, 1.0]]}},
        "arrivals": {"kind": "deterministic", "amounts": [0.2, 0.2]},
        "schedulers": ["gfs", "gms", "maxweight", "nonopp"],
        "sim": {"horizon": 100_000, "seed": 1, "warmup_fraction": 0.1, "sample_interval": 10},
        "lambda": [0.2, 0.2],
    },
}


def preset(name: str) -> ExperimentConfig:
    try:
        data = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ExperimentConfig.model_validate(json.loads(json.dumps(data)))


__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "SCHEDULER_NAMES",
    "arrivals_for_load",
    "load_config",
    "preset",
]
