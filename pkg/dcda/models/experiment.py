# dcda/models/experiment.py
"""Experiment configuration schema"""

import itertools
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dcda.config import settings
from dcda.core.objectives import FAMILY_DEFAULTS

CROSS_FIELD_SEPARATOR = " | "


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProblemSpec(_Section):
    """Problem family and generator parameters"""
    family: Literal["svm", "linreg", "robust"]
    n: int = Field(10, ge=1)
    m: Optional[int] = Field(None, ge=1)
    d: Optional[int] = Field(None, ge=1)
    noise_sigma: float = Field(0.1, ge=0)
    c_svm: float = Field(1.0, gt=0)
    mu_scale: float = Field(1.0, gt=0)
    sigma: float = Field(1.0, gt=0)
    outlier_prob: float = Field(0.1, ge=0, le=1)
    outlier_sigma: float = Field(10.0, ge=0)
    inlier_sigma: float = Field(0.3, ge=0)
    feasible_set: Optional[Literal["unconstrained", "ball", "simplex"]] = None
    radius: float = Field(10.0, gt=0)
    test_per_class: int = Field(500, ge=0)
    dataset: Optional[str] = None

    @model_validator(mode="after")
    def fill_family_defaults(self):
        defaults = FAMILY_DEFAULTS[self.family]
        if self.m is None:
            self.m = defaults["m"]
        if self.d is None:
            self.d = defaults["d"]
        if self.feasible_set is None:
            self.feasible_set = "simplex" if self.family == "robust" else "unconstrained"
        return self


class GraphSpec(_Section):
    kind: Literal["full", "ring", "random"]
    l: int = Field(1, ge=1)
    p: float = Field(0.5, gt=0, le=1)
    weights: Literal["max_degree", "metropolis"] = "max_degree"


class PolicySpec(_Section):
    kind: Literal["static", "round_robin", "randomized"]
    m: Optional[int] = Field(None, ge=0)
    mode: Literal["subset", "all_to_all"] = "subset"
    rho: float = Field(1.0, gt=0, le=1)


class ChannelSpec(_Section):
    kind: Literal["perfect", "noisy", "quantized"]
    gamma2: float = Field(0.1, ge=0)
    s0: float = Field(1.0, gt=0)
    beta: float = Field(0.995, gt=0, lt=1)
    log: Optional[str] = None


class GradientSpec(_Section):
    mode: Literal["exact", "minibatch"] = "exact"
    batch: int = Field(4, ge=1)


class StepSpec(_Section):
    C: float = Field(1.0, gt=0)


class OutputSpec(_Section):
    trace: Optional[str] = None
    metadata: Optional[str] = None
    cadence: int = Field(1, ge=1)

    @property
    def metadata_path(self) -> Optional[str]:
        if self.metadata:
            return self.metadata
        return f"{self.trace}.meta" if self.trace else None


class ExperimentConfig(_Section):
    """One simulation run"""
    problem: ProblemSpec
    graph: GraphSpec
    policy: PolicySpec
    channel: ChannelSpec
    gradient: GradientSpec = Field(default_factory=GradientSpec)
    step: StepSpec = Field(default_factory=StepSpec)
    T: int = Field(default_factory=lambda: settings.DEFAULT_HORIZON, ge=1)
    seed: int = Field(0, ge=0)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="after")
    def check_cross_field(self):
        d, m_samples = self.problem.d, self.problem.m
        errors = []
        if self.policy.kind == "round_robin":
            if self.policy.m is None:
                errors.append("policy.m: round_robin needs policy.m")
            elif self.policy.m < 1 or d % self.policy.m != 0:
                errors.append(f"policy.m: m must divide d (m={self.policy.m}, d={d})")
        elif self.policy.m is not None and self.policy.m > d:
            errors.append(f"policy.m: m={self.policy.m} exceeds d={d}")
        if self.policy.kind == "randomized" and self.policy.mode == "subset" and self.policy.m is None:
            errors.append("policy.m: randomized subset sharing needs policy.m")
        if self.gradient.mode == "minibatch" and self.gradient.batch > m_samples:
            errors.append(f"gradient.batch: batch {self.gradient.batch} exceeds m={m_samples}")
        if self.graph.kind != "full" and self.problem.n < 2:
            errors.append(f"graph.kind: {self.graph.kind} graph needs problem.n >= 2")
        if errors:
            raise ValueError(CROSS_FIELD_SEPARATOR.join(errors))
        return self

    def to_flat(self) -> Dict[str, Any]:
        """Dotted keys with their values, None entries dropped"""
        flat: Dict[str, Any] = {}
        for name, value in self.model_dump().items():
            if isinstance(value, dict):
                for key, inner in value.items():
                    if inner is not None:
                        flat[f"{name}.{key}"] = inner
            elif value is not None:
                flat[name] = value
        return flat


def known_keys() -> List[str]:
    """Every dotted key the schema accepts"""
    keys = []
    for name, info in ExperimentConfig.model_fields.items():
        annotation = info.annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel):
            keys.extend(f"{name}.{inner}" for inner in annotation.model_fields)
        else:
            keys.append(name)
    return keys


class SweepSpec(BaseModel):
    """A base config crossed with up to two swept keys and a seed list"""
    model_config = ConfigDict(extra="forbid")

    base: Dict[str, Any]
    sweep: Dict[str, List[str]] = Field(default_factory=dict)
    seeds: List[int] = Field(default_factory=lambda: [0])

    @field_validator("sweep")
    @classmethod
    def check_swept_keys(cls, v):
        if len(v) > 2:
            raise ValueError(f"at most two swept parameters, got {len(v)}")
        unknown = sorted(set(v) - set(known_keys()))
        if unknown:
            raise ValueError(f"swept parameters not in the config schema: {', '.join(unknown)}")
        for key, values in v.items():
            if not values:
                raise ValueError(f"{key}: empty value list")
        return v

    @field_validator("seeds")
    @classmethod
    def check_seeds(cls, v):
        if not v:
            raise ValueError("seed list is empty")
        if any(s < 0 for s in v):
            raise ValueError("seeds must be non-negative")
        return v

    def expand(self) -> List[Tuple[str, Dict[str, Any]]]:
        """(label, flat config) for every point of the grid and every seed"""
        keys = list(self.sweep)
        grid = itertools.product(*(self.sweep[k] for k in keys)) if keys else [()]
        runs = []
        for values in grid:
            for seed in self.seeds:
                flat = dict(self.base)
                flat.update(zip(keys, values))
                flat["seed"] = seed
                parts = [f"{k.split('.')[-1]}={v}" for k, v in zip(keys, values)]
                parts.append(f"seed={seed}")
                runs.append(("_".join(parts), flat))
        return runs
