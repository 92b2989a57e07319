# dcda/models/domain.py
"""Domain models for the DCDA simulator"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from dcda.core.exceptions import ConfigurationError


class NormKind(str, Enum):
    """Primal norm; the dual pairing follows from it"""
    L2 = "l2"
    L1 = "l1"


class ProxFunction(str, Enum):
    """Proximal function psi"""
    SQUARED = "squared"
    ENTROPIC = "entropic"


class FeasibleSetKind(str, Enum):
    UNCONSTRAINED = "unconstrained"
    BALL = "l2-ball"
    SIMPLEX = "simplex"


@dataclass(frozen=True)
class FeasibleSet:
    """Closed convex set the primal iterates live in"""
    kind: FeasibleSetKind
    radius: Optional[float] = None

    def __post_init__(self):
        if self.kind == FeasibleSetKind.BALL and not (self.radius is not None and self.radius > 0):
            raise ConfigurationError(f"l2-ball radius must be positive, got {self.radius}")

    @classmethod
    def unconstrained(cls) -> "FeasibleSet":
        return cls(FeasibleSetKind.UNCONSTRAINED)

    @classmethod
    def ball(cls, radius: float) -> "FeasibleSet":
        return cls(FeasibleSetKind.BALL, float(radius))

    @classmethod
    def simplex(cls) -> "FeasibleSet":
        return cls(FeasibleSetKind.SIMPLEX)

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == FeasibleSetKind.SIMPLEX:
            return bool(np.all(x >= -tol) and np.all(np.abs(x.sum(axis=-1) - 1.0) <= tol))
        if self.kind == FeasibleSetKind.BALL:
            return bool(np.all(np.linalg.norm(x, axis=-1) <= self.radius + tol))
        return bool(np.all(np.isfinite(x)))

    def to_dict(self) -> Dict:
        return {"kind": self.kind.value, "radius": self.radius}


@dataclass(frozen=True)
class StepSchedule:
    """alpha(t) = C / sqrt(t), alpha(0) = C"""
    C: float = 1.0
    rule: str = "inverse-sqrt"

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigurationError(f"step constant C must be positive, got {self.C}")
        if self.rule != "inverse-sqrt":
            raise ConfigurationError(f"Unknown step rule: {self.rule}")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph given by a symmetric 0/1 adjacency with zero diagonal"""
    adjacency: np.ndarray
    kind: str = "custom"

    @property
    def n(self) -> int:
        return int(self.adjacency.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "n": self.n, "edges": int(self.adjacency.sum() // 2)}


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Doubly stochastic weights P respecting graph sparsity"""
    P: np.ndarray

    @property
    def n(self) -> int:
        return int(self.P.shape[0])

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.P, np.eye(self.n)))


# ---------------------------------------------------------------------------
# Sharing policies


class PolicyKind(str, Enum):
    STATIC = "static"
    ROUND_ROBIN = "round_robin"
    RANDOMIZED = "randomized"


class RandomMode(str, Enum):
    SUBSET = "subset"
    ALL_TO_ALL = "all_to_all"


@dataclass(frozen=True, eq=False)
class StaticPolicy:
    """Fixed mixing per coordinate.

    ``matrices`` has either one entry (shared by every shared coordinate) or
    ``d`` entries. Only the first ``shared`` coordinates mix; the rest keep
    identity. ``shared=None`` means all of them.
    """
    matrices: Tuple[MixingMatrix, ...]
    d: int
    shared: Optional[int] = None
    kind: PolicyKind = PolicyKind.STATIC

    def __post_init__(self):
        if len(self.matrices) not in (1, self.d):
            raise ConfigurationError(
                f"static policy needs 1 or d={self.d} matrices, got {len(self.matrices)}"
            )
        if self.shared is not None and not 0 <= self.shared <= self.d:
            raise ConfigurationError(f"shared coordinates must lie in [0, {self.d}], got {self.shared}")

    @property
    def n_shared(self) -> int:
        return self.d if self.shared is None else self.shared


@dataclass(frozen=True, eq=False)
class RoundRobinPolicy:
    """Ascending blocks of m coordinates take turns; period d/m"""
    m: int
    base: MixingMatrix
    d: int
    kind: PolicyKind = PolicyKind.ROUND_ROBIN

    def __post_init__(self):
        if self.m < 1 or self.d % self.m != 0:
            raise ConfigurationError(f"m must divide d (m={self.m}, d={self.d})")

    @property
    def period(self) -> int:
        return self.d // self.m


@dataclass(frozen=True, eq=False)
class RandomizedPolicy:
    """Shared-seed random coordinate selection.

    subset: a uniform m-subset per step, identical at every node.
    all_to_all: each coordinate is averaged over the whole network with
    probability rho, independently per (t, k).
    """
    mode: RandomMode
    base: MixingMatrix
    d: int
    seed: int
    m: Optional[int] = None
    rho: Optional[float] = None
    kind: PolicyKind = PolicyKind.RANDOMIZED

    def __post_init__(self):
        if self.mode == RandomMode.SUBSET:
            if self.m is None or not 0 <= self.m <= self.d:
                raise ConfigurationError(f"subset size m must lie in [0, {self.d}], got {self.m}")
        elif self.rho is None or not 0 < self.rho <= 1:
            raise ConfigurationError(f"rho must lie in (0, 1], got {self.rho}")

    @property
    def inclusion_probability(self) -> float:
        if self.mode == RandomMode.SUBSET:
            return self.m / self.d
        return float(self.rho)


SharePolicy = Union[StaticPolicy, RoundRobinPolicy, RandomizedPolicy]


# ---------------------------------------------------------------------------
# Channels


class ChannelKind(str, Enum):
    PERFECT = "perfect"
    NOISY = "noisy"
    QUANTIZED = "quantized"


@dataclass(frozen=True)
class ZoomSchedule:
    """Public quantizer scale s(t) = s0 * beta**t"""
    s0: float = 1.0
    beta: float = 0.995

    def __post_init__(self):
        if not self.s0 > 0:
            raise ConfigurationError(f"zoom s0 must be positive, got {self.s0}")
        if not 0 < self.beta < 1:
            raise ConfigurationError(f"zoom beta must lie in (0, 1), got {self.beta}")

    def __call__(self, t):
        return self.s0 * np.power(self.beta, t)


@dataclass(frozen=True)
class PerfectChannel:
    kind: ChannelKind = ChannelKind.PERFECT


@dataclass(frozen=True)
class NoisyChannel:
    """Additive Gaussian noise of total power gamma2 (gamma2/d per component)"""
    gamma2: float
    seed: int = 0
    kind: ChannelKind = ChannelKind.NOISY

    def __post_init__(self):
        if self.gamma2 < 0:
            raise ConfigurationError(f"gamma2 must be non-negative, got {self.gamma2}")


@dataclass(frozen=True)
class QuantizedChannel:
    zoom: ZoomSchedule = field(default_factory=ZoomSchedule)
    seed: int = 0
    kind: ChannelKind = ChannelKind.QUANTIZED


ChannelModel = Union[PerfectChannel, NoisyChannel, QuantizedChannel]


# ---------------------------------------------------------------------------
# Problems


class LossKind(str, Enum):
    SVM_HINGE = "svm-hinge"
    LEAST_SQUARES = "least-squares"
    L1_REGRESSION = "l1-regression"


@dataclass(eq=False)
class Problem:
    """Node-local datasets plus the loss, prox and feasible set they are solved with.

    ``features`` is (n, m, d); ``targets`` is (n, m) and holds labels in
    {-1, +1} for the SVM family.
    """
    loss: LossKind
    features: np.ndarray
    targets: np.ndarray
    prox: ProxFunction
    feasible: FeasibleSet
    c_svm: float = 1.0
    x_true: Optional[np.ndarray] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.features.ndim != 3 or self.targets.shape != self.features.shape[:2]:
            raise ConfigurationError(
                f"features must be (n, m, d) and targets (n, m); got {self.features.shape} and {self.targets.shape}"
            )
        supported = {
            (ProxFunction.SQUARED, FeasibleSetKind.UNCONSTRAINED),
            (ProxFunction.SQUARED, FeasibleSetKind.BALL),
            (ProxFunction.ENTROPIC, FeasibleSetKind.SIMPLEX),
        }
        if (self.prox, self.feasible.kind) not in supported:
            raise ConfigurationError(
                f"Unsupported prox/set pair: {self.prox.value} with {self.feasible.kind.value}"
            )

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def m(self) -> int:
        return int(self.features.shape[1])

    @property
    def d(self) -> int:
        return int(self.features.shape[2])

    @property
    def norm(self) -> NormKind:
        return NormKind.L1 if self.prox == ProxFunction.ENTROPIC else NormKind.L2

    def to_dict(self) -> Dict:
        return {
            "loss": self.loss.value,
            "n": self.n,
            "m": self.m,
            "d": self.d,
            "prox": self.prox.value,
            "feasible": self.feasible.to_dict(),
            "c_svm": self.c_svm,
            "params": dict(self.params),
        }


@dataclass(frozen=True)
class GradientMode:
    """exact, or minibatch of size ``batch`` sampled without replacement"""
    kind: str = "exact"
    batch: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("exact", "minibatch"):
            raise ConfigurationError(f"Unknown gradient mode: {self.kind}")
        if self.kind == "minibatch" and (self.batch is None or self.batch < 1):
            raise ConfigurationError(f"minibatch size must be >= 1, got {self.batch}")

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    certified: bool


@dataclass
class Reference:
    """Centralized optimum used to measure gaps"""
    x_star: np.ndarray
    f_star: float
    provenance: str
    stable: bool = True
    step_constant: Optional[float] = None


# ---------------------------------------------------------------------------
# Engine


@dataclass
class NodeState:
    """One node's view of the network state at the start of a step"""
    z: np.ndarray
    x: np.ndarray
    x_hat_sum: np.ndarray
    prev_g: np.ndarray
    prev_z: np.ndarray


@dataclass
class NetworkState:
    """All node states stacked row-wise, entering step ``t``.

    Z holds z(t), X holds x(t), prev_Z holds z(t-1) (the quantizer
    baseline), prev_G holds g(t-1), X_sum holds x(1) + ... + x(t-1).
    """
    t: int
    Z: np.ndarray
    X: np.ndarray
    X_sum: np.ndarray
    prev_G: np.ndarray
    prev_Z: np.ndarray
    transmissions: int = 0

    @property
    def n(self) -> int:
        return int(self.Z.shape[0])


@dataclass(eq=False)
class RunConfig:
    problem: Problem
    graph: Graph
    policy: SharePolicy
    channel: ChannelModel
    gradient: GradientMode
    T: int
    schedule: StepSchedule
    seed: int = 0
    cadence: int = 1
    test_set: Optional[Tuple[np.ndarray, np.ndarray]] = None
    record_messages: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise ConfigurationError(f"horizon T must be >= 1, got {self.T}")
        if self.cadence < 1:
            raise ConfigurationError(f"metric cadence must be >= 1, got {self.cadence}")
        if self.graph.n != self.problem.n:
            raise ConfigurationError(f"graph has {self.graph.n} nodes but problem has {self.problem.n}")
        if self.policy.d != self.problem.d:
            raise ConfigurationError(f"policy dimension {self.policy.d} != problem dimension {self.problem.d}")
        if self.gradient.kind == "minibatch" and self.gradient.batch > self.problem.m:
            raise ConfigurationError(f"minibatch size {self.gradient.batch} exceeds m={self.problem.m}")


@dataclass(eq=False)
class RunTrace:
    """Per-iteration metrics of one run.

    Arrays are indexed by step; per-node arrays are (T, n). ``f_gap`` and
    ``accuracy`` hold NaN on steps skipped by the metric cadence.
    """
    t: np.ndarray
    f_gap: np.ndarray
    dual_dev: np.ndarray
    dual_consensus: np.ndarray
    primal_spread: np.ndarray
    gbar_norm: np.ndarray
    alpha: np.ndarray
    transmissions: np.ndarray
    max_grad_norm: np.ndarray
    accuracy: Optional[np.ndarray] = None
    dual_mean: Optional[np.ndarray] = None
    gbar: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)
    messages: List[Tuple[int, int, int, int, float, float]] = field(default_factory=list)
    message_links: List[Tuple[int, ...]] = field(default_factory=list)

    @property
    def T(self) -> int:
        return int(self.t.shape[0])

    @property
    def n(self) -> int:
        return int(self.f_gap.shape[1])

    def to_dict(self) -> Dict:
        final = self.f_gap[-1]
        return {
            "T": self.T,
            "n": self.n,
            "final_gap_max": float(np.nanmax(final)) if np.any(np.isfinite(final)) else None,
            "final_gap_mean": float(np.nanmean(final)) if np.any(np.isfinite(final)) else None,
            "final_dual_consensus": float(self.dual_consensus[-1]),
            "metadata": dict(self.metadata),
        }
