# dcda/core/bounds.py
"""Convergence bounds: the trace-driven certificate and the closed-form scheme bounds.

Every closed form takes the step schedule and sums alpha(t - 1) over
t = 1..T. Logs are natural.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from dcda.core.exceptions import ConfigurationError, DomainError
from dcda.core.linalg_prox import step_size, step_sizes
from dcda.models.domain import FeasibleSet, FeasibleSetKind, RunTrace, StepSchedule, ZoomSchedule
from dcda.utils.validators import require_divides, require_probability

logger = logging.getLogger(__name__)

CERTIFICATE_RTOL = 1e-7
CERTIFICATE_ATOL = 1e-12

Zoom = Union[ZoomSchedule, Callable[[np.ndarray], np.ndarray]]


@dataclass
class BoundInputs:
    """Constants shared by the bound evaluators.

    ``gbar_norm`` and ``dual_dev`` are the trace series a certificate uses;
    the closed forms ignore them.
    """
    L: float
    psi_star: float
    schedule: StepSchedule
    T: int
    n: int
    d: int
    R: Optional[float] = None
    m: Optional[int] = None
    sigma2: Optional[float] = None
    delta: Optional[float] = None
    gamma2: float = 0.0
    zoom: Optional[ZoomSchedule] = None
    gbar_norm: Optional[np.ndarray] = None
    dual_dev: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.L < 0 or self.psi_star < 0:
            raise DomainError(f"L and psi_star must be non-negative, got L={self.L}, psi_star={self.psi_star}")
        if self.T < 1 or self.n < 1 or self.d < 1:
            raise DomainError(f"T, n and d must be positive, got T={self.T}, n={self.n}, d={self.d}")
        if self.delta is not None:
            require_probability(self.delta, "delta")


def _alpha_prev(schedule: StepSchedule, T: int) -> np.ndarray:
    """alpha(t - 1) for t = 1..T"""
    return step_sizes(np.arange(T), schedule)


def _proximal_term(psi_star: float, schedule: StepSchedule, T: int) -> float:
    return psi_star / (T * step_size(T, schedule))


def _check_gap(sigma2: float, name: str = "sigma2") -> None:
    if not 0 <= sigma2 < 1:
        raise DomainError(f"{name} must lie in [0, 1), got {sigma2}")


def _zoom_values(zoom: Zoom, ts: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(zoom(ts), dtype=float), ts.shape)


# ---------------------------------------------------------------------------
# Trace certificate


def certificate_series(trace: RunTrace, psi_star: float, L: float) -> np.ndarray:
    """Four-term bound for every prefix T' = 1..T and node i, shape (T, n).

    psi*/(T' alpha(T')) + (1/T') sum alpha(t-1) ||g_bar(t)||^2
    + (2L/(n T')) sum_t sum_j alpha(t-1) ||z_bar(t) - z_j(t)||
    + (L/T') sum_t alpha(t-1) ||z_bar(t) - z_i(t)||
    """
    if trace.gbar_norm is None or trace.dual_dev is None or trace.alpha is None:
        raise ConfigurationError("trace is missing the g_bar / dual deviation / alpha series")
    T, n = trace.dual_dev.shape
    C = float(trace.alpha[0])
    schedule = StepSchedule(C=C)
    prefixes = np.arange(1, T + 1, dtype=float)
    a = _alpha_prev(schedule, T)

    proximal = psi_star / (prefixes * step_sizes(prefixes, schedule))
    gradient = np.cumsum(a * trace.gbar_norm ** 2) / prefixes
    network = 2.0 * L / n * np.cumsum(a * trace.dual_dev.sum(axis=1)) / prefixes
    own = L * np.cumsum(a[:, None] * trace.dual_dev, axis=0) / prefixes[:, None]
    return (proximal + gradient + network)[:, None] + own


def certificate_bound(trace: RunTrace, psi_star: float, L: float) -> np.ndarray:
    """Per-node bound at the full horizon"""
    return certificate_series(trace, psi_star, L)[-1]


@dataclass
class CertificateReport:
    bound: np.ndarray
    gap: np.ndarray
    violations: np.ndarray

    @property
    def violated(self) -> bool:
        return bool(self.violations.any())

    @property
    def worst_ratio(self) -> float:
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = self.gap / self.bound
        return float(np.nanmax(ratio)) if np.any(np.isfinite(ratio)) else float("nan")


def certify(trace: RunTrace, psi_star: float, L: float) -> CertificateReport:
    """Compare the per-node average gap (f(x_hat_i) - f*) / n against the bound at every prefix.

    Cells the metric cadence skipped are never flagged.
    """
    bound = certificate_series(trace, psi_star, L)
    gap = trace.f_gap / trace.n
    with np.errstate(invalid="ignore"):
        violations = gap > bound * (1.0 + CERTIFICATE_RTOL) + CERTIFICATE_ATOL
    violations &= np.isfinite(gap)
    report = CertificateReport(bound=bound, gap=gap, violations=violations)
    if report.violated:
        rows, nodes = np.nonzero(violations)
        logger.warning(
            f"Certificate violated at {len(rows)} (t, node) cells; first at t={rows[0] + 1}, node={nodes[0]}"
        )
    return report


def set_diameter(feasible: FeasibleSet, reference_norm: float = 0.0, max_primal_norm: float = 0.0) -> float:
    """R: the set diameter, or twice the largest norm seen for unconstrained sets"""
    if feasible.kind == FeasibleSetKind.BALL:
        return 2.0 * feasible.radius
    if feasible.kind == FeasibleSetKind.SIMPLEX:
        return 2.0
    return 2.0 * max(reference_norm, max_primal_norm)


def certificate_lipschitz(estimate: float, trace: RunTrace) -> float:
    """L for the certificate: never below an observed subgradient norm"""
    observed = float(np.max(trace.max_grad_norm)) if trace.max_grad_norm.size else 0.0
    if observed > estimate:
        logger.warning(f"Observed subgradient norm {observed:.4g} exceeds the Lipschitz estimate {estimate:.4g}")
    return max(estimate, observed)


# ---------------------------------------------------------------------------
# Closed-form scheme bounds


def bound_static(L: float, psi_star: float, alpha: StepSchedule, d: int, n: int, T: int,
                 sigma2_max: float) -> float:
    """Static sharing"""
    _check_gap(sigma2_max, "sigma2_max")
    a = _alpha_prev(alpha, T)
    consensus = 2.0 * min(d, n) * np.log(np.sqrt(n) * d * T) / (1.0 - sigma2_max)
    return float(_proximal_term(psi_star, alpha, T) + L ** 2 / T * np.sum(4.0 * a * (consensus + 3.0)))


def bound_round_robin(L: float, psi_star: float, alpha: StepSchedule, d: int, m: int, n: int, T: int,
                      sigma2: float) -> float:
    """Round-robin sharing of m coordinates per step"""
    _check_gap(sigma2)
    require_divides(m, d)
    a = _alpha_prev(alpha, T)
    consensus = 12.0 * d * np.log(2.0 * np.sqrt(n) * T) / (m * (1.0 - sigma2))
    return float(_proximal_term(psi_star, alpha, T) + L ** 2 / T * np.sum(a * (10.0 + consensus)))


def bound_randomized(L: float, psi_star: float, alpha: StepSchedule, d: int, n: int, T: int,
                     sigma2_expected_sq: float, delta: float) -> float:
    """Randomized sharing; holds with probability at least 1 - delta.

    ``sigma2_expected_sq`` is sigma_2(E[P^k(t)^2]).
    """
    require_probability(delta, "delta", allow_one=False)
    _check_gap(sigma2_expected_sq, "sigma2_expected_sq")
    a = _alpha_prev(alpha, T)
    consensus = 18.0 * min(d, n) * np.log(T * d * n ** (1.0 / 3.0) / delta) / (1.0 - sigma2_expected_sq)
    return float(_proximal_term(psi_star, alpha, T) + L ** 2 / T * np.sum(a * (10.0 + consensus)))


def bound_stochastic(base: float, L: float, R: float, T: int, delta: float) -> float:
    """base + L R sqrt(8 log(1/delta) / T)"""
    require_probability(delta, "delta", allow_one=True)
    return float(base + L * R * np.sqrt(8.0 * np.log(1.0 / delta) / T))


def bound_noisy(base: float, L: float, R: float, gamma2: float, n: int, d: int, T: int,
                alpha: StepSchedule, sigma2_max: float, delta: float) -> float:
    """Static sharing over links with additive noise of power gamma2"""
    _check_gap(sigma2_max, "sigma2_max")
    require_probability(delta, "delta", allow_one=False)
    if gamma2 < 0:
        raise DomainError(f"gamma2 must be non-negative, got {gamma2}")
    gamma = np.sqrt(gamma2)
    a = _alpha_prev(alpha, T)
    averaging = gamma * (R + 2.0 * L) * np.sqrt(2.0 * np.log(3.0 / delta) / (n * T))
    per_step = (
        gamma2 * (1.0 + np.sqrt(8.0) * np.log(3.0 / delta)) / (n * d * T)
        + 3.0 * L / T * np.sqrt(2.0 * gamma2 * np.log(6.0 * T * n * d / delta) / (1.0 - sigma2_max ** 2))
    )
    return float(base + averaging + np.sum(a * per_step))


def nu_sequence(zoom: Zoom, sigma2_per_k: Sequence[float], t: int) -> float:
    """max_k sum_{r=0}^{t} s(r)^2 sigma_2(P^k)^(2(t - r + 1))"""
    sig = np.asarray(sigma2_per_k, dtype=float)
    if sig.size == 0:
        return 0.0
    r = np.arange(t + 1)
    s2 = _zoom_values(zoom, r) ** 2
    powers = np.power(sig[:, None], 2 * (t - r + 1)[None, :])
    return float(np.max(powers @ s2))


def nu_series(zoom: Zoom, sigma2_per_k: Sequence[float], T: int) -> np.ndarray:
    """nu(t) for t = 1..T through nu_k(t) = sigma_k^2 (nu_k(t - 1) + s(t)^2)"""
    sig2 = np.asarray(sigma2_per_k, dtype=float) ** 2
    if sig2.size == 0:
        return np.zeros(T)
    s2 = _zoom_values(zoom, np.arange(T + 1)) ** 2
    acc = sig2 * s2[0]
    out = np.empty(T)
    for t in range(1, T + 1):
        acc = sig2 * (acc + s2[t])
        out[t - 1] = acc.max()
    return out


def bound_quantized(base: float, L: float, R: float, zoom: Zoom, n: int, d: int, T: int,
                    alpha: StepSchedule, nu: Sequence[float], delta: float) -> float:
    """Static sharing over dithered quantized links.

    The scale average in the first addend is the time average of s(t)^2
    over t = 1..T.
    """
    require_probability(delta, "delta", allow_one=False)
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (T,):
        raise DomainError(f"nu must hold one value per step (length {T}), got shape {nu.shape}")
    ts = np.arange(1, T + 1)
    s = _zoom_values(zoom, ts)
    s2_mean = float(np.mean(s ** 2))
    a = _alpha_prev(alpha, T)
    averaging = R * np.sqrt(s2_mean * np.log(1.0 / delta) / T)
    per_step = (2.0 * s * L + s ** 2) / (n * T) + 3.0 * L / T * np.sqrt(
        2.0 * np.maximum(nu, 0.0) * np.log(2.0 * T * n * d / delta)
    )
    return float(base + averaging + np.sum(a * per_step))
