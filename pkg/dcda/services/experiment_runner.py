# dcda/services/experiment_runner.py
"""Runs, sweeps, reproduction presets and bound evaluation"""

import asyncio
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from dcda.config import settings
from dcda.core.bounds import (
    bound_noisy,
    bound_quantized,
    bound_randomized,
    bound_round_robin,
    bound_static,
    bound_stochastic,
    certificate_lipschitz,
    certify,
    nu_series,
    set_diameter,
)
from dcda.core.engine import centralized_reference, dcda_run
from dcda.core.exceptions import (
    CertificateViolation,
    ConfigurationError,
    DCDAException,
    DomainError,
    NumericalDivergenceError,
)
from dcda.core.linalg_prox import psi_minimum, psi_value
from dcda.core.objectives import classification_accuracy, suggest_step_constant
from dcda.core.schedule import expected_squared_mixing, per_coordinate_matrices
from dcda.core.topology import second_singular_value
from dcda.models.domain import MixingMatrix, Problem, Reference, RunTrace, StepSchedule
from dcda.models.experiment import ExperimentConfig, SweepSpec
from dcda.services.config_parser import config_from_flat
from dcda.services.data_processor import DataProcessor, PreparedRun
from dcda.services.file_handler import FileHandlerService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_CERTIFICATE = 3
EXIT_OTHER = 4

DEFAULT_DELTA = 0.05
ACCURACY_THRESHOLD = 0.9
GAP_THRESHOLD = 0.05
PRESETS = ("svm", "linreg", "robust")
LINREG_NOISE_SIGMA = 3.0
LINREG_STEP_FRACTION = 0.9


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigurationError, DomainError)):
        return EXIT_CONFIG
    if isinstance(exc, NumericalDivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, CertificateViolation):
        return EXIT_CERTIFICATE
    return EXIT_OTHER


@dataclass(eq=False)
class RunResult:
    prepared: PreparedRun
    reference: Reference
    trace: RunTrace
    lipschitz: float
    lipschitz_certified: bool
    files: List[Path] = field(default_factory=list)

    @property
    def facts(self) -> Dict[str, Any]:
        facts = dict(self.trace.metadata)
        facts["lipschitz"] = self.lipschitz
        facts["lipschitz_certified"] = self.lipschitz_certified
        return facts

    def summary(self) -> Dict[str, Any]:
        out = self.trace.to_dict()
        out["files"] = [str(p) for p in self.files]
        return out


def time_to_threshold(series: np.ndarray, threshold: float, above: bool = False) -> Optional[int]:
    """First 1-based step whose value crosses ``threshold``"""
    with np.errstate(invalid="ignore"):
        hits = series >= threshold if above else series <= threshold
    idx = np.flatnonzero(hits)
    return int(idx[0] + 1) if idx.size else None


class ExperimentRunner:
    """Service for running DCDA experiments"""

    def __init__(self, processor: Optional[DataProcessor] = None, output_dir: Optional[str] = None):
        self.processor = processor or DataProcessor()
        self.files = FileHandlerService()
        self.output_dir = Path(output_dir or settings.OUTPUT_DIR)

    # -----------------------------------------------------------------------
    # Single runs

    def execute(self, config: ExperimentConfig) -> RunResult:
        """Simulate without writing anything"""
        prepared = self.processor.prepare(config)
        problem = prepared.run.problem
        reference = centralized_reference(problem, config.T)
        trace = dcda_run(prepared.run, reference)
        estimate = self.processor.lipschitz(problem, config.seed)
        return RunResult(
            prepared=prepared,
            reference=reference,
            trace=trace,
            lipschitz=estimate.value,
            lipschitz_certified=estimate.certified,
        )

    def default_trace_path(self, config: ExperimentConfig) -> Path:
        name = f"{config.problem.family}_{config.policy.kind}_{config.channel.kind}_seed{config.seed}.csv"
        return self.output_dir / name

    def run(self, config: ExperimentConfig, trace_path: Optional[str] = None) -> RunResult:
        """Simulate and write the trace, its metadata sidecar and the optional message log"""
        result = self.execute(config)
        trace_path = Path(trace_path or config.output.trace or self.default_trace_path(config))
        meta_path = Path(config.output.metadata) if config.output.metadata else Path(f"{trace_path}.meta")
        result.files.append(self.files.write_trace(result.trace, str(trace_path)))
        result.files.append(self.files.write_metadata(config, result.facts, str(meta_path)))
        if config.channel.log and result.trace.messages:
            result.files.append(
                self.files.write_message_log(result.trace.messages, result.trace.message_links, config.channel.log)
            )
        return result

    def run_experiment(self, config: ExperimentConfig) -> Tuple[int, List[Path]]:
        """Exit status and written files"""
        try:
            result = self.run(config)
            return EXIT_OK, result.files
        except NumericalDivergenceError as e:
            logger.error(f"Run diverged: {e} {e.diagnostics}")
            return EXIT_DIVERGENCE, []
        except DCDAException as e:
            logger.error(f"Run failed: {e}")
            return exit_code_for(e), []

    # -----------------------------------------------------------------------
    # Sweeps

    async def run_sweep(self, spec: SweepSpec, concurrent_limit: Optional[int] = None) -> pd.DataFrame:
        """Run every grid point concurrently, bounded by a semaphore; one summary row per run"""
        runs = spec.expand()
        semaphore = asyncio.Semaphore(concurrent_limit or settings.MAX_CONCURRENT_RUNS)
        loop = asyncio.get_running_loop()

        async def run_with_limit(label: str, flat: Dict[str, Any]):
            async with semaphore:
                config = config_from_flat(flat)
                path = str(self.output_dir / f"sweep_{label}.csv")
                try:
                    result = await loop.run_in_executor(None, self.run, config, path)
                    row = result.summary()
                    row.pop("metadata")
                    row.pop("files")
                    return {"label": label, "status": EXIT_OK, "trace": path, **row}
                except DCDAException as e:
                    logger.error(f"Sweep run {label} failed: {str(e)}")
                    return {"label": label, "status": exit_code_for(e), "trace": None}

        rows = await asyncio.gather(*(run_with_limit(label, flat) for label, flat in runs))
        frame = pd.DataFrame(rows)
        self.files.write_table(frame, str(self.output_dir / "sweep_summary.csv"))
        failed = int((frame["status"] != EXIT_OK).sum())
        logger.info(f"Sweep finished: {len(rows) - failed} of {len(rows)} runs succeeded")
        return frame

    # -----------------------------------------------------------------------
    # Presets

    def preset_arms(self, preset: str, seed: int, T: int) -> List[Tuple[str, ExperimentConfig]]:
        """(arm label, config) pairs of one preset for one seed"""
        if preset not in PRESETS:
            raise ConfigurationError(f"Unknown preset: {preset} (expected one of {', '.join(PRESETS)})")
        arms: List[Tuple[str, Dict[str, Any]]] = []
        if preset == "svm":
            base = {"problem.family": "svm", "problem.mu_scale": 2.0, "graph.kind": "full",
                    "channel.kind": "perfect", "step.C": 0.1}
            for label, m in (("f0", 0), ("f025", 8), ("f050", 15), ("f100", 30)):
                arms.append((label, {**base, "policy.kind": "randomized", "policy.m": m}))
        elif preset == "linreg":
            problem = self.processor.build_problem(config_from_flat(
                {"problem.family": "linreg", "graph.kind": "full", "policy.kind": "static",
                 "channel.kind": "perfect", "seed": seed}).problem, seed)
            base = {"problem.family": "linreg", "graph.kind": "full", "step.C": suggest_step_constant(problem)}
            arms.append(("exact", {**base, "policy.kind": "static", "channel.kind": "perfect"}))
            arms.append(("minibatch4", {**base, "policy.kind": "static", "channel.kind": "perfect",
                                        "gradient.mode": "minibatch", "gradient.batch": 4}))
            arms.append(("noisy", {**base, "policy.kind": "static", "channel.kind": "noisy",
                                   "channel.gamma2": 0.1}))
            # separated local optima and a step near the stability edge: consensus limits convergence
            sharing = {"problem.family": "linreg", "problem.noise_sigma": LINREG_NOISE_SIGMA, "graph.kind": "full",
                       "channel.kind": "perfect",
                       "step.C": suggest_step_constant(problem, fraction=LINREG_STEP_FRACTION)}
            arms.append(("full_coordinates", {**sharing, "policy.kind": "static"}))
            arms.append(("half_coordinates", {**sharing, "policy.kind": "round_robin", "policy.m": 15}))
        else:
            base = {"problem.family": "robust", "channel.kind": "perfect", "step.C": 0.1}
            for graph_label, graph in (("full", {"graph.kind": "full"}), ("ring", {"graph.kind": "ring", "graph.l": 1})):
                arms.append((f"round_robin_{graph_label}", {**base, **graph, "policy.kind": "round_robin", "policy.m": 5}))
                arms.append((f"randomized_{graph_label}", {**base, **graph, "policy.kind": "randomized", "policy.m": 5}))
        return [(label, config_from_flat({**flat, "T": T, "seed": seed})) for label, flat in arms]

    def reproduce(self, preset: str, seeds: Sequence[int], T: Optional[int] = None) -> pd.DataFrame:
        """Run a preset for every seed; one trace per (arm, seed) plus a summary CSV"""
        T = T or settings.DEFAULT_HORIZON
        out_dir = self.output_dir / preset
        rows = []
        for seed in seeds:
            full_time = None
            for label, config in self.preset_arms(preset, seed, T):
                result = self.run(config, str(out_dir / f"{preset}_{label}_seed{seed}.csv"))
                row = self._summary_row(preset, label, seed, result)
                if preset == "linreg":
                    if label == "full_coordinates":
                        full_time = row["time_to_threshold"]
                    elif label == "half_coordinates" and full_time and row["time_to_threshold"]:
                        row["ratio_to_full"] = row["time_to_threshold"] / full_time
                rows.append(row)
                if preset == "svm" and label == "f100":
                    rows.append(self._centralized_row(seed, result))
        frame = pd.DataFrame(rows)
        self.files.write_table(frame, str(out_dir / f"{preset}_summary.csv"))
        logger.info(f"Preset {preset}: {len(rows)} summary rows over {len(seeds)} seed(s)")
        return frame

    @staticmethod
    def _summary_row(preset: str, label: str, seed: int, result: RunResult) -> Dict[str, Any]:
        trace = result.trace
        gap_max = np.nanmax(trace.f_gap, axis=1) if np.any(np.isfinite(trace.f_gap)) else trace.f_gap[:, 0]
        row: Dict[str, Any] = {
            "preset": preset,
            "arm": label,
            "seed": seed,
            "T": trace.T,
            "final_gap_max": float(gap_max[-1]),
            "final_gap_mean": float(np.nanmean(trace.f_gap[-1])),
        }
        if trace.accuracy is not None:
            worst = np.nanmin(trace.accuracy, axis=1) if np.any(np.isfinite(trace.accuracy)) else trace.accuracy[:, 0]
            hit = time_to_threshold(worst, ACCURACY_THRESHOLD, above=True)
            row["final_accuracy_min"] = float(worst[-1])
        else:
            hit = time_to_threshold(gap_max, GAP_THRESHOLD * float(gap_max[0]))
        row["time_to_threshold"] = hit
        row["transmissions_to_threshold"] = int(trace.transmissions[hit - 1]) if hit else None
        row["transmissions_total"] = int(trace.transmissions[-1])
        return row

    @staticmethod
    def _centralized_row(seed: int, result: RunResult) -> Dict[str, Any]:
        test_set = result.prepared.run.test_set
        accuracy = float(classification_accuracy(result.reference.x_star, *test_set)[0])
        return {"preset": "svm", "arm": "centralized", "seed": seed, "T": result.trace.T,
                "final_gap_max": 0.0, "final_gap_mean": 0.0, "final_accuracy_min": accuracy}

    # -----------------------------------------------------------------------
    # Bounds

    def _run_facts(self, config: ExperimentConfig, trace_path: str) -> Dict[str, Any]:
        meta = Path(config.output.metadata or f"{trace_path}.meta")
        if meta.exists():
            _, facts = self.files.read_metadata(str(meta))
            if {"psi_star", "lipschitz", "reference_norm", "max_primal_norm"} <= set(facts):
                return facts
        logger.info("No usable metadata sidecar; recomputing the reference and Lipschitz estimate")
        problem = self.processor.build_problem(config.problem, config.seed)
        reference = centralized_reference(problem, config.T)
        psi_star = float(psi_value(reference.x_star, problem.prox)) - psi_minimum(problem.prox, problem.feasible, problem.d)
        return {
            "psi_star": psi_star,
            "lipschitz": self.processor.lipschitz(problem, config.seed).value,
            "reference_norm": float(np.linalg.norm(reference.x_star)),
            "max_primal_norm": float(np.linalg.norm(reference.x_star)),
        }

    def evaluate_bounds(self, config: ExperimentConfig, trace_path: str, out_path: Optional[str] = None,
                        strict: bool = True, delta: float = DEFAULT_DELTA) -> pd.DataFrame:
        """Per-prefix bound values of the applicable scheme and, for perfect exact runs, the certificate"""
        trace = self.files.read_trace(trace_path)
        if trace.n != config.problem.n or trace.T != config.T:
            raise ConfigurationError(
                f"trace shape (T={trace.T}, n={trace.n}) does not match the config (T={config.T}, n={config.problem.n})"
            )
        facts = self._run_facts(config, trace_path)
        prepared = self.processor.prepare(config)
        problem = prepared.run.problem
        L = certificate_lipschitz(float(facts["lipschitz"]), trace)
        psi_star = float(facts["psi_star"])
        R = set_diameter(problem.feasible, float(facts["reference_norm"]), float(facts["max_primal_norm"]))

        frame = pd.DataFrame({"T": trace.t})
        certifiable = config.channel.kind == "perfect" and config.gradient.mode == "exact"
        violated = False
        if certifiable:
            report = certify(trace, psi_star, L)
            finite = np.where(np.isfinite(report.gap), report.gap, -np.inf)
            frame["gap_max"] = np.where(np.isfinite(report.gap).any(axis=1), finite.max(axis=1), np.nan)
            frame["certificate"] = report.bound.min(axis=1)
            frame["violation"] = report.violations.any(axis=1)
            violated = report.violated

        column, values = self._scheme_series(config, prepared, L, psi_star, R, delta)
        if column:
            frame[column] = values

        out = Path(out_path) if out_path else Path(f"{trace_path}.bounds.csv")
        self.files.write_table(frame, str(out))
        logger.info(f"Wrote bound evaluation to {out}")
        if violated and strict:
            raise CertificateViolation(f"Empirical gap exceeds the certificate for trace {trace_path}")
        return frame

    def _scheme_series(self, config: ExperimentConfig, prepared: PreparedRun, L: float, psi_star: float,
                      R: float, delta: float) -> Tuple[Optional[str], Optional[np.ndarray]]:
        """Scheme bound for every prefix T' = 1..T"""
        problem: Problem = prepared.run.problem
        schedule = StepSchedule(C=config.step.C)
        n, d, T = problem.n, problem.d, config.T
        sigma2 = second_singular_value(prepared.mixing)
        policy = prepared.run.policy
        kind = config.policy.kind
        # static channel bounds take sigma_2 per coordinate; unshared ones have sigma_2 = 1
        if kind == "static":
            matrices = per_coordinate_matrices(policy)
            unique = {id(mat): mat for mat in matrices[:policy.n_shared]}
            spectra = {key: second_singular_value(mat) for key, mat in unique.items()}
            sigma2_per_k = [spectra[id(mat)] if k < policy.n_shared else 1.0 for k, mat in enumerate(matrices)]
        else:
            sigma2_per_k = [sigma2] * d
        sigma2_max = max(sigma2_per_k)
        if kind == "randomized":
            sigma2_expected = second_singular_value(MixingMatrix(expected_squared_mixing(policy, 0)))

        def scheme(T_: int) -> float:
            if kind == "round_robin":
                return bound_round_robin(L, psi_star, schedule, d, config.policy.m, n, T_, sigma2)
            if kind == "randomized":
                return bound_randomized(L, psi_star, schedule, d, n, T_, sigma2_expected, delta)
            return bound_static(L, psi_star, schedule, d, n, T_, sigma2_max)

        try:
            if config.channel.kind == "noisy":
                name = "noisy_bound"
                value = lambda T_: bound_noisy(bound_static(L, psi_star, schedule, d, n, T_, sigma2_max), L, R,
                                               config.channel.gamma2, n, d, T_, schedule, sigma2_max, delta)
            elif config.channel.kind == "quantized":
                name = "quantized_bound"
                zoom = prepared.run.channel.zoom
                nu = nu_series(zoom, sigma2_per_k, T)
                value = lambda T_: bound_quantized(bound_static(L, psi_star, schedule, d, n, T_, sigma2_max), L, R,
                                                   zoom, n, d, T_, schedule, nu[:T_], delta)
            elif config.gradient.mode == "minibatch":
                name = "stochastic_bound"
                value = lambda T_: bound_stochastic(scheme(T_), L, R, T_, delta)
            else:
                name = f"{kind}_bound"
                value = scheme
            return name, np.array([value(T_) for T_ in range(1, T + 1)])
        except DomainError as e:
            logger.warning(f"Scheme bound not applicable: {str(e)}")
            return None, None
