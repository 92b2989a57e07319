# dcda/services/data_processor.py
"""Turns a validated ExperimentConfig into the objects a run needs"""

import logging
from dataclasses import dataclass

import numpy as np

from dcda.config import settings
from dcda.core.exceptions import ConfigurationError, DataProcessingException
from dcda.core.objectives import gen_linreg, gen_robust, gen_svm, gen_svm_test_set, lipschitz_estimate
from dcda.core.schedule import make_randomized, make_round_robin, make_static
from dcda.core.topology import make_full, make_random, make_ring, mixing_from_adjacency
from dcda.models.domain import (
    FeasibleSet,
    GradientMode,
    Graph,
    LipschitzEstimate,
    LossKind,
    MixingMatrix,
    NoisyChannel,
    PerfectChannel,
    Problem,
    QuantizedChannel,
    RunConfig,
    StepSchedule,
    ZoomSchedule,
)
from dcda.models.experiment import ExperimentConfig, ProblemSpec
from dcda.services.file_handler import FileHandlerService
from dcda.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

LOSS_BY_FAMILY = {"svm": LossKind.SVM_HINGE, "linreg": LossKind.LEAST_SQUARES, "robust": LossKind.L1_REGRESSION}


@dataclass(eq=False)
class PreparedRun:
    """A RunConfig plus the pieces bound evaluation needs later"""
    config: ExperimentConfig
    run: RunConfig
    mixing: MixingMatrix


class DataProcessor:
    """Builds problems, graphs, policies and channels from a config"""

    @staticmethod
    def feasible_set(spec: ProblemSpec) -> FeasibleSet:
        if spec.feasible_set == "ball":
            return FeasibleSet.ball(spec.radius)
        if spec.feasible_set == "simplex":
            return FeasibleSet.simplex()
        return FeasibleSet.unconstrained()

    @staticmethod
    def imported_problem(spec: ProblemSpec) -> Problem:
        """Load ``problem.dataset``; its shape and loss must agree with the config"""
        problem = FileHandlerService.import_dataset(spec.dataset)
        expected = LOSS_BY_FAMILY[spec.family]
        if problem.loss != expected:
            raise ConfigurationError(
                f"problem.dataset: {spec.dataset} holds a {problem.loss.value} problem, family is {spec.family}"
            )
        if (problem.n, problem.d) != (spec.n, spec.d):
            raise ConfigurationError(
                f"problem.dataset: {spec.dataset} has n={problem.n}, d={problem.d}; "
                f"config says n={spec.n}, d={spec.d}"
            )
        logger.info(f"Imported {problem.loss.value} dataset from {spec.dataset}")
        return problem

    def build_problem(self, spec: ProblemSpec, seed: int) -> Problem:
        if spec.dataset:
            return self.imported_problem(spec)
        data_seed = derive_seed(seed, "data")
        feasible = self.feasible_set(spec)
        try:
            if spec.family == "svm":
                mu = np.full(spec.d, spec.mu_scale / np.sqrt(spec.d))
                return gen_svm(spec.n, spec.m, spec.d, mu, -mu, spec.sigma, spec.c_svm, data_seed, feasible)
            if spec.family == "linreg":
                return gen_linreg(spec.n, spec.m, spec.d, spec.noise_sigma, data_seed, feasible)
            return gen_robust(
                spec.n, spec.m, spec.d, spec.outlier_prob, spec.outlier_sigma, spec.inlier_sigma, data_seed, feasible
            )
        except ConfigurationError:
            raise
        except Exception as e:
            logger.error(f"Failed to generate {spec.family} data: {str(e)}")
            raise DataProcessingException(f"Data generation failed: {str(e)}") from e

    @staticmethod
    def build_graph(config: ExperimentConfig) -> Graph:
        n, spec = config.problem.n, config.graph
        if n == 1:
            return Graph(np.zeros((1, 1)), kind="single")
        if spec.kind == "full":
            return make_full(n)
        if spec.kind == "ring":
            return make_ring(n, spec.l)
        return make_random(n, spec.p, derive_seed(config.seed, "graph"))

    @staticmethod
    def build_policy(config: ExperimentConfig, mixing: MixingMatrix):
        spec, d = config.policy, config.problem.d
        if spec.kind == "static":
            return make_static(mixing, d, shared=spec.m)
        if spec.kind == "round_robin":
            return make_round_robin(mixing, d, spec.m)
        return make_randomized(
            mixing, d, derive_seed(config.seed, "schedule"), mode=spec.mode, m=spec.m, rho=spec.rho
        )

    @staticmethod
    def build_channel(config: ExperimentConfig):
        spec = config.channel
        if spec.kind == "noisy":
            return NoisyChannel(gamma2=spec.gamma2, seed=derive_seed(config.seed, "channel"))
        if spec.kind == "quantized":
            return QuantizedChannel(zoom=ZoomSchedule(spec.s0, spec.beta), seed=derive_seed(config.seed, "dither"))
        return PerfectChannel()

    @staticmethod
    def build_gradient(config: ExperimentConfig) -> GradientMode:
        if config.gradient.mode == "minibatch":
            return GradientMode("minibatch", config.gradient.batch, derive_seed(config.seed, "minibatch"))
        return GradientMode()

    def prepare(self, config: ExperimentConfig) -> PreparedRun:
        problem = self.build_problem(config.problem, config.seed)
        graph = self.build_graph(config)
        mixing = mixing_from_adjacency(graph, method=config.graph.weights)
        test_set = None
        if problem.loss == LossKind.SVM_HINGE and config.problem.test_per_class > 0:
            test_set = gen_svm_test_set(problem, config.problem.test_per_class, derive_seed(config.seed, "testset"))
        run = RunConfig(
            problem=problem,
            graph=graph,
            policy=self.build_policy(config, mixing),
            channel=self.build_channel(config),
            gradient=self.build_gradient(config),
            T=config.T,
            schedule=StepSchedule(C=config.step.C),
            seed=config.seed,
            cadence=config.output.cadence,
            test_set=test_set,
            record_messages=config.channel.kind == "quantized" and config.channel.log is not None,
        )
        logger.info(f"Prepared {config.problem.family} run: {graph.kind} graph with {graph.to_dict()['edges']} edges")
        return PreparedRun(config=config, run=run, mixing=mixing)

    @staticmethod
    def lipschitz(problem: Problem, seed: int) -> LipschitzEstimate:
        return lipschitz_estimate(problem, samples=settings.LIPSCHITZ_SAMPLES, seed=derive_seed(seed, "lipschitz"))
