# dcda/services/file_handler.py
"""Trace, sidecar, message-log and dataset persistence"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from dcda.core.exceptions import ConfigurationError, FileHandlingException
from dcda.models.domain import FeasibleSet, FeasibleSetKind, LossKind, Problem, ProxFunction, RunTrace
from dcda.models.experiment import ExperimentConfig
from dcda.services.config_parser import parse_config, render_config

logger = logging.getLogger(__name__)

TRACE_COLUMNS = [
    "t",
    "node",
    "f_gap",
    "dual_consensus",
    "dual_dev",
    "primal_spread",
    "gbar_norm",
    "alpha",
    "transmissions",
    "max_grad_norm",
]
MESSAGE_COLUMNS = ["t", "sender", "receiver", "coordinate", "payload"]
RUN_PREFIX = "# run."


def _parse_scalar(value: str) -> Any:
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if value in ("True", "False"):
        return value == "True"
    return value


class FileHandlerService:
    """Reads and writes every file a run produces"""

    @staticmethod
    def trace_frame(trace: RunTrace) -> pd.DataFrame:
        """Long format: one row per (t, node)"""
        T, n = trace.T, trace.n
        per_step = lambda series: np.repeat(np.asarray(series), n)
        frame = pd.DataFrame({
            "t": per_step(trace.t),
            "node": np.tile(np.arange(n), T),
            "f_gap": trace.f_gap.reshape(-1),
            "dual_consensus": per_step(trace.dual_consensus),
            "dual_dev": trace.dual_dev.reshape(-1),
            "primal_spread": per_step(trace.primal_spread),
            "gbar_norm": per_step(trace.gbar_norm),
            "alpha": per_step(trace.alpha),
            "transmissions": per_step(trace.transmissions),
            "max_grad_norm": per_step(trace.max_grad_norm),
        })
        if trace.accuracy is not None:
            frame["accuracy"] = trace.accuracy.reshape(-1)
        return frame

    @staticmethod
    def write_trace(trace: RunTrace, path: str) -> Path:
        try:
            out = Path(path)
            out.parent.mkdir(parents=True, exist_ok=True)
            FileHandlerService.trace_frame(trace).to_csv(out, index=False, lineterminator="\n")
            logger.info(f"Wrote trace with {trace.T} steps x {trace.n} nodes to {out}")
            return out
        except OSError as e:
            logger.error(f"Failed to write trace: {str(e)}")
            raise FileHandlingException(f"Trace write failed: {str(e)}") from e

    @staticmethod
    def read_trace(path: str) -> RunTrace:
        """Rebuild the per-step series of a trace CSV"""
        try:
            frame = pd.read_csv(path, float_precision="round_trip")
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            logger.error(f"Failed to read trace: {str(e)}")
            raise FileHandlingException(f"Trace read failed: {str(e)}") from e
        missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
        if missing:
            raise FileHandlingException(f"Trace {path} is missing columns: {missing}")
        frame = frame.sort_values(["t", "node"], kind="stable")
        wide = lambda col: frame.pivot(index="t", columns="node", values=col).to_numpy(dtype=float)
        steps = frame.groupby("t", sort=True).first()
        return RunTrace(
            t=steps.index.to_numpy(),
            f_gap=wide("f_gap"),
            dual_dev=wide("dual_dev"),
            dual_consensus=steps["dual_consensus"].to_numpy(dtype=float),
            primal_spread=steps["primal_spread"].to_numpy(dtype=float),
            gbar_norm=steps["gbar_norm"].to_numpy(dtype=float),
            alpha=steps["alpha"].to_numpy(dtype=float),
            transmissions=steps["transmissions"].to_numpy(dtype=np.int64),
            max_grad_norm=steps["max_grad_norm"].to_numpy(dtype=float),
            accuracy=wide("accuracy") if "accuracy" in frame.columns else None,
        )

    @staticmethod
    def write_metadata(config: ExperimentConfig, facts: Dict[str, Any], path: str) -> Path:
        """Config lines, then run facts as ``# run.<name> = <value>`` comments"""
        lines = [render_config(config)]
        lines.extend(f"{RUN_PREFIX}{key} = {value}\n" for key, value in facts.items())
        try:
            out = Path(path)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text("".join(lines), encoding="utf-8")
            return out
        except OSError as e:
            logger.error(f"Failed to write metadata: {str(e)}")
            raise FileHandlingException(f"Metadata write failed: {str(e)}") from e

    @staticmethod
    def read_metadata(path: str) -> Tuple[ExperimentConfig, Dict[str, Any]]:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise FileHandlingException(f"Metadata read failed: {str(e)}") from e
        facts: Dict[str, Any] = {}
        for line in text.splitlines():
            if line.startswith(RUN_PREFIX) and "=" in line:
                key, value = line[len(RUN_PREFIX):].split("=", 1)
                facts[key.strip()] = _parse_scalar(value.strip())
        return parse_config(text), facts

    @staticmethod
    def write_message_log(records: List[Tuple], links: List[Tuple[int, ...]], path: str) -> Path:
        """One row per (symbol, receiver)"""
        rows = [
            (t, sender, receiver, coordinate, symbol)
            for (t, sender, coordinate, symbol, _, _), receivers in zip(records, links)
            for receiver in receivers
        ]
        try:
            out = Path(path)
            out.parent.mkdir(parents=True, exist_ok=True)
            pd.DataFrame(rows, columns=MESSAGE_COLUMNS).to_csv(out, index=False, lineterminator="\n")
            logger.info(f"Wrote {len(rows)} quantized messages to {out}")
            return out
        except OSError as e:
            raise FileHandlingException(f"Message log write failed: {str(e)}") from e

    @staticmethod
    def write_table(frame: pd.DataFrame, path: str) -> Path:
        try:
            out = Path(path)
            out.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(out, index=False, lineterminator="\n")
            return out
        except OSError as e:
            raise FileHandlingException(f"CSV write failed: {str(e)}") from e

    # -----------------------------------------------------------------------
    # Datasets

    @staticmethod
    def export_dataset(problem: Problem, directory: str) -> List[Path]:
        """node_<i>.csv files (features a_0..a_{d-1}, target) plus a problem.meta sidecar"""
        root = Path(directory)
        try:
            root.mkdir(parents=True, exist_ok=True)
            written = []
            columns = [f"a_{k}" for k in range(problem.d)]
            for i in range(problem.n):
                frame = pd.DataFrame(problem.features[i], columns=columns)
                frame["target"] = problem.targets[i]
                path = root / f"node_{i}.csv"
                frame.to_csv(path, index=False, lineterminator="\n")
                written.append(path)
            meta = {
                "loss": problem.loss.value,
                "prox": problem.prox.value,
                "feasible": problem.feasible.kind.value,
                "radius": problem.feasible.radius,
                "c_svm": problem.c_svm,
                "n": problem.n,
                "m": problem.m,
                "d": problem.d,
            }
            meta_path = root / "problem.meta"
            meta_path.write_text("".join(f"{k} = {v}\n" for k, v in meta.items()), encoding="utf-8")
            written.append(meta_path)
            logger.info(f"Exported {problem.n} node datasets to {root}")
            return written
        except OSError as e:
            raise FileHandlingException(f"Dataset export failed: {str(e)}") from e

    @staticmethod
    def import_dataset(directory: str) -> Problem:
        root = Path(directory)
        try:
            meta = {}
            for line in (root / "problem.meta").read_text(encoding="utf-8").splitlines():
                if "=" in line:
                    key, value = line.split("=", 1)
                    meta[key.strip()] = _parse_scalar(value.strip())
            n = int(meta["n"])
            frames = [pd.read_csv(root / f"node_{i}.csv", float_precision="round_trip") for i in range(n)]
        except (OSError, KeyError, pd.errors.ParserError) as e:
            logger.error(f"Failed to import dataset: {str(e)}")
            raise FileHandlingException(f"Dataset import failed: {str(e)}") from e

        if len({len(f) for f in frames}) != 1:
            raise FileHandlingException("node datasets must hold the same number of samples")
        feature_cols = [c for c in frames[0].columns if c != "target"]
        features = np.stack([f[feature_cols].to_numpy(dtype=float) for f in frames])
        targets = np.stack([f["target"].to_numpy(dtype=float) for f in frames])
        kind = FeasibleSetKind(meta["feasible"])
        feasible = FeasibleSet.ball(meta["radius"]) if kind == FeasibleSetKind.BALL else FeasibleSet(kind)
        try:
            return Problem(
                loss=LossKind(meta["loss"]),
                features=features,
                targets=targets,
                prox=ProxFunction(meta["prox"]),
                feasible=feasible,
                c_svm=float(meta.get("c_svm", 1.0)),
            )
        except (ConfigurationError, ValueError) as e:
            raise FileHandlingException(f"Dataset in {root} is inconsistent: {str(e)}") from e


