"""
Evaluator module - runs the items of one experiment configuration
"""

import asyncio
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import pandas as pd

from evaluation.core.experiments import EXPERIMENTS, Assertion, ItemContext, ItemOutcome
from rigidlab.config import get_settings
from rigidlab.errors import RigidLabError
from rigidlab.flow import IntegratorConfig
from rigidlab.utils.logger import LogUtil

logger = logging.getLogger(__name__)


class ExperimentRunError(RigidLabError):
    """An experiment item failed; carries the item and the module that raised."""

    def __init__(self, experiment: str, item: str, cause: BaseException):
        self.experiment = experiment
        self.item = item
        self.cause = cause
        self.module = _raising_module(cause)
        super().__init__(
            f"{experiment}[{item}] failed in {self.module}: "
            f"{type(cause).__name__}: {cause}"
        )


def _raising_module(exc: BaseException) -> str:
    """Innermost rigidlab module on the traceback, else the innermost one."""
    tb = exc.__traceback__
    innermost, library = "unknown", None
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "unknown")
        innermost = name
        if name.startswith("rigidlab"):
            library = name
        tb = tb.tb_next
    return library or innermost


@dataclass
class ExperimentResult:
    name: str
    kind: str
    frame: pd.DataFrame
    assertions: List[Assertion]
    artifacts: List[str]
    duration: float
    item_durations: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)


class Evaluator:
    """
    Evaluator class that runs the items of an experiment and assembles their
    tables in config order
    """

    def __init__(
        self,
        experiment: Dict[str, Any],
        run_config: Optional[Dict[str, Any]] = None,
        base_dir: str = ".",
    ):
        """
        Initialize the evaluator with configuration

        Args:
            experiment: validated experiment configuration
            run_config: run defaults (output_dir, workers, integrator, schedule)
            base_dir: directory that relative file references resolve against
        """
        run_config = run_config or {}
        self.experiment = experiment
        self.name = experiment["name"]
        self.kind = experiment["kind"]
        self.seed = experiment.get("seed", 0)
        self.base_dir = base_dir

        self.output_dir = experiment.get("output_dir") or run_config.get(
            "output_dir", "results"
        )
        os.makedirs(self.output_dir, exist_ok=True)

        self.integrator = IntegratorConfig.from_dict(
            dict(run_config.get("integrator") or {}, **experiment.get("integrator", {}))
        )
        self.schedule = dict(run_config.get("schedule") or {}, **experiment.get("schedule", {}))

        # RIGIDLAB_THREADS caps the worker count
        cap = get_settings().THREADS
        self.max_workers = max(1, min(run_config.get("workers") or cap, cap))

        logger.info(
            f"Evaluator initialized for {self.name} ({self.kind}, "
            f"{len(experiment['items'])} items, workers={self.max_workers})"
        )

    def _context(self, index: int, item: Dict[str, Any]) -> ItemContext:
        return ItemContext(
            name=self.name,
            index=index,
            label=item.get("label", str(index)),
            seed=self.seed,
            integrator=self.integrator,
            schedule=self.schedule,
            base_dir=self.base_dir,
            output_dir=self.output_dir,
        )

    def _execute_item(self, index: int, item: Dict[str, Any]) -> ItemOutcome:
        ctx = self._context(index, item)
        execution = {"experiment": self.name, "kind": self.kind, "item": ctx.label}
        try:
            outcome = EXPERIMENTS[self.kind](item, ctx)
        except Exception as exc:
            LogUtil.log_execution(
                logger,
                execution,
                {"success": False, "message": "item raised", "error": str(exc)},
                level=logging.ERROR,
            )
            raise ExperimentRunError(self.name, ctx.label, exc) from exc
        failed = [a.name for a in outcome.assertions if not a.passed]
        LogUtil.log_execution(
            logger,
            execution,
            {
                "success": not failed,
                "message": f"{len(outcome.frame)} rows, {len(outcome.assertions)} assertions",
                "error": f"failed: {', '.join(failed)}",
            },
        )
        return outcome

    async def run_evaluation(self) -> ExperimentResult:
        """
        Run every item of the experiment

        Returns:
            ExperimentResult with the assembled table and all assertions
        """
        start_time = time.time()
        items = self.experiment["items"]
        if self.max_workers > 1 and len(items) > 1:
            timed = await self._run_parallel(items)
        else:
            timed = await self._run_sequential(items)

        frames, assertions, artifacts, durations = [], [], [], {}
        for index, (item, (outcome, duration)) in enumerate(zip(items, timed)):
            label = item.get("label", str(index))
            frame = outcome.frame.copy()
            frame.insert(0, "item", label)
            frames.append(frame)
            assertions.extend(outcome.assertions)
            artifacts.extend(outcome.artifacts)
            durations[label] = duration

        result = ExperimentResult(
            name=self.name,
            kind=self.kind,
            frame=pd.concat(frames, ignore_index=True, sort=False),
            assertions=assertions,
            artifacts=artifacts,
            duration=time.time() - start_time,
            item_durations=durations,
        )
        logger.info(
            f"Experiment {self.name} completed in {result.duration:.2f} seconds: "
            f"{sum(a.passed for a in assertions)}/{len(assertions)} assertions passed"
        )
        return result

    async def _run_sequential(self, items: List[Dict[str, Any]]):
        """Run items one after another"""
        results = []
        for index, item in enumerate(items):
            logger.info(f"Running item {index + 1}/{len(items)}")
            task_start_time = time.time()
            outcome = await asyncio.to_thread(self._execute_item, index, item)
            results.append((outcome, time.time() - task_start_time))
        return results

    async def _run_parallel(self, items: List[Dict[str, Any]]):
        """Run items in worker threads, at most ``max_workers`` at a time"""
        workers = min(self.max_workers, len(items))
        logger.info(f"Running {len(items)} items in parallel with {workers} workers")
        semaphore = asyncio.Semaphore(workers)

        async def run_with_semaphore(index, item):
            async with semaphore:
                task_start_time = time.time()
                outcome = await asyncio.to_thread(self._execute_item, index, item)
                return outcome, time.time() - task_start_time

        results = await asyncio.gather(
            *(run_with_semaphore(i, item) for i, item in enumerate(items)),
            return_exceptions=True,
        )
        # the first failure in config order is the one reported
        for result in results:
            if isinstance(result, BaseException):
                raise result
        return results
