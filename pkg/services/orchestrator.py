"""
OptConn - Run Orchestrator
Master coordinator for a scenario run: builds the geometry, evaluates tables,
curvature and checks at every point on a worker pool, and assembles the report
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Dict, List, Tuple

from geometry.connection import ChristoffelTable
from geometry.errors import EvaluationError, GeometryError
from geometry.fields import Point
from geometry.oracle import KoszulContext, PointEvaluation, VerificationReport, default_tolerances

from .config_service import ScenarioConfig

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAILED_CHECKS = 1
EXIT_CONFIG_ERROR = 2
EXIT_EVALUATION_ERROR = 3


@dataclass
class PointOutcome:
    """Everything computed at one point, before the single-threaded merge"""

    index: int
    tables: List[ChristoffelTable] = field(default_factory=list)
    deviations: List[Dict[str, Any]] = field(default_factory=list)
    curvature: Dict[str, Any] = field(default_factory=dict)
    report: VerificationReport = field(default_factory=VerificationReport)


@dataclass
class RunReport:
    """Result of run(): scenario echo, tables, curvature, checks and timing"""

    scenario: Dict[str, Any]
    tables: List[Tuple[int, ChristoffelTable]]
    deviations: List[Dict[str, Any]]
    curvature: List[Dict[str, Any]]
    report: VerificationReport
    point_count: int
    timing: float = 0.0

    @property
    def exit_code(self) -> int:
        return EXIT_PASS if self.report.passed else EXIT_FAILED_CHECKS


class RunOrchestrator:
    """Coordinates the per-point evaluations of a scenario"""

    _instance = None

    def __new__(cls):
        """Singleton pattern to share one orchestrator"""
        if cls._instance is None:
            cls._instance = super(RunOrchestrator, cls).__new__(cls)
        return cls._instance

    def run(self, config: ScenarioConfig) -> RunReport:
        """
        Execute a validated scenario

        Args:
            config: ScenarioConfig from the config service

        Returns:
            RunReport with outputs ordered by point index

        Raises:
            EvaluationError: a point could not be evaluated; carries point and check
        """
        started = time.perf_counter()
        ctx = config.context()
        points = config.points()
        tolerances = default_tolerances(config.derivative_mode)
        tolerances.update(config.tolerances)

        logger.info(f"🧪 running {len(config.checks)} check(s) over {len(points)} point(s) "
                    f"with {config.workers} worker(s)")

        def work(indexed: Tuple[int, Point]) -> PointOutcome:
            index, p = indexed
            return self._evaluate_point(ctx, config, index, p, tolerances)

        with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
            outcomes = list(pool.map(work, enumerate(points)))

        report = reduce(VerificationReport.merge, (o.report for o in outcomes), VerificationReport())
        run = RunReport(
            scenario=config.echo(),
            tables=[(o.index, t) for o in outcomes for t in o.tables],
            deviations=[d for o in outcomes for d in o.deviations],
            curvature=[o.curvature for o in outcomes if o.curvature],
            report=report,
            point_count=len(points),
        )
        run.timing = time.perf_counter() - started

        if report.passed:
            logger.info(f"✅ all checks passed ({run.timing:.2f}s)")
        else:
            logger.warning(f"❌ failed checks: {', '.join(report.failed)}")
        return run

    def _evaluate_point(
        self,
        ctx: KoszulContext,
        config: ScenarioConfig,
        index: int,
        p: Point,
        tolerances: Dict[str, float],
    ) -> PointOutcome:
        evaluation = PointEvaluation(ctx, p, index, fault=config.fault)
        outcome = PointOutcome(index=index)
        stage = 'tables'
        try:
            for path in config.tables:
                outcome.tables.append(evaluation.produce(path))
            if len(outcome.tables) > 1:
                reference = outcome.tables[0]
                for table in outcome.tables[1:]:
                    blocks = table.block_deviations(reference)
                    worst = max(blocks, key=blocks.get)
                    outcome.deviations.append({
                        'point': index,
                        'path': table.path,
                        'reference': reference.path,
                        'max': blocks[worst],
                        'worst_block': worst,
                        'blocks': blocks,
                    })

            if config.curvature:
                stage = 'curvature'
                symmetries = evaluation.riemann.symmetry_residuals()
                outcome.curvature = {
                    'summary': {
                        'point': index,
                        'ricci_scalar': evaluation.ricci.scalar,
                        'ricci_symmetry': evaluation.ricci.symmetry_residual,
                        'riemann_symmetry': max(symmetries.values()),
                    },
                    'ricci': evaluation.ricci.records(index),
                }
        except EvaluationError:
            raise
        except GeometryError as e:
            raise EvaluationError(f"point {index} {p.coords}: {stage}: {e}", point_index=index) from e

        outcome.report = evaluation.report(config.checks, tolerances)
        return outcome


# Global instance
run_orchestrator = RunOrchestrator()


def run(config: ScenarioConfig) -> RunReport:
    return run_orchestrator.run(config)
