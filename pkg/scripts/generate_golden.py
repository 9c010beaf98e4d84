"""
Golden Report Generator
Runs every scenario of a directory and writes its report body (timing removed)
next to it as <scenario>.golden.jsonl, or with --check compares the runs
against the committed golden files
"""

import sys
import json
import math
import logging
import argparse
from pathlib import Path
from typing import Any, Dict, List

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from services import config_service, report_service, run_orchestrator

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

SCENARIO_DIR = Path(__file__).parent.parent / 'scenarios'
GOLDEN_DIR = SCENARIO_DIR / 'golden'

ABS_TOLERANCE = 1e-9
REL_TOLERANCE = 1e-9
# worst-entry labels are only meaningful for a residual above this
WORST_FLOOR = 1e-12
WORST_KEYS = {'worst_indices': 'residual', 'worst_block': 'max'}


def golden_records(path: Path) -> List[Dict[str, Any]]:
    """Report records of one scenario without the timing record"""
    config = config_service.load(str(path))
    run = run_orchestrator.run(config)
    return [r for r in report_service.records(run) if r['record'] != 'timing']


def golden_path(scenario: Path) -> Path:
    return scenario.with_suffix('.golden.jsonl')


def read_golden(path: Path) -> List[Dict[str, Any]]:
    return [json.loads(line) for line in path.read_text(encoding='utf-8').splitlines() if line.strip()]


# ============================================
# COMPARISON
# ============================================

def _negligible(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and abs(value) <= WORST_FLOOR


def _differences(expected: Any, actual: Any, where: str) -> List[str]:
    if isinstance(expected, bool) or isinstance(actual, bool):
        return [] if expected is actual else [f"{where}: expected {expected!r}, got {actual!r}"]
    if isinstance(expected, (int, float)) and isinstance(actual, (int, float)):
        if math.isclose(expected, actual, rel_tol=REL_TOLERANCE, abs_tol=ABS_TOLERANCE):
            return []
        return [f"{where}: expected {expected!r}, got {actual!r}"]
    if isinstance(expected, dict) and isinstance(actual, dict):
        if set(expected) != set(actual):
            return [f"{where}: keys {sorted(expected)} != {sorted(actual)}"]
        problems = []
        for key in sorted(expected):
            measure = WORST_KEYS.get(key)
            if measure and _negligible(expected.get(measure)) and _negligible(actual.get(measure)):
                continue
            problems.extend(_differences(expected[key], actual[key], f"{where}.{key}"))
        return problems
    if isinstance(expected, list) and isinstance(actual, list):
        if len(expected) != len(actual):
            return [f"{where}: length {len(expected)} != {len(actual)}"]
        problems = []
        for i, (e, a) in enumerate(zip(expected, actual)):
            problems.extend(_differences(e, a, f"{where}[{i}]"))
        return problems
    return [] if expected == actual else [f"{where}: expected {expected!r}, got {actual!r}"]


def compare_records(expected: List[Dict[str, Any]], actual: List[Dict[str, Any]]) -> List[str]:
    """
    Differences between a golden report and a fresh one.

    Numbers agree to 1e-9 (absolute or relative); worst-entry labels are ignored
    where the residual is at round-off level; timing records never count.
    """
    expected = [r for r in expected if r.get('record') != 'timing']
    actual = [r for r in actual if r.get('record') != 'timing']
    if len(expected) != len(actual):
        kinds = ([r.get('record') for r in expected], [r.get('record') for r in actual])
        return [f"record count {len(expected)} != {len(actual)}: {kinds[0]} vs {kinds[1]}"]
    problems = []
    for i, (e, a) in enumerate(zip(expected, actual)):
        problems.extend(_differences(e, a, f"line {i + 1} ({e.get('record')})"))
    return problems


# ============================================
# ENTRY POINTS
# ============================================

def generate_golden(scenario_dir: Path = SCENARIO_DIR) -> bool:
    """Write golden files for every scenario; False if any scenario fails"""

    logger.info("🧪 Generating golden reports...")

    scenarios = sorted(scenario_dir.glob('*.yaml'))
    if not scenarios:
        logger.error(f"❌ No scenarios found in {scenario_dir}")
        return False

    ok = True
    for path in scenarios:
        try:
            records = golden_records(path)
            target = golden_path(path)
            target.write_text(report_service.render(records, 'jsonl'), encoding='utf-8')
            summary = records[-1]
            status = '✅' if summary['pass'] else '❌'
            logger.info(f"{status} {path.name} -> {target.name} ({len(records)} records)")
            ok = ok and summary['pass']
        except Exception as e:
            logger.error(f"❌ {path.name} failed: {e}")
            ok = False

    return ok


def check_golden(scenario_dir: Path = GOLDEN_DIR) -> Dict[str, List[str]]:
    """Run every scenario that has a golden file; differences per scenario name"""
    results = {}
    for path in sorted(scenario_dir.glob('*.yaml')):
        target = golden_path(path)
        if not target.exists():
            logger.warning(f"⚠️ {path.name} has no golden file, skipped")
            continue
        problems = compare_records(read_golden(target), golden_records(path))
        status = '✅' if not problems else '❌'
        logger.info(f"{status} {path.name}: {len(problems)} difference(s)")
        results[path.stem] = problems
    return results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Write or check golden scenario reports")
    parser.add_argument('directory', nargs='?', type=Path, help="scenario directory")
    parser.add_argument('--check', action='store_true', help="compare against the golden files instead of writing")
    args = parser.parse_args(argv)

    if args.check:
        results = check_golden(args.directory or GOLDEN_DIR)
        for name, problems in results.items():
            for problem in problems[:20]:
                print(f"{name}: {problem}", file=sys.stderr)
        return 0 if results and not any(results.values()) else 1

    return 0 if generate_golden(args.directory or SCENARIO_DIR) else 1


if __name__ == '__main__':
    sys.exit(main())
