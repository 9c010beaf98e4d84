"""
OptConn - Report Service Module
Turns a run into ordered records and renders them as JSON lines or key=value text
"""

import json
import logging
import math
import sys
from typing import Any, Dict, Iterable, List, Optional, TextIO

logger = logging.getLogger(__name__)

RECORD_ORDER = ('scenario', 'christoffel', 'deviation', 'curvature', 'ricci', 'check', 'summary', 'timing')
NON_FINITE = {math.inf: 'Infinity', -math.inf: '-Infinity'}


def json_safe(value: Any) -> Any:
    """Replace non-finite floats by the strings NaN, Infinity and -Infinity"""
    if isinstance(value, float) and not math.isfinite(value):
        return 'NaN' if math.isnan(value) else NON_FINITE[value]
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


class ReportService:
    """Record assembly and rendering for run reports"""

    _instance = None

    def __new__(cls):
        """Singleton pattern to share one report service"""
        if cls._instance is None:
            cls._instance = super(ReportService, cls).__new__(cls)
        return cls._instance

    # ============================================
    # RECORDS
    # ============================================

    def records(self, run) -> List[Dict[str, Any]]:
        """
        Records of a RunReport in their fixed order; timing always comes last

        Args:
            run: RunReport from the orchestrator

        Returns:
            List of flat dictionaries, each tagged with 'record'
        """
        records: List[Dict[str, Any]] = [dict(run.scenario, record='scenario')]

        for index, table in run.tables:
            records.extend(dict(r, record='christoffel') for r in table.records(index))

        for entry in run.deviations:
            records.append(dict(entry, record='deviation'))

        for entry in run.curvature:
            records.append(dict(entry['summary'], record='curvature'))
            records.extend(dict(r, record='ricci') for r in entry['ricci'])

        records.extend(dict(r, record='check') for r in run.report.records())

        records.append({
            'record': 'summary',
            'pass': run.report.passed,
            'failed': list(run.report.failed),
            'checks': len(run.report.results),
            'points': run.point_count,
            'exit_code': run.exit_code,
        })
        records.append({'record': 'timing', 'seconds': run.timing})
        return records

    # ============================================
    # RENDERING
    # ============================================

    def render(self, records: Iterable[Dict[str, Any]], output_format: str = 'jsonl') -> str:
        if output_format == 'jsonl':
            lines = [json.dumps(json_safe(r), sort_keys=True, allow_nan=False) for r in records]
        elif output_format == 'text':
            lines = [self._text_line(r) for r in records]
        else:
            raise ValueError(f"unknown output format {output_format!r}")
        return '\n'.join(lines) + '\n'

    def _text_line(self, record: Dict[str, Any]) -> str:
        head = f"record={record['record']}"
        fields = []
        for key in sorted(k for k in record if k != 'record'):
            value = record[key]
            if isinstance(value, str):
                text = value
            else:
                text = json.dumps(json_safe(value), sort_keys=True, allow_nan=False, separators=(',', ':'))
            fields.append(f"{key}={text}")
        return ' '.join([head] + fields)

    def write(self, records: List[Dict[str, Any]], path: Optional[str] = None,
              output_format: str = 'jsonl', stream: Optional[TextIO] = None) -> None:
        """Write to path, or to stream (stdout by default)"""
        text = self.render(records, output_format)
        if path:
            with open(path, 'w', encoding='utf-8') as handle:
                handle.write(text)
            logger.info(f"📄 report written to {path} ({len(records)} records)")
        else:
            (stream or sys.stdout).write(text)


# Global instance
report_service = ReportService()
