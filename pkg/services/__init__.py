"""Services package initialization"""

from .config_service import config_service, ConfigService, ConfigError, ScenarioConfig, parse_config, load_config
from .report_service import report_service, ReportService
from .orchestrator import run_orchestrator, RunOrchestrator, RunReport, run

__all__ = [
    'config_service',
    'ConfigService',
    'ConfigError',
    'ScenarioConfig',
    'parse_config',
    'load_config',
    'report_service',
    'ReportService',
    'run_orchestrator',
    'RunOrchestrator',
    'RunReport',
    'run',
]
