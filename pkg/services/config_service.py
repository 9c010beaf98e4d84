"""
OptConn - Configuration Service Module
Loads scenario documents (YAML) and process settings (environment), validates
them and builds the geometric objects a run needs
"""

import os
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import yaml
from dotenv import load_dotenv

from geometry.connection import PATHS, fault_mask
from geometry.errors import GeometryError, ParameterError, UnknownFaultError
from geometry.fields import (
    DEFAULT_FD_STEP,
    DERIVATIVE_MODES,
    EXACT,
    Chart,
    Point,
    ScalarField,
)
from geometry.kahler_base import FAMILIES, KahlerBase, build_base
from geometry.metric import MetricParams
from geometry.oracle import KoszulContext, normalize_checks

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
OUTPUT_FORMATS = ('jsonl', 'text')
DEFAULT_WORKERS = 4

SECTIONS = (
    'base', 'params', 'domain', 'points', 'checks', 'tolerances', 'derivative_mode',
    'fd_step', 'richardson', 'tables', 'curvature', 'fault', 'output', 'workers',
)

DEFAULT_SCENARIO = """\
# D0: flat C, sigma = 1, alpha = 1, beta = 0, gamma = 0
base:
  family: flat
  dim: 2
params:
  sigma: "1"
  alpha: "1"
  beta: "0"
  gamma: ["0", "0"]
points:
  explicit:
    - [0.0, 0.0, 0.0, 0.0]
  random: {count: 8, seed: 0, box: {lower: [-1, -1, -1, -1], upper: [1, 1, 1, 1]}}
"""


class ConfigError(ValueError):
    """Invalid scenario document; the message names section and key"""

    def __init__(self, section: str, key: str, reason: str):
        self.section = section
        self.key = key
        self.reason = reason
        super().__init__(f"[{section}] {key}: {reason}")


@dataclass(frozen=True)
class Settings:
    """Process-level defaults read from the environment"""

    log_level: str = 'INFO'
    workers: int = DEFAULT_WORKERS
    fd_step: float = DEFAULT_FD_STEP
    output_format: str = 'jsonl'


@dataclass(frozen=True)
class RandomPoints:
    count: int
    seed: int
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario; build_* methods turn it into geometry objects"""

    base: Dict[str, Any]
    params: Dict[str, Any]
    dim: int
    lower: Optional[Tuple[float, ...]] = None
    upper: Optional[Tuple[float, ...]] = None
    explicit_points: Tuple[Tuple[float, ...], ...] = ()
    random_points: Optional[RandomPoints] = None
    checks: Tuple[str, ...] = ()
    tolerances: Dict[str, float] = field(default_factory=dict)
    derivative_mode: str = EXACT
    fd_step: float = DEFAULT_FD_STEP
    richardson: bool = False
    tables: Tuple[str, ...] = ()
    curvature: bool = False
    fault: Optional[str] = None
    output_path: Optional[str] = None
    output_format: str = 'jsonl'
    workers: int = DEFAULT_WORKERS

    @property
    def n(self) -> int:
        return self.dim + 2

    def chart(self) -> Chart:
        return Chart(self.dim, self.lower, self.upper)

    def build_base(self) -> KahlerBase:
        expressions = {k: v for k, v in self.base.items() if k not in ('family', 'dim', 'untwisted')}
        base = build_base(self.base.get('family', 'flat'), self.dim, self.chart(),
                          self.derivative_mode, self.fd_step, **expressions)
        return base.untwisted() if self.base.get('untwisted') else base

    def build_params(self) -> MetricParams:
        return MetricParams.from_expressions(
            self.params['sigma'], self.params['alpha'], self.params['beta'], self.params['gamma'],
            self.chart(), self.derivative_mode, self.fd_step,
        )

    def context(self) -> KoszulContext:
        return KoszulContext(base=self.build_base(), params=self.build_params(), mode=self.derivative_mode,
                             fd_step=self.fd_step, richardson=self.richardson)

    def points(self) -> List[Point]:
        """Explicit points first, then the seeded uniform draw"""
        points = [Point(p) for p in self.explicit_points]
        if self.random_points is not None:
            spec = self.random_points
            logger.info(f"🎲 drawing {spec.count} random point(s) with seed {spec.seed}")
            rng = np.random.default_rng(spec.seed)
            draws = rng.uniform(spec.lower, spec.upper, size=(spec.count, self.n))
            points.extend(Point(tuple(float(v) for v in row)) for row in draws)
        return points

    def echo(self) -> Dict[str, Any]:
        """Scenario record for the report; everything that determines the body"""
        return {
            'base': dict(self.base),
            'params': dict(self.params),
            'dim': self.dim,
            'n': self.n,
            'domain': {'lower': list(self.chart().lower), 'upper': list(self.chart().upper)},
            'points': [list(p) for p in self.explicit_points],
            'random': None if self.random_points is None else {
                'count': self.random_points.count,
                'seed': self.random_points.seed,
                'lower': list(self.random_points.lower),
                'upper': list(self.random_points.upper),
            },
            'checks': list(self.checks),
            'tolerances': dict(sorted(self.tolerances.items())),
            'derivative_mode': self.derivative_mode,
            'fd_step': self.fd_step,
            'richardson': self.richardson,
            'tables': list(self.tables),
            'curvature': self.curvature,
            'fault': self.fault,
        }


# ============================================
# PARSING HELPERS
# ============================================

def _floats(value: Any, section: str, key: str, size: Optional[int] = None) -> Tuple[float, ...]:
    try:
        values = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(section, key, f"expected a list of numbers, got {value!r}") from None
    if size is not None and len(values) != size:
        raise ConfigError(section, key, f"expected {size} values, got {len(values)}")
    return values


def _box(value: Any, section: str, n: int) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    if not isinstance(value, Mapping) or 'lower' not in value or 'upper' not in value:
        raise ConfigError(section, 'box', "expected a mapping with lower and upper")
    lower = _floats(value['lower'], section, 'lower', n)
    upper = _floats(value['upper'], section, 'upper', n)
    if any(lo >= hi for lo, hi in zip(lower, upper)):
        raise ConfigError(section, 'box', f"empty box lower={list(lower)} upper={list(upper)}")
    return lower, upper


def _expression(text: Any, chart: Chart, section: str, key: str) -> str:
    if isinstance(text, bool) or not isinstance(text, (str, int, float)):
        raise ConfigError(section, key, f"expected an expression, got {text!r}")
    try:
        ScalarField.parse(str(text), chart)
    except GeometryError as e:
        raise ConfigError(section, key, str(e)) from e
    return str(text)


def _expressions(value: Any, chart: Chart, section: str, key: str) -> Any:
    """Validate a (possibly nested) list of expressions, keeping its shape"""
    if isinstance(value, (list, tuple)):
        return [_expressions(v, chart, section, key) for v in value]
    return _expression(value, chart, section, key)


def _flag(value: Any, section: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(section, section, f"expected true or false, got {value!r}")
    return value


def _set_path(document: Dict[str, Any], path: str, value: Any) -> None:
    """Assign document['a']['b'] for path 'a.b', creating sections as needed"""
    *parents, leaf = path.split('.')
    node = document
    for key in parents:
        if not isinstance(node.get(key), dict):
            node[key] = {}
        node = node[key]
    node[leaf] = value


# ============================================
# CONFIG SERVICE
# ============================================

class ConfigService:
    """Scenario parsing, environment settings and logging setup"""

    _instance = None

    def __new__(cls):
        """Singleton pattern to share one configuration service"""
        if cls._instance is None:
            cls._instance = super(ConfigService, cls).__new__(cls)
        return cls._instance

    # ============================================
    # ENVIRONMENT
    # ============================================

    def settings(self) -> Settings:
        """Read OPTCONN_* variables; malformed values fall back to the defaults"""
        defaults = Settings()
        level = os.getenv('OPTCONN_LOG', defaults.log_level).upper()
        if not isinstance(logging.getLevelName(level), int):
            logger.warning(f"OPTCONN_LOG={level!r} is not a log level, using {defaults.log_level}")
            level = defaults.log_level

        try:
            workers = max(1, int(os.getenv('OPTCONN_WORKERS', defaults.workers)))
        except ValueError:
            logger.warning("OPTCONN_WORKERS is not an integer, using the default")
            workers = defaults.workers

        try:
            fd_step = float(os.getenv('OPTCONN_FD_STEP', defaults.fd_step))
        except ValueError:
            logger.warning("OPTCONN_FD_STEP is not a number, using the default")
            fd_step = defaults.fd_step

        output_format = os.getenv('OPTCONN_OUTPUT_FORMAT', defaults.output_format).lower()
        if output_format not in OUTPUT_FORMATS:
            logger.warning(f"OPTCONN_OUTPUT_FORMAT={output_format!r} is unknown, using jsonl")
            output_format = defaults.output_format

        return Settings(log_level=level, workers=workers, fd_step=fd_step, output_format=output_format)

    def configure_logging(self, verbose: bool = False) -> None:
        level = logging.DEBUG if verbose else logging.getLevelName(self.settings().log_level)
        logging.basicConfig(level=level, format=LOG_FORMAT, force=True)

    # ============================================
    # SCENARIOS
    # ============================================

    def parse_config(self, text: str, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
        """
        Parse and validate a scenario document

        Args:
            text: YAML scenario
            overrides: dotted-path values applied on top of the document
                       (e.g. {'points.random.seed': 3}); CLI flags arrive here

        Returns:
            Validated ScenarioConfig
        """
        try:
            document = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError('document', 'yaml', f"not valid YAML: {e}") from e
        if document is None:
            document = {}
        if not isinstance(document, dict):
            raise ConfigError('document', 'root', "expected a mapping of sections")

        for path, value in (overrides or {}).items():
            if value is not None:
                _set_path(document, path, value)

        unknown = sorted(set(document) - set(SECTIONS))
        if unknown:
            raise ConfigError('document', unknown[0], f"unknown section; expected one of {', '.join(SECTIONS)}")

        config = self._validate(document, self.settings())
        logger.info(f"✅ scenario parsed: {config.base.get('family')} base, dim={config.dim}, n={config.n}")
        return config

    def load(self, path: str, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                text = handle.read()
        except OSError as e:
            raise ConfigError('document', 'path', f"cannot read {path}: {e}") from e
        logger.info(f"📄 loading scenario {path}")
        return self.parse_config(text, overrides)

    def _validate(self, document: Dict[str, Any], settings: Settings) -> ScenarioConfig:
        base = self._validate_base(document.get('base') or {})
        dim = base['dim']
        n = dim + 2

        lower = upper = None
        if document.get('domain') is not None:
            lower, upper = _box(document['domain'], 'domain', n)
        try:
            chart = Chart(dim, lower, upper)
        except GeometryError as e:
            raise ConfigError('domain', 'box', str(e)) from e

        base = self._validate_base_expressions(base, chart)
        params = self._validate_params(document.get('params') or {}, chart)
        explicit, random_points = self._validate_points(document.get('points') or {}, chart)

        checks = self._validate_checks(document.get('checks'))
        tolerances = self._validate_tolerances(document.get('tolerances') or {})

        mode = document.get('derivative_mode', EXACT)
        if mode not in DERIVATIVE_MODES:
            raise ConfigError('derivative_mode', 'derivative_mode',
                              f"expected one of {', '.join(DERIVATIVE_MODES)}, got {mode!r}")

        fd_step = document.get('fd_step', settings.fd_step)
        try:
            fd_step = float(fd_step)
        except (TypeError, ValueError):
            raise ConfigError('fd_step', 'fd_step', f"expected a number, got {fd_step!r}") from None
        if not fd_step > 0:
            raise ConfigError('fd_step', 'fd_step', "must be positive")

        tables = document.get('tables') or []
        if isinstance(tables, str):
            tables = [t.strip() for t in tables.split(',') if t.strip()]
        bad = [t for t in tables if t not in PATHS]
        if bad:
            raise ConfigError('tables', bad[0], f"unknown table; expected one of {', '.join(PATHS)}")

        output = document.get('output') or {}
        if not isinstance(output, Mapping):
            raise ConfigError('output', 'output', "expected a mapping with path and format")
        output_format = output.get('format') or settings.output_format
        if output_format not in OUTPUT_FORMATS:
            raise ConfigError('output', 'format', f"expected one of {', '.join(OUTPUT_FORMATS)}")

        fault = document.get('fault')
        if fault is not None:
            try:
                fault_mask(fault, dim)
            except UnknownFaultError as e:
                raise ConfigError('fault', 'fault', str(e)) from e

        workers = document.get('workers', settings.workers)
        if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
            raise ConfigError('workers', 'workers', f"expected a positive integer, got {workers!r}")

        config = ScenarioConfig(
            base=base,
            params=params,
            dim=dim,
            lower=lower,
            upper=upper,
            explicit_points=explicit,
            random_points=random_points,
            checks=checks,
            tolerances=tolerances,
            derivative_mode=mode,
            fd_step=fd_step,
            richardson=_flag(document.get('richardson', False), 'richardson'),
            tables=tuple(dict.fromkeys(tables)),
            curvature=_flag(document.get('curvature', False), 'curvature'),
            fault=fault,
            output_path=output.get('path'),
            output_format=output_format,
            workers=int(workers),
        )
        self._probe(config)
        return config

    def _validate_base(self, section: Any) -> Dict[str, Any]:
        if not isinstance(section, Mapping):
            raise ConfigError('base', 'base', "expected a mapping")
        family = section.get('family', 'flat')
        if family not in FAMILIES:
            raise ConfigError('base', 'family', f"expected one of {', '.join(FAMILIES)}, got {family!r}")
        dim = section.get('dim', len(section['frame']) if family == 'custom' and section.get('frame') else 2)
        if isinstance(dim, bool) or not isinstance(dim, int):
            raise ConfigError('base', 'dim', f"expected an integer, got {dim!r}")
        if dim < 2 or dim % 2:
            raise ConfigError('base', 'dim', "dim must be even and at least 2")
        if family == 'conformal' and dim != 2:
            raise ConfigError('base', 'dim', "the conformal family is a surface: dim must be 2")
        if family == 'custom':
            missing = [k for k in ('frame', 'metric', 'J', 'potential') if section.get(k) is None]
            if missing:
                raise ConfigError('base', missing[0], "required for a custom base")
        result = dict(section)
        result['family'] = family
        result['dim'] = dim
        result['untwisted'] = _flag(section.get('untwisted', False), 'base')
        return result

    def _validate_base_expressions(self, base: Dict[str, Any], chart: Chart) -> Dict[str, Any]:
        m = chart.base_dim
        shapes = {'frame': (m, m), 'metric': (m, m), 'J': (m, m), 'potential': (m,)}
        for key in ('u', 'frame', 'metric', 'J', 'potential'):
            if base.get(key) is None:
                continue
            base[key] = _expressions(base[key], chart, 'base', key)
            if key in shapes:
                shape = np.shape(np.array(base[key], dtype=object))
                if shape != shapes[key]:
                    raise ConfigError('base', key, f"expected shape {shapes[key]}, got {shape}")
        try:
            config_base = build_base(base['family'], base['dim'], chart,
                                     **{k: v for k, v in base.items() if k in ('u', 'frame', 'metric', 'J', 'potential')})
        except (GeometryError, ValueError) as e:
            raise ConfigError('base', base['family'], str(e)) from e
        logger.debug(f"base {config_base.family} builds on {chart.coordinate_names}")
        return base

    def _validate_params(self, section: Any, chart: Chart) -> Dict[str, Any]:
        if not isinstance(section, Mapping):
            raise ConfigError('params', 'params', "expected a mapping")
        params = {
            'sigma': _expression(section.get('sigma', '1'), chart, 'params', 'sigma'),
            'alpha': _expression(section.get('alpha', '1'), chart, 'params', 'alpha'),
            'beta': _expression(section.get('beta', '0'), chart, 'params', 'beta'),
        }
        gamma = section.get('gamma', ['0'] * chart.base_dim)
        if not isinstance(gamma, (list, tuple)) or len(gamma) != chart.base_dim:
            raise ConfigError('params', 'gamma', f"expected {chart.base_dim} expressions")
        params['gamma'] = [_expression(g, chart, 'params', f'gamma[{i + 1}]') for i, g in enumerate(gamma)]
        return params

    def _validate_points(self, section: Any, chart: Chart):
        if not isinstance(section, Mapping):
            raise ConfigError('points', 'points', "expected a mapping with explicit and/or random")
        n = chart.dim
        explicit = []
        for i, p in enumerate(section.get('explicit') or []):
            if isinstance(p, str):
                p = p.split(',')
            coords = _floats(p, 'points', f'explicit[{i}]', n)
            if not chart.contains(coords):
                raise ConfigError('points', f'explicit[{i}]', f"{list(coords)} lies outside the domain box")
            explicit.append(coords)

        random_points = None
        spec = section.get('random')
        if spec is not None:
            if not isinstance(spec, Mapping):
                raise ConfigError('points', 'random', "expected a mapping with count, seed and box")
            count = spec.get('count', 20)
            if isinstance(count, bool) or not isinstance(count, int) or count < 0:
                raise ConfigError('points', 'count', f"expected a non-negative integer, got {count!r}")
            seed = spec.get('seed')
            if seed is None:
                seed = int(np.random.SeedSequence().entropy % (2 ** 32))
            if isinstance(seed, bool) or not isinstance(seed, int):
                raise ConfigError('points', 'seed', f"expected an integer, got {seed!r}")
            if spec.get('box') is None:
                lower, upper = chart.lower, chart.upper
            else:
                lower, upper = _box(spec['box'], 'points', n)
            if not (chart.contains(lower) and chart.contains(upper)):
                raise ConfigError('points', 'box', "sampling box must lie inside the domain")
            random_points = RandomPoints(count=count, seed=seed, lower=lower, upper=upper)

        if not explicit and (random_points is None or random_points.count == 0):
            raise ConfigError('points', 'points', "no points configured")
        return tuple(explicit), random_points

    def _validate_checks(self, checks: Any) -> Tuple[str, ...]:
        if isinstance(checks, str):
            checks = checks.split(',')
        try:
            return normalize_checks(checks)
        except GeometryError as e:
            raise ConfigError('checks', 'checks', str(e)) from e

    def _validate_tolerances(self, section: Any) -> Dict[str, float]:
        if isinstance(section, str):
            pairs = [item.split('=', 1) for item in section.split(',') if item.strip()]
            if any(len(pair) != 2 for pair in pairs):
                raise ConfigError('tolerances', section, "expected check=value pairs")
            section = {k.strip(): v for k, v in pairs}
        if not isinstance(section, Mapping):
            raise ConfigError('tolerances', 'tolerances', "expected a mapping of check to tolerance")
        tolerances = {}
        for check, value in section.items():
            try:
                normalize_checks([check])
            except GeometryError as e:
                raise ConfigError('tolerances', check, str(e)) from e
            try:
                tolerances[check] = float(value)
            except (TypeError, ValueError):
                raise ConfigError('tolerances', check, f"expected a number, got {value!r}") from None
        return tolerances

    def _probe(self, config: ScenarioConfig) -> None:
        """sigma > 0 and alpha != 0 at every configured point"""
        params = config.build_params()
        for p in config.points():
            try:
                params.check([p])
            except ParameterError as e:
                key = 'sigma' if 'sigma' in str(e) else 'alpha'
                raise ConfigError('params', key, str(e)) from e
            except GeometryError as e:
                raise ConfigError('params', 'params', f"cannot evaluate at {p.coords}: {e}") from e


# Global instance
config_service = ConfigService()


def parse_config(text: str, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
    return config_service.parse_config(text, overrides)


def load_config(path: str, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
    return config_service.load(path, overrides)
