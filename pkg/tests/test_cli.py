"""
Command line and service tests: scenario parsing, reports, exit codes
"""

import json

import pytest

from conftest import SCENARIO_DIR
from app import main
from services.config_service import DEFAULT_SCENARIO, ConfigError, config_service, load_config, parse_config
from services.orchestrator import run
from services.report_service import report_service

POINT_ARG = '0.3,-0.2,0.1,0.5'


def _lines(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


# ============================================
# SCENARIO PARSING
# ============================================

def test_default_scenario():
    """Test the built-in D0 scenario parses with the expected shape"""
    config = parse_config(DEFAULT_SCENARIO)
    assert (config.dim, config.n) == (2, 4)
    assert config.base['family'] == 'flat'
    assert len(config.points()) == 9
    assert config.points()[0].coords == (0.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize('overrides,section,key', [
    ({'base.dim': 3}, 'base', 'dim'),
    ({'params.sigma': 'x1 +'}, 'params', 'sigma'),
    ({'params.sigma': '-1'}, 'params', 'sigma'),
    ({'params.alpha': '0'}, 'params', 'alpha'),
    ({'checks': ['bogus']}, 'checks', 'checks'),
    ({'points.random.box': {'lower': [-20, -1, -1, -1], 'upper': [1, 1, 1, 1]}}, 'points', 'box'),
    ({'tables': ['cached']}, 'tables', 'cached'),
    ({'derivative_mode': 'symbolic'}, 'derivative_mode', 'derivative_mode'),
    ({'colour': 'red'}, 'document', 'colour'),
    ({'workers': 0}, 'workers', 'workers'),
])
def test_invalid_scenarios(overrides, section, key):
    """Test every validation failure names its section and key"""
    with pytest.raises(ConfigError) as excinfo:
        parse_config(DEFAULT_SCENARIO, overrides)
    assert (excinfo.value.section, excinfo.value.key) == (section, key)


def test_odd_dimension_message():
    """Test the odd-dimension error says dim must be even"""
    with pytest.raises(ConfigError, match='even'):
        parse_config(DEFAULT_SCENARIO, {'base.dim': 3})


def test_seeded_points_are_deterministic():
    """Test equal seeds draw equal points and different seeds do not"""
    first = parse_config(DEFAULT_SCENARIO, {'points.random.seed': 5}).points()
    second = parse_config(DEFAULT_SCENARIO, {'points.random.seed': 5}).points()
    other = parse_config(DEFAULT_SCENARIO, {'points.random.seed': 6}).points()
    assert [p.coords for p in first] == [p.coords for p in second]
    assert [p.coords for p in first] != [p.coords for p in other]
    assert all(-1 <= c <= 1 for p in first for c in p.coords)


def test_tolerance_string_form():
    """Test tolerances given as check=value pairs"""
    config = parse_config(DEFAULT_SCENARIO, {'tolerances': 'torsion=1e-6,metricity=1e-7'})
    assert config.tolerances == {'torsion': 1e-6, 'metricity': 1e-7}


def test_environment_settings(monkeypatch):
    """Test OPTCONN_* variables, with malformed values falling back"""
    monkeypatch.setenv('OPTCONN_WORKERS', '3')
    monkeypatch.setenv('OPTCONN_FD_STEP', 'not-a-number')
    monkeypatch.setenv('OPTCONN_OUTPUT_FORMAT', 'text')
    settings = config_service.settings()
    assert settings.workers == 3
    assert settings.fd_step == 1e-5
    assert settings.output_format == 'text'
    assert parse_config(DEFAULT_SCENARIO).workers == 3


@pytest.mark.parametrize('name', ['d0', 'sigma_exp_t', 'gamma_x1', 'warped', 'conformal'])
def test_shipped_scenarios_load(name):
    """Test every scenario file in scenarios/ validates"""
    config = load_config(str(SCENARIO_DIR / f'{name}.yaml'))
    assert config.n == 4
    assert config.points()


# ============================================
# RUNS AND REPORTS
# ============================================

def test_run_report_order():
    """Test records come in fixed order with timing last"""
    config = parse_config(DEFAULT_SCENARIO, {'tables': ['theorem', 'oracle']})
    records = report_service.records(run(config))
    kinds = [r['record'] for r in records]
    assert kinds[0] == 'scenario'
    assert kinds[-2:] == ['summary', 'timing']
    assert kinds.count('christoffel') == 2 * 64 * 9
    assert kinds.count('deviation') == 9
    summary = records[-2]
    assert summary['pass'] is True
    assert summary['exit_code'] == 0


def test_main_point_table(capsys):
    """Test --point with --table theorem dumps the 64 entries and exits 0"""
    code = main(['--point', POINT_ARG, '--table', 'theorem'])
    records = _lines(capsys.readouterr().out)
    assert code == 0
    table = [r for r in records if r['record'] == 'christoffel']
    assert len(table) == 64
    entry = next(r for r in table if (r['A'], r['B'], r['C']) == ('E1', 'E2', 'q'))
    assert entry['value'] == pytest.approx(-0.5)


def test_main_fault_fails(capsys):
    """Test --fault sign-flip turns the run red"""
    code = main(['--point', POINT_ARG, '--fault', 'sign-flip'])
    records = _lines(capsys.readouterr().out)
    assert code == 1
    torsion = next(r for r in records if r['record'] == 'check' and r['check'] == 'torsion')
    assert torsion['pass'] is False
    assert torsion['worst_indices'] == ['E1', 'E2', 'q']


def test_main_missing_config(tmp_path):
    """Test an unreadable scenario file exits 2"""
    assert main(['--config', str(tmp_path / 'missing.yaml')]) == 2


def test_main_bad_tolerance():
    """Test a malformed --tolerance exits 2"""
    assert main(['--tolerance', 'torsion']) == 2


def test_main_evaluation_error(tmp_path):
    """Test a point the curvature stencil cannot reach exits 3"""
    assert main(['--point', '9.9995,0,0,0', '--curvature', '--output', str(tmp_path / 'r.jsonl')]) == 3


def test_reports_identical_except_timing(tmp_path):
    """Test two runs of the same scenario differ only in the timing record"""
    first, second = tmp_path / 'a.jsonl', tmp_path / 'b.jsonl'
    assert main(['--table', 'theorem', '--output', str(first)]) == 0
    assert main(['--table', 'theorem', '--output', str(second), '--workers', '1']) == 0
    a = first.read_text().splitlines()
    b = second.read_text().splitlines()
    assert json.loads(a[-1])['record'] == 'timing'
    assert a[:-1] == b[:-1]


def test_text_format(tmp_path):
    """Test the key=value text rendering"""
    path = tmp_path / 'report.txt'
    assert main(['--point', POINT_ARG, '--format', 'text', '--output', str(path)]) == 0
    lines = path.read_text().splitlines()
    assert lines[0].startswith('record=scenario ')
    assert any(line.startswith('record=check check=coframe-duality') for line in lines)
    assert lines[-1].startswith('record=timing seconds=')


def test_d0_scenario_passes(tmp_path):
    """Test the shipped D0 scenario passes every check"""
    output = tmp_path / 'd0.jsonl'
    assert main(['--config', str(SCENARIO_DIR / 'd0.yaml'), '--output', str(output)]) == 0
    records = _lines(output.read_text())
    assert records[-2]['record'] == 'summary'
    assert records[-2]['failed'] == []
    assert any(r['record'] == 'curvature' for r in records)


def test_generate_golden(tmp_path):
    """Test golden reports are written without timing and are reproducible"""
    from scripts.generate_golden import generate_golden

    (tmp_path / 'small.yaml').write_text(
        'base: {family: flat, dim: 2}\n'
        'params: {sigma: "exp(t)", alpha: "1", beta: "0", gamma: ["0", "0"]}\n'
        'points: {explicit: [[0.0, 0.0, 0.0, 0.0], [0.3, -0.2, 0.1, 0.5]]}\n'
    )
    assert generate_golden(tmp_path)
    golden = tmp_path / 'small.golden.jsonl'
    first = golden.read_text()
    records = _lines(first)
    assert records[0]['record'] == 'scenario'
    assert records[-1]['record'] == 'summary'
    assert all(r['record'] != 'timing' for r in records)

    assert generate_golden(tmp_path)
    assert golden.read_text() == first


def test_generate_golden_empty_directory(tmp_path):
    """Test an empty scenario directory reports failure"""
    from scripts.generate_golden import generate_golden

    assert not generate_golden(tmp_path)


@pytest.mark.parametrize('fault', ['bogus', 'flip:E9,E1,q', 'flip:xx^q', 'flip:E1,E2', 'flip:'])
def test_main_unknown_fault(fault, capsys):
    """Test an unknown fault, label or block exits 2 with a diagnostic"""
    assert main(['--point', POINT_ARG, '--fault', fault]) == 2
    assert 'fault' in capsys.readouterr().err


def test_unknown_fault_names_section():
    """Test the scenario parser rejects unknown faults under [fault]"""
    with pytest.raises(ConfigError) as excinfo:
        parse_config(DEFAULT_SCENARIO, {'fault': 'flip:E3,E1,q'})
    assert (excinfo.value.section, excinfo.value.key) == ('fault', 'fault')
    assert "'E3'" in str(excinfo.value)
    assert parse_config(DEFAULT_SCENARIO, {'fault': 'flip:pi^m'}).fault == 'flip:pi^m'


def test_main_unwritable_output(tmp_path):
    """Test a report path in a missing directory exits 2"""
    assert main(['--point', POINT_ARG, '--output', str(tmp_path / 'missing' / 'r.jsonl')]) == 2


def _reject_constant(name):
    raise ValueError(f"bare {name} in JSON output")


def test_non_finite_values_are_strict_json():
    """Test NaN and infinities are written as strings in both formats"""
    record = {'record': 'check', 'residual': float('nan'), 'worst': [float('inf'), -float('inf'), 1.5]}
    line = report_service.render([record], 'jsonl').strip()
    decoded = json.loads(line, parse_constant=_reject_constant)
    assert decoded['residual'] == 'NaN'
    assert decoded['worst'] == ['Infinity', '-Infinity', 1.5]
    text = report_service.render([record], 'text')
    assert 'residual="NaN"' in text


# ============================================
# GOLDEN REPORTS
# ============================================

GOLDEN_SCENARIOS = sorted(p.stem for p in (SCENARIO_DIR / 'golden').glob('*.yaml'))


def test_golden_scenarios_are_committed():
    """Test every golden scenario ships its golden report"""
    assert GOLDEN_SCENARIOS == ['d0_origin', 'sigma_exp_t_origin']
    for name in GOLDEN_SCENARIOS:
        assert (SCENARIO_DIR / 'golden' / f'{name}.golden.jsonl').exists()


@pytest.mark.parametrize('name', GOLDEN_SCENARIOS)
def test_report_matches_golden(name):
    """Test a fresh run reproduces the committed golden report, timing aside"""
    from scripts.generate_golden import compare_records, golden_records, read_golden

    scenario = SCENARIO_DIR / 'golden' / f'{name}.yaml'
    expected = read_golden(scenario.with_suffix('.golden.jsonl'))
    assert compare_records(expected, golden_records(scenario)) == []


def test_golden_comparison_reports_changes():
    """Test a changed entry, a changed verdict and a dropped record are all reported"""
    from scripts.generate_golden import compare_records, read_golden

    expected = read_golden(SCENARIO_DIR / 'golden' / 'd0_origin.golden.jsonl')
    changed = [dict(r) for r in expected]
    entry = next(r for r in changed if r['record'] == 'christoffel' and (r['A'], r['B'], r['C']) == ('E1', 'E2', 'q'))
    entry['value'] = 0.5
    changed[-1] = dict(changed[-1], **{'pass': False})
    problems = compare_records(expected, changed)
    assert len(problems) == 2
    assert any('value' in p for p in problems)
    assert compare_records(expected, changed[:-1])[0].startswith('record count')
    timing = {'record': 'timing', 'seconds': 1.0}
    assert compare_records(expected, expected + [timing]) == []


def test_golden_check_mode():
    """Test --check passes on the committed golden directory"""
    from scripts.generate_golden import main as golden_main

    assert golden_main(['--check']) == 0
