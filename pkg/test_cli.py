"""
Тесты командной строки: коды выхода, отчёты и слияние конфигурации.
"""

import json
from unittest.mock import patch

import pytest
import yaml

from app.modules.afc_types import ConfigError, Experiment, Variant
from app.modules.cli import ExperimentConfig, main


FAST = ['--size', '16', '--samples', '3']


def run(capsys, *argv):
    """Запуск main; возвращает код выхода, stdout и stderr."""
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_verify_spectral_passes(capsys):
    code, out, err = run(capsys, 'verify-spectral', '--sizes', '2', '3', '8', '15', '--trials', '5')
    assert code == 0
    report = json.loads(out)
    assert report['schema'] == 1
    assert report['experiment'] == 'verify-spectral'
    assert report['passed'] is True
    names = {check['check'] for check in report['results']['checks']}
    assert {'mask:lowpass', 'mask:upsample', 'dft', 'upsample', 'fractional_shift', 'alias_free_poly'} <= names
    assert 'verify-spectral: passed' in err


def test_default_experiment_is_verify_spectral(capsys):
    code, out, _ = run(capsys, '--sizes', '2', '--trials', '2')
    assert code == 0
    assert json.loads(out)['experiment'] == 'verify-spectral'


def test_corrupted_kernel_fails(capsys):
    """Испорченная маска ФНЧ даёт код 1 и имя проверки в stderr."""
    code, out, err = run(capsys, 'verify-spectral', '--sizes', '4', '--trials', '2', '--corrupt-kernel', 'lowpass')
    assert code == 1
    assert 'FAILED:' in err
    assert 'mask:lowpass' in err
    report = json.loads(out)
    assert report['passed'] is False
    assert report['failed'] == ['mask:lowpass']
    failure = report['results']['failures'][0]
    assert failure['check'] == 'mask:lowpass'


def test_reports_are_deterministic(capsys, tmp_path):
    first = tmp_path / 'first.json'
    second = tmp_path / 'second.json'
    for path in (first, second):
        code, out, _ = run(capsys, 'consistency', *FAST, '--grid', 'half:2', '--out', str(path))
        assert code == 0
        assert out == ''
    assert first.read_bytes() == second.read_bytes()


def test_equivariance_csv(capsys):
    code, out, _ = run(capsys, 'equivariance', *FAST, '--format', 'csv')
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == 'layer,variant,mean_diff'
    variants = {line.split(',')[1] for line in lines[1:]}
    assert variants == {'baseline', 'afc'}
    for line in lines[1:]:
        layer, variant, value = line.split(',')
        if variant == 'afc':
            assert float(value) < 1e-4


def test_equivariance_zero_delta(capsys):
    code, out, _ = run(capsys, 'equivariance', *FAST, '--delta', '0/1,0/1')
    assert code == 0
    report = json.loads(out)
    for variant in ('baseline', 'afc'):
        assert all(row['mean_diff'] == 0.0 for row in report['results'][variant]['layers'])


def test_baseline_equivariance_is_reported_not_asserted(capsys):
    code, out, _ = run(capsys, 'equivariance', *FAST, '--variant', 'baseline')
    assert code == 0
    report = json.loads(out)
    assert report['config']['variants'] == ['baseline']
    assert report['results']['baseline']['max_diff'] > 0.05


def test_consistency(capsys):
    code, out, _ = run(capsys, 'consistency', *FAST, '--grid', 'frac:3')
    assert code == 0
    results = json.loads(out)['results']
    assert results['afc']['consistency'] == 1.0
    assert len(results['afc']['shifts']) == 3
    assert results['afc']['shifts'] == results['baseline']['shifts']


def test_adversarial(capsys):
    code, out, _ = run(capsys, 'adversarial', *FAST, '--grid', 'half:1')
    assert code == 0
    results = json.loads(out)['results']
    assert results['afc']['adversarial_accuracy'] == results['afc']['clean_accuracy']
    assert results['baseline']['adversarial_accuracy'] <= results['baseline']['clean_accuracy']
    assert len(results['labels']) == 3


def test_gradcheck(capsys):
    code, out, _ = run(capsys, 'gradcheck', '--cases', '5')
    assert code == 0
    checks = json.loads(out)['results']['checks']
    assert checks[0]['check'] == 'poly_coeff_gradient'
    assert checks[0]['cases'] == 5


def test_ablation(capsys):
    code, out, _ = run(capsys, 'ablation', *FAST, '--grid', 'integer:1', '--format', 'csv')
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == 'variant,integer_consistency,half_consistency'
    assert [line.split(',')[0] for line in lines[1:]] == [variant.value for variant in Variant]
    afc = lines[-1].split(',')
    assert float(afc[1]) == 1.0
    assert float(afc[2]) == 1.0


def test_unknown_yaml_key(capsys, tmp_path):
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump({'seed': 1, 'colour': 'red'}), encoding='utf-8')
    code, out, err = run(capsys, 'consistency', '--config', str(path))
    assert code == 2
    assert out == ''
    assert f"{path}: colour: " in err


def test_invalid_network_in_yaml(capsys, tmp_path):
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump({'network': {'image_size': 20}}), encoding='utf-8')
    code, _, err = run(capsys, 'equivariance', '--config', str(path))
    assert code == 2
    assert f"{path}: network.image_size: " in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, '--config', str(tmp_path / 'absent.yaml'))
    assert code == 2
    assert 'absent.yaml' in err


def test_invalid_flag_value(capsys):
    code, _, err = run(capsys, 'consistency', '--grid', 'frac:0')
    assert code == 2
    assert '<flags>: grid: ' in err


def test_flags_override_yaml(capsys, tmp_path):
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump({
        'experiment': 'consistency',
        'seed': 3,
        'samples': 2,
        'grid': 'integer:1',
        'network': {'image_size': 32, 'widths': [4, 8]},
    }), encoding='utf-8')
    code, out, _ = run(capsys, '--config', str(path), '--seed', '5', '--size', '16')
    assert code == 0
    config = json.loads(out)['config']
    assert config['experiment'] == 'consistency'
    assert config['seed'] == 5
    assert config['samples'] == 2
    assert config['network']['image_size'] == 16
    assert config['network']['widths'] == [4, 8]


def test_experiment_config_defaults():
    config = ExperimentConfig()
    assert config.experiment is Experiment.VERIFY_SPECTRAL
    assert config.variants == (Variant.BASELINE, Variant.AFC)
    assert str(config.delta) == '1/2,1/2'
    assert len(config.shift_grid) == 36
    assert config.spec_for(Variant.POLY).variant is Variant.POLY


def test_experiment_config_errors():
    with pytest.raises(ConfigError) as error:
        ExperimentConfig.from_dict({'samples': 0}, path='run.yaml')
    assert error.value.key == 'samples'
    assert error.value.path == 'run.yaml'
    with pytest.raises(ConfigError) as error:
        ExperimentConfig.from_dict({'variants': ['resnet']})
    assert error.value.key == 'variants'


def test_unwritable_report(capsys):
    """Ошибка записи отчёта - ошибка конфигурации ключа out."""
    denied = PermissionError(13, 'Permission denied')
    with patch('app.modules.cli.Path.write_text', side_effect=denied):
        code, out, err = run(capsys, 'gradcheck', '--cases', '1', '--out', 'report.json')
    assert code == 2
    assert out == ''
    assert 'report.json: out: Permission denied' in err
