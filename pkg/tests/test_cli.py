import csv
import os
import re

import pytest

from ns3l_lab.diffcore.ops import OPS, OpRule
from ns3l_lab.main import EXIT_ERROR, EXIT_GRADCHECK, main
from ns3l_lab.utils.config_io import emit_config


@pytest.fixture
def config_file(tmp_path, small_config):
    path = tmp_path / 'run.cfg'
    path.write_text(emit_config(small_config.with_overrides(method='ns3l')))
    return str(path)


def _rows(path):
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.reader(handle))


def test_train_then_eval_agree(tmp_path, config_file, capsys):
    out = str(tmp_path / 'out')
    assert main(['train', '--config', config_file, '--out', out]) == 0
    trained = capsys.readouterr().out
    for name in ('config.txt', 'metrics_seed0.csv', 'checkpoint_seed0.ns3l'):
        assert os.path.isfile(os.path.join(out, name))
    assert _rows(os.path.join(out, 'metrics_seed0.csv'))[0] == ['step', 'term', 'value']

    checkpoint = os.path.join(out, 'checkpoint_seed0.ns3l')
    assert main(['eval', '--config', config_file, '--checkpoint', checkpoint]) == 0
    evaluated = capsys.readouterr().out
    train_error = re.search(r'seed 0: test error (\d\.\d{4})', trained).group(1)
    eval_error = re.search(r'test error (\d\.\d{4})', evaluated).group(1)
    assert train_error == eval_error


def test_train_over_seeds_reports_spread(tmp_path, config_file, capsys):
    out = str(tmp_path / 'out')
    assert main(['train', '--config', config_file, '--out', out, '--seeds', '2', '--steps', '20']) == 0
    printed = capsys.readouterr().out
    assert 'seed 0:' in printed and 'seed 1:' in printed
    assert '±' in printed
    assert 'over 2 seed(s)' in printed
    assert os.path.isfile(os.path.join(out, 'metrics_seed1.csv'))


def test_missing_dataset_fails_without_outputs(tmp_path):
    out = tmp_path / 'out'
    config = tmp_path / 'csv.cfg'
    config.write_text(f'dataset = csv\ndata_path = {tmp_path / "missing.csv"}\n')
    assert main(['train', '--config', str(config), '--out', str(out)]) == EXIT_ERROR
    assert not out.exists()


def test_bad_config_key_fails(tmp_path):
    config = tmp_path / 'bad.cfg'
    config.write_text('lamda1 = 1\n')
    assert main(['train', '--config', str(config), '--out', str(tmp_path / 'out')]) == EXIT_ERROR


def test_gradcheck_lists_every_loss(capsys):
    assert main(['gradcheck', '--instances', '2']) == 0
    printed = capsys.readouterr().out
    for name in ('supervised_ce', 'ns3l_loss', 'vat_loss', 'mixmatch_objective', 'combined_objective'):
        assert printed.count(f'{name} ') == 1
    assert 'FAILED' not in printed


def test_gradcheck_flags_a_wrong_rule(monkeypatch, capsys):
    rule = OPS['log']
    monkeypatch.setitem(OPS, 'log', OpRule(rule.arity, rule.forward, lambda g, i, o: (2.0 * g / i[0],), rule.check))
    assert main(['gradcheck', '--instances', '1']) == EXIT_GRADCHECK
    failed = [line for line in capsys.readouterr().out.splitlines() if 'FAILED' in line]
    assert any(line.startswith('ns3l_loss') for line in failed)


def test_demo_toy_writes_boundaries(tmp_path, capsys):
    out = str(tmp_path / 'toy')
    assert main(['demo-toy', '--out', out, '--steps', '60']) == 0
    rows = _rows(os.path.join(out, 'toy_boundaries.csv'))
    assert rows[0] == ['seed', 'step', 'method', 'boundary']
    assert {row[2] for row in rows[1:]} == {'supervised', 'ns3l'}
    assert 'mean |w - w*|' in capsys.readouterr().out


def test_sweep_writes_the_grid(tmp_path, config_file):
    out = str(tmp_path / 'sweep')
    args = ['sweep', '--config', config_file, '--out', out, '--T-grid', '0.04', '0.1', '--lambda1-grid', '0.5', '1']
    assert main(args + ['--steps', '20']) == 0
    rows = _rows(os.path.join(out, 'sweep.csv'))
    assert rows[0] == ['T', 'lambda1', 'test_error']
    assert len(rows) == 5
    control = _rows(os.path.join(out, 'sweep_control.csv'))
    assert [row[0] for row in control[1:]] == ['supervised', 'ns3l_lambda1_0']


def test_compare_methods_writes_one_row_per_method(tmp_path, config_file, capsys):
    out = str(tmp_path / 'compare')
    args = ['compare', '--config', config_file, '--out', out, '--methods', 'supervised', 'ns3l', '--steps', '20']
    assert main(args) == 0
    rows = _rows(os.path.join(out, 'methods.csv'))
    assert rows[0] == ['run', 'test_error', 'test_std']
    assert [row[0] for row in rows[1:]] == ['supervised', 'ns3l']
    assert 'ns3l ' in capsys.readouterr().out


def test_compare_negselect_skips_strategies_the_classes_cannot_support(tmp_path, config_file):
    out = str(tmp_path / 'negselect')
    assert main(['compare', '--negselect', '--config', config_file, '--out', out, '--steps', '20']) == 0
    names = [row[0] for row in _rows(os.path.join(out, 'negselect.csv'))[1:]]
    assert names == ['threshold', 'uniform-1', 'nn-exclude-1', 'furthest-nn', 'oracle-1']
