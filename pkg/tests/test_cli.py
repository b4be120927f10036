import csv
import io
import json
import math
import subprocess
import sys

import pytest

from dpcompozer import cli
from dpcompozer.composition import optimal_region
from dpcompozer.region import EpsDelta, boundary


def run(capsys, *argv):
  code = cli.main(list(argv))
  out = capsys.readouterr()
  return code, out.out, out.err


class TestRegion:

  def test_csv_three_fold(self, capsys):
    code, out, _ = run(capsys, 'region', '--eps', '0.4', '--delta', '0',
                       '--k', '3', '--format', 'csv')
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ['pmd', 'pfa']
    got = [(float(r['pmd']), float(r['pfa'])) for r in rows]
    want = [v.as_tuple() for v in boundary(optimal_region(EpsDelta(0.4, 0), 3))]
    assert got == want
    assert [x for x, _ in got] == sorted(x for x, _ in got)

  def test_no_privacy_loss(self, capsys):
    _, out, _ = run(capsys, 'region', '--eps', '0', '--delta', '0')
    assert out.splitlines() == ['pmd,pfa', '0,1', '1,0']

  def test_json_schema_round_trips(self, capsys, tmp_path):
    path = tmp_path / 'r.json'
    code, _, _ = run(capsys, 'region', '--eps', '0.3', '--delta', '0.01',
                     '--k', '4', '--format', 'json', '-o', str(path))
    assert code == 0
    doc = json.loads(path.read_text())
    assert set(doc) == {'params', 'vertices', 'lines'}
    assert doc['params'] == {'eps': 0.3, 'delta': 0.01, 'k': 4}
    region = optimal_region(EpsDelta(0.3, 0.01), 4)
    assert [(v['pmd'], v['pfa']) for v in doc['vertices']] == [
        v.as_tuple() for v in boundary(region)]
    assert [(l['eps'], l['delta']) for l in doc['lines']] == [
        (l.eps, l.delta) for l in region.lines]

  def test_domain_error(self, capsys):
    code, out, err = run(capsys, 'region', '--eps', '-1', '--delta', '0')
    assert code == 1 and out == '' and 'eps' in err

  def test_usage_error(self, capsys):
    with pytest.raises(SystemExit) as exc:
      cli.main(['region', '--eps', 'x', '--delta', '0'])
    assert exc.value.code == 2


class TestCompose:

  def test_figure_parameters(self, capsys):
    code, out, _ = run(capsys, 'compose', '--eps', '0.1', '--delta', '0.001',
                       '--k', '30', '--slack', '0.01', '--method', 'all',
                       '--format', 'json')
    assert code == 0
    doc = json.loads(out)
    assert doc['slack_delta'] == 0.01 and not doc['slack_defaulted']
    eps = {r['method']: r['eps'] for r in doc['reports']}
    assert eps['simplified'] == pytest.approx(1.7090, abs=1e-4)
    assert eps['drv'] == pytest.approx(1.9778, abs=1e-4)
    assert eps['basic'] == pytest.approx(3.0)
    assert eps['optimal'] < eps['simplified'] < eps['drv'] < eps['basic']

  def test_single_query_basic_echoes(self, capsys):
    code, out, _ = run(capsys, 'compose', '--eps', '0.25', '--delta', '0.01',
                       '--k', '1', '--method', 'basic')
    assert code == 0
    row = out.splitlines()[-1].split()
    assert row == ['basic', '0.25', '0.01']

  def test_default_slack_is_echoed(self, capsys):
    _, out, _ = run(capsys, 'compose', '--eps', '0.01', '--delta', '0',
                    '--k', '16')
    assert out.splitlines()[0] == 'slack_delta = 0.040000000000000001 (default)'

  def test_steps_file(self, capsys, tmp_path):
    path = tmp_path / 'steps.json'
    path.write_text(json.dumps([{'eps': 0.1, 'delta': 0}, {'eps': 0.2,
                                                            'delta': 0}]))
    code, out, _ = run(capsys, 'compose', '--steps', str(path), '--slack',
                       '0.05', '--method', 'heterogeneous', '--format', 'json')
    assert code == 0
    (report,) = json.loads(out)['reports']
    assert report['eps'] == pytest.approx(0.3)

  def test_bad_steps_file(self, capsys, tmp_path):
    path = tmp_path / 'steps.json'
    path.write_text('{"eps": 0.1}')
    code, _, err = run(capsys, 'compose', '--steps', str(path))
    assert code == 1 and 'list' in err

  def test_method_validity_message(self, capsys):
    code, _, err = run(capsys, 'compose', '--eps', '0.1', '--delta', '0.001',
                       '--k', '3', '--slack', '1.5')
    assert code == 1 and 'slack' in err


class TestCalibrate:

  def _json(self, capsys, *argv):
    code, out, err = run(capsys, 'calibrate', *argv)
    assert code == 0, err
    return json.loads(out)

  def test_gaussian(self, capsys):
    doc = self._json(capsys, '--mechanism', 'gaussian', '--eps', '0.5',
                     '--delta', '0.01', '--k', '25', '--sensitivity', '1')
    assert doc['variance'] == pytest.approx(3171.97, abs=0.01)
    assert doc['forward_check']['passed']

  def test_budget(self, capsys):
    doc = self._json(capsys, '--mechanism', 'budget', '--eps', '0.5',
                     '--delta', '0.01', '--k', '25')
    assert doc['eps0'] == pytest.approx(0.025111, abs=1e-6)
    assert doc['delta0'] == pytest.approx(2e-4)
    assert doc['forward_check']['passed']

  def test_laplace(self, capsys):
    doc = self._json(capsys, '--mechanism', 'laplace', '--eps', '0.5',
                     '--delta', '0.01', '--k', '25')
    assert doc['scale'] == pytest.approx(math.sqrt(doc['variance'] / 2))
    assert doc['forward_check']['passed']

  def test_jl(self, capsys):
    doc = self._json(capsys, '--mechanism', 'jl', '--eps', '0.5', '--delta',
                     '0.01', '--eta', '0.5', '--nu', '0.1')
    assert doc['r'] == 96 and doc['tau'] == pytest.approx(doc['w'])
    assert doc['forward_check']['passed']

  def test_range_error_names_range(self, capsys):
    code, _, err = run(capsys, 'calibrate', '--mechanism', 'budget', '--eps',
                       '2', '--delta', '0.1', '--k', '3')
    assert code == 1 and '(0, 0.9]' in err


class TestSimulate:

  def test_small_run_is_undetermined(self, capsys):
    code, out, _ = run(capsys, 'simulate', '--eps', '0.1', '--delta', '0.001',
                       '--k', '30', '--trials', '10', '--seed', '1')
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == 'threshold,pmd,pfa,ci'
    assert lines[-1].startswith('# verdict: UNDETERMINED')

  def test_pass_and_byte_identical(self, capsys):
    argv = ['simulate', '--eps', '0.2', '--delta', '0.01', '--k', '5',
            '--trials', '5000', '--seed', '3']
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    assert first.splitlines()[-1].startswith('# verdict: PASS')

  def test_explicit_thresholds(self, capsys):
    _, out, _ = run(capsys, 'simulate', '--eps', '0.4', '--delta', '0',
                    '--k', '3', '--trials', '2000', '--thresholds',
                    '0.8,-0.8,0')
    thresholds = [float(l.split(',')[0]) for l in out.splitlines()[1:-1]]
    assert thresholds == [-0.8, 0.0, 0.8]

  def test_geometric_needs_pure(self, capsys):
    code, _, err = run(capsys, 'simulate', '--mechanism', 'geometric',
                       '--eps', '0.4', '--delta', '0.1', '--k', '3',
                       '--trials', '2000')
    assert code == 1 and 'pure' in err


def test_module_entry_point():
  proc = subprocess.run(
      [sys.executable, '-m', 'dpcompozer', 'region', '--eps', '0',
       '--delta', '0'], capture_output=True, text=True, check=False)
  assert proc.returncode == 0 and proc.stdout.splitlines()[1] == '0,1'
