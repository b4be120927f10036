import itertools
import math

import mpmath as mp
import pytest

from dpcompozer.calibration import (CalibrationError, calibrate_eps0,
                                    default_split, forward_check,
                                    gaussian_variance, jl_params, jl_rows,
                                    laplace_scale, laplace_variance, max_slack,
                                    per_query_budget)
from dpcompozer.composition import simplified
from dpcompozer.mechanisms import (GaussianCurve, MechanismSpec, discretize,
                                   gaussian_delta)
from dpcompozer.region import EpsDelta
from dpcompozer.tradeoff import verify_dp

TARGET = EpsDelta(0.5, 0.01)
SWEEP = list(itertools.product([0.1, 0.5, 0.9], [1e-2, 1e-4, 1e-6],
                               [1, 10, 100]))


def mp_log_budget(eps, delta):
  return mp.log(mp.e + mp.mpf(eps) / mp.mpf(delta))


class TestPerQueryBudget:

  def test_golden(self):
    got = per_query_budget(TARGET, 25)
    want = mp.mpf('0.5') / mp.sqrt(100 * mp_log_budget(0.5, 0.01))
    assert got.eps == pytest.approx(float(want), rel=1e-14)
    assert got.eps == pytest.approx(0.025111, abs=1e-6)
    assert got.delta == pytest.approx(2e-4, rel=1e-15)

  def test_single_query(self):
    got = per_query_budget(EpsDelta(0.9, 0.01), 1)
    assert got.eps == pytest.approx(0.9 / math.sqrt(4 * math.log(math.e + 90)))

  def test_forward_check(self):
    check = forward_check(per_query_budget(TARGET, 25), 25, TARGET)
    assert check.passed
    assert check.composed.eps <= 0.5
    assert check.composed.delta <= 0.01 * (1 + 1e-12)

  def test_root_two_slack_overshoots_delta(self):
    # slack = delta / sqrt(2) with delta0 = delta / 2k composes to about
    # 1.2 delta, so the forward check has to use a smaller slack.
    per_query = per_query_budget(TARGET, 25)
    composed = simplified(per_query, 25, 0.01 / math.sqrt(2))
    assert composed.eps <= 0.5
    assert composed.delta == pytest.approx(0.012024, abs=1e-6)
    assert not forward_check(per_query, 25, TARGET, 0.01 / math.sqrt(2)).passed

  @pytest.mark.parametrize('eps', [0.0, 0.95, 2.0])
  def test_validity_range(self, eps):
    with pytest.raises(CalibrationError, match='0.9'):
      per_query_budget(EpsDelta(eps, 0.01), 5)

  @pytest.mark.parametrize('eps,delta,k', SWEEP)
  def test_soundness_sweep(self, eps, delta, k):
    target = EpsDelta(eps, delta)
    assert forward_check(per_query_budget(target, k), k, target).passed


class TestSplit:

  def test_default_split_exhausts_delta(self):
    delta0, slack = default_split(TARGET, 25)
    assert delta0 == pytest.approx(2e-4)
    total = 1 - (1 - delta0)**25 * (1 - slack)
    assert total == pytest.approx(0.01, abs=1e-15)
    assert slack == pytest.approx(0.005037, abs=1e-6)

  def test_no_room(self):
    assert max_slack(0.01, 0.01, 2) == 0.0
    assert max_slack(0.01, 0.0, 5) == 0.01


class TestLaplace:

  def test_golden(self):
    got = laplace_variance(1.0, TARGET, 25)
    want = 8 * 25 * mp_log_budget(0.5, 0.01) / mp.mpf('0.25')
    assert got == pytest.approx(float(want), rel=1e-14)
    assert got == pytest.approx(3171.97, abs=0.01)

  def test_single_query_vacuous_delta(self):
    got = laplace_variance(1.0, EpsDelta(0.9, 1.0), 1)
    assert got == pytest.approx(8 * math.log(math.e + 0.9) / 0.81)

  def test_scale(self):
    assert laplace_scale(8.0) == 2.0

  def test_discretized_per_query_is_dp(self):
    b = laplace_scale(laplace_variance(1.0, TARGET, 25))
    pair = discretize(MechanismSpec.laplace(1.0, b), -30 * b, 30 * b + 1, 4096)
    assert verify_dp(pair, per_query_budget(TARGET, 25))

  @pytest.mark.parametrize('eps,delta,k', SWEEP)
  def test_soundness_sweep(self, eps, delta, k):
    target = EpsDelta(eps, delta)
    b = laplace_scale(laplace_variance(1.0, target, k))
    assert forward_check(EpsDelta(1.0 / b, 0.0), k, target).passed


class TestGaussian:

  def test_first_term_dominates(self):
    got = gaussian_variance(1.0, TARGET, 25)
    assert got == laplace_variance(1.0, TARGET, 25)

  def test_second_term_for_huge_eps(self):
    got = gaussian_variance(1.0, EpsDelta(1e4, 0.5), 100)
    assert got == pytest.approx(100 / (4 * 1e4))

  @pytest.mark.parametrize('eps', [0.1, 0.5, 1.0])
  @pytest.mark.parametrize('delta', [1e-2, 1e-4])
  @pytest.mark.parametrize('k', [1, 10, 100])
  def test_exact_curve_meets_target(self, eps, delta, k):
    var = gaussian_variance(1.0, EpsDelta(eps, delta), k)
    curve = GaussianCurve.from_mechanism(1.0, math.sqrt(var), k)
    assert gaussian_delta(curve, eps) <= delta

  def test_rejects_bad_input(self):
    with pytest.raises(CalibrationError):
      gaussian_variance(0.0, TARGET, 5)
    with pytest.raises(CalibrationError):
      gaussian_variance(1.0, EpsDelta(0.0, 0.1), 5)


class TestJL:

  def test_rows(self):
    assert jl_rows(0.5, 0.1) == 96
    assert 8 * math.log(20) / 0.25 == pytest.approx(95.86, abs=0.01)

  def test_params(self):
    p = jl_params(TARGET, 0.5, 0.1)
    assert p.r == 96
    assert p.delta0 == pytest.approx(0.01 / 192)
    assert p.w == pytest.approx(4 / p.eps0 * math.log(2 / p.delta0))
    assert p.tau == pytest.approx(2 * 0.5 * p.w)

  def test_composes_to_target(self):
    p = jl_params(TARGET, 0.5, 0.1)
    assert forward_check(EpsDelta(p.eps0, p.delta0), p.r, TARGET).passed

  @pytest.mark.parametrize('eps', [0.1, 0.5, 0.9])
  @pytest.mark.parametrize('delta', [1e-2, 1e-4, 1e-6])
  def test_improved_beats_legacy(self, eps, delta):
    target = EpsDelta(eps, delta)
    assert (jl_params(target, 0.5, 0.1).w <=
            jl_params(target, 0.5, 0.1, legacy=True).w)

  def test_ranges(self):
    with pytest.raises(CalibrationError):
      jl_params(TARGET, 1.5, 0.1)
    with pytest.raises(CalibrationError):
      jl_params(EpsDelta(1.0, 0.01), 0.5, 0.1)


class TestCalibrateEps0:

  def test_golden_feasible_split(self):
    delta0, slack = default_split(TARGET, 25)
    got = calibrate_eps0(TARGET, 25, delta0, slack)
    assert got == pytest.approx(0.0358453, abs=1e-6)
    assert simplified(EpsDelta(got, delta0), 25, slack).eps <= 0.5
    assert simplified(EpsDelta(got + 2e-9, delta0), 25, slack).eps > 0.5

  def test_root_two_split_is_infeasible(self):
    with pytest.raises(CalibrationError, match='infeasible'):
      calibrate_eps0(TARGET, 25, 0.01 / 50, 0.01 / math.sqrt(2))

  def test_single_query_limit(self):
    got = calibrate_eps0(EpsDelta(0.3, 0.01), 1, 0.01, 1e-15)
    assert got == pytest.approx(0.3, abs=1e-9)

  @pytest.mark.parametrize('eps,delta,k', SWEEP)
  def test_at_least_closed_form_budget(self, eps, delta, k):
    target = EpsDelta(eps, delta)
    delta0, slack = default_split(target, k)
    got = calibrate_eps0(target, k, delta0, slack)
    assert got >= per_query_budget(target, k).eps
    assert forward_check(EpsDelta(got, delta0), k, target, slack).passed

  def test_nonincreasing_in_k_and_target(self):
    values = []
    for k in (1, 5, 25, 100):
      values.append(calibrate_eps0(TARGET, k, *default_split(TARGET, k)))
    assert values == sorted(values, reverse=True)
    loose = calibrate_eps0(EpsDelta(0.8, 0.01), 25, *default_split(TARGET, 25))
    assert loose >= values[2]
