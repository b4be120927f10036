"""Inverse problems: sizing per-query budgets and noise for a composed target.

All logarithms are natural.  The closed-form recipes below are only claimed
for target eps in (0, 0.9]; outside it they raise rather than extrapolate.
"""

from __future__ import annotations

import dataclasses
import math

from dpcompozer.composition import simplified
from dpcompozer.region import EpsDelta

HIGH_PRIVACY_EPS = 0.9


class CalibrationError(ValueError):
  pass


def _check_high_privacy(target: EpsDelta) -> None:
  if not 0.0 < target.eps <= HIGH_PRIVACY_EPS:
    raise CalibrationError(
        f'eps={target.eps} is outside (0, {HIGH_PRIVACY_EPS}], the range in '
        'which the per-query recipe is valid')
  if not 0.0 < target.delta <= 1.0:
    raise CalibrationError(f'delta={target.delta} is outside (0, 1]')


def _check_k(k: int) -> None:
  if int(k) != k or k < 1:
    raise CalibrationError(f'k must be a positive integer, got {k}')


def _log_budget(target: EpsDelta) -> float:
  return math.log(math.e + target.eps / target.delta)


def per_query_budget(target: EpsDelta, k: int) -> EpsDelta:
  """(eps / sqrt(4k log(e + eps/delta)), delta / 2k) for each of k queries."""
  _check_high_privacy(target)
  _check_k(k)
  eps0 = target.eps / math.sqrt(4.0 * k * _log_budget(target))
  return EpsDelta(eps0, target.delta / (2.0 * k))


def default_split(target: EpsDelta, k: int) -> tuple[float, float]:
  """Per-query delta and composition slack that exactly exhaust ``target.delta``.

  Per-query delta is delta / 2k; the slack is the largest value with
  1 - (1 - delta0)^k (1 - slack) <= delta.
  """
  _check_k(k)
  delta0 = target.delta / (2.0 * k)
  slack = max_slack(target.delta, delta0, k)
  return delta0, slack


def max_slack(delta: float, delta0: float, k: int) -> float:
  """Largest slack with 1 - (1 - delta0)^k (1 - slack) <= delta."""
  if delta0 == 0:
    return delta
  if delta0 >= 1:
    return 0.0
  # (delta - (1 - keep)) / keep with 1 - keep from expm1, so the slack keeps
  # full relative precision when delta is tiny.
  log_keep = k * math.log1p(-delta0)
  spent = -math.expm1(log_keep)
  return max((delta - spent) / math.exp(log_keep), 0.0)


def laplace_variance(delta_sens: float, target: EpsDelta, k: int) -> float:
  """Laplace noise variance 8 k Delta^2 log(e + eps/delta) / eps^2."""
  _check_high_privacy(target)
  _check_k(k)
  if delta_sens <= 0:
    raise CalibrationError('sensitivity must be positive')
  return 8.0 * k * delta_sens**2 * _log_budget(target) / target.eps**2


def laplace_scale(variance: float) -> float:
  """Scale b of a Laplace law with the given variance (variance = 2 b^2)."""
  return math.sqrt(variance / 2.0)


def gaussian_variance(delta_sens: float, target: EpsDelta, k: int) -> float:
  """max(8 k Delta^2 log(e + eps/delta) / eps^2, k Delta^2 / (4 eps))."""
  _check_k(k)
  if target.eps <= 0:
    raise CalibrationError('eps must be positive')
  if not 0.0 < target.delta <= 1.0:
    raise CalibrationError(f'delta={target.delta} is outside (0, 1]')
  if delta_sens <= 0:
    raise CalibrationError('sensitivity must be positive')
  main = 8.0 * k * delta_sens**2 * _log_budget(target) / target.eps**2
  return max(main, k * delta_sens**2 / (4.0 * target.eps))


@dataclasses.dataclass(frozen=True)
class JLParams:
  """Johnson-Lindenstrauss cut-query mechanism parameters.

  ``tau`` is the additive error per unit of |S|; multiply by the size of the
  smaller side of the cut.
  """

  r: int
  w: float
  eps0: float
  delta0: float
  tau: float


def jl_rows(eta: float, nu: float) -> int:
  return math.ceil(8.0 * math.log(2.0 / nu) / eta**2)


def jl_params(target: EpsDelta, eta: float, nu: float,
              legacy: bool = False) -> JLParams:
  """Row count, noise weight and error for the JL mechanism.

  ``legacy`` selects the older per-row budget eps / sqrt(4 r log(2/delta))
  sized for the classical advanced-composition bound; the default uses
  eps / sqrt(4 r log(e + 2 eps/delta)).
  """
  if not (0.0 < eta < 1.0 and 0.0 < nu < 1.0):
    raise CalibrationError('eta and nu must lie in (0, 1)')
  if not 0.0 < target.eps < 1.0:
    raise CalibrationError(f'eps={target.eps} is outside (0, 1)')
  if not 0.0 < target.delta <= 1.0:
    raise CalibrationError(f'delta={target.delta} is outside (0, 1]')
  r = jl_rows(eta, nu)
  if legacy:
    log_term = math.log(2.0 / target.delta)
  else:
    log_term = math.log(math.e + 2.0 * target.eps / target.delta)
  eps0 = target.eps / math.sqrt(4.0 * r * log_term)
  delta0 = target.delta / (2.0 * r)
  w = 4.0 / eps0 * math.log(2.0 / delta0)
  return JLParams(r=r, w=w, eps0=eps0, delta0=delta0, tau=2.0 * eta * w)


def calibrate_eps0(target: EpsDelta, k: int, delta0: float,
                   slack_delta: float, tol: float = 1e-9) -> float:
  """Largest per-query eps0 whose closed-form composition meets ``target``.

  The closed-form eps grows strictly with eps0, so bisection is sound.  The
  returned value is the feasible end of the final bracket.
  """
  _check_k(k)
  if target.eps <= 0:
    raise CalibrationError('eps must be positive')
  if not (0.0 <= delta0 <= 1.0 and 0.0 < slack_delta < 1.0):
    raise CalibrationError('need delta0 in [0, 1] and slack in (0, 1)')
  composed = -math.expm1(k * math.log1p(-delta0) + math.log1p(-slack_delta))
  if composed > target.delta * (1.0 + 1e-12):
    raise CalibrationError(
        f'infeasible delta split: delta0={delta0}, slack={slack_delta} compose '
        f'to {composed} > {target.delta}')

  def fits(eps0: float) -> bool:
    return simplified(EpsDelta(eps0, delta0), k, slack_delta).eps <= target.eps

  lo, hi = 0.0, target.eps
  while fits(hi):
    lo, hi = hi, 2.0 * hi
    if hi > 1e6:
      raise CalibrationError('closed form never exceeds the target eps')
  while hi - lo > tol:
    mid = 0.5 * (lo + hi)
    if fits(mid):
      lo = mid
    else:
      hi = mid
  return lo


@dataclasses.dataclass(frozen=True)
class ForwardCheck:
  """A calibrated per-query guarantee pushed back through composition."""

  per_query: EpsDelta
  slack_delta: float
  composed: EpsDelta
  target: EpsDelta

  @property
  def passed(self) -> bool:
    return (self.composed.eps <= self.target.eps and
            self.composed.delta <= self.target.delta * (1.0 + 1e-12))


def forward_check(per_query: EpsDelta, k: int, target: EpsDelta,
                  slack_delta: float | None = None) -> ForwardCheck:
  """Compose ``per_query`` k times with the closed form and compare to target.

  Without an explicit slack, the largest one the delta budget allows is used.
  """
  if slack_delta is None:
    slack_delta = max_slack(target.delta, per_query.delta, k)
  if slack_delta <= 0:
    composed = EpsDelta(k * per_query.eps, 1.0)
  else:
    composed = simplified(per_query, k, min(slack_delta, 1.0 - 1e-16))
  return ForwardCheck(per_query, slack_delta, composed, target)
