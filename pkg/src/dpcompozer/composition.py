"""Privacy guarantees of k-fold adaptive composition.

Five accountants are provided, from loosest to tightest:

* :func:`basic` sums eps and delta.
* :func:`drv` is the classical advanced-composition bound with slack.
* :func:`simplified` and :func:`heterogeneous` are closed-form outer bounds
  of the exact region.
* :func:`optimal_region` is the exact region of k-fold composition of
  (eps, delta)-DP mechanisms; :func:`optimal_delta_at` and
  :func:`optimal_eps_for_delta` read guarantees off it.

:func:`compare` runs every applicable method on one query.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Optional, Sequence

import numpy as np
from scipy import special

from dpcompozer.region import (EPS_CAP, EpsDelta, PrivacyRegion, boundary,
                               contains_region, region_from_eps_delta,
                               region_from_lines)


class Method(str, enum.Enum):
  BASIC = 'basic'
  DRV = 'drv'
  OPTIMAL = 'optimal'
  SIMPLIFIED = 'simplified'
  HETEROGENEOUS = 'heterogeneous'


def _check_k(k: int) -> None:
  if int(k) != k or k < 1:
    raise ValueError(f'k must be a positive integer, got {k}')


def _keep_prob(delta: float, k: float) -> float:
  """(1 - delta)^k, i.e. probability that none of k delta-events fires."""
  if delta >= 1.0:
    return 0.0
  return math.exp(k * math.log1p(-delta))


def default_slack(eps: float, k: int) -> float:
  """min(sqrt(k eps^2), 1/2): slack of the order the closed forms favour."""
  return min(math.sqrt(k) * eps, 0.5)


def basic(g: EpsDelta, k: int) -> EpsDelta:
  _check_k(k)
  return EpsDelta(k * g.eps, min(k * g.delta, 1.0))


def drv(g: EpsDelta, k: int, slack_delta: float) -> EpsDelta:
  """k eps (e^eps - 1) + eps sqrt(2k log(1/slack)), at delta k delta + slack."""
  _check_k(k)
  if not 0.0 < slack_delta <= 1.0:
    raise ValueError(f'slack_delta must be in (0, 1], got {slack_delta}')
  eps = g.eps
  value = k * eps * math.expm1(eps) + eps * math.sqrt(
      2.0 * k * math.log(1.0 / slack_delta))
  return EpsDelta(value, min(k * g.delta + slack_delta, 1.0))


def optimal_deltas(eps: float, k: int) -> np.ndarray:
  """delta_i for i = 0..floor(k/2) at per-step delta = 0.

  With X ~ Binomial(k, e^eps / (1 + e^eps)),
      delta_i = sum_{l < i} P(X = k - l) (1 - e^{-2 (i - l) eps}),
  evaluated in log space so (1 + e^eps)^k never materializes.  The second
  sum is rebuilt as e^{-2 i eps} sum_{l < i} P(X = k - l) e^{2 l eps} with a
  running log-sum-exp.
  """
  _check_k(k)
  n = k // 2 + 1
  if eps == 0.0:
    return np.zeros(n)
  ells = np.arange(n - 1, dtype=float)
  log_pmf = (special.gammaln(k + 1) - special.gammaln(ells + 1) -
             special.gammaln(k - ells + 1) + (k - ells) * eps -
             k * np.logaddexp(0.0, eps))
  out = np.zeros(n)
  if n == 1:
    return out
  head = np.cumsum(np.exp(log_pmf))
  log_weighted = np.logaddexp.accumulate(log_pmf + 2.0 * ells * eps)
  i = np.arange(1, n, dtype=float)
  out[1:] = head - np.exp(log_weighted - 2.0 * i * eps)
  return np.clip(out, 0.0, 1.0)


def optimal_lines(g: EpsDelta, k: int) -> list[EpsDelta]:
  """The floor(k/2) + 1 supporting lines ((k - 2i) eps, 1 - (1-delta)^k (1-delta_i))."""
  _check_k(k)
  keep = _keep_prob(g.delta, k)
  if g.eps == 0.0:
    return [EpsDelta(0.0, 1.0 - keep)]
  deltas = optimal_deltas(g.eps, k)
  return [
      EpsDelta(min((k - 2 * i) * g.eps, EPS_CAP),
               min(max(1.0 - keep * (1.0 - d), 0.0), 1.0))
      for i, d in enumerate(deltas)
  ]


def optimal_region(g: EpsDelta, k: int) -> PrivacyRegion:
  """Exact privacy region of k-fold adaptive composition.

  Lines with slope exponent beyond 50 are clipped to 50; at that point e^eps
  no longer changes the constraint in double precision.
  """
  return region_from_lines(optimal_lines(g, k))


def optimal_delta_at(g: EpsDelta, k: int, target_eps: float) -> float:
  """Smallest delta with optimal_region(g, k) inside R(target_eps, delta)."""
  if target_eps < 0:
    raise ValueError(f'target_eps must be nonnegative, got {target_eps}')
  return _support_delta(boundary(optimal_region(g, k)), target_eps)


def _support_delta(vertices, target_eps: float) -> float:
  scale = math.exp(min(target_eps, 700.0))
  worst = 0.0
  for v in vertices:
    worst = max(worst, 1.0 - v.pfa - scale * v.pmd,
                1.0 - v.pmd - scale * v.pfa)
  return min(max(worst, 0.0), 1.0)


def optimal_eps_for_delta(g: EpsDelta, k: int, delta: float,
                          tol: float = 1e-12) -> float:
  """Smallest eps with optimal_delta_at(g, k, eps) <= delta (bisection)."""
  _check_k(k)
  vertices = boundary(optimal_region(g, k))
  hi = k * g.eps
  if _support_delta(vertices, hi) > delta + 1e-15:
    raise ValueError(
        f'delta={delta} is below the floor 1-(1-delta)^k of the exact region')
  lo = 0.0
  if _support_delta(vertices, lo) <= delta:
    return 0.0
  while hi - lo > tol:
    mid = 0.5 * (lo + hi)
    if _support_delta(vertices, mid) <= delta:
      hi = mid
    else:
      lo = mid
  return hi


def _closed_form(total_eps: float, total_gain: float, total_sq: float,
                 slack: float) -> float:
  # Inputs: sum eps_l, sum eps_l tanh(eps_l / 2), sum eps_l^2.
  if total_sq == 0.0:
    return 0.0
  return min(
      total_eps,
      total_gain + math.sqrt(
          2.0 * total_sq * math.log(math.e + math.sqrt(total_sq) / slack)),
      total_gain + math.sqrt(2.0 * total_sq * math.log(1.0 / slack)),
  )


def _check_slack(slack_delta: float) -> None:
  if not 0.0 < slack_delta < 1.0:
    raise ValueError(f'slack_delta must be in (0, 1), got {slack_delta}')


def simplified_terms(g: EpsDelta, k: int,
                     slack_delta: float) -> tuple[float, float, float]:
  """The three candidate eps values whose minimum :func:`simplified` reports."""
  _check_k(k)
  _check_slack(slack_delta)
  gain = k * (g.eps * math.tanh(g.eps / 2.0))
  sq = k * (g.eps * g.eps)
  return (k * g.eps,
          gain + math.sqrt(2.0 * sq * math.log(math.e + math.sqrt(sq) /
                                                slack_delta)),
          gain + math.sqrt(2.0 * sq * math.log(1.0 / slack_delta)))


def simplified(g: EpsDelta, k: int, slack_delta: float) -> EpsDelta:
  """Closed-form outer bound of the exact region (homogeneous steps)."""
  _check_k(k)
  _check_slack(slack_delta)
  eps = _closed_form(k * g.eps, k * (g.eps * math.tanh(g.eps / 2.0)),
                     k * (g.eps * g.eps), slack_delta)
  log_keep = k * math.log1p(-g.delta) if g.delta < 1 else -math.inf
  return EpsDelta(eps, _total_delta(log_keep, slack_delta))


def _total_delta(log_keep: float, slack: float) -> float:
  # 1 - (1 - slack) * prod(1 - delta_l), with the product given as a log.
  return min(max(-math.expm1(log_keep + math.log1p(-slack)), 0.0), 1.0)


def heterogeneous(steps: Sequence[EpsDelta], slack_delta: float) -> EpsDelta:
  """Closed-form bound for steps with individual (eps_l, delta_l).

  Sums are formed with ``math.fsum``; since that rounds the exact sum
  once, equal steps give bit-for-bit the homogeneous result.
  """
  if not steps:
    raise ValueError('need at least one step')
  _check_slack(slack_delta)
  eps = _closed_form(
      math.fsum(g.eps for g in steps),
      math.fsum(g.eps * math.tanh(g.eps / 2.0) for g in steps),
      math.fsum(g.eps * g.eps for g in steps), slack_delta)
  if any(g.delta >= 1 for g in steps):
    log_keep = -math.inf
  else:
    log_keep = math.fsum(math.log1p(-g.delta) for g in steps)
  return EpsDelta(eps, _total_delta(log_keep, slack_delta))


@dataclasses.dataclass(frozen=True)
class CompositionQuery:
  """Either ``steps`` or ``step`` plus ``k``; ``slack_delta`` may be None.

  A missing slack resolves to :func:`default_slack` of the homogeneous step
  (or of the root-mean-square step for heterogeneous input).
  """

  step: Optional[EpsDelta] = None
  k: int = 1
  steps: Optional[tuple[EpsDelta, ...]] = None
  slack_delta: Optional[float] = None

  def __post_init__(self):
    if (self.step is None) == (self.steps is None):
      raise ValueError('give exactly one of step (with k) or steps')
    if self.steps is not None:
      object.__setattr__(self, 'steps', tuple(self.steps))
      if not self.steps:
        raise ValueError('steps must be nonempty')
    else:
      _check_k(self.k)
    if self.slack_delta is not None and not 0 <= self.slack_delta < 1:
      raise ValueError(f'slack_delta must be in [0, 1), got {self.slack_delta}')

  @property
  def heterogeneous(self) -> bool:
    return self.steps is not None

  def resolved_slack(self) -> float:
    if self.slack_delta is not None:
      return self.slack_delta
    if self.steps is not None:
      n = len(self.steps)
      rms = math.sqrt(math.fsum(g.eps**2 for g in self.steps) / n)
      return default_slack(rms, n)
    return default_slack(self.step.eps, self.k)


@dataclasses.dataclass(frozen=True)
class CompositionReport:
  """Result of one accountant on one query.

  Attributes:
    method: which accountant produced it.
    result_eps, result_delta: the composed guarantee.
    region: region the guarantee certifies (the exact region for ``optimal``).
    notes: parameters used, e.g. the slack.
    contains_optimal: whether ``region`` contains the exact region; None for
      heterogeneous queries, where no exact region is available.
  """

  method: Method
  result_eps: float
  result_delta: float
  region: Optional[PrivacyRegion] = None
  notes: str = ''
  contains_optimal: Optional[bool] = None

  def guarantee(self) -> EpsDelta:
    return EpsDelta(self.result_eps, self.result_delta)


def _report(method: Method, g: EpsDelta, notes: str,
            exact: Optional[PrivacyRegion]) -> CompositionReport:
  region = region_from_eps_delta(g)
  inside = None if exact is None else contains_region(region, exact)
  return CompositionReport(method, g.eps, g.delta, region, notes, inside)


def compare(q: CompositionQuery) -> list[CompositionReport]:
  """Every applicable accountant on ``q``, sorted by resulting eps.

  Methods that need a slack are skipped when it resolves to 0.
  """
  slack = q.resolved_slack()
  note = f'slack_delta={slack!r}'
  reports = []
  if q.heterogeneous:
    steps = q.steps
    total = EpsDelta(math.fsum(g.eps for g in steps),
                     min(math.fsum(g.delta for g in steps), 1.0))
    reports.append(_report(Method.BASIC, total, '', None))
    if slack > 0:
      reports.append(
          _report(Method.HETEROGENEOUS, heterogeneous(steps, slack), note,
                  None))
  else:
    g, k = q.step, q.k
    exact = optimal_region(g, k)
    reports.append(_report(Method.BASIC, basic(g, k), '', exact))
    if slack > 0:
      reports.append(_report(Method.DRV, drv(g, k, slack), note, exact))
      closed = simplified(g, k, slack)
      reports.append(_report(Method.SIMPLIFIED, closed, note, exact))
      # Exact eps at the same delta budget as the closed form.
      budget = closed.delta
    else:
      budget = 1.0 - _keep_prob(g.delta, k)
    eps = optimal_eps_for_delta(g, k, budget)
    reports.append(
        CompositionReport(Method.OPTIMAL, eps, budget, exact,
                          f'eps read off the exact region at delta={budget!r}',
                          True))
  reports.sort(key=lambda r: (r.result_eps, r.result_delta))
  return reports

