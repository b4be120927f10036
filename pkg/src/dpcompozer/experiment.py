"""Monte-Carlo k-fold composition experiment.

An adversary strategy picks each round's mechanism from the transcript so
far.  The experiment records the adversary's view and its accumulated
log-likelihood ratio; likelihood-ratio threshold tests on many views then
give empirical (P_MD, P_FA) points to check against a theoretical region.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math
import os
from typing import Callable, Optional, Sequence

import numpy as np

from dpcompozer.mechanisms import MechanismSpec, sample
from dpcompozer.region import (PrivacyPoint, PrivacyRegion, contains_point)
from dpcompozer.tradeoff import LlrDistribution

MIN_TRIALS = 1000
CI_MULTIPLIER = 3.0
TIE_TOL = 1e-9

Strategy = Callable[[int, tuple, int], MechanismSpec]


class StrategyContractError(RuntimeError):
  """The strategy returned different mechanisms for the same transcript."""


@dataclasses.dataclass(frozen=True)
class FixedStrategy:
  """Non-adaptive adversary: the same mechanism every round."""

  spec: MechanismSpec

  def __call__(self, round_index: int, transcript: tuple,
               randomness: int) -> MechanismSpec:
    return self.spec


@dataclasses.dataclass(frozen=True)
class ViewSample:
  b: int
  r: int
  ys: tuple
  llr: float


def _thread_count() -> int:
  try:
    return max(1, int(os.environ.get('DPCOMPOZER_THREADS', '1')))
  except ValueError:
    return 1


def run_compose(strategy: Strategy, k: int, b: int,
                seed) -> ViewSample:
  """One run of the k-round experiment under hypothesis ``b``.

  ``seed`` feeds ``numpy.random.default_rng``; it determines both the
  adversary's randomness tag and every mechanism draw.
  """
  if k < 1:
    raise ValueError(f'k must be >= 1, got {k}')
  rng = np.random.default_rng(seed)
  r = int(rng.integers(2**31))
  ys: list = []
  llr = 0.0
  for i in range(k):
    transcript = tuple(ys)
    spec = strategy(i, transcript, r)
    if strategy(i, transcript, r) != spec:
      raise StrategyContractError(
          f'strategy is not deterministic given the transcript at round {i}')
    y = sample(spec, b, rng)
    ys.append(y)
    llr += spec.log_density_ratio(y)
  return ViewSample(b, r, tuple(ys), llr)


def _fixed_llrs(spec: MechanismSpec, k: int, trials: int,
                rng: np.random.Generator, b: int) -> np.ndarray:
  """Vectorized view llrs for a non-adaptive strategy."""
  draws = sample(spec, b, rng, size=(trials, k))
  if spec.is_discrete:
    pair = spec.pair()
    index = {y: i for i, y in enumerate(pair.outcomes)}
    with np.errstate(divide='ignore', invalid='ignore'):
      per_outcome = np.log(pair.p0) - np.log(pair.p1)
    idx = np.vectorize(index.__getitem__)(draws)
    per_draw = per_outcome[idx]
  else:
    per_draw = np.vectorize(spec.log_density_ratio)(draws)
  with np.errstate(invalid='ignore'):
    return per_draw.sum(axis=1)


def simulate_llrs(strategy: Strategy, k: int, trials: int, b: int,
                  seed: int) -> np.ndarray:
  """Llr of ``trials`` independent views under hypothesis ``b``.

  Fixed strategies are sampled in one vectorized batch; adaptive ones run
  trial by trial with per-trial seeds (seed, b, trial), optionally on
  DPCOMPOZER_THREADS threads.  Either way the output depends only on the
  arguments.
  """
  if isinstance(strategy, FixedStrategy):
    rng = np.random.default_rng([seed, b])
    return _fixed_llrs(strategy.spec, k, trials, rng, b)

  def one(t: int) -> float:
    return run_compose(strategy, k, b, [seed, b, t]).llr

  workers = _thread_count()
  if workers == 1:
    return np.array([one(t) for t in range(trials)])
  with concurrent.futures.ThreadPoolExecutor(workers) as pool:
    return np.array(list(pool.map(one, range(trials))))


@dataclasses.dataclass(frozen=True)
class CurvePoint:
  threshold: float
  point: PrivacyPoint
  radius_pmd: float
  radius_pfa: float

  @property
  def radius(self) -> float:
    return max(self.radius_pmd, self.radius_pfa)


def _radius(p: float, n: int) -> float:
  return CI_MULTIPLIER * math.sqrt(p * (1.0 - p) / n)


def auto_thresholds(llrs: Sequence[np.ndarray]) -> list[float]:
  """Midpoints between consecutive distinct observed llr values, plus both ends."""
  values = np.concatenate([np.asarray(v) for v in llrs])
  finite = np.sort(values[np.isfinite(values)])
  distinct = []
  for v in finite:
    if not distinct or v - distinct[-1] > TIE_TOL:
      distinct.append(float(v))
  mids = [0.5 * (a + b) for a, b in zip(distinct, distinct[1:])]
  lo = distinct[0] - 1.0 if distinct else -1.0
  hi = distinct[-1] + 1.0 if distinct else 1.0
  return [-math.inf, lo] + mids + [hi, math.inf]


def curve_from_llrs(llr0: np.ndarray, llr1: np.ndarray,
                    thresholds: Sequence[float],
                    tie_reject_prob: Optional[float] = None,
                    rng: Optional[np.random.Generator] = None
                   ) -> list[CurvePoint]:
  """Empirical errors of the tests "reject the null when llr < t".

  With ``tie_reject_prob`` set, views whose llr is within ``TIE_TOL`` of t
  are rejected with that probability instead of never.
  """
  n0, n1 = llr0.size, llr1.size
  points = []
  for t in thresholds:
    rej0 = llr0 < t
    rej1 = llr1 < t
    if tie_reject_prob is not None:
      if rng is None:
        rng = np.random.default_rng(0)
      for rej, llr in ((rej0, llr0), (rej1, llr1)):
        tie = np.abs(llr - t) <= TIE_TOL
        rej |= tie & (rng.random(llr.size) < tie_reject_prob)
    pfa = float(np.count_nonzero(rej0)) / n0
    pmd = float(n1 - np.count_nonzero(rej1)) / n1
    points.append(
        CurvePoint(t, PrivacyPoint(pmd, pfa), _radius(pmd, n1),
                   _radius(pfa, n0)))
  return points


def estimate_curve(strategy: Strategy, k: int, trials: int,
                   thresholds: Optional[Sequence[float]], seed: int,
                   min_trials: int = MIN_TRIALS,
                   tie_reject_prob: Optional[float] = None
                  ) -> list[CurvePoint]:
  """Empirical tradeoff points with 3-sigma radii.

  ``trials`` views are drawn under each hypothesis.  ``thresholds=None``
  picks midpoints between the observed llr values, which lands the tests on
  the kinks of the true curve.
  """
  if trials < min_trials:
    raise ValueError(f'need at least {min_trials} trials, got {trials}')
  if thresholds is not None and list(thresholds) != sorted(thresholds):
    raise ValueError('thresholds must be sorted')
  llr0 = simulate_llrs(strategy, k, trials, 0, seed)
  llr1 = simulate_llrs(strategy, k, trials, 1, seed)
  if thresholds is None:
    thresholds = auto_thresholds([llr0, llr1])
  rng = np.random.default_rng([seed, 2])
  return curve_from_llrs(llr0, llr1, thresholds, tie_reject_prob, rng)


def exact_curve(d: LlrDistribution,
                thresholds: Sequence[float]) -> list[PrivacyPoint]:
  """Exact (P_MD, P_FA) of the same threshold tests on a known llr law.

  Views with llr = +inf are never rejected and those with llr = -inf are
  rejected for every finite t, matching ``curve_from_llrs``.
  """
  out = []
  for t in thresholds:
    below = d.llr < t
    pfa = math.fsum(d.mass0[below])
    pmd = math.fsum(d.mass1[~below])
    if t == -math.inf:
      pmd += d.sing1
    out.append(PrivacyPoint(min(max(pmd, 0.0), 1.0), min(pfa, 1.0)))
  return out


INSIDE = 'inside'
WITHIN_CI = 'inside-within-CI'
VIOLATION = 'violation'


@dataclasses.dataclass(frozen=True)
class PointVerdict:
  point: CurvePoint
  verdict: str
  near_boundary: bool


@dataclasses.dataclass(frozen=True)
class ContainmentReport:
  verdicts: tuple[PointVerdict, ...]

  @property
  def passed(self) -> bool:
    return all(v.verdict != VIOLATION for v in self.verdicts)

  @property
  def violations(self) -> int:
    return sum(v.verdict == VIOLATION for v in self.verdicts)

  @property
  def near_boundary(self) -> int:
    return sum(v.near_boundary for v in self.verdicts)


def _shifted(p: PrivacyPoint, dx: float, dy: float) -> PrivacyPoint:
  return PrivacyPoint(min(max(p.pmd + dx, 0.0), 1.0),
                      min(max(p.pfa + dy, 0.0), 1.0))


def check_within(points: Sequence[CurvePoint],
                 region: PrivacyRegion) -> ContainmentReport:
  """Classify each empirical point against ``region``.

  A point is ``inside`` the region, ``inside-within-CI`` when only its
  confidence box reaches into the region, or a ``violation``.  It counts as
  near the boundary when its confidence box also reaches outside.
  """
  verdicts = []
  for cp in points:
    p = cp.point
    up = _shifted(p, cp.radius_pmd, cp.radius_pfa)
    down = _shifted(p, -cp.radius_pmd, -cp.radius_pfa)
    if contains_point(region, p):
      verdict = INSIDE
    elif contains_point(region, up):
      verdict = WITHIN_CI
    else:
      verdict = VIOLATION
    near = verdict != VIOLATION and not contains_point(region, down)
    verdicts.append(PointVerdict(cp, verdict, near))
  return ContainmentReport(tuple(verdicts))
