"""Tradeoff curves of discrete distribution pairs.

Everything here works on a pair (P0, P1) of pmfs over a shared finite
outcome space: the hockey-stick divergence, the set of boundary slopes, the
exact privacy region, k-fold products carried as log-likelihood-ratio
distributions, and the subset-enumeration oracles used to check them.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from typing import Hashable, Iterable, Sequence

import numpy as np

from dpcompozer.region import (EPS_CAP, TOL, EpsDelta, PrivacyPoint,
                               PrivacyRegion, contains_region,
                               region_from_eps_delta, region_from_lines)

SUM_TOL = 1e-12
LLR_MERGE_TOL = 1e-12
MAX_ATOMS = 10**6
MAX_BRUTE_FORCE_OUTCOMES = 20


class SupportOverflowError(ValueError):
  """The k-fold llr support grew beyond ``MAX_ATOMS``."""


@dataclasses.dataclass(frozen=True, eq=False)
class DiscretePair:
  """Two pmfs over the same outcomes.

  Attributes:
    outcomes: labels, one per index.
    p0: masses under the null hypothesis (b = 0).
    p1: masses under the alternative (b = 1).
  """

  outcomes: tuple[Hashable, ...]
  p0: np.ndarray
  p1: np.ndarray

  def __post_init__(self):
    p0 = np.asarray(self.p0, dtype=float)
    p1 = np.asarray(self.p1, dtype=float)
    if p0.ndim != 1 or p0.shape != p1.shape:
      raise ValueError('p0 and p1 must be 1-d arrays of equal length')
    if len(self.outcomes) != p0.size:
      raise ValueError('one outcome label per mass is required')
    for name, p in (('p0', p0), ('p1', p1)):
      if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f'{name} has negative or non-finite masses')
      if abs(math.fsum(p) - 1.0) > SUM_TOL:
        raise ValueError(f'{name} sums to {math.fsum(p)!r}, not 1')
    p0.flags.writeable = False
    p1.flags.writeable = False
    object.__setattr__(self, 'outcomes', tuple(self.outcomes))
    object.__setattr__(self, 'p0', p0)
    object.__setattr__(self, 'p1', p1)

  @classmethod
  def from_masses(cls, p0: Sequence[float], p1: Sequence[float]):
    return cls(tuple(range(len(p0))), np.asarray(p0), np.asarray(p1))

  def __len__(self):
    return self.p0.size

  def swapped(self) -> 'DiscretePair':
    return DiscretePair(self.outcomes, self.p1, self.p0)

  def is_symmetric(self, tol: float = SUM_TOL) -> bool:
    """Whether some permutation maps P0 onto P1 and P1 onto P0."""
    a = sorted(zip(self.p0, self.p1))
    b = sorted(zip(self.p1, self.p0))
    return all(abs(x0 - y0) <= tol and abs(x1 - y1) <= tol
               for (x0, x1), (y0, y1) in zip(a, b))


@dataclasses.dataclass(frozen=True, eq=False)
class LlrDistribution:
  """Law of log(P0/P1) under P0, with both singular parts split off.

  Attributes:
    llr: sorted atom locations.
    mass0: mass of each atom under P0.
    mass1: mass of each atom under P1 (``mass0 * exp(-llr)`` up to rounding).
    sing0: P0-mass where P1 vanishes (llr = +inf).
    sing1: P1-mass where P0 vanishes (llr = -inf).
  """

  llr: np.ndarray
  mass0: np.ndarray
  mass1: np.ndarray
  sing0: float
  sing1: float

  def swapped(self) -> 'LlrDistribution':
    order = np.argsort(-self.llr, kind='stable')
    return LlrDistribution(-self.llr[order], self.mass1[order],
                           self.mass0[order], self.sing1, self.sing0)

  def __len__(self):
    return self.llr.size


def _exp(eps: float) -> float:
  return math.inf if eps > 709.0 else math.exp(eps)


def hockey_stick(pair: DiscretePair, eps: float) -> float:
  """sum_x max(0, P0(x) - e^eps P1(x)).

  Negative ``eps`` is accepted and evaluated by the same formula; those
  values describe the part of the tradeoff curve flatter than slope -1.
  """
  scaled = np.where(pair.p1 > 0, _exp(eps) * pair.p1, 0.0)
  return math.fsum(np.maximum(pair.p0 - scaled, 0.0))


def subset_hockey_stick(pair: DiscretePair, eps: float) -> float:
  """Oracle: max over all 2^|X| subsets S of P0(S) - e^eps P1(S)."""
  n = len(pair)
  if n > MAX_BRUTE_FORCE_OUTCOMES:
    raise ValueError(f'{n} outcomes is too many to enumerate')
  scale = _exp(eps)
  best = 0.0
  for mask in range(1 << n):
    idx = [i for i in range(n) if mask >> i & 1]
    s0 = math.fsum(pair.p0[idx])
    s1 = math.fsum(pair.p1[idx])
    value = s0 - scale * s1 if s1 > 0 else s0
    best = max(best, value)
  return best


def _llr_values(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
  both = (p0 > 0) & (p1 > 0)
  return np.log(p0[both]) - np.log(p1[both])


def _distinct(values: Iterable[float], tol: float = LLR_MERGE_TOL) -> list[float]:
  out: list[float] = []
  for v in sorted(values):
    if not out or v - out[-1] > tol:
      out.append(float(v))
  return out


def slope_set(pair: DiscretePair) -> list[float]:
  """Distinct nonnegative llr values at outcomes where both masses are positive."""
  llr = _llr_values(pair.p0, pair.p1)
  # Exact ties such as p0 == p1 produce 0 exactly; tiny negatives are jitter.
  llr = np.where(np.abs(llr) <= LLR_MERGE_TOL, 0.0, llr)
  return _distinct(v for v in llr if v >= 0.0)


def region_from_pair(pair: DiscretePair) -> PrivacyRegion:
  """Exact privacy region of a pair as an intersection of supporting lines.

  Each slope contributes the line (slope, d_slope).  Both testing directions
  are used, so an asymmetric pair yields the smallest symmetric region that
  contains its tradeoff curve; the result is then flagged ``symmetrized``.
  """
  llr = _llr_values(pair.p0, pair.p1)
  slopes = _distinct([0.0] + [abs(v) for v in llr])
  swapped = pair.swapped()
  lines = []
  for s in slopes:
    d = max(hockey_stick(pair, s), hockey_stick(swapped, s))
    lines.append(EpsDelta(min(s, EPS_CAP), min(max(d, 0.0), 1.0)))
  return region_from_lines(lines, symmetrized=not pair.is_symmetric())


def _step_atoms(pair: DiscretePair):
  both = (pair.p0 > 0) & (pair.p1 > 0)
  p0, p1 = pair.p0[both], pair.p1[both]
  llr = np.log(p0) - np.log(p1)
  sing0 = math.fsum(pair.p0[(pair.p0 > 0) & (pair.p1 == 0)])
  sing1 = math.fsum(pair.p1[(pair.p1 > 0) & (pair.p0 == 0)])
  return _merge(llr, p0, p1), sing0, sing1


def _merge(llr: np.ndarray, m0: np.ndarray, m1: np.ndarray):
  """Sort atoms and merge locations that agree within ``LLR_MERGE_TOL``."""
  order = np.argsort(llr, kind='stable')
  llr, m0, m1 = llr[order], m0[order], m1[order]
  if llr.size == 0:
    return llr, m0, m1
  starts = np.concatenate(([True], np.diff(llr) > LLR_MERGE_TOL))
  group = np.cumsum(starts) - 1
  n = int(group[-1]) + 1
  return (llr[starts], np.bincount(group, m0, minlength=n),
          np.bincount(group, m1, minlength=n))


def product_pair(pair: DiscretePair, k: int,
                 max_atoms: int = MAX_ATOMS) -> LlrDistribution:
  """Llr distribution of the k-fold product of ``pair`` by exact convolution."""
  if k < 1:
    raise ValueError(f'k must be a positive integer, got {k}')
  (s_llr, s_m0, s_m1), s0, s1 = _step_atoms(pair)
  llr, m0, m1 = s_llr, s_m0, s_m1
  for _ in range(k - 1):
    if llr.size * s_llr.size > max_atoms:
      raise SupportOverflowError(
          f'convolution support would exceed {max_atoms} atoms; coarsen the '
          'outcome grid or reduce k')
    llr, m0, m1 = _merge((llr[:, None] + s_llr[None, :]).ravel(),
                         (m0[:, None] * s_m0[None, :]).ravel(),
                         (m1[:, None] * s_m1[None, :]).ravel())
  # 1 - (1 - s)^k, accurate for small s.
  sing0 = -math.expm1(k * math.log1p(-s0)) if s0 < 1 else 1.0
  sing1 = -math.expm1(k * math.log1p(-s1)) if s1 < 1 else 1.0
  return LlrDistribution(llr, m0, m1, sing0, sing1)


def hockey_stick_llr(d: LlrDistribution, eps: float) -> float:
  """d_eps of the pair that produced ``d``: sing0 + sum over llr >= eps."""
  terms = np.maximum(d.mass0 - _exp(eps) * d.mass1, 0.0)
  return min(d.sing0 + math.fsum(terms), 1.0)


def region_from_llr(d: LlrDistribution) -> PrivacyRegion:
  """Privacy region from an llr distribution (both directions)."""
  slopes = _distinct([0.0] + [abs(float(v)) for v in d.llr])
  swapped = d.swapped()
  lines = []
  for s in slopes:
    delta = max(hockey_stick_llr(d, s), hockey_stick_llr(swapped, s))
    lines.append(EpsDelta(min(s, EPS_CAP), min(max(delta, 0.0), 1.0)))
  return region_from_lines(lines)


def materialize_product(pair: DiscretePair, k: int) -> DiscretePair:
  """The k-fold product pair over all |X|^k outcome tuples (oracle use)."""
  outcomes = list(itertools.product(range(len(pair)), repeat=k))
  idx = np.array(outcomes, dtype=int).reshape(len(outcomes), k)
  p0 = np.prod(pair.p0[idx], axis=1)
  p1 = np.prod(pair.p1[idx], axis=1)
  # Renormalize away the last-ulp drift of the products.
  return DiscretePair(tuple(outcomes), p0 / math.fsum(p0), p1 / math.fsum(p1))


def merge_equal_ratios(pair: DiscretePair, tol: float = 1e-9) -> DiscretePair:
  """Lump outcomes sharing a likelihood ratio (a lossless reduction).

  Outcomes where only one of the masses vanishes form the two singular
  classes; outcomes where both vanish are dropped.
  """
  keys: dict[object, list[int]] = {}
  finite: list[tuple[float, int]] = []
  for i, (a, b) in enumerate(zip(pair.p0, pair.p1)):
    if a == 0 and b == 0:
      continue
    if b == 0:
      keys.setdefault('+inf', []).append(i)
    elif a == 0:
      keys.setdefault('-inf', []).append(i)
    else:
      finite.append((math.log(a) - math.log(b), i))
  finite.sort()
  anchor = None
  for v, i in finite:
    if anchor is None or v - anchor > tol:
      anchor = v
    keys.setdefault(anchor, []).append(i)
  labels = list(keys)
  p0 = np.array([math.fsum(pair.p0[keys[c]]) for c in labels])
  p1 = np.array([math.fsum(pair.p1[keys[c]]) for c in labels])
  return DiscretePair(tuple(labels), p0, p1)


def _lower_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
  pts = sorted(set(points))
  hull: list[tuple[float, float]] = []
  for p in pts:
    while len(hull) >= 2:
      (x1, y1), (x2, y2) = hull[-2], hull[-1]
      if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 1e-15:
        hull.pop()
      else:
        break
    hull.append(p)
  return hull


def brute_force_region(pair: DiscretePair) -> list[PrivacyPoint]:
  """Lower convex hull of the (P_MD, P_FA) points of all deterministic tests.

  The rejection set S gives P_FA = P0(S) and P_MD = 1 - P1(S).  The hull is
  returned from its pmd = 0 end to the first vertex with pfa = 0.
  """
  n = len(pair)
  if n > MAX_BRUTE_FORCE_OUTCOMES:
    raise ValueError(
        f'{n} outcomes exceeds the enumeration cap of '
        f'{MAX_BRUTE_FORCE_OUTCOMES}')
  points = []
  for mask in range(1 << n):
    idx = [i for i in range(n) if mask >> i & 1]
    pfa = math.fsum(pair.p0[idx])
    pmd = 1.0 - math.fsum(pair.p1[idx])
    points.append((max(pmd, 0.0), max(pfa, 0.0)))
  hull = _lower_hull(points)
  out = []
  for x, y in hull:
    out.append(PrivacyPoint(x, y))
    if y <= SUM_TOL:
      break
  return out


def decision_rule_eval(
    pair: DiscretePair,
    rule: Sequence[tuple[Iterable[int], float]]) -> PrivacyPoint:
  """Error probabilities of a randomized test.

  Args:
    pair: the two output distributions.
    rule: cells ``(outcome_indices, accept_prob)`` partitioning the outcome
      indices; on an output in a cell the test accepts the null hypothesis
      with probability ``accept_prob`` and rejects it otherwise.

  Returns:
    The test's (P_MD, P_FA).
  """
  n = len(pair)
  seen = np.zeros(n, dtype=int)
  pfa_terms, pmd_terms = [], []
  for cell, accept in rule:
    cell = list(cell)
    if not 0.0 <= accept <= 1.0:
      raise ValueError(f'accept probability {accept} outside [0, 1]')
    if any(not 0 <= i < n for i in cell):
      raise ValueError('rule refers to outcomes outside the pair')
    seen[cell] += 1
    pfa_terms.append((1.0 - accept) * math.fsum(pair.p0[cell]))
    pmd_terms.append(accept * math.fsum(pair.p1[cell]))
  if np.any(seen != 1):
    raise ValueError('rule cells must partition the outcome space')
  return PrivacyPoint(min(math.fsum(pmd_terms), 1.0),
                      min(math.fsum(pfa_terms), 1.0))


def verify_dp(pair: DiscretePair, g: EpsDelta, tol: float = TOL) -> bool:
  """Both one-sided (eps, delta) conditions for this pair of neighbors."""
  return (hockey_stick(pair, g.eps) <= g.delta + tol and
          hockey_stick(pair.swapped(), g.eps) <= g.delta + tol)


def verify_dp_by_region(pair: DiscretePair, g: EpsDelta) -> bool:
  """Same verdict as :func:`verify_dp`, via region containment."""
  return contains_region(region_from_eps_delta(g), region_from_pair(pair))
