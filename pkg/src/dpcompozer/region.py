"""(eps, delta) privacy regions in the missed-detection / false-alarm square.

A region is stored as the list of (eps, delta) guarantees whose half-plane
pairs cut it out of the unit square.  Coordinates are always ordered
``(pmd, pfa)``.  Vertices are derived on demand from the supporting lines.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterable, Sequence

# Absolute slack on half-plane residuals.
TOL = 1e-9
# Beyond this e^eps is indistinguishable from a delta-only constraint.
EPS_CAP = 50.0

_MERGE_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class EpsDelta:
  """A single (eps, delta) differential-privacy guarantee."""

  eps: float
  delta: float

  def __post_init__(self):
    object.__setattr__(self, 'eps', float(self.eps))
    object.__setattr__(self, 'delta', float(self.delta))
    if not (self.eps >= 0.0):  # also rejects NaN
      raise ValueError(f'eps must be nonnegative, got {self.eps}')
    if not (0.0 <= self.delta <= 1.0):
      raise ValueError(f'delta must lie in [0, 1], got {self.delta}')


@dataclasses.dataclass(frozen=True)
class PrivacyPoint:
  pmd: float
  pfa: float

  def __post_init__(self):
    for name in ('pmd', 'pfa'):
      value = getattr(self, name)
      if not (-TOL <= value <= 1.0 + TOL):
        raise ValueError(f'{name} must lie in [0, 1], got {value}')

  def as_tuple(self) -> tuple[float, float]:
    return (self.pmd, self.pfa)


@dataclasses.dataclass(frozen=True)
class PrivacyRegion:
  """Intersection of R(eps, delta) over ``lines``, kept in canonical form.

  Build instances with :func:`region_from_lines` (or the other constructors)
  rather than directly, so that redundant lines are dropped.

  Attributes:
    lines: supporting guarantees sorted by eps; none of them redundant.
    symmetrized: set when the region was built from an asymmetric pair and
      therefore covers both testing directions.
  """

  lines: tuple[EpsDelta, ...]
  symmetrized: bool = dataclasses.field(default=False, compare=False)

  def __post_init__(self):
    if not self.lines:
      raise ValueError('a privacy region needs at least one line')

  def boundary(self) -> list[PrivacyPoint]:
    return boundary(self)

  def isclose(self, other: 'PrivacyRegion', tol: float = TOL) -> bool:
    """Vertexwise comparison of the two lower boundaries."""
    return boundaries_close(boundary(self), boundary(other), tol)


def _half_planes(g: EpsDelta) -> list[tuple[float, float]]:
  """Lower-boundary lines ``pfa >= c + m * pmd`` induced by one guarantee."""
  eps = min(g.eps, EPS_CAP)
  keep = 1.0 - g.delta
  steep = (-math.exp(eps), keep)
  shallow = (-math.exp(-eps), keep * math.exp(-eps))
  if eps == 0.0:
    return [steep]
  return [steep, shallow]


def _envelope(lines: Sequence[EpsDelta]) -> list[tuple[float, float]]:
  """Vertices of max(0, all half-plane lines) on pmd >= 0.

  Returns raw ``(pmd, pfa)`` tuples from (0, f(0)) to the first point where
  the envelope reaches pfa = 0.
  """
  cand = [(0.0, 0.0)]
  for g in lines:
    cand.extend(_half_planes(g))
  # Sort by slope ascending; equal slopes keep only the largest intercept.
  cand.sort(key=lambda mc: (mc[0], -mc[1]))
  uniq: list[tuple[float, float]] = []
  for m, c in cand:
    if uniq and m == uniq[-1][0]:
      continue
    uniq.append((m, c))

  hull: list[tuple[float, float]] = []
  for m3, c3 in uniq:
    while len(hull) >= 2:
      (m1, c1), (m2, c2) = hull[-2], hull[-1]
      # Middle line never on top when l1/l3 cross left of l1/l2.
      if (c1 - c3) * (m2 - m1) <= (c1 - c2) * (m3 - m1):
        hull.pop()
      else:
        break
    hull.append((m3, c3))

  f0 = max(c for _, c in uniq)
  if f0 <= 0.0:
    return [(0.0, 0.0)]
  verts = [(0.0, f0)]
  for (m1, c1), (m2, c2) in zip(hull, hull[1:]):
    x = (c1 - c2) / (m2 - m1)
    if x <= 0.0:
      continue
    y = max(c2 + m2 * x, 0.0)
    verts.append((x, y))
  return _clean(verts)


def _clean(verts: list[tuple[float, float]]) -> list[tuple[float, float]]:
  """Drop coincident vertices and exactly collinear ones."""
  out: list[tuple[float, float]] = []
  for v in verts:
    if out and abs(v[0] - out[-1][0]) <= _MERGE_TOL and abs(
        v[1] - out[-1][1]) <= _MERGE_TOL:
      continue
    out.append(v)
  i = 1
  while i < len(out) - 1:
    (x0, y0), (x1, y1), (x2, y2) = out[i - 1], out[i], out[i + 1]
    cross = (x1 - x0) * (y2 - y1) - (y1 - y0) * (x2 - x1)
    # Exact test only: steep lines (eps near the cap) meet at genuine
    # vertices whose turn angle is below any useful tolerance.
    if cross == 0.0:
      del out[i]
    else:
      i += 1
  return out


def _line_value(g: EpsDelta, x: float) -> float:
  return max(c + m * x for m, c in _half_planes(g))


def region_from_lines(lines: Iterable[EpsDelta],
                      symmetrized: bool = False) -> PrivacyRegion:
  """Canonical region for the intersection of R(eps, delta) over ``lines``."""
  lines = [EpsDelta(min(g.eps, EPS_CAP), g.delta) for g in lines]
  if not lines:
    raise ValueError('need at least one (eps, delta) line')
  verts = _envelope(lines)
  if len(verts) == 1:
    return PrivacyRegion((EpsDelta(0.0, 1.0),), symmetrized)

  kept: set[EpsDelta] = set()
  for (x0, y0), (x1, _) in zip(verts, verts[1:]):
    xm = 0.5 * (x0 + x1)
    values = [(_line_value(g, xm), g) for g in lines]
    top = max(v for v, _ in values)
    owners = [g for v, g in values if v >= top - _MERGE_TOL]
    kept.add(min(owners, key=lambda g: (g.eps, g.delta)))
  return PrivacyRegion(tuple(sorted(kept, key=lambda g: (g.eps, g.delta))),
                       symmetrized)


def region_from_eps_delta(g: EpsDelta) -> PrivacyRegion:
  return region_from_lines([g])


def intersect(a: PrivacyRegion, b: PrivacyRegion) -> PrivacyRegion:
  return region_from_lines(a.lines + b.lines,
                           symmetrized=a.symmetrized or b.symmetrized)


def boundary(r: PrivacyRegion) -> list[PrivacyPoint]:
  """Lower-boundary polyline from (0, y0) to (x0, 0), sorted by pmd."""
  return [PrivacyPoint(min(max(x, 0.0), 1.0), min(max(y, 0.0), 1.0))
          for x, y in _envelope(r.lines)]


def _residual(g: EpsDelta, pmd: float, pfa: float) -> float:
  eps = min(g.eps, EPS_CAP)
  keep = 1.0 - g.delta
  return min(pfa + math.exp(eps) * pmd - keep, math.exp(eps) * pfa + pmd - keep)


def contains_point(r: PrivacyRegion, p: PrivacyPoint, tol: float = TOL) -> bool:
  if not (-tol <= p.pmd <= 1.0 + tol and -tol <= p.pfa <= 1.0 + tol):
    return False
  return all(_residual(g, p.pmd, p.pfa) >= -tol for g in r.lines)


def contains_region(outer: PrivacyRegion, inner: PrivacyRegion,
                    tol: float = TOL) -> bool:
  """True iff ``inner`` is a subset of ``outer``.

  Regions are convex and closed upwards inside the square, so checking the
  lower-boundary vertices of ``inner`` suffices.
  """
  return all(contains_point(outer, v, tol) for v in boundary(inner))


def relax(g: EpsDelta, target_eps: float) -> EpsDelta:
  """Smallest delta at ``target_eps`` whose region still contains R(g)."""
  if target_eps < g.eps:
    raise ValueError(
        f'target_eps={target_eps} is below the guarantee eps={g.eps}')
  # 1 - (1 - delta) * ratio, written to be exact when the ratio is 1.
  growth = math.expm1(_logistic_log_ratio(target_eps, g.eps))
  delta = max(g.delta, g.delta - (1.0 - g.delta) * growth)
  return EpsDelta(target_eps, min(max(delta, 0.0), 1.0))


def _logistic_log_ratio(a: float, b: float) -> float:
  # log((1 + e^a) / (1 + e^b)) without overflow.
  return _softplus(a) - _softplus(b)


def _softplus(x: float) -> float:
  return x + math.log1p(math.exp(-x)) if x > 0 else math.log1p(math.exp(x))


def tv_upper_bound(g: EpsDelta) -> float:
  """Largest total-variation distance any (eps, delta)-DP pair can have."""
  return 1.0 - 2.0 * (1.0 - g.delta) / (1.0 + math.exp(g.eps))


def boundaries_close(a: Sequence[PrivacyPoint], b: Sequence[PrivacyPoint],
                     tol: float = TOL) -> bool:
  if len(a) != len(b):
    return False
  return all(
      abs(p.pmd - q.pmd) <= tol and abs(p.pfa - q.pfa) <= tol
      for p, q in zip(a, b))


UNIT_SQUARE = PrivacyRegion((EpsDelta(0.0, 1.0),))
