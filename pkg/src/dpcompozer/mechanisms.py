"""Mechanism models: output-distribution pairs for neighboring inputs.

The two hypotheses of every model are ``b = 0`` (null) and ``b = 1``.  The
additive-noise models put the null output at 0 and the alternative at the
query sensitivity.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import math
from typing import Union

import numpy as np
from scipy import special, stats

from dpcompozer.region import EpsDelta
from dpcompozer.tradeoff import DiscretePair

DEFAULT_TRUNCATION = 40

Seed = Union[int, np.random.Generator, None]


class MechanismKind(str, enum.Enum):
  CANONICAL = 'canonical'
  GEOMETRIC = 'geometric'
  LAPLACE = 'laplace'
  GAUSSIAN = 'gaussian'


@dataclasses.dataclass(frozen=True)
class MechanismSpec:
  """One round's mechanism.

  Use the ``canonical``/``geometric``/``laplace``/``gaussian`` constructors.
  Parameters by kind: canonical (eps, delta); geometric (eps, trunc);
  laplace (sensitivity, scale); gaussian (sensitivity, sigma).
  """

  kind: MechanismKind
  eps: float = 0.0
  delta: float = 0.0
  trunc: int = DEFAULT_TRUNCATION
  sensitivity: float = 1.0
  scale: float = 1.0

  def __post_init__(self):
    object.__setattr__(self, 'kind', MechanismKind(self.kind))
    if self.kind in (MechanismKind.CANONICAL, MechanismKind.GEOMETRIC):
      EpsDelta(self.eps, self.delta)
    if self.kind is MechanismKind.GEOMETRIC:
      if self.eps <= 0:
        raise ValueError('geometric mechanism needs eps > 0')
      if self.trunc < 2:
        raise ValueError(f'truncation must be >= 2, got {self.trunc}')
    if self.kind in (MechanismKind.LAPLACE, MechanismKind.GAUSSIAN):
      if not (self.sensitivity > 0 and self.scale > 0):
        raise ValueError('sensitivity and scale must be positive')

  @classmethod
  def canonical(cls, eps: float, delta: float = 0.0) -> 'MechanismSpec':
    return cls(MechanismKind.CANONICAL, eps=eps, delta=delta)

  @classmethod
  def geometric(cls, eps: float,
                trunc: int = DEFAULT_TRUNCATION) -> 'MechanismSpec':
    return cls(MechanismKind.GEOMETRIC, eps=eps, trunc=trunc)

  @classmethod
  def laplace(cls, sensitivity: float, scale: float) -> 'MechanismSpec':
    return cls(MechanismKind.LAPLACE, sensitivity=sensitivity, scale=scale)

  @classmethod
  def gaussian(cls, sensitivity: float, sigma: float) -> 'MechanismSpec':
    return cls(MechanismKind.GAUSSIAN, sensitivity=sensitivity, scale=sigma)

  @property
  def is_discrete(self) -> bool:
    return self.kind in (MechanismKind.CANONICAL, MechanismKind.GEOMETRIC)

  def pair(self) -> DiscretePair:
    if not self.is_discrete:
      raise ValueError(f'{self.kind.value} is continuous; use discretize()')
    return _discrete_pair(self.kind, self.eps, self.delta, self.trunc)

  def log_density_ratio(self, y) -> float:
    """log(p0(y) / p1(y)) for one output ``y``; +-inf on singular outputs."""
    if self.is_discrete:
      pair = self.pair()
      i = pair.outcomes.index(y)
      a, b = pair.p0[i], pair.p1[i]
      if b == 0:
        return math.inf
      if a == 0:
        return -math.inf
      return math.log(a) - math.log(b)
    shift = self.sensitivity
    if self.kind is MechanismKind.LAPLACE:
      return (abs(y - shift) - abs(y)) / self.scale
    return shift * (shift - 2.0 * y) / (2.0 * self.scale**2)


@dataclasses.dataclass(frozen=True)
class GaussianCurve:
  """Tradeoff between N(0, 1) and N(m, 1).

  ``m`` is the standardized mean shift of the k-fold log-likelihood ratio,
  sqrt(k) * sensitivity / sigma for k Gaussian releases.
  """

  m: float

  def __post_init__(self):
    if not self.m > 0:
      raise ValueError(f'm must be positive, got {self.m}')

  @classmethod
  def from_mechanism(cls, sensitivity: float, sigma: float, k: int = 1):
    return cls(sensitivity * math.sqrt(k) / sigma)


@functools.lru_cache(maxsize=256)
def _discrete_pair(kind, eps, delta, trunc) -> DiscretePair:
  if kind is MechanismKind.CANONICAL:
    return canonical_pair(EpsDelta(eps, delta))
  return geometric_pair(eps, trunc)


def canonical_pair(g: EpsDelta) -> DiscretePair:
  """Four-outcome pair whose privacy region is exactly R(eps, delta)."""
  # (1 - delta) e^eps / (1 + e^eps) written via the logistic function.
  hi = (1.0 - g.delta) * special.expit(g.eps)
  lo = (1.0 - g.delta) * special.expit(-g.eps)
  p0 = np.array([g.delta, hi, lo, 0.0])
  p1 = np.array([0.0, lo, hi, g.delta])
  return DiscretePair((0, 1, 2, 3), p0, p1)


def geometric_pair(eps: float, trunc: int = DEFAULT_TRUNCATION) -> DiscretePair:
  """Double-geometric noise on a counting query, outputs q(D0)=0, q(D1)=1.

  The support is cut to {-trunc, ..., trunc + 1}; the mass beyond either end
  is added to the end outcome.  Every kept outcome then still has likelihood
  ratio exactly e^eps (left of 1) or e^-eps (from 1 on).
  """
  if eps <= 0:
    raise ValueError('eps must be positive')
  if trunc < 2:
    raise ValueError(f'trunc must be >= 2, got {trunc}')
  xs = np.arange(-trunc, trunc + 2)
  norm = math.tanh(eps / 2.0)  # (e^eps - 1) / (e^eps + 1)
  tail = 1.0 / -math.expm1(-eps)  # sum_{j >= 0} e^{-eps j}

  def noise(z: np.ndarray, lo: int, hi: int) -> np.ndarray:
    # Pmf of z = x - center with all mass below lo / above hi folded in.
    p = norm * np.exp(-eps * np.abs(z))
    p[0] = norm * math.exp(-eps * abs(lo)) * tail
    p[-1] = norm * math.exp(-eps * abs(hi)) * tail
    return p

  p0 = noise(xs.astype(float), -trunc, trunc + 1)
  p1 = noise(xs.astype(float) - 1.0, -trunc - 1, trunc)
  return DiscretePair(tuple(int(x) for x in xs), p0, p1)


def laplace_pair_eps(delta_sens: float, b: float) -> float:
  """Pure-DP level of Laplace noise with scale ``b`` on a query of sensitivity ``delta_sens``."""
  if delta_sens <= 0 or b <= 0:
    raise ValueError('sensitivity and scale must be positive')
  return delta_sens / b


def gaussian_delta(curve: GaussianCurve, eps: float) -> float:
  """Exact hockey-stick divergence between N(0, 1) and N(m, 1) at ``eps``.

  delta(eps) = Phi(m/2 - eps/m) - e^eps Phi(-m/2 - eps/m).
  """
  m = curve.m
  a = m / 2.0 - eps / m
  b = -m / 2.0 - eps / m
  second = math.exp(eps + special.log_ndtr(b))
  value = special.ndtr(a) - second
  return float(min(max(value, 0.0), 1.0))


def _rng(seed: Seed) -> np.random.Generator:
  if isinstance(seed, np.random.Generator):
    return seed
  return np.random.default_rng(seed)


@functools.lru_cache(maxsize=256)
def _cumulative(spec: MechanismSpec, b: int) -> np.ndarray:
  # Inverse-cdf table; the last entry is forced to 1 so a uniform draw never
  # falls past the end, and zero-mass outcomes can never be selected.
  pair = spec.pair()
  cdf = np.cumsum(pair.p1 if b else pair.p0)
  cdf[-1] = 1.0
  last = int(np.flatnonzero(pair.p1 if b else pair.p0)[-1])
  cdf[last:] = 1.0
  return cdf


def sample(spec: MechanismSpec, b: int, seed: Seed = None, size=None):
  """Draw from the spec's law under hypothesis ``b``.

  ``seed`` may be an int or a ``Generator``; a Generator is advanced in
  place, so callers own the stream.
  """
  if b not in (0, 1):
    raise ValueError(f'b must be 0 or 1, got {b}')
  rng = _rng(seed)
  if spec.is_discrete:
    pair = spec.pair()
    idx = np.searchsorted(_cumulative(spec, b), rng.random(size), side='right')
    if size is None:
      return pair.outcomes[int(idx)]
    return np.asarray(pair.outcomes)[idx]
  center = spec.sensitivity if b else 0.0
  if spec.kind is MechanismKind.LAPLACE:
    out = rng.laplace(center, spec.scale, size=size)
  else:
    out = rng.normal(center, spec.scale, size=size)
  return out if size is not None else float(out)


def discretize(spec: MechanismSpec, lo: float, hi: float,
               n_bins: int) -> DiscretePair:
  """Bin a continuous mechanism's two output laws on a uniform grid.

  Two extra bins hold (-inf, lo) and [hi, inf).  Binning is post-processing,
  so the hockey-stick divergence of the result never exceeds the continuous
  one.
  """
  if spec.is_discrete:
    raise ValueError('discretize() expects a laplace or gaussian spec')
  if not lo < hi:
    raise ValueError(f'need lo < hi, got [{lo}, {hi}]')
  if n_bins < 8:
    raise ValueError(f'need at least 8 bins, got {n_bins}')
  edges = np.linspace(lo, hi, n_bins + 1)
  if spec.kind is MechanismKind.LAPLACE:
    law = stats.laplace
  else:
    law = stats.norm

  def masses(center: float) -> np.ndarray:
    z = (edges - center) / spec.scale
    cdf = law.cdf(z)
    sf = law.sf(z)
    # Differences of whichever tail is smaller keep precision at both ends.
    inner = np.where(z[1:] <= 0, cdf[1:] - cdf[:-1], sf[:-1] - sf[1:])
    p = np.concatenate(([cdf[0]], np.maximum(inner, 0.0), [sf[-1]]))
    return p / math.fsum(p)

  labels = ('<lo',) + tuple(range(n_bins)) + ('>=hi',)
  return DiscretePair(labels, masses(0.0), masses(spec.sensitivity))
