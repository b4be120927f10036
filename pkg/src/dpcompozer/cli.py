"""Command-line front end: ``dpcompozer region|compose|calibrate|simulate``.

Exit codes: 0 on success, 1 on domain errors (message on stderr), 2 on bad
flags.  Floats are written with 17 significant digits so output round-trips.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from typing import Optional, Sequence

from dpcompozer import calibration, composition, experiment, mechanisms
from dpcompozer.region import EpsDelta, boundary, region_from_eps_delta

VERDICT_PASS = 'PASS'
VERDICT_FAIL = 'FAIL'
VERDICT_UNDETERMINED = 'UNDETERMINED'


def _fmt(x: float) -> str:
  return format(float(x), '.17g')


@contextlib.contextmanager
def _sink(path: Optional[str]):
  if path is None or path == '-':
    yield sys.stdout
  else:
    with open(path, 'w', newline='') as f:
      yield f


def _target(args) -> EpsDelta:
  return EpsDelta(args.eps, args.delta)


def cmd_region(args) -> int:
  g = _target(args)
  if args.k == 1:
    region = region_from_eps_delta(g)
  else:
    region = composition.optimal_region(g, args.k)
  verts = sorted(boundary(region), key=lambda p: (p.pmd, -p.pfa))
  with _sink(args.output) as out:
    if args.format == 'csv':
      out.write('pmd,pfa\n')
      for p in verts:
        out.write(f'{_fmt(p.pmd)},{_fmt(p.pfa)}\n')
    else:
      doc = {
          'params': {'eps': g.eps, 'delta': g.delta, 'k': args.k},
          'vertices': [{'pmd': p.pmd, 'pfa': p.pfa} for p in verts],
          'lines': [{'eps': l.eps, 'delta': l.delta} for l in region.lines],
      }
      json.dump(doc, out, indent=2)
      out.write('\n')
  return 0


def _load_steps(path: str) -> list[EpsDelta]:
  with open(path) as f:
    raw = json.load(f)
  if not isinstance(raw, list):
    raise ValueError(f'{path}: expected a JSON list of {{"eps", "delta"}}')
  try:
    return [EpsDelta(item['eps'], item['delta']) for item in raw]
  except (KeyError, TypeError) as e:
    raise ValueError(f'{path}: each step needs "eps" and "delta"') from e


def cmd_compose(args) -> int:
  if args.steps is not None:
    query = composition.CompositionQuery(steps=_load_steps(args.steps),
                                         slack_delta=args.slack)
  else:
    if args.eps is None or args.delta is None:
      raise ValueError('compose needs --eps and --delta, or --steps')
    query = composition.CompositionQuery(step=_target(args), k=args.k,
                                         slack_delta=args.slack)
  slack = query.resolved_slack()
  reports = composition.compare(query)
  if args.method != 'all':
    reports = [r for r in reports if r.method.value == args.method]
    if not reports:
      raise ValueError(f'method {args.method!r} does not apply to this query '
                       f'(slack_delta={slack!r})')
  if args.format == 'json':
    doc = {
        'slack_delta': slack,
        'slack_defaulted': args.slack is None,
        'reports': [{
            'method': r.method.value,
            'eps': r.result_eps,
            'delta': r.result_delta,
            'contains_optimal': r.contains_optimal,
            'notes': r.notes,
        } for r in reports],
    }
    print(json.dumps(doc, indent=2))
  else:
    origin = 'default' if args.slack is None else 'given'
    print(f'slack_delta = {_fmt(slack)} ({origin})')
    print(f'{"method":<14}{"eps":>26}{"delta":>26}')
    for r in reports:
      print(f'{r.method.value:<14}{_fmt(r.result_eps):>26}'
            f'{_fmt(r.result_delta):>26}')
  return 0


def _check_doc(check: calibration.ForwardCheck) -> dict:
  return {
      'per_query': {'eps': check.per_query.eps,
                    'delta': check.per_query.delta},
      'slack_delta': check.slack_delta,
      'composed': {'eps': check.composed.eps, 'delta': check.composed.delta},
      'passed': check.passed,
  }


def cmd_calibrate(args) -> int:
  target = _target(args)
  doc: dict = {'mechanism': args.mechanism,
               'target': {'eps': target.eps, 'delta': target.delta},
               'k': args.k}
  if args.mechanism == 'budget':
    per_query = calibration.per_query_budget(target, args.k)
    check = calibration.forward_check(per_query, args.k, target)
    doc.update(eps0=per_query.eps, delta0=per_query.delta)
    doc['forward_check'] = _check_doc(check)
  elif args.mechanism == 'laplace':
    var = calibration.laplace_variance(args.sensitivity, target, args.k)
    scale = calibration.laplace_scale(var)
    per_query = EpsDelta(
        mechanisms.laplace_pair_eps(args.sensitivity, scale), 0.0)
    check = calibration.forward_check(per_query, args.k, target)
    doc.update(variance=var, scale=scale)
    doc['forward_check'] = _check_doc(check)
  elif args.mechanism == 'gaussian':
    var = calibration.gaussian_variance(args.sensitivity, target, args.k)
    sigma = math.sqrt(var)
    curve = mechanisms.GaussianCurve.from_mechanism(args.sensitivity, sigma,
                                                    args.k)
    exact = mechanisms.gaussian_delta(curve, target.eps)
    doc.update(variance=var, sigma=sigma)
    doc['forward_check'] = {
        'exact_delta_at_target_eps': exact,
        'passed': exact <= target.delta,
    }
  else:
    if args.eta is None or args.nu is None:
      raise ValueError('--mechanism jl needs --eta and --nu')
    p = calibration.jl_params(target, args.eta, args.nu, legacy=args.legacy)
    del doc['k']  # the row count r plays the role of k
    check = calibration.forward_check(EpsDelta(p.eps0, p.delta0), p.r, target)
    doc.update(r=p.r, w=p.w, eps0=p.eps0, delta0=p.delta0, tau=p.tau)
    doc['forward_check'] = _check_doc(check)
  print(json.dumps(doc, indent=2))
  return 0


def _parse_thresholds(text: str) -> Optional[list[float]]:
  if text == 'auto':
    return None
  try:
    values = [float(t) for t in text.split(',') if t.strip()]
  except ValueError as e:
    raise ValueError(f'bad --thresholds {text!r}: {e}') from e
  return sorted(values)


def cmd_simulate(args) -> int:
  g = _target(args)
  if args.mechanism == 'canonical':
    spec = mechanisms.MechanismSpec.canonical(g.eps, g.delta)
  else:
    if g.delta != 0:
      raise ValueError('the geometric mechanism is pure DP; use --delta 0')
    spec = mechanisms.MechanismSpec.geometric(g.eps)
  if args.trials < 1:
    raise ValueError('--trials must be positive')
  points = experiment.estimate_curve(
      experiment.FixedStrategy(spec), args.k, args.trials,
      _parse_thresholds(args.thresholds), args.seed, min_trials=1)
  report = experiment.check_within(points,
                                   composition.optimal_region(g, args.k))
  if args.trials < experiment.MIN_TRIALS:
    verdict = VERDICT_UNDETERMINED
  else:
    verdict = VERDICT_PASS if report.passed else VERDICT_FAIL
  with _sink(args.output) as out:
    out.write('threshold,pmd,pfa,ci\n')
    for cp in points:
      out.write(f'{_fmt(cp.threshold)},{_fmt(cp.point.pmd)},'
                f'{_fmt(cp.point.pfa)},{_fmt(cp.radius)}\n')
    out.write(f'# verdict: {verdict} violations={report.violations} '
              f'near_boundary={report.near_boundary} trials={args.trials}\n')
  return 0


def build_parser() -> argparse.ArgumentParser:
  parser = argparse.ArgumentParser(
      prog='dpcompozer',
      description='Exact and closed-form composition of (eps, delta)-DP.')
  sub = parser.add_subparsers(dest='command', required=True)

  def budget_flags(p, require=True):
    p.add_argument('--eps', type=float, required=require)
    p.add_argument('--delta', type=float, required=require)
    p.add_argument('--k', type=int, default=1)

  p = sub.add_parser('region', help='boundary of R(eps, delta) or its k-fold')
  budget_flags(p)
  p.add_argument('--format', choices=('csv', 'json'), default='csv')
  p.add_argument('--output', '-o', help='file to write (default: stdout)')
  p.set_defaults(func=cmd_region)

  p = sub.add_parser('compose', help='compare composition accountants')
  budget_flags(p, require=False)
  p.add_argument('--slack', type=float, default=None,
                 help='slack delta; default min(sqrt(k eps^2), 0.5)')
  p.add_argument('--method', default='all',
                 choices=('basic', 'drv', 'optimal', 'simplified',
                          'heterogeneous', 'all'))
  p.add_argument('--steps', help='JSON list of {"eps", "delta"} steps')
  p.add_argument('--format', choices=('text', 'json'), default='text')
  p.set_defaults(func=cmd_compose)

  p = sub.add_parser('calibrate', help='per-query budgets and noise levels')
  p.add_argument('--mechanism', required=True,
                 choices=('laplace', 'gaussian', 'budget', 'jl'))
  budget_flags(p)
  p.add_argument('--sensitivity', type=float, default=1.0)
  p.add_argument('--eta', type=float)
  p.add_argument('--nu', type=float)
  p.add_argument('--legacy', action='store_true',
                 help='jl only: older per-row budget')
  p.set_defaults(func=cmd_calibrate)

  p = sub.add_parser('simulate', help='Monte-Carlo tradeoff points')
  p.add_argument('--mechanism', choices=('canonical', 'geometric'),
                 default='canonical')
  budget_flags(p)
  p.add_argument('--trials', type=int, required=True)
  p.add_argument('--seed', type=int, default=0)
  p.add_argument('--thresholds', default='auto',
                 help='"auto" or a comma-separated list')
  p.add_argument('--output', '-o', help='file to write (default: stdout)')
  p.set_defaults(func=cmd_simulate)
  return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
  args = build_parser().parse_args(argv)
  try:
    return args.func(args)
  except (ValueError, OverflowError, OSError) as e:
    print(f'dpcompozer {args.command}: error: {e}', file=sys.stderr)
    return 1


if __name__ == '__main__':
  sys.exit(main())
