"""Finite-grid checks of the four hypotheses behind the moderate-deviation results.

(i)   J is Lipschitz with the declared constant.
(ii)  the quantile moves by O((log n)^-(1+eps)) over windows of width
      t * sqrt(log n / n) around alpha and 1 - beta.
(iii) the trimming fractions converge at rate O(sqrt(log n / n)).
(iv)  the coefficients stay within O((log n)^-eps~ sqrt(n / log n)) of the
      reference coefficients in l1.

Asymptotic O-statements are tested as boundedness of a ratio over an n grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .weights import lipschitz_estimate, perturbation_budget

PASS, FAIL, NOT_APPLICABLE = "pass", "fail", "not-applicable"
DEFAULT_T_GRID = (-4.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 4.0)
DEFAULT_N_GRID = (500, 2000, 8000, 32000)
LIPSCHITZ_SLACK = 1e-9
# a secant slope still growing by more than this over the last step of the
# n grid means the quantile is not Lipschitz at the point
SECANT_GROWTH = 1.25
# largest tolerated growth exponent of a ratio in log n
GROWTH_LIMIT = 0.25


@dataclass(frozen=True)
class Evidence:
    condition: str
    label: str
    n: int
    value: float


@dataclass(frozen=True)
class ConditionResult:
    condition: str
    status: str
    statistic: float
    bound: float
    exponent: float | None = None
    detail: str = ""
    evidence: tuple = ()


@dataclass
class ConditionReport:
    results: list = field(default_factory=list)

    def get(self, condition):
        for r in self.results:
            if r.condition == condition:
                return r
        raise KeyError(condition)

    @property
    def statuses(self):
        return {r.condition: r.status for r in self.results}

    @property
    def failed(self):
        return [r.condition for r in self.results if r.status == FAIL]

    @property
    def ok(self):
        return not self.failed

    @property
    def epsilon(self):
        return self.get("ii").exponent

    @property
    def epsilon_tilde(self):
        return self.get("iv").exponent

    @property
    def nu(self):
        """``min(eps, eps~)``, only when both exponents were measured."""
        e, et = self.epsilon, self.epsilon_tilde
        if e is None or et is None:
            return None
        return min(e, et)


def _log_slope(n_grid, values):
    """Least-squares slope of ``log values`` against ``log log n``."""
    x = np.log(np.log(np.asarray(n_grid, dtype=float)))
    return float(np.polyfit(x, np.log(values), 1)[0])


def _window(n):
    return math.sqrt(math.log(n) / n)


def check_lipschitz(weight, grid_size=10_000):
    """Condition (i): grid secant slope of J against the declared constant."""
    est = lipschitz_estimate(weight, grid_size)
    declared = weight.lipschitz
    status = PASS if est <= declared + LIPSCHITZ_SLACK else FAIL
    return ConditionResult("i", status, est, declared,
                           detail=f"grid slope {est:.6g} vs declared {declared:.6g}")


def _usable_t(p, t_grid, n_grid):
    lo = min(n_grid)
    keep = [t for t in t_grid if 0 < p + t * _window(lo) < 1]
    if len(keep) < len(t_grid):
        warnings.warn(f"shrinking t grid at u={p}: {sorted(set(t_grid) - set(keep))} leave (0, 1)",
                      RuntimeWarning, stacklevel=3)
    return keep


def _slope_at(dist, p, reach):
    """Quantile density at ``p``, or 0 when a quantile jump lies within ``reach``."""
    if any(abs(q - p) <= reach for q, _ in dist.jumps()):
        return 0.0
    return float(dist.quantile_density(p))


def check_quantile_smoothness(dist, alpha, beta, t_grid=DEFAULT_T_GRID, n_grid=DEFAULT_N_GRID,
                              epsilon=0.1):
    """Condition (ii) at ``alpha`` and ``1 - beta``.

    For each point and t, ``D_n = |F^-1(p + t w_n) - F^-1(p)|`` with
    ``w_n = sqrt(log n / n)``.  If the secant ``D_n / (|t| w_n)`` has levelled
    off by the end of the grid, or is still approaching the quantile density
    at ``p`` from below, the quantile is locally Lipschitz and every exponent
    works (reported as inf); otherwise the exponent is read off the
    slope of ``log D_n`` against ``log log n`` and must reach ``epsilon``.
    """
    t_grid = tuple(float(t) for t in t_grid)
    n_grid = tuple(int(n) for n in n_grid)
    if any(t == 0 for t in t_grid) or sorted(t_grid) != sorted(-t for t in t_grid):
        raise DomainError("t grid must be symmetric about 0 and exclude 0")
    if len(n_grid) < 2 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise DomainError("n grid must be increasing with at least two points")
    evidence, exponents, worst = [], [], None
    for p in (alpha, 1 - beta):
        for t in _usable_t(p, t_grid, n_grid):
            w = np.array([_window(n) for n in n_grid])
            base = float(dist.quantile(p))
            delta = np.abs(dist.quantile(p + t * w) - base)
            evidence += [Evidence("ii", f"u={p:g},t={t:g}", n, float(d)) for n, d in zip(n_grid, delta)]
            if np.all(delta == 0):
                exponents.append(math.inf)
                continue
            secant = delta / (abs(t) * w)
            if secant[-1] <= SECANT_GROWTH * max(secant[-2], _slope_at(dist, p, abs(t) * w[0])):
                exponents.append(math.inf)
                continue
            if np.any(delta == 0):
                exponents.append(math.inf)
                continue
            eps_hat = -_log_slope(n_grid, delta) - 1.0
            exponents.append(eps_hat)
            if worst is None or eps_hat < worst[0]:
                worst = (eps_hat, p, t)
    if not exponents:
        return ConditionResult("ii", NOT_APPLICABLE, math.nan, epsilon,
                               detail="no t inside (0, 1)", evidence=tuple(evidence))
    eps = min(exponents)
    status = PASS if eps >= epsilon else FAIL
    if math.isinf(eps):
        detail = "unbounded (locally Lipschitz)"
    else:
        detail = f"smallest exponent {eps:.4g} at u={worst[1]:g}, t={worst[2]:g}"
    return ConditionResult("ii", status, eps, epsilon, exponent=eps, detail=detail,
                           evidence=tuple(evidence))


def check_trim_rate(trims, bound=1.0):
    """Condition (iii): ``max(|alpha_n - alpha|, |beta_n - beta|) / w_n <= bound`` on the grid."""
    trims = list(trims)
    if len(trims) < 3:
        raise DomainError("trim-rate check needs at least 3 sample sizes")
    ratios = [max(abs(t.alpha_n - t.alpha), abs(t.beta_n - t.beta)) / _window(t.n) for t in trims]
    worst = max(ratios)
    evidence = tuple(Evidence("iii", "ratio", t.n, r) for t, r in zip(trims, ratios))
    return ConditionResult("iii", PASS if worst <= bound else FAIL, worst, bound,
                           detail=f"largest deviation ratio {worst:.4g}", evidence=evidence)


def check_coefficient_sum(schemes, eps_tilde, bound=2.0, growth_limit=GROWTH_LIMIT):
    """Condition (iv) for ``{n: CoefficientScheme}``.

    Passes when ``sum |c - c0| / B(n)`` stays below ``bound`` and does not
    grow like a positive power of ``log n``.  The reported exponent is the
    fitted decay of ``sum |c - c0| / sqrt(n / log n)`` in ``log n``.
    """
    items = sorted(schemes.items())
    if len(items) < 3:
        raise DomainError("coefficient check needs at least 3 sample sizes")
    ns = [n for n, _ in items]
    sums = np.array([s.deviation_sum for _, s in items])
    if eps_tilde is None or eps_tilde <= 0:
        eps_tilde = 1.0
    ratios = sums / np.array([perturbation_budget(n, eps_tilde) for n in ns])
    evidence = tuple(Evidence("iv", "ratio", n, float(r)) for n, r in zip(ns, ratios))
    if np.all(sums == 0):
        return ConditionResult("iv", PASS, 0.0, bound, exponent=math.inf,
                               detail="coefficients equal the reference", evidence=evidence)
    if np.any(sums == 0):
        growth = math.inf
        measured = -math.inf
    else:
        growth = _log_slope(ns, ratios)
        measured = -_log_slope(ns, sums / np.sqrt(np.array(ns) / np.log(ns)))
    worst = float(ratios.max())
    ok = worst <= bound and growth <= growth_limit
    return ConditionResult("iv", PASS if ok else FAIL, worst, bound, exponent=measured,
                           detail=f"largest ratio {worst:.4g}, growth exponent {growth:.3g}",
                           evidence=evidence)


def run_conditions(config, t_grid=DEFAULT_T_GRID, n_grid=DEFAULT_N_GRID, epsilon=0.1,
                   trim_bound=1.0, coefficient_bound=2.0):
    """All four checks for an :class:`~trimlstat.montecarlo.ExperimentConfig`."""
    n_grid = tuple(n_grid)
    report = ConditionReport()
    report.results.append(check_lipschitz(config.weight))
    report.results.append(check_quantile_smoothness(config.distribution, config.alpha,
                                                    config.beta, t_grid, n_grid, epsilon))
    report.results.append(check_trim_rate([config.trim_at(n) for n in n_grid], trim_bound))
    report.results.append(check_coefficient_sum({n: config.scheme_at(n) for n in n_grid},
                                                config.perturb_epsilon, coefficient_bound))
    return report


CONDITION_COLUMNS = ("condition", "status", "statistic", "bound", "exponent", "detail")
EVIDENCE_COLUMNS = ("condition", "label", "n", "value")


def report_rows(report):
    for r in report.results:
        yield {"condition": r.condition, "status": r.status, "statistic": r.statistic,
               "bound": r.bound, "exponent": "" if r.exponent is None else r.exponent,
               "detail": r.detail}


def evidence_rows(report):
    for r in report.results:
        for e in r.evidence:
            yield {"condition": e.condition, "label": e.label, "n": e.n, "value": e.value}
