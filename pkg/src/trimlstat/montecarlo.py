"""Reproducible Monte Carlo for tail probabilities, variance ratios and remainders.

Replicate ``r`` of a study always consumes the same slice of a keyed counter
stream (see :mod:`trimlstat.streams`).  Work is cut into fixed blocks of
replicates; blocks may run on any number of threads and are reassembled in
block order, so every report is bit-identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from . import _backend
from .errors import ConfigError
from .lstat import Decomposer, TrimSpec, centering
from .streams import Stream, replicate_block, study_key
from .variance import VAR_TOL, asymptotic_variance, influence_table
from .weights import build_scheme

BLOCK = 256
JACKKNIFE_BATCHES = 20
TAIL_FLOOR_COUNT = 10
NORMALIZATIONS = ("sigma", "empirical")


def normal_tail(x):
    """``1 - Phi(x)``, accurate in relative terms far into the upper tail."""
    out = special.ndtr(-np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def config_hash(mapping):
    """64-bit hex digest of a JSON-serialisable mapping, independent of key order."""
    text = json.dumps(mapping, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


def _json_default(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


@dataclass(frozen=True)
class XGrid:
    """Evaluation points ``-lower, -lower + step, ...`` up to ``reach * sqrt(log n)``."""

    lower: float = 2.0
    reach: float = 1.0
    step: float = 0.25

    def __post_init__(self):
        if not (self.lower >= 0 and self.reach > 0 and self.step > 0):
            raise ConfigError("grid needs lower >= 0, reach > 0 and step > 0")

    def upper(self, n):
        return self.reach * math.sqrt(math.log(n))

    def points(self, n):
        count = math.floor((self.upper(n) + self.lower) / self.step + 1e-9)
        return np.round(-self.lower + self.step * np.arange(count + 1), 12)


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully resolved experiment.

    ``trim`` fixes the primary sample size; other sizes (``n_grid``) use
    ``TrimSpec.from_limits`` with the same limits and shift.
    """

    distribution: object
    weight: object
    trim: TrimSpec
    replications: int
    seed: int
    normalization: str = "sigma"
    grid: XGrid = field(default_factory=XGrid)
    perturb_epsilon: float | None = None
    perturb_budget: float = 0.0
    perturb_random: bool = False
    n_grid: tuple = (500, 2000, 8000)
    shift_scale: float = 0.0
    shift_power: float = 0.5

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")
        if self.perturb_budget and not (self.perturb_epsilon and self.perturb_epsilon > 0):
            raise ConfigError("a perturbation budget needs perturb_epsilon > 0")

    @property
    def alpha(self):
        return self.trim.alpha

    @property
    def beta(self):
        return self.trim.beta

    def trim_at(self, n):
        if n == self.trim.n:
            return self.trim
        return TrimSpec.from_limits(n, self.alpha, self.beta, self.shift_scale, self.shift_power)

    def scheme_at(self, n):
        stream = Stream.from_seed(self.seed, "perturb", n) if self.perturb_random else None
        return build_scheme(self.weight, self.trim_at(n), self.perturb_epsilon,
                            self.perturb_budget, stream)

    @property
    def scheme(self):
        return self.scheme_at(self.trim.n)

    def with_replications(self, replications):
        return replace(self, replications=replications)

    def hash(self):
        return config_hash(self.to_dict())

    def to_dict(self):
        d, w, t = self.distribution, self.weight, self.trim
        return {
            "distribution": {"family": d.family, "params": list(d.params), "loc": d.loc,
                             "scale": d.scale, "moment_order": d.moment_order},
            "weight": {"kind": w.kind, "coefficients": list(w.coefficients),
                       "knots": [list(k) for k in w.knots], "domain": list(w.domain),
                       "lipschitz": w.lipschitz, "perturb_epsilon": self.perturb_epsilon,
                       "perturb_budget": self.perturb_budget, "perturb_random": self.perturb_random},
            "trim": {"n": t.n, "k": t.k, "m": t.m, "alpha": t.alpha, "beta": t.beta,
                     "n_grid": list(self.n_grid), "shift_scale": self.shift_scale,
                     "shift_power": self.shift_power},
            "replications": self.replications,
            "seed": self.seed,
            "normalization": self.normalization,
            "grid": {"lower": self.grid.lower, "reach": self.grid.reach, "step": self.grid.step},
        }


# -- simulation core ----------------------------------------------------------

def map_blocks(fn, replications, workers=1):
    """``[fn((start, count)), ...]`` over fixed blocks, in block order."""
    blocks = [(s, min(BLOCK, replications - s)) for s in range(0, replications, BLOCK)]
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, blocks))
    return [fn(b) for b in blocks]


def simulate_statistics(dist, coeffs, trim, key, replications, workers=1,
                        table=None, kernel=None):
    """L-statistics for replicates ``0 .. replications - 1`` of study ``key``.

    ``coeffs`` has one row per coefficient vector; the result is
    ``(values (R, P), cv (R,) or None)`` where ``cv`` is the replicate mean of
    ``table.psi`` when an :class:`~trimlstat.variance.InfluenceTable` is given.
    """
    kernel = kernel or _backend.kernels
    coeffs = np.ascontiguousarray(np.atleast_2d(coeffs), dtype=float)
    # with constant rows only the set of middle order statistics matters
    sort_middle = not bool(np.all(coeffs == coeffs[:, :1]))
    params = np.asarray(dist.params, dtype=float)
    cv_args = (None, 0.0, 1.0) if table is None else (table.values, table.lo, table.hi)

    def run(block):
        start, count = block
        raw = replicate_block(key, trim.n, start, count)
        return kernel.block_statistics(raw, dist.code, params, dist.loc, dist.scale, coeffs,
                                       trim.k, trim.m, sort_middle, *cv_args)

    parts = map_blocks(run, replications, workers)
    values = np.concatenate([p[0] for p in parts])
    cv = None if table is None else np.concatenate([p[1] for p in parts])
    return values, cv


def limiting_sigma(config):
    """``sigma(J, F)``; raises ``ConfigError`` when it vanishes."""
    res = asymptotic_variance(config.weight, config.distribution, config.alpha, config.beta)
    if res.value <= VAR_TOL:
        raise ConfigError(f"asymptotic variance is {res.value:.3g}; the normalised statistic is degenerate")
    return math.sqrt(res.value)


def run_identity(config, replications=None, workers=1, kernel=None):
    """Remainder decomposition of each replicate at the primary sample size."""
    kernel = kernel or _backend.kernels
    dist, trim = config.distribution, config.trim
    reps = replications or config.replications
    dec = Decomposer(config.weight, trim, dist)
    scheme = config.scheme
    key = study_key(config.seed, "identity", trim.n)
    params = np.asarray(dist.params, dtype=float)

    def run(block):
        start, count = block
        x = kernel.sorted_block(replicate_block(key, trim.n, start, count), dist.code, params,
                                dist.loc, dist.scale)
        return [dec.decompose(row, scheme) for row in x]

    return [res for part in map_blocks(run, reps, workers) for res in part]


# -- tails --------------------------------------------------------------------

@dataclass
class TailReport:
    x: np.ndarray
    p_upper: np.ndarray
    p_lower: np.ndarray
    normal_tail: np.ndarray
    se_upper: np.ndarray
    se_lower: np.ndarray
    n: int
    replications: int
    seed: int
    config_hash: str
    wall_time: float
    kolmogorov: float
    statistics: np.ndarray | None = None

    @property
    def ratio_upper(self):
        return self.p_upper / self.normal_tail

    @property
    def ratio_lower(self):
        return self.p_lower / self.normal_tail

    @property
    def se(self):
        return self.se_upper

    def band(self, rel=0.15, se_mult=3.0):
        """Per-point allowed ``|ratio - 1|`` for the upper and lower tails."""
        up = np.maximum(rel, se_mult * self.se_upper / self.normal_tail)
        lo = np.maximum(rel, se_mult * self.se_lower / self.normal_tail)
        return up, lo

    def within_band(self, rel=0.15, se_mult=3.0):
        up, lo = self.band(rel, se_mult)
        return (np.abs(self.ratio_upper - 1) <= up) & (np.abs(self.ratio_lower - 1) <= lo)

    def rows(self):
        for i in range(self.x.size):
            yield {"x": self.x[i], "p_upper": self.p_upper[i], "p_lower": self.p_lower[i],
                   "normal_tail": self.normal_tail[i], "ratio_upper": self.ratio_upper[i],
                   "ratio_lower": self.ratio_lower[i], "se": self.se_upper[i],
                   "n": self.n, "R": self.replications, "seed": self.seed}


TAIL_COLUMNS = ("x", "p_upper", "p_lower", "normal_tail", "ratio_upper", "ratio_lower",
                "se", "n", "R", "seed")


def tail_counts(sorted_t, x):
    """``(#{T > x}, #{T <= -x})`` for each grid point, from sorted ``T``."""
    total = sorted_t.size
    upper = total - np.searchsorted(sorted_t, x, side="right")
    lower = np.searchsorted(sorted_t, -np.asarray(x), side="right")
    return upper, lower


def kolmogorov_distance(t):
    """``sup_x |F_R(x) - Phi(x)|`` for the empirical distribution of ``t``."""
    t = np.sort(np.asarray(t, dtype=float))
    r = t.size
    phi = special.ndtr(t)
    hi = np.arange(1, r + 1) / r - phi
    lo = phi - np.arange(r) / r
    return float(max(hi.max(), lo.max()))


def truncate_grid(x, replications):
    """Drop points whose normal tail is below ``10 / R`` (with a warning)."""
    keep = normal_tail(x) >= TAIL_FLOOR_COUNT / replications
    if not keep.all():
        warnings.warn(f"tail floor: {int((~keep).sum())} grid point(s) have 1 - Phi(x) < "
                      f"{TAIL_FLOOR_COUNT}/R and were dropped", RuntimeWarning, stacklevel=2)
    return x[keep]


def run_tails(config, workers=1, keep_statistics=False, kernel=None, label=None):
    """Empirical upper and lower tails of the normalised statistic over the x grid.

    ``label`` is stored as the report's config hash (defaults to the hash of
    ``config`` itself).
    """
    t0 = time.perf_counter()
    trim, dist = config.trim, config.distribution
    n, reps = trim.n, config.replications
    sigma = limiting_sigma(config)
    mu = centering(config.weight, dist, trim)
    key = study_key(config.seed, "tails", n)
    values, _ = simulate_statistics(dist, config.scheme.exact, trim, key, reps, workers, kernel=kernel)
    stat = values[:, 0]
    if config.normalization == "sigma":
        t = math.sqrt(n) * (stat - mu) / sigma
    else:
        if reps < 2:
            raise ConfigError("empirical-variance normalisation needs at least 2 replications")
        sd = float(np.std(stat, ddof=1))
        if sd == 0:
            raise ConfigError("statistic has zero sample variance")
        t = (stat - mu) / sd
    x = truncate_grid(config.grid.points(n), reps)
    st = np.sort(t)
    up, lo = tail_counts(st, x)
    p_up, p_lo = up / reps, lo / reps
    return TailReport(
        x=x, p_upper=p_up, p_lower=p_lo, normal_tail=normal_tail(x),
        se_upper=np.sqrt(p_up * (1 - p_up) / reps), se_lower=np.sqrt(p_lo * (1 - p_lo) / reps),
        n=n, replications=reps, seed=config.seed, config_hash=label or config.hash(),
        wall_time=time.perf_counter() - t0, kolmogorov=kolmogorov_distance(st),
        statistics=t if keep_statistics else None)


# -- variance ratio -----------------------------------------------------------

@dataclass(frozen=True)
class VarianceRatio:
    n: int
    replications: int
    ratio: float
    se: float
    ratio_plain: float
    se_plain: float
    sigma: float
    variance: float
    method: str

    @property
    def deviation(self):
        return abs(self.ratio - 1.0)


VARIANCE_COLUMNS = ("n", "R", "ratio", "se", "ratio_plain", "se_plain", "sigma",
                    "variance", "deviation", "method")


def _jackknife(estimate, pieces):
    """Delete-one-batch jackknife standard error of ``estimate(mask)``."""
    g = len(pieces)
    full = np.ones(pieces[-1].stop, dtype=bool)
    loo = []
    for sl in pieces:
        mask = full.copy()
        mask[sl] = False
        loo.append(estimate(mask))
    loo = np.asarray(loo)
    return float(math.sqrt((g - 1) / g * np.sum((loo - loo.mean()) ** 2)))


def variance_ratio(config, n=None, workers=1, ignore_moments=False, kernel=None):
    """``sqrt(Var L_n) * sqrt(n) / sigma`` by Monte Carlo.

    The primary estimate uses the tabulated influence function as a control
    variate: ``Var L = Var L - Var S + sigma^2 / n`` where ``S`` is the sample
    mean of the influence term, whose variance is known exactly.  The plain
    sample variance is reported alongside.
    """
    dist = config.distribution
    if not dist.has_moment and not ignore_moments:
        raise ConfigError("moment condition violated: the distribution declares no finite moment")
    n = config.trim.n if n is None else n
    trim = config.trim_at(n)
    reps = config.replications
    if reps < 2 * JACKKNIFE_BATCHES:
        raise ConfigError(f"variance ratio needs at least {2 * JACKKNIFE_BATCHES} replications")
    sigma = limiting_sigma(config)
    table = influence_table(config.weight, dist, config.alpha, config.beta)
    key = study_key(config.seed, "variance", n)
    values, cv = simulate_statistics(dist, config.scheme_at(n).exact, trim, key, reps,
                                     workers, table=table, kernel=kernel)
    stat = values[:, 0]
    target = sigma * sigma / n

    def plain(mask):
        return math.sqrt(max(np.var(stat[mask], ddof=1), 0.0) * n) / sigma

    def controlled(mask):
        v = np.var(stat[mask], ddof=1) - np.var(cv[mask], ddof=1) + target
        return math.sqrt(max(v, 0.0) * n) / sigma

    edges = np.linspace(0, reps, JACKKNIFE_BATCHES + 1).astype(int)
    pieces = [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]
    every = np.ones(reps, dtype=bool)
    r_plain, se_plain = plain(every), _jackknife(plain, pieces)
    if cv is None:
        r, se, method = r_plain, se_plain, "plain"
    else:
        r, se, method = controlled(every), _jackknife(controlled, pieces), "control-variate"
    return VarianceRatio(n, reps, r, se, r_plain, se_plain, sigma, (r * sigma) ** 2 / n, method)


# -- remainder diagnostics ----------------------------------------------------

@dataclass(frozen=True)
class RemainderRow:
    n: int
    replications: int
    threshold: float
    p_remainder: float
    p_perturbation: float
    scaled_mse: float
    scaled_mse_se: float
    scaled_mse_total: float


REMAINDER_COLUMNS = ("n", "R", "delta_n", "p_remainder", "p_perturbation", "scaled_mse",
                     "scaled_mse_se", "scaled_mse_total")


def remainder_threshold(n, epsilon1):
    """``delta_n = log(n + 1)^(-1/2 - epsilon1)``."""
    return math.log(n + 1) ** (-0.5 - epsilon1)


def remainder_diagnostics(config, epsilon1, n_grid=None, replications=None, workers=1,
                          kernel=None):
    """Size of ``R_n = R1 + R2`` and ``V_n`` relative to ``sigma / sqrt(n)`` across ``n``."""
    if not epsilon1 > 0:
        raise ConfigError("epsilon1 must be positive")
    kernel = kernel or _backend.kernels
    dist = config.distribution
    sigma = limiting_sigma(config)
    reps = replications or config.replications
    params = np.asarray(dist.params, dtype=float)
    rows = []
    for n in (n_grid or config.n_grid):
        trim = config.trim_at(n)
        scheme = config.scheme_at(n)
        dec = Decomposer(config.weight, trim, dist)
        dev = scheme.exact - scheme.reference
        key = study_key(config.seed, "remainder", n)
        k, m = trim.k, trim.m

        def run(block, n=n, dec=dec, dev=dev, key=key, k=k, m=m):
            start, count = block
            x = kernel.sorted_block(replicate_block(key, n, start, count), dist.code, params,
                                    dist.loc, dist.scale)
            out = np.empty((count, 2))
            for i in range(count):
                r1, r2 = dec.remainders(x[i])
                out[i, 0] = r1 + r2
            out[:, 1] = x[:, k:n - m] @ dev / n
            return out

        rv = np.concatenate(map_blocks(run, reps, workers))
        rem, pert = rv[:, 0], rv[:, 1]
        delta = remainder_threshold(n, epsilon1)
        scale = math.sqrt(n) / sigma
        sq = n * rem * rem
        rows.append(RemainderRow(
            n=n, replications=reps, threshold=delta,
            p_remainder=float(np.mean(scale * np.abs(rem) > delta)),
            p_perturbation=float(np.mean(scale * np.abs(pert) > delta)),
            scaled_mse=float(sq.mean()),
            scaled_mse_se=float(sq.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
            scaled_mse_total=float(np.mean(n * (rem + pert) ** 2))))
    return rows
