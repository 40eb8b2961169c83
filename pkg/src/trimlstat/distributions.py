"""Analytic models of the underlying distribution F.

Every family is described by its left-continuous quantile function, so
sampling is inverse-transform: ``X = F^{-1}(U)``.  Because the quantile is
monotone, the order statistics of a sample are the quantile transform of the
sorted uniforms, which is what the Monte Carlo kernels exploit.

Families and their ``params``:

=========== ============================ ==========================
family      params                       moment bound (declared)
=========== ============================ ==========================
uniform     (a, b)                       inf
exponential (rate,)                      inf
normal      (mean, sd)                   inf
pareto      (shape, x_min)               shape
cauchy      (loc, scale)                 0
point       (a,)                         inf
mixture     (p, a0, a1, b0, b1)          inf
=========== ============================ ==========================

``mixture`` is uniform on ``(a0, a1)`` with weight ``p`` and uniform on
``(b0, b1)`` otherwise; with ``a1 < b0`` its quantile jumps at ``u = p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, EmptySampleError, ParameterError, TrimError

FAMILY_CODES = {
    "uniform": 0,
    "exponential": 1,
    "normal": 2,
    "pareto": 3,
    "cauchy": 4,
    "point": 5,
    "mixture": 6,
}

_NPARAMS = {
    "uniform": 2,
    "exponential": 1,
    "normal": 2,
    "pareto": 2,
    "cauchy": 2,
    "point": 1,
    "mixture": 5,
}

_UNBOUNDED_BELOW = {"normal", "cauchy"}
_UNBOUNDED_ABOVE = {"exponential", "normal", "pareto", "cauchy"}


def _check_params(family, p):
    if family not in FAMILY_CODES:
        raise ParameterError(f"unknown family {family!r}; expected one of {sorted(FAMILY_CODES)}")
    if len(p) != _NPARAMS[family]:
        raise ParameterError(f"{family} takes {_NPARAMS[family]} parameters, got {len(p)}")
    if not all(math.isfinite(v) for v in p):
        raise ParameterError(f"{family} parameters must be finite, got {p}")
    if family == "uniform" and not p[0] < p[1]:
        raise ParameterError("uniform requires a < b")
    if family == "exponential" and p[0] <= 0:
        raise ParameterError("exponential rate must be positive")
    if family in ("normal", "cauchy") and p[1] <= 0:
        raise ParameterError(f"{family} scale must be positive")
    if family == "pareto" and (p[0] <= 0 or p[1] <= 0):
        raise ParameterError("pareto shape and x_min must be positive")
    if family == "mixture":
        w, a0, a1, b0, b1 = p
        if not 0 < w < 1:
            raise ParameterError("mixture weight p must lie in (0, 1)")
        if not a0 < a1 <= b0 < b1:
            raise ParameterError("mixture requires a0 < a1 <= b0 < b1")


def base_quantile(code, params, u):
    """Quantile of the unshifted family ``code`` at ``u`` (numpy, vectorized).

    No domain checks; the compiled kernel evaluates the same formulas.
    """
    p = params
    if code == 0:
        return p[0] + (p[1] - p[0]) * u
    if code == 1:
        return -np.log1p(-u) / p[0]
    if code == 2:
        return p[0] + p[1] * special.ndtri(u)
    if code == 3:
        return p[1] * np.power(1.0 - u, -1.0 / p[0])
    if code == 4:
        return p[0] + p[1] * np.tan(np.pi * (u - 0.5))
    if code == 5:
        return np.full_like(np.asarray(u, dtype=float), p[0])
    w, a0, a1, b0, b1 = p
    u = np.asarray(u, dtype=float)
    lower = a0 + (a1 - a0) * (u / w)
    upper = b0 + (b1 - b0) * ((u - w) / (1.0 - w))
    return np.where(u <= w, lower, upper)


@dataclass(frozen=True)
class Distribution:
    """Immutable model of F, optionally shifted and scaled.

    ``quantile(u) = loc + scale * base_quantile(u)``.  ``moment_order`` is the
    declared bound gamma with ``E|X|^s < inf`` for ``s < gamma``; zero means no
    moment is claimed.
    """

    family: str
    params: tuple = ()
    loc: float = 0.0
    scale: float = 1.0
    moment_order: float | None = None
    code: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        params = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", params)
        _check_params(self.family, params)
        if not (math.isfinite(self.scale) and self.scale > 0 and math.isfinite(self.loc)):
            raise ParameterError("scale must be positive and loc finite")
        if self.moment_order is None:
            default = {"pareto": params[0] if self.family == "pareto" else 0.0, "cauchy": 0.0}
            object.__setattr__(self, "moment_order", default.get(self.family, math.inf))
        elif self.moment_order < 0:
            raise ParameterError("moment_order must be >= 0")
        object.__setattr__(self, "code", FAMILY_CODES[self.family])

    # -- structural facts -------------------------------------------------
    @property
    def is_degenerate(self):
        return self.family == "point"

    @property
    def unbounded_below(self):
        return self.family in _UNBOUNDED_BELOW

    @property
    def unbounded_above(self):
        return self.family in _UNBOUNDED_ABOVE

    @property
    def has_moment(self):
        return self.moment_order > 0

    def jumps(self):
        """Discontinuities of the quantile as ``[(u, jump size), ...]``."""
        if self.family == "mixture":
            w, _, a1, b0, _ = self.params
            if b0 > a1:
                return [(w, self.scale * (b0 - a1))]
        return []

    def affine(self, a, b):
        """Distribution of ``a * X + b`` for ``a > 0``."""
        if a <= 0:
            raise ParameterError("affine map needs a positive slope")
        return Distribution(self.family, self.params, loc=a * self.loc + b,
                            scale=a * self.scale, moment_order=self.moment_order)

    # -- functions of u / x ----------------------------------------------
    def quantile(self, u):
        """Left-continuous inverse ``F^{-1}(u)``; scalar in, scalar out."""
        arr = np.asarray(u, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
            raise DomainError("quantile argument must lie in [0, 1]")
        if self.unbounded_below and np.any(arr == 0):
            raise DomainError(f"{self.family} quantile at u=0 is -inf")
        if self.unbounded_above and np.any(arr == 1):
            raise DomainError(f"{self.family} quantile at u=1 is +inf")
        out = self.loc + self.scale * base_quantile(self.code, self.params, arr)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.loc) / self.scale
        p = self.params
        f = self.family
        if f == "uniform":
            out = np.clip((z - p[0]) / (p[1] - p[0]), 0.0, 1.0)
        elif f == "exponential":
            out = np.where(z > 0, -np.expm1(-p[0] * np.maximum(z, 0.0)), 0.0)
        elif f == "normal":
            out = special.ndtr((z - p[0]) / p[1])
        elif f == "pareto":
            out = np.where(z > p[1], 1.0 - np.power(p[1] / np.maximum(z, p[1]), p[0]), 0.0)
        elif f == "cauchy":
            out = 0.5 + np.arctan((z - p[0]) / p[1]) / np.pi
        elif f == "point":
            out = np.where(z >= p[0], 1.0, 0.0)
        else:
            w, a0, a1, b0, b1 = p
            out = np.select(
                [z < a0, z <= a1, z < b0, z <= b1],
                [0.0, w * (z - a0) / (a1 - a0), w, w + (1 - w) * (z - b0) / (b1 - b0)],
                1.0,
            )
        return float(out) if out.ndim == 0 else out

    def quantile_density(self, u):
        """``q(u) = dF^{-1}/du`` (absolutely continuous part only)."""
        u = np.asarray(u, dtype=float)
        p = self.params
        f = self.family
        if f == "uniform":
            q = np.full_like(u, p[1] - p[0])
        elif f == "exponential":
            q = 1.0 / (p[0] * (1.0 - u))
        elif f == "normal":
            z = special.ndtri(u)
            q = p[1] * math.sqrt(2.0 * math.pi) * np.exp(0.5 * z * z)
        elif f == "pareto":
            q = (p[1] / p[0]) * np.power(1.0 - u, -1.0 / p[0] - 1.0)
        elif f == "cauchy":
            q = p[1] * np.pi / np.sin(np.pi * u) ** 2
        elif f == "point":
            q = np.zeros_like(u)
        else:
            w, a0, a1, b0, b1 = p
            q = np.where(u <= w, (a1 - a0) / w, (b1 - b0) / (1.0 - w))
        q = self.scale * q
        return float(q) if q.ndim == 0 else q


@dataclass(frozen=True)
class WinsorizedDistribution:
    """Law G of X Winsorized outside ``(xi_lo, xi_hi]``.

    ``xi_lo = F^{-1}(alpha)`` and ``xi_hi = F^{-1}(1 - beta)``.
    """

    base: Distribution
    alpha: float
    beta: float
    xi_lo: float = field(init=False)
    xi_hi: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.alpha < 1 - self.beta < 1:
            raise TrimError(f"need 0 < alpha < 1 - beta < 1, got alpha={self.alpha}, beta={self.beta}")
        object.__setattr__(self, "xi_lo", self.base.quantile(self.alpha))
        object.__setattr__(self, "xi_hi", self.base.quantile(1 - self.beta))

    def quantile(self, u):
        arr = np.asarray(u, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
            raise DomainError("quantile argument must lie in [0, 1]")
        inner = np.clip(arr, self.alpha, 1 - self.beta)
        out = np.where(arr <= self.alpha, self.xi_lo,
                       np.where(arr > 1 - self.beta, self.xi_hi, self.base.quantile(inner)))
        return float(out) if out.ndim == 0 else out

    def clamp(self, x):
        """Three-branch Winsorization of observations."""
        return np.clip(np.asarray(x, dtype=float), self.xi_lo, self.xi_hi)

    def quantile_density(self, u):
        """Density of ``dG^{-1}``: zero outside ``(alpha, 1 - beta]``."""
        u = np.asarray(u, dtype=float)
        inside = (u > self.alpha) & (u <= 1 - self.beta)
        q = np.where(inside, self.base.quantile_density(np.clip(u, self.alpha, 1 - self.beta)), 0.0)
        return float(q) if q.ndim == 0 else q

    def jumps(self):
        lo, hi = self.alpha, 1 - self.beta
        return [(u, h) for u, h in self.base.jumps() if lo <= u < hi]


# -- module-level operations ---------------------------------------------

def uniform(a=0.0, b=1.0):
    return Distribution("uniform", (a, b))


def exponential(rate=1.0):
    return Distribution("exponential", (rate,))


def normal(mean=0.0, sd=1.0):
    return Distribution("normal", (mean, sd))


def pareto(shape, x_min=1.0):
    return Distribution("pareto", (shape, x_min))


def cauchy(loc=0.0, scale=1.0):
    return Distribution("cauchy", (loc, scale))


def point_mass(a):
    return Distribution("point", (a,))


def two_point_mixture(p, a0, a1, b0, b1):
    return Distribution("mixture", (p, a0, a1, b0, b1))


def quantile(dist, u):
    return dist.quantile(u)


def cdf(dist, x):
    return dist.cdf(x)


def sample(dist, n, stream):
    """Draw ``n`` i.i.d. values by inverse transform from ``stream``."""
    if n < 1:
        raise EmptySampleError("sample size must be at least 1")
    u = stream.uniforms(n)
    return dist.loc + dist.scale * base_quantile(dist.code, dist.params, u)


def winsorized(dist, alpha, beta):
    return WinsorizedDistribution(dist, alpha, beta)
