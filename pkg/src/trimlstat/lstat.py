"""Trimmed L-statistics, their Winsorized approximation, and the exact remainder.

The empirical quantile is ``F_n^{-1}(u) = X_{ceil(nu):n}``, a step function, so
every integral of ``J(u) F_n^{-1}(u)`` below is an exact finite sum of
antiderivative differences times order statistics.  Only integrals against
the population quantile go through quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .distributions import base_quantile, winsorized
from .errors import ContractError, DomainError, NumericalError, ShapeError, TrimError
from .weights import cell_coefficients, extend_weight

QUAD_TOL = 1e-10


@dataclass(frozen=True)
class TrimSpec:
    """Trimming counts ``k`` (lower) and ``m`` (upper) for sample size ``n``.

    ``alpha`` and ``beta`` are the limits of ``k/n`` and ``m/n``.
    """

    n: int
    k: int
    m: int
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0 < self.alpha < 1 - self.beta < 1:
            raise TrimError(
                f"heavy trimming violated: need 0 < alpha < 1 - beta < 1, "
                f"got alpha={self.alpha}, beta={self.beta}")
        if not 0 <= self.k < self.n - self.m <= self.n:
            raise TrimError(f"need 0 <= k < n - m <= n, got n={self.n}, k={self.k}, m={self.m}")

    @property
    def alpha_n(self):
        return self.k / self.n

    @property
    def beta_n(self):
        return self.m / self.n

    @property
    def size(self):
        return self.n - self.k - self.m

    @classmethod
    def from_limits(cls, n, alpha, beta, shift_scale=0.0, shift_power=0.5):
        """``k = floor(n (alpha + s n^-p))``, ``m = floor(n (beta + s n^-p))``."""
        shift = shift_scale * n ** (-shift_power) if shift_scale else 0.0
        k = math.floor(n * (alpha + shift) + 1e-9)
        m = math.floor(n * (beta + shift) + 1e-9)
        return cls(n, k, m, alpha, beta)


@dataclass(frozen=True)
class DecompositionResult:
    L_n: float
    L0_n: float
    L_tilde: float
    mu_n: float
    mu_tilde: float
    R1: float
    R2: float
    V_n: float
    A_n: float
    B_n: float
    N_alpha: int
    N_upper: int

    @property
    def R_n(self):
        return self.R1 + self.R2

    @property
    def residual(self):
        return (self.L0_n - self.mu_n) - (self.L_tilde - self.mu_tilde) - self.R1 - self.R2

    @property
    def tolerance(self):
        return 1e-10 * (1.0 + abs(self.L0_n))


def _check_sorted(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != n:
        raise ShapeError(f"expected a sample of length {n}, got shape {x.shape}")
    if np.any(np.diff(x) < 0):
        raise ContractError("sample must be sorted ascending")
    return x


def trimmed_lstat(sorted_sample, coeffs, trim):
    """``L_n = n^-1 sum_{i=k+1}^{n-m} c_i X_{i:n}``."""
    x = _check_sorted(sorted_sample, trim.n)
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (trim.size,):
        raise ShapeError(f"expected {trim.size} coefficients, got {c.shape}")
    return float(np.dot(c, x[trim.k:trim.n - trim.m]) / trim.n)


def _population_integrand(weight, dist):
    code, params, loc, scale = dist.code, dist.params, dist.loc, dist.scale

    def f(u):
        return float(weight(u) * (loc + scale * base_quantile(code, params, u)))

    return f


def integrate_weighted_quantile(weight, dist, a, b, tol=QUAD_TOL):
    """Signed ``int_a^b J(u) F^{-1}(u) du`` by adaptive quadrature."""
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    if dist.moment_order <= 1 and ((a == 0 and dist.unbounded_below) or (b == 1 and dist.unbounded_above)):
        raise DomainError(f"{dist.family} has no finite mean, so the integral up to the "
                          f"untrimmed end of [{a}, {b}] diverges")
    pts = [u for u, _ in dist.jumps()] + list(weight.breakpoints)
    pts = sorted({p for p in pts if a < p < b})
    # full_output silences quad's roundoff warning; the error estimate is checked below
    val, err, _ = integrate.quad(_population_integrand(weight, dist), a, b, points=pts or None,
                                 epsabs=1e-14, epsrel=1e-13, limit=500, full_output=1)[:3]
    if not err <= tol:
        raise NumericalError(f"quadrature on [{a}, {b}] reached only {err:.3g}", achieved=err)
    return sign * val


def centering(weight, dist, trim):
    """``mu_n = int_{alpha_n}^{1-beta_n} J(u) F^{-1}(u) du``."""
    a, b = trim.alpha_n, 1 - trim.beta_n
    if not weight.covers(a, b):
        raise DomainError(f"[{a}, {b}] is not inside the weight domain {weight.domain}")
    return integrate_weighted_quantile(weight, dist, a, b)


def winsorized_lstat(raw_sample, weight, trim, dist):
    """``L~_n = n^-1 sum_i c~_i W_{i:n}`` with ``c~`` generated by ``J_w``."""
    x = np.asarray(raw_sample, dtype=float)
    if x.ndim != 1 or x.size != trim.n:
        raise ShapeError(f"expected a sample of length {trim.n}, got shape {x.shape}")
    wdist = winsorized(dist, trim.alpha, trim.beta)
    jw = extend_weight(weight, trim.alpha, trim.beta)
    w = np.sort(wdist.clamp(x), kind="stable")
    c = cell_coefficients(jw, trim.n, 1, trim.n)
    return float(np.dot(c, w) / trim.n)


def winsorized_centering(weight, wdist):
    """``mu_L~ = int_0^1 J_w G^{-1}``; the flat end pieces are integrated exactly."""
    a, b = wdist.alpha, 1 - wdist.beta
    if not weight.covers(a, b):
        raise DomainError(f"[{a}, {b}] is not inside the weight domain {weight.domain}")
    middle = integrate_weighted_quantile(weight, wdist.base, a, b)
    return weight(a) * a * wdist.xi_lo + middle + weight(b) * wdist.beta * wdist.xi_hi


def step_integral(x, antiderivative, a, b, shift=0.0):
    """Signed ``int_a^b J(u) [F_n^{-1}(u) - shift] du`` computed exactly.

    ``antiderivative`` is an exact antiderivative of J and ``x`` the sorted
    sample defining ``F_n^{-1}``.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    n = len(x)
    i_lo = max(math.floor(a * n) + 1, 1)
    i_hi = min(math.ceil(b * n), n)
    if i_hi < i_lo:
        return 0.0
    idx = np.arange(i_lo, i_hi + 1)
    left = np.maximum(a, (idx - 1) / n)
    right = np.minimum(b, idx / n)
    w = antiderivative(right) - antiderivative(left)
    return sign * float(np.dot(w, x[idx - 1] - shift))


def _boundary_counts(x, wdist):
    n_lo = int(np.searchsorted(x, wdist.xi_lo, side="right"))
    n_hi = int(np.searchsorted(x, wdist.xi_hi, side="right"))
    return n_lo, n_hi


def remainder_r1(sorted_sample, weight, trim, dist):
    x = _check_sorted(sorted_sample, trim.n)
    wdist = winsorized(dist, trim.alpha, trim.beta)
    jw = extend_weight(weight, trim.alpha, trim.beta)
    return _r1(x, jw, wdist)


def _r1(x, jw, wdist):
    n = len(x)
    n_lo, n_hi = _boundary_counts(x, wdist)
    a_n = n_lo / n
    upper = n_hi / n  # 1 - B_n
    first = step_integral(x, jw.antiderivative, wdist.alpha, a_n, wdist.xi_lo)
    second = step_integral(x, jw.antiderivative, 1 - wdist.beta, upper, wdist.xi_hi)
    return first - second


def _check_r2_domain(weight, trim):
    lo = min(trim.alpha_n, trim.alpha)
    hi = max(1 - trim.beta_n, 1 - trim.beta)
    if not weight.covers(lo, hi):
        raise DomainError(f"[{lo}, {hi}] is not inside the weight domain {weight.domain}")


def r2_population_part(weight, dist, trim):
    """Sample-free part of ``R_n^(2)``: the integrals against ``F^{-1}``."""
    _check_r2_domain(weight, trim)
    first = integrate_weighted_quantile(weight, dist, trim.alpha_n, trim.alpha)
    second = integrate_weighted_quantile(weight, dist, 1 - trim.beta_n, 1 - trim.beta)
    return first - second


def _r2_sample_part(x, weight, trim):
    first = step_integral(x, weight.antiderivative, trim.alpha_n, trim.alpha)
    second = step_integral(x, weight.antiderivative, 1 - trim.beta_n, 1 - trim.beta)
    return first - second


def remainder_r2(sorted_sample, weight, trim, dist):
    x = _check_sorted(sorted_sample, trim.n)
    return _r2_sample_part(x, weight, trim) - r2_population_part(weight, dist, trim)


class Decomposer:
    """Population constants for one ``(J, trim, F)`` triple, reused across samples."""

    def __init__(self, weight, trim, dist):
        self.weight = weight
        self.trim = trim
        self.dist = dist
        self.wdist = winsorized(dist, trim.alpha, trim.beta)
        self.jw = extend_weight(weight, trim.alpha, trim.beta)
        self.mu_n = centering(weight, dist, trim)
        self.mu_tilde = winsorized_centering(weight, self.wdist)
        self.r2_population = r2_population_part(weight, dist, trim)
        self.c_tilde = cell_coefficients(self.jw, trim.n, 1, trim.n)

    def remainders(self, x):
        """``(R1, R2)`` for an already sorted sample."""
        return _r1(x, self.jw, self.wdist), _r2_sample_part(x, self.weight, self.trim) - self.r2_population

    def decompose(self, raw_sample, scheme):
        trim = self.trim
        n, k, m = trim.n, trim.k, trim.m
        raw = np.asarray(raw_sample, dtype=float)
        if raw.ndim != 1 or raw.size != n:
            raise ShapeError(f"expected a sample of length {n}, got shape {raw.shape}")
        if scheme.exact.shape != (trim.size,):
            raise ShapeError(f"coefficient scheme has {scheme.exact.size} weights, expected {trim.size}")
        x = np.sort(raw, kind="stable")
        middle = x[k:n - m]
        l0 = float(np.dot(scheme.reference, middle) / n)
        v = float(np.dot(scheme.exact - scheme.reference, middle) / n)
        w = self.wdist.clamp(x)
        l_tilde = float(np.dot(self.c_tilde, w) / n)
        r1, r2 = self.remainders(x)
        n_lo, n_hi = _boundary_counts(x, self.wdist)
        return DecompositionResult(
            L_n=l0 + v, L0_n=l0, L_tilde=l_tilde, mu_n=self.mu_n, mu_tilde=self.mu_tilde,
            R1=r1, R2=r2, V_n=v, A_n=n_lo / n, B_n=(n - n_hi) / n,
            N_alpha=n_lo, N_upper=n_hi,
        )


def decompose(raw_sample, weight, scheme, trim, dist):
    """Full remainder decomposition of one sample (see :class:`Decomposer`)."""
    return Decomposer(weight, trim, dist).decompose(raw_sample, scheme)
