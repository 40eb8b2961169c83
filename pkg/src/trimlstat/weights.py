"""Weight functions J, their Winsorized extension, and L-statistic coefficients.

Only polynomial and piecewise-linear weights are built in; both have exact
antiderivatives, so every coefficient ``n * int_{(i-1)/n}^{i/n} J`` is
computed without quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, ParameterError

KINDS = ("constant", "polynomial", "piecewise_linear")


@dataclass(frozen=True)
class WeightSpec:
    """Lipschitz weight function on the open interval ``domain``.

    ``lipschitz`` is the declared constant C.  When omitted it is set to the
    exact ``sup |J'|`` over the domain.
    """

    kind: str
    coefficients: tuple = ()
    knots: tuple = ()
    domain: tuple = (0.0, 1.0)
    lipschitz: float | None = None
    _poly: Polynomial | None = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown weight kind {self.kind!r}; expected one of {KINDS}")
        lo, hi = (float(v) for v in self.domain)
        if not 0.0 <= lo < hi <= 1.0:
            raise ParameterError(f"weight domain must satisfy 0 <= lo < hi <= 1, got {self.domain}")
        object.__setattr__(self, "domain", (lo, hi))
        if self.kind == "constant":
            if len(self.coefficients) != 1:
                raise ParameterError("constant weight takes exactly one coefficient")
        if self.kind in ("constant", "polynomial"):
            coefs = tuple(float(c) for c in self.coefficients)
            if not coefs:
                raise ParameterError("polynomial weight needs at least one coefficient")
            object.__setattr__(self, "coefficients", coefs)
            object.__setattr__(self, "_poly", Polynomial(coefs))
        else:
            knots = tuple((float(u), float(y)) for u, y in self.knots)
            us = [u for u, _ in knots]
            if len(knots) < 2 or any(b <= a for a, b in zip(us, us[1:])):
                raise ParameterError("piecewise-linear weight needs >= 2 knots with increasing u")
            if us[0] > lo or us[-1] < hi:
                raise ParameterError("piecewise-linear knots must cover the weight domain")
            object.__setattr__(self, "knots", knots)
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", self.slope_bound())
        elif self.lipschitz < 0:
            raise ParameterError("declared Lipschitz constant must be >= 0")

    @property
    def is_constant(self):
        if self.kind == "constant":
            return True
        if self.kind == "polynomial":
            return all(c == 0.0 for c in self.coefficients[1:])
        return len({y for _, y in self.knots}) == 1

    @property
    def breakpoints(self):
        if self.kind == "piecewise_linear":
            return [u for u, _ in self.knots]
        return []

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "piecewise_linear":
            us, ys = zip(*self.knots)
            out = np.interp(u, us, ys)
        elif self.kind == "constant":
            out = np.full_like(u, self.coefficients[0])
        else:
            out = self._poly(u)
        return float(out) if out.ndim == 0 else out

    def antiderivative(self, u):
        """Exact ``K(u) = int_0^u J`` (J continued by its formula)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "constant":
            out = self.coefficients[0] * u
        elif self.kind == "polynomial":
            out = self._poly.integ()(u)
        else:
            us = np.array([k[0] for k in self.knots])
            ys = np.array([k[1] for k in self.knots])
            slopes = np.diff(ys) / np.diff(us)
            # K at knots, anchored so that K(0) = 0 with constant extension below us[0]
            seg = 0.5 * (ys[1:] + ys[:-1]) * np.diff(us)
            k_knots = ys[0] * us[0] + np.concatenate(([0.0], np.cumsum(seg)))
            idx = np.clip(np.searchsorted(us, u, side="right") - 1, 0, len(us) - 2)
            d = u - us[idx]
            inner = k_knots[idx] + ys[idx] * d + 0.5 * slopes[idx] * d * d
            below = ys[0] * u
            above = k_knots[-1] + ys[-1] * (u - us[-1])
            out = np.where(u < us[0], below, np.where(u > us[-1], above, inner))
        return float(out) if out.ndim == 0 else out

    def slope_bound(self):
        """Exact ``sup |J'|`` on the closed domain."""
        lo, hi = self.domain
        if self.kind == "constant":
            return 0.0
        if self.kind == "piecewise_linear":
            us = np.array([k[0] for k in self.knots])
            ys = np.array([k[1] for k in self.knots])
            slopes = np.diff(ys) / np.diff(us)
            active = (us[1:] > lo) & (us[:-1] < hi)
            return float(np.max(np.abs(slopes[active])))
        d1 = self._poly.deriv()
        cands = [lo, hi]
        if d1.degree() >= 1:
            for r in d1.deriv().roots():
                if abs(r.imag) < 1e-12 and lo <= r.real <= hi:
                    cands.append(r.real)
        return float(max(abs(d1(c)) for c in cands))

    def covers(self, a, b):
        lo, hi = self.domain
        return lo <= a and b <= hi


def constant(value=1.0, domain=(0.0, 1.0), lipschitz=None):
    return WeightSpec("constant", (value,), domain=domain, lipschitz=lipschitz)


def polynomial(coefficients, domain=(0.0, 1.0), lipschitz=None):
    """J(u) = sum_j coefficients[j] u^j."""
    return WeightSpec("polynomial", tuple(coefficients), domain=domain, lipschitz=lipschitz)


def piecewise_linear(knots, domain=(0.0, 1.0), lipschitz=None):
    return WeightSpec("piecewise_linear", knots=tuple(knots), domain=domain, lipschitz=lipschitz)


@dataclass(frozen=True)
class ExtendedWeight:
    """``J_w``: J on ``(alpha, 1 - beta]``, frozen at its end values outside."""

    base: WeightSpec
    alpha: float
    beta: float

    @property
    def domain(self):
        return (0.0, 1.0)

    @property
    def breakpoints(self):
        lo, hi = self.alpha, 1 - self.beta
        return [lo] + [u for u in self.base.breakpoints if lo < u < hi] + [hi]

    def __call__(self, u):
        return self.base(np.clip(u, self.alpha, 1 - self.beta))

    def antiderivative(self, u):
        u = np.asarray(u, dtype=float)
        a, b = self.alpha, 1 - self.beta
        base = self.base
        ja, jb = base(a), base(b)
        ka = base.antiderivative(a)
        out = (ja * np.minimum(u, a)
               + (base.antiderivative(np.clip(u, a, b)) - ka)
               + jb * np.maximum(u - b, 0.0))
        return float(out) if out.ndim == 0 else out


def extend_weight(weight, alpha, beta):
    if not (0 <= alpha < 1 - beta <= 1):
        raise DomainError(f"invalid trim limits alpha={alpha}, beta={beta}")
    if not weight.covers(alpha, 1 - beta):
        raise DomainError(f"[{alpha}, {1 - beta}] is not inside the weight domain {weight.domain}")
    return ExtendedWeight(weight, alpha, beta)


def cell_coefficients(weight, n, first, last):
    """``n * int_{(i-1)/n}^{i/n} J`` for ``i = first .. last`` (1-based)."""
    if isinstance(weight, WeightSpec) and weight.kind == "constant":
        return np.full(last - first + 1, weight.coefficients[0])
    edges = np.arange(first - 1, last + 1) / n
    return n * np.diff(weight.antiderivative(edges))


def reference_coefficients(weight, trim):
    """Reference weights ``c0_{i,n}`` for ``i = k_n + 1 .. n - m_n``."""
    n, k, m = trim.n, trim.k, trim.m
    if not weight.covers(k / n, (n - m) / n):
        raise DomainError(
            f"coefficient cells span [{k / n}, {(n - m) / n}], outside weight domain {weight.domain}")
    return cell_coefficients(weight, n, k + 1, n - m)


def perturbation_budget(n, eps_tilde):
    """``(log n)^{-eps_tilde} * sqrt(n / log n)``."""
    if n < 3:
        raise DomainError("perturbation budget needs n >= 3")
    if eps_tilde <= 0:
        raise DomainError("eps_tilde must be positive")
    ln = math.log(n)
    return ln ** (-eps_tilde) * math.sqrt(n / ln)


def perturbed_coefficients(ref, n, eps_tilde, stream=None, budget=1.0):
    """Perturb ``ref`` so that ``sum |c - ref|`` equals ``budget * B(n)``.

    Signs alternate along the index.  Magnitudes are equal unless ``stream``
    is given, in which case they are random and renormalised.
    """
    bound = perturbation_budget(n, eps_tilde)
    ref = np.asarray(ref, dtype=float)
    if budget == 0:
        return ref.copy()
    if budget < 0:
        raise DomainError("perturbation budget must be >= 0")
    size = ref.size
    if stream is None:
        mags = np.ones(size)
    else:
        mags = stream.uniforms(size)
    mags *= budget * bound / mags.sum()
    signs = np.where(np.arange(size) % 2 == 0, 1.0, -1.0)
    return ref + signs * mags


@dataclass(frozen=True)
class CoefficientScheme:
    exact: np.ndarray
    reference: np.ndarray
    perturbation: str = "none"
    eps_tilde: float | None = None
    budget: float = 0.0

    def __post_init__(self):
        if self.exact.shape != self.reference.shape:
            raise ParameterError("exact and reference coefficient vectors differ in length")
        if self.perturbation not in ("none", "decaying"):
            raise ParameterError(f"unknown perturbation tag {self.perturbation!r}")

    @property
    def deviation_sum(self):
        return float(np.sum(np.abs(self.exact - self.reference)))


def build_scheme(weight, trim, eps_tilde=None, budget=0.0, stream=None):
    ref = reference_coefficients(weight, trim)
    if not budget:
        return CoefficientScheme(ref, ref, "none", eps_tilde, 0.0)
    exact = perturbed_coefficients(ref, trim.n, eps_tilde, stream=stream, budget=budget)
    return CoefficientScheme(exact, ref, "decaying", eps_tilde, budget)


def lipschitz_estimate(weight, grid_size=10_000):
    """Largest secant slope over adjacent points of a uniform grid on the domain."""
    if grid_size < 2:
        raise DomainError("grid_size must be >= 2")
    lo, hi = weight.domain
    u = np.linspace(lo, hi, grid_size)
    j = weight(u)
    return float(np.max(np.abs(np.diff(j)) / np.diff(u)))
