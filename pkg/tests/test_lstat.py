import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from trimlstat import distributions as D
from trimlstat import lstat as L
from trimlstat import weights as W
from trimlstat.errors import ContractError, ShapeError, TrimError
from trimlstat.streams import Stream

# mpmath quad of -log(1 - u) over [0.25, 0.75]
EXP_CENTERING = 0.369187964058863040870798193766
RIEMANN_POINTS = 1_000_000


def _sample(dist, n, seed):
    return np.sort(D.sample(dist, n, Stream.from_seed(seed, "test", n)))


def _riemann(func, a, b):
    """Signed midpoint sum on the fixed grid ``(j + 1/2) / M``; ``a`` and ``b`` lie on it."""
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    u = (np.arange(round(a * RIEMANN_POINTS), round(b * RIEMANN_POINTS)) + 0.5) / RIEMANN_POINTS
    return sign * float(np.sum(func(u))) / RIEMANN_POINTS


def _empirical_quantile(x):
    n = len(x)
    return lambda u: x[np.ceil(n * u).astype(int) - 1]


# -- TrimSpec / trimmed_lstat -------------------------------------------------

def test_trimspec_guards():
    with pytest.raises(TrimError, match="heavy trimming violated"):
        L.TrimSpec(100, 60, 50, 0.6, 0.5)
    with pytest.raises(TrimError):
        L.TrimSpec(10, 5, 5, 0.2, 0.2)
    t = L.TrimSpec.from_limits(2000, 0.25, 0.25)
    assert (t.k, t.m, t.size) == (500, 500, 1000)


def test_trimmed_lstat_examples():
    trim = L.TrimSpec(4, 1, 1, 0.25, 0.25)
    assert L.trimmed_lstat([1, 2, 3, 4], [1, 1], trim) == pytest.approx(1.25)
    trim = L.TrimSpec(7, 2, 1, 0.25, 0.1)
    c = np.array([0.5, 2.0, 1.0, 0.25])
    assert L.trimmed_lstat(np.full(7, 3.0), c, trim) == pytest.approx(3.0 * c.sum() / 7)


def test_trimmed_lstat_matches_loop():
    trim = L.TrimSpec(6, 1, 1, 0.15, 0.15)
    x = _sample(D.uniform(), 6, 1)
    c = W.reference_coefficients(W.polynomial([0, 1]), trim)
    brute = sum(c[i - 2] * x[i - 1] for i in range(2, 6)) / 6
    assert L.trimmed_lstat(x, c, trim) == pytest.approx(brute, abs=1e-15)


def test_trimmed_lstat_contract():
    trim = L.TrimSpec(4, 1, 1, 0.25, 0.25)
    with pytest.raises(ShapeError):
        L.trimmed_lstat([1, 2, 3], [1, 1], trim)
    with pytest.raises(ShapeError):
        L.trimmed_lstat([1, 2, 3, 4], [1, 1, 1], trim)
    with pytest.raises(ContractError):
        L.trimmed_lstat([2, 1, 3, 4], [1, 1], trim)


# -- centering ----------------------------------------------------------------

def test_centering_examples():
    trim = L.TrimSpec(4, 1, 1, 0.25, 0.25)
    assert L.centering(W.constant(), D.uniform(), trim) == pytest.approx(0.25, abs=1e-12)
    assert L.centering(W.polynomial([0.0]), D.normal(), trim) == 0.0
    assert L.centering(W.constant(), D.exponential(), trim) == pytest.approx(EXP_CENTERING, abs=1e-10)


def test_winsorized_centering_examples():
    wu = D.winsorized(D.uniform(), 0.25, 0.25)
    assert L.winsorized_centering(W.constant(), wu) == pytest.approx(0.5, abs=1e-12)
    assert L.winsorized_centering(W.polynomial([0.0]), wu) == 0.0
    j = W.polynomial([1, 2])
    wp = D.winsorized(D.point_mass(3.0), 0.2, 0.1)
    jw = W.extend_weight(j, 0.2, 0.1)
    assert L.winsorized_centering(j, wp) == pytest.approx(3.0 * jw.antiderivative(1.0), abs=1e-12)


# -- Winsorized statistic -----------------------------------------------------

def test_winsorized_lstat_examples():
    trim = L.TrimSpec(5, 1, 1, 0.25, 0.25)
    inside = np.array([0.3, 0.5, 0.7, 0.6, 0.4])
    assert L.winsorized_lstat(inside, W.constant(), trim, D.uniform()) == pytest.approx(0.5)
    below = np.array([0.01, 0.2, 0.1, 0.05, 0.24])
    assert L.winsorized_lstat(below, W.constant(), trim, D.uniform()) == pytest.approx(0.25)


def test_winsorized_lstat_matches_loop():
    n = 9
    trim = L.TrimSpec(n, 2, 2, 0.25, 0.25)
    x = _sample(D.uniform(), n, 5)
    w = np.sort(np.clip(x, 0.25, 0.75))
    jw = W.extend_weight(W.polynomial([0, 1]), 0.25, 0.25)
    brute = sum(n * (jw.antiderivative(i / n) - jw.antiderivative((i - 1) / n)) * w[i - 1]
                for i in range(1, n + 1)) / n
    assert L.winsorized_lstat(x, W.polynomial([0, 1]), trim, D.uniform()) == pytest.approx(brute, abs=1e-14)


# -- remainders ---------------------------------------------------------------

def test_r1_vanishes_when_boundary_counts_match():
    trim = L.TrimSpec(20, 5, 5, 0.25, 0.25)
    x = np.sort(np.concatenate([np.linspace(0.01, 0.2, 5), np.linspace(0.3, 0.7, 10),
                                np.linspace(0.8, 0.99, 5)]))
    assert L.remainder_r1(x, W.polynomial([0, 1]), trim, D.uniform()) == 0.0


def test_r1_zero_integrand():
    trim = L.TrimSpec(20, 5, 5, 0.25, 0.25)
    x = np.sort(np.concatenate([np.full(8, 0.25), np.linspace(0.3, 0.7, 7), np.linspace(0.8, 0.99, 5)]))
    assert L.remainder_r1(x, W.constant(), trim, D.uniform()) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("seed", [1, 2, 3])
@pytest.mark.parametrize("weight", [W.constant(), W.polynomial([0.5, 1, -1])], ids=["const", "quad"])
def test_r1_matches_riemann_oracle(seed, weight):
    n, alpha, beta = 20, 0.25, 0.2
    trim = L.TrimSpec(n, 5, 4, alpha, beta)
    dist = D.uniform()
    x = _sample(dist, n, seed)
    jw = W.extend_weight(weight, alpha, beta)
    a_n = np.sum(x <= alpha) / n
    upper = np.sum(x <= 1 - beta) / n
    q = _empirical_quantile(x)
    oracle = (_riemann(lambda u: jw(u) * (q(u) - alpha), alpha, a_n)
              - _riemann(lambda u: jw(u) * (q(u) - (1 - beta)), 1 - beta, upper))
    assert L.remainder_r1(x, weight, trim, dist) == pytest.approx(oracle, abs=1e-9)


@pytest.mark.parametrize("seed", [4, 5])
@pytest.mark.parametrize("dist", [D.uniform(), D.exponential()], ids=["uniform", "exponential"])
def test_r2_matches_riemann_oracle(seed, dist):
    n = 20
    trim = L.TrimSpec(n, 6, 3, 0.25, 0.2)        # alpha_n = 0.3, beta_n = 0.15
    weight = W.polynomial([1, 1])
    x = _sample(dist, n, seed)
    q = _empirical_quantile(x)

    def f(u):
        return weight(u) * (q(u) - dist.quantile(u))

    oracle = _riemann(f, 0.3, 0.25) - _riemann(f, 0.85, 0.8)
    assert L.remainder_r2(x, weight, trim, dist) == pytest.approx(oracle, abs=1e-9)


def test_r2_vanishes_without_trim_offset():
    trim = L.TrimSpec(20, 5, 4, 0.25, 0.2)
    x = _sample(D.normal(), 20, 8)
    assert L.remainder_r2(x, W.polynomial([0, 1]), trim, D.normal()) == 0.0


def test_r2_bounded_for_quantile_sample():
    n = 40
    trim = L.TrimSpec(n, 12, 8, 0.25, 0.25)
    x = (np.arange(1, n + 1) - 0.5) / n
    width = abs(0.3 - 0.25) + abs(0.8 - 0.75)
    assert abs(L.remainder_r2(x, W.constant(), trim, D.uniform())) <= width * 0.5 / n + 1e-15


# -- decomposition ------------------------------------------------------------

def test_no_perturbation_gives_zero_v():
    trim = L.TrimSpec.from_limits(50, 0.2, 0.3)
    scheme = W.build_scheme(W.polynomial([0, 1]), trim)
    res = L.decompose(D.sample(D.normal(), 50, Stream.from_seed(1)), W.polynomial([0, 1]), scheme, trim, D.normal())
    assert res.V_n == 0.0 and res.L_n == res.L0_n


def test_point_mass_decomposition_is_zero():
    trim = L.TrimSpec.from_limits(40, 0.25, 0.25)
    w = W.polynomial([1, 1])
    res = L.decompose(np.full(40, 2.5), w, W.build_scheme(w, trim), trim, D.point_mass(2.5))
    assert res.L0_n - res.mu_n == pytest.approx(0, abs=1e-14)
    assert res.L_tilde - res.mu_tilde == pytest.approx(0, abs=1e-14)
    assert res.R_n == pytest.approx(0, abs=1e-14)


def test_identity_sides_evaluated_separately():
    n, weight, dist = 50, W.polynomial([0, 1]), D.uniform()
    trim = L.TrimSpec.from_limits(n, 0.25, 0.25, shift_scale=0.3)
    raw = D.sample(dist, n, Stream.from_seed(11))
    x = np.sort(raw)
    left = L.trimmed_lstat(x, W.reference_coefficients(weight, trim), trim) - L.centering(weight, dist, trim)
    wdist = D.winsorized(dist, 0.25, 0.25)
    right = (L.winsorized_lstat(raw, weight, trim, dist) - L.winsorized_centering(weight, wdist)
             + L.remainder_r1(x, weight, trim, dist) + L.remainder_r2(x, weight, trim, dist))
    assert left == pytest.approx(right, abs=1e-10)


FAMILIES = [D.uniform(), D.exponential(1.5), D.normal(0.3, 2.0), D.pareto(2.5), D.cauchy(),
            D.two_point_mixture(0.3, 0, 1, 2, 4)]
WEIGHTS = [W.constant(), W.polynomial([0, 1]), W.polynomial([0, 0, 1]),
           W.piecewise_linear([(0, 1), (0.5, 2), (1, 0.5)])]


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(FAMILIES), st.sampled_from(WEIGHTS), st.integers(10, 400),
       st.floats(0.05, 0.45), st.floats(0.05, 0.45), st.floats(-1.0, 1.0),
       st.floats(0.0, 3.0), st.integers(0, 2 ** 32))
def test_identity_property(dist, weight, n, alpha, beta, shift, budget, seed):
    if alpha + beta >= 0.9:
        beta = 0.85 - alpha
    try:
        trim = L.TrimSpec.from_limits(n, alpha, beta, shift_scale=shift)
    except TrimError:
        assume(False)
    # an empty trim leaves an untrimmed tail, infinite for heavy-tailed families
    assume(trim.k > 0 and trim.m > 0)
    scheme = W.build_scheme(weight, trim, 0.5, budget) if n >= 3 else W.build_scheme(weight, trim)
    res = L.decompose(D.sample(dist, n, Stream.from_seed(seed)), weight, scheme, trim, dist)
    assert abs(res.residual) <= res.tolerance
    assert res.L_n == pytest.approx(res.L0_n + res.V_n, abs=1e-12 * (1 + abs(res.L_n)))


@pytest.mark.parametrize("a,b", [(2.0, -1.0), (0.5, 3.0)])
def test_scale_equivariance(a, b):
    n, weight, base = 120, W.polynomial([1, -0.5, 2]), D.normal()
    trim = L.TrimSpec.from_limits(n, 0.2, 0.15)
    scheme = W.build_scheme(weight, trim)
    raw = D.sample(base, n, Stream.from_seed(99))
    r0 = L.decompose(raw, weight, scheme, trim, base)
    r1 = L.decompose(a * raw + b, weight, scheme, trim, base.affine(a, b))
    assert r1.L_n == pytest.approx(a * r0.L_n + b * scheme.exact.sum() / n, rel=1e-12)
    assert abs(r1.residual) <= r1.tolerance


def test_statistic_monotone_in_sample():
    n, weight = 60, W.polynomial([1, 1])
    trim = L.TrimSpec.from_limits(n, 0.2, 0.2)
    c = W.reference_coefficients(weight, trim)
    x = _sample(D.normal(), n, 3)
    y = np.sort(x + np.abs(D.sample(D.normal(), n, Stream.from_seed(4))))
    assert L.trimmed_lstat(y, c, trim) >= L.trimmed_lstat(x, c, trim)
