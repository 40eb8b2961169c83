import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_experiment
from trimlstat import distributions as D
from trimlstat import weights as W
from trimlstat.errors import ConfigError
from trimlstat.lstat import Decomposer, TrimSpec
from trimlstat.streams import Stream
from trimlstat.montecarlo import (XGrid, kolmogorov_distance, normal_tail, remainder_diagnostics,
                                  remainder_threshold, run_identity, run_tails, tail_counts,
                                  truncate_grid, variance_ratio)


def test_normal_tail_examples():
    assert normal_tail(0.0) == 0.5
    assert normal_tail(1.959964) == pytest.approx(0.0250000, abs=5e-8)
    # erfc oracle far in the tail
    assert normal_tail(8.0) == pytest.approx(0.5 * math.erfc(8 / math.sqrt(2)), rel=1e-12)


@given(st.floats(-30, 30))
def test_normal_tail_symmetry(x):
    assert normal_tail(-x) == pytest.approx(1 - normal_tail(x), abs=1e-15)


def test_grid_reaches_sqrt_log_n():
    x = XGrid().points(2000)
    assert x[0] == -2.0 and x[-1] == 2.75 and x.size == 20
    assert x[-1] <= math.sqrt(math.log(2000)) < x[-1] + 0.25
    with pytest.raises(ConfigError):
        XGrid(reach=0)


def test_config_guards():
    with pytest.raises(ConfigError):
        make_experiment(replications=0)
    with pytest.raises(ConfigError):
        make_experiment(perturb_budget=1.0)
    with pytest.raises(ConfigError):
        make_experiment(normalization="robust")


def test_single_replicate_tails_are_zero_or_one():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = run_tails(make_experiment(replications=1))
    assert set(np.unique(np.concatenate([rep.p_upper, rep.p_lower]))) <= {0.0, 1.0}
    assert np.all(rep.se_upper == 0) and np.all(rep.se_lower == 0)


def test_point_mass_is_rejected():
    cfg = make_experiment(D.point_mass(3.0))
    with pytest.raises(ConfigError):
        run_tails(cfg)
    with pytest.raises(ConfigError):
        variance_ratio(cfg.with_replications(100))


def test_exceedances_match_stored_statistics():
    rep = run_tails(make_experiment(n=400, replications=3000, seed=7), keep_statistics=True)
    t = rep.statistics
    for i, x in enumerate(rep.x):
        assert rep.p_upper[i] == np.count_nonzero(t > x) / t.size
        assert rep.p_lower[i] == np.count_nonzero(t <= -x) / t.size
    assert np.all(np.diff(rep.p_upper) <= 0)
    assert np.allclose(rep.se_upper, np.sqrt(rep.p_upper * (1 - rep.p_upper) / 3000))
    assert rep.kolmogorov == pytest.approx(kolmogorov_distance(t))


def test_tail_counts_edges():
    t = np.array([-1.0, 0.0, 0.0, 2.0])
    up, lo = tail_counts(t, np.array([0.0, 2.0]))
    assert list(up) == [1, 0] and list(lo) == [3, 0]


def test_tail_floor_truncates_grid():
    x = np.array([0.0, 1.0, 3.0, 4.0])
    with pytest.warns(RuntimeWarning, match="tail floor"):
        kept = truncate_grid(x, 1000)
    assert list(kept) == [0.0, 1.0]


def test_kolmogorov_distance_of_quantile_grid():
    from scipy import special
    u = (np.arange(1000) + 0.5) / 1000
    assert kolmogorov_distance(special.ndtri(u)) == pytest.approx(0.0005, abs=1e-12)


def test_tails_deterministic_across_workers():
    cfg = make_experiment(D.normal(), W.polynomial([0, 1]), n=300, alpha=0.1, beta=0.2,
                          replications=900, seed=99)
    a, b = run_tails(cfg, workers=1, keep_statistics=True), run_tails(cfg, workers=3, keep_statistics=True)
    assert np.array_equal(a.statistics, b.statistics)
    assert np.array_equal(a.p_upper, b.p_upper) and np.array_equal(a.p_lower, b.p_lower)


def test_empirical_normalisation_is_centred():
    rep = run_tails(make_experiment(n=500, replications=4000, normalization="empirical"),
                    keep_statistics=True)
    assert abs(rep.statistics.mean()) < 0.1
    assert np.std(rep.statistics, ddof=1) == pytest.approx(1.0, abs=1e-12)


def test_variance_ratio_guards_and_control_variate():
    with pytest.raises(ConfigError, match="moment condition violated"):
        variance_ratio(make_experiment(D.cauchy(), replications=100))
    with pytest.raises(ConfigError):
        variance_ratio(make_experiment(replications=39))
    cauchy = variance_ratio(make_experiment(D.cauchy(), n=500, replications=2000), ignore_moments=True)
    assert cauchy.method == "control-variate"
    v = variance_ratio(make_experiment(n=500, replications=20000, seed=5))
    assert v.se < v.se_plain / 3
    assert abs(v.ratio - v.ratio_plain) < 4 * v.se_plain
    assert abs(v.ratio - 1) < 0.01
    mix = variance_ratio(make_experiment(D.two_point_mixture(0.5, 0, 1, 2, 3), n=500, replications=400))
    assert mix.method == "plain"


def test_unperturbed_scheme_has_no_perturbation_term():
    rows = remainder_diagnostics(make_experiment(replications=200), 0.05, n_grid=[100, 400])
    for r in rows:
        assert r.p_perturbation == 0.0
        assert r.scaled_mse_total == pytest.approx(r.scaled_mse, rel=1e-12)
        assert r.threshold == remainder_threshold(r.n, 0.05)
    pert = remainder_diagnostics(make_experiment(replications=200, perturb_epsilon=0.5, perturb_budget=3.0),
                                 0.05, n_grid=[100])
    assert pert[0].scaled_mse_total != pert[0].scaled_mse


def test_exact_trim_fractions_give_zero_second_remainder():
    trim = TrimSpec(200, 50, 40, 0.25, 0.2)
    dec = Decomposer(W.polynomial([1, 2]), trim, D.normal())
    x = np.sort(D.sample(D.normal(), 200, Stream.from_seed(4)))
    assert dec.remainders(x)[1] == 0.0


def test_identity_replicates_deterministic_and_exact():
    cfg = make_experiment(D.exponential(), W.polynomial([0, 0, 1]), n=200, alpha=0.1, beta=0.3,
                          replications=300)
    a = run_identity(cfg, workers=1)
    b = run_identity(cfg, workers=2)
    assert [r.L_n for r in a] == [r.L_n for r in b]
    assert max(abs(r.residual) for r in a) <= 1e-10 * (1 + max(abs(r.L0_n) for r in a))
