import math

import numpy as np
import pytest

from perturbwalk import experiments as ex
from perturbwalk.errors import ConfigError, PreconditionError
from perturbwalk.lattice import Membrane
from perturbwalk.laws import categorical, diagonal_embedding, lazy_simple_neighbor, loglog_radial, simple_neighbor

KICK2 = categorical({(2, 0): 0.25, (-2, 0): 0.25, (0, 2): 0.25, (0, -2): 0.25})
EMBED = diagonal_embedding(categorical({(-1,): "1/3", (0,): "1/3", (1,): "1/3"}))


def spec(kind, base, horizons, replicates=400, membrane=(), **params):
    return ex.ExperimentSpec(kind=kind, base=base, horizons=tuple(horizons), replicates=replicates, seed=1,
                             membrane=Membrane(tuple(membrane)), params=params)


def test_spec_validation():
    with pytest.raises(ConfigError):
        spec("occupation_growth", simple_neighbor(2), [10], replicates=10)
    with pytest.raises(ConfigError):
        spec("occupation_growth", simple_neighbor(2), [100, 10])
    with pytest.raises(ConfigError):
        spec("nope", simple_neighbor(2), [10])


def test_occupation_empty_membrane_is_zero():
    res = ex.run_experiment(spec("occupation_growth", lazy_simple_neighbor(2), [100, 1000]))
    assert res.value("q99_T_over_log_n", 1000) == 0.0
    assert any("empty membrane" in n for n in res.notes)


def test_occupation_small_run():
    res = ex.run_experiment(spec("occupation_growth", lazy_simple_neighbor(2), [1000, 10_000], 1000,
                                 [((0, 0), KICK2)], aux_replicates=1000))
    assert set(res.flags) == {"q99_stable", "aux_exponential_shape"}
    assert res.value("q99_ratio_across_horizons") > 0


def test_skew_symmetric_kick_gives_half():
    kick = categorical({(1, -1): 0.5, (-1, 1): 0.5})
    res = ex.run_experiment(spec("skew_1d", EMBED, [2000], 4000, [((0, 0), kick)]))
    assert res.summary["gamma"] == 0.0
    lo, hi = [(r.lower, r.upper) for r in res.rows if r.statistic == "P_X1_positive"][0]
    assert lo - 0.02 <= 0.5 <= hi + 0.02


def test_skew_reflecting_kick():
    res = ex.run_experiment(spec("skew_1d", EMBED, [2000], 2000, [((0, 0), categorical({(1, -1): 1}))]))
    assert res.summary["gamma"] == 1.0
    assert res.value("P_X1_positive") > 0.9


def test_skew_requires_diagonal_base():
    with pytest.raises(PreconditionError):
        ex.run_experiment(spec("skew_1d", simple_neighbor(2), [100], membrane=[((0, 0), KICK2)]))


def test_donsker_redirects_degenerate_base():
    with pytest.raises(PreconditionError, match="skew"):
        ex.run_experiment(spec("donsker_preservation", EMBED, [100], membrane=[((0, 0), categorical({(1, -1): 1}))]))


def test_donsker_empty_membrane_small():
    res = ex.run_experiment(spec("donsker_preservation", simple_neighbor(2), [2000], 2000,
                                 repetitions=3, pass_fraction=0.6, covariance_tolerance=0.15))
    assert all(res.flags.values()), res.flags


def test_transient_requires_transient_base():
    with pytest.raises(PreconditionError):
        ex.run_experiment(spec("transient_preservation", simple_neighbor(2), [100]))


def test_transient_small_run():
    kick = categorical({(4, 0, 0): 0.5, (-4, 0, 0): 0.5})
    res = ex.run_experiment(spec("transient_preservation", simple_neighbor(3), [1000, 10_000], 1000,
                                 [((0, 0, 0), kick)], repetitions=3, ks_replicates=300,
                                 stabilization_tolerance=0.05, pass_fraction=0.6))
    assert res.value("mean_T", 1000) >= 1.0  # the start is a visit
    assert res.flags["two_sample_ks_pass_rate"]


def test_return_tail_small():
    res = ex.run_experiment(spec("return_tail", simple_neighbor(2), [20], 20_000,
                                 exact_nmax=20_000, mc_horizon=20, fit_lo=100, ratio_n=5000))
    assert res.flags["renewal_identity"] and res.flags["mc_matches_exact"]
    assert res.summary["tail_constant_supported"] == "proof_body"


def test_counterexample_small():
    res = ex.run_experiment(spec("counterexample", simple_neighbor(2), [1000], 400,
                                 [((0, 0), loglog_radial(1.0))]))
    assert res.flags["P_exceeds_floor_n1000"]
    assert math.isnan(res.value("first_term_lower_bound", 1000))
    assert res.value("first_term_limit") == pytest.approx(0.43233, abs=1e-5)


def test_counterexample_needs_loglog_kick():
    with pytest.raises(PreconditionError):
        ex.run_experiment(spec("counterexample", simple_neighbor(2), [100], membrane=[((0, 0), KICK2)]))


def test_g_a_single_point():
    res = ex.run_experiment(spec("g_A", simple_neighbor(2), [1000, 4000], 4000, [((0, 0), KICK2)]))
    assert "single_point_sum_rule" in res.flags
    r = res.value("g_A_ratio", 4000)
    assert 0.8 < r < 1.2


def test_results_are_reproducible():
    s = spec("skew_1d", EMBED, [500], 500, [((0, 0), categorical({(2, -2): 0.75, (-1, 1): 0.25}))])
    a = ex.run_experiment(s)
    b = ex.run_experiment(s, workers=2)
    assert a.rows == b.rows or all(
        (x.statistic, x.horizon) == (y.statistic, y.horizon) and
        (x.value == y.value or (np.isnan(x.value) and np.isnan(y.value)))
        for x, y in zip(a.rows, b.rows))
