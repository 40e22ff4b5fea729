import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from perturbwalk import laws
from perturbwalk.errors import ConfigError, MomentUnavailable, SaturationError, TailUnavailable
from perturbwalk.laws import (
    categorical,
    diagonal_embedding,
    law_from_dict,
    lazy_simple_neighbor,
    loglog_radial,
    mean_and_covariance,
    pmf,
    point_mass,
    polynomial_tail,
    reg_varying,
    sample_many,
    simple_neighbor,
    tail,
)
from perturbwalk.rng import Stream


def _chi2_pvalue(draws, law):
    support = [x for x, _ in law.atoms]
    probs = np.array([p for _, p in law.atoms])
    idx = {x: i for i, x in enumerate(support)}
    counts = np.zeros(len(support))
    for row in map(tuple, draws):
        counts[idx[row]] += 1
    return sps.chisquare(counts, probs * counts.sum()).pvalue


def test_simple_neighbor_atoms():
    law = simple_neighbor(2)
    assert dict(law.atoms) == {(1, 0): 0.25, (-1, 0): 0.25, (0, 1): 0.25, (0, -1): 0.25}


def test_point_mass_is_deterministic():
    law = categorical({(0, 0): 1})
    draws, sat = sample_many(law, 99, 500)
    assert not sat.any()
    assert (draws == 0).all()


def test_categorical_rejects_bad_probabilities():
    with pytest.raises(ConfigError, match="sum"):
        categorical({(1,): "0.5", (-1,): "0.49"})
    with pytest.raises(ConfigError):
        categorical({(1,): -0.1, (-1,): 1.1})


def test_decimal_strings_and_fractions_are_exact():
    law = categorical({(1,): "1/3", (0,): "1/3", (-1,): "1/3"})
    assert math.fsum(p for _, p in law.atoms) == pytest.approx(1.0, abs=1e-15)
    law2 = law_from_dict({"kind": "Categorical", "support": [[2, "0.75"], [-1, "0.25"]]})
    assert dict(law2.atoms)[(2,)] == 0.75


@pytest.mark.parametrize("law", [simple_neighbor(2), lazy_simple_neighbor(2), simple_neighbor(3),
                                 categorical({(2, -2): 0.75, (-1, 1): 0.25}),
                                 categorical({(k,): 1 / 7 for k in range(-3, 4)})])
def test_categorical_sampler_goodness_of_fit(law):
    draws, _ = sample_many(law, 12345, 40_000)
    assert _chi2_pvalue(draws, law) > 1e-4


def test_sample_advances_stream_and_matches_bulk():
    law = lazy_simple_neighbor(2)
    s = Stream(77)
    single = [laws.sample(law, s) for _ in range(50)]
    bulk, _ = sample_many(law, 77, 50)
    assert s.index == 50
    assert [tuple(r) for r in bulk] == single


@given(st.integers(0, 2**63), st.integers(0, 10**9))
def test_sample_at_matches_sample_many_offset(key, index):
    law = simple_neighbor(3)
    bulk, _ = sample_many(law, key, 1, start=index)
    assert laws.sample_at(law, key, index) == tuple(bulk[0])


def test_tail_examples():
    assert tail(simple_neighbor(2), 0.5) == 1.0
    assert tail(simple_neighbor(2), 1.0) == 0.0


def test_loglog_inverse_transform_arithmetic():
    # U = 1 gives the smallest radius exp(exp(a)) = e^e for a = 1
    assert math.exp(math.exp(1.0 / 1.0)) == pytest.approx(15.154262241479262)
    assert laws.loglog_radius_tail(1.0, math.e ** math.e) == pytest.approx(1.0)
    assert laws.loglog_radius_tail(1.0, math.exp(math.exp(2.0))) == pytest.approx(0.5)


def test_loglog_rounded_tail_vs_continuous():
    law = loglog_radial(1.0)
    # rounding pushes t = e^e to the threshold 15.5, so the rounded tail sits slightly below 1
    assert tail(law, math.e ** math.e) == pytest.approx(1 / math.log(math.log(15.5)))
    assert tail(law, 10.0) == 1.0


def test_loglog_samples_are_axis_jumps_with_right_tail():
    law = loglog_radial(1.0)
    draws, sat = sample_many(law, 5, 1_000_000)
    ok = ~sat
    r = np.abs(draws[ok]).max(axis=1)
    assert ((draws[ok] != 0).sum(axis=1) == 1).all()
    assert r.min() >= 15
    for t in (20, 1e2, 1e4, 1e8):
        p = tail(law, t)
        emp = (np.count_nonzero(r > t) + np.count_nonzero(sat)) / len(draws)
        assert abs(emp - p) <= 5 * math.sqrt(p * (1 - p) / len(draws))


def test_loglog_saturation_is_reported():
    law = loglog_radial(1.0)
    _, sat = sample_many(law, 5, 200_000)
    # P{R > 2^62} = 1 / log log 2^62, about 0.27
    assert sat.mean() == pytest.approx(1 / math.log(math.log(2.0 ** 62)), abs=0.01)
    i = int(np.argmax(sat))
    with pytest.raises(SaturationError) as err:
        laws.sample_at(law, 5, i)
    assert err.value.loglog_radius > math.log(math.log(2.0 ** 62))


def test_reg_varying_sampler_matches_pmf():
    law = reg_varying(1.5, 0.7)
    draws, _ = sample_many(law, 8, 100_000)
    x = draws[:, 0]
    for k in (1, -1, 2, -3, 5):
        assert np.mean(x == k) == pytest.approx(pmf(law, (k,)), abs=5 * math.sqrt(pmf(law, (k,)) / len(x)))
    assert np.mean(np.abs(x) > 10) == pytest.approx(tail(law, 10), abs=0.01)


def test_polynomial_tail_sampler_matches_pmf():
    law = polynomial_tail(1.0, window=8)
    draws, _ = sample_many(law, 9, 100_000)
    for x in [(0, 0), (1, 0), (1, 1), (3, -2), (9, 0)]:
        p = pmf(law, x)
        emp = np.mean((draws[:, 0] == x[0]) & (draws[:, 1] == x[1]))
        assert emp == pytest.approx(p, abs=5 * math.sqrt(p / len(draws)) + 1e-5)
    lo, hi = laws.tail_bracket(law, 5.0)
    emp = np.mean(np.hypot(draws[:, 0], draws[:, 1]) > 5)
    assert lo - 0.01 <= emp <= hi + 0.01


def test_polynomial_tail_has_no_closed_tail():
    with pytest.raises(TailUnavailable):
        tail(polynomial_tail(1.0), 3.0)


@pytest.mark.parametrize("law, mean, cov", [
    (simple_neighbor(2), (0, 0), np.diag([0.5, 0.5])),
    (lazy_simple_neighbor(2, 0.5), (0, 0), np.diag([0.25, 0.25])),
    (categorical({(1, 0): 0.5, (-1, 0): 0.5}), (0, 0), np.diag([1.0, 0.0])),
])
def test_moments(law, mean, cov):
    m, c = mean_and_covariance(law)
    np.testing.assert_allclose(m, mean, atol=1e-15)
    np.testing.assert_allclose(c.entries, cov, atol=1e-15)


def test_degenerate_flag():
    _, c = mean_and_covariance(categorical({(1, 0): 0.5, (-1, 0): 0.5}))
    assert not c.nondegenerate


def test_heavy_tails_have_no_second_moment():
    with pytest.raises(MomentUnavailable):
        mean_and_covariance(loglog_radial(1.0))
    with pytest.raises(MomentUnavailable):
        mean_and_covariance(reg_varying(1.5))


def test_diagonal_embedding():
    law = diagonal_embedding(categorical({(-1,): "1/3", (0,): "1/3", (1,): "1/3"}))
    assert all(x[1] == -x[0] for x, _ in law.atoms)
    _, c = mean_and_covariance(law)
    assert not c.nondegenerate
    with pytest.raises(ConfigError):
        diagonal_embedding(simple_neighbor(2))


def test_law_from_dict_round_trip():
    for law in (simple_neighbor(2), lazy_simple_neighbor(2, 0.25), loglog_radial(1.0), reg_varying(1.5, 0.3)):
        again = law_from_dict(law.describe())
        assert again.kind == law.kind and again.dim == law.dim


def test_law_from_dict_errors_name_the_field():
    with pytest.raises(ConfigError, match=r"law\.kind"):
        law_from_dict({"kind": "Gaussian"})
    with pytest.raises(ConfigError, match="unknown field"):
        law_from_dict({"kind": "SimpleNeighbor", "dim": 2, "extra": 1})
    with pytest.raises(ConfigError, match="missing field"):
        law_from_dict({"kind": "SimpleNeighbor"})


@given(st.lists(st.integers(1, 50), min_size=1, max_size=12))
def test_categorical_probabilities_normalized(weights):
    total = sum(weights)
    law = categorical({(i,): Fraction(w, total) for i, w in enumerate(weights)})
    assert math.fsum(p for _, p in law.atoms) == pytest.approx(1.0, abs=1e-12)
    draws, _ = sample_many(law, 3, 200)
    assert set(draws[:, 0]) <= set(range(len(weights)))
