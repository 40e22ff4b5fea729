import pytest
from hypothesis import given
from hypothesis import strategies as st

from perturbwalk.conditionb import INFINITE, condition_b_check, hermite_rows, subgroup_index
from perturbwalk.lattice import Membrane
from perturbwalk.laws import categorical, diagonal_embedding, lazy_simple_neighbor, point_mass, simple_neighbor


def test_simple_walk_is_aperiodic():
    rep = condition_b_check(simple_neighbor(2), Membrane())
    assert rep.aperiodic and rep.generated_subgroup_index == 1
    assert rep.period == 2
    assert rep.strongly_aperiodic is False


def test_lazy_walk_is_strongly_aperiodic():
    rep = condition_b_check(lazy_simple_neighbor(2), Membrane())
    assert rep.period == 1 and rep.strongly_aperiodic


def test_diagonal_embedding_has_infinite_index():
    law = diagonal_embedding(categorical({(-1,): 0.5, (1,): 0.5}))
    rep = condition_b_check(law, Membrane())
    assert not rep.aperiodic
    assert rep.generated_subgroup_index == INFINITE


def test_deterministic_kick_is_accessible():
    m = Membrane((((0, 0), point_mass((1, 0))),))
    assert condition_b_check(simple_neighbor(2), m).accessibility_ok


def test_long_kick_still_accessible():
    m = Membrane((((0, 0), point_mass((40, 0))),))
    rep = condition_b_check(simple_neighbor(2), m, search_radius=3)
    assert rep.holds


def test_trapping_kick_breaks_accessibility():
    # both membrane points kick into each other, so nothing else is ever reached
    m = Membrane((((0, 0), point_mass((1, 0))), ((1, 0), point_mass((-1, 0)))))
    rep = condition_b_check(simple_neighbor(2), m, search_radius=2)
    assert not rep.accessibility_ok
    assert set(rep.unreached) == {(0, 0), (1, 0)}


def test_even_sublattice_index():
    assert subgroup_index([(2, 0), (0, 2)], 2) == 4
    assert subgroup_index([(1, 1), (1, -1)], 2) == 2
    assert subgroup_index([(2,), (3,)], 1) == 1


vecs = st.lists(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=5)


@given(vecs)
def test_hnf_index_matches_determinant(vs):
    basis = hermite_rows(vs, 2)
    idx = subgroup_index(vs, 2)
    if len(basis) < 2:
        assert idx == INFINITE
        return
    (a, b), (c, d) = basis
    assert idx == abs(a * d - b * c)
    # every generator must be an integer combination of the basis
    for x, y in vs:
        k1 = x // a
        assert (x - k1 * a) == 0
        rest = y - k1 * b
        assert rest % d == 0


@given(vecs, st.tuples(st.integers(-6, 6), st.integers(-6, 6)))
def test_index_invariant_under_adding_generated_vector(vs, coeff):
    extra = tuple(coeff[0] * v for v in vs[0])
    assert subgroup_index(vs, 2) == subgroup_index(vs + [extra], 2)
