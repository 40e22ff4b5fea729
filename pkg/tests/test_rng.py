import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from perturbwalk import rng

u64 = st.integers(0, rng.MASK64)


@given(u64)
def test_mix64_python_mirror_matches_kernel(z):
    assert int(rng.mix64(np.uint64(z))) == rng._mix64_py(z)


@given(u64, u64)
def test_combine_python_mirror_matches_kernel(k, t):
    assert int(rng.combine(np.uint64(k), np.uint64(t))) == rng._combine_py(k, t)


@given(u64, st.integers(0, 2**40), st.integers(0, rng.MAX_ATTEMPTS - 1))
def test_draws_are_pure_functions(key, index, attempt):
    ctr = rng.block_counter(index, attempt)
    a = rng.draw_u64(np.uint64(key), ctr)
    b = rng.draw_u64(np.uint64(key), ctr)
    assert a == b
    assert int(ctr) >> rng.ATTEMPT_BITS == index


@given(u64)
def test_uniform_ranges(z):
    u = np.uint64(z)
    assert 0.0 <= rng.u01_open_right(u) < 1.0
    assert 0.0 < rng.u01_open_left(u) <= 1.0


def test_uniform_extremes():
    assert rng.u01_open_right(np.uint64(0)) == 0.0
    assert rng.u01_open_left(np.uint64(rng.MASK64)) == 1.0


def test_derive_key_separates_tags():
    keys = {rng.derive_key(1, i, j) for i in range(30) for j in range(30)}
    assert len(keys) == 900
    assert rng.derive_key(1, -1) != rng.derive_key(1, 1)


def test_stream_draws_are_roughly_uniform():
    s = rng.Stream.from_tags(3, 4)
    vals = []
    for _ in range(20000):
        vals.append(rng.u01_open_right(np.uint64(s.u64())))
        s.index += 1
    hist, _ = np.histogram(vals, bins=10, range=(0, 1))
    # chi-square with 9 dof; 99.9% quantile is 27.9
    chi2 = ((hist - 2000) ** 2 / 2000).sum()
    assert chi2 < 27.9


@given(u64, st.integers(0, 2**40))
def test_draw_matches_pure_python_reference(key, index):
    ctr = (index << rng.ATTEMPT_BITS) & rng.MASK64
    ref = rng._mix64_py(rng._mix64_py((key + 0x9E3779B97F4A7C15 * (ctr + 1)) & rng.MASK64) ^ key)
    assert int(rng.draw_u64(np.uint64(key), np.uint64(ctr))) == ref
    assert int(rng.draw_u64(np.uint64(key), ctr)) == ref
    assert rng.Stream(key, index).u64() == ref
