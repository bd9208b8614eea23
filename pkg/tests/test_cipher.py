import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from permcodec.cipher import (
    FixedPermutationCipher,
    ModuloSumCipher,
    SecretKey,
    TypeICipher,
    TypeIICipher,
    apply_permutation,
    build_cipher,
    check_permutation,
    compose,
    identity,
    inverse,
    load_cipher,
    modulo_sum_encrypt,
    n_base_permutations,
    resolve_all_type2,
    resolved_marginal_report,
    sample_uniform_permutation,
    save_cipher,
)
from permcodec.core import ValidationError
from permcodec.leakage import storage_count
from permcodec.typeclass import type_of


def test_fixed_permutation_moves_symbols_to_destinations():
    # position i goes to mapping[i]
    c = FixedPermutationCipher([[2, 0, 1]]).fit()
    assert apply_permutation([2, 0, 1], [0, 1, 2]).tolist() == [1, 2, 0]
    assert c.encrypt([0, 1, 2], 0).tolist() == [1, 2, 0]
    assert c.decrypt([1, 2, 0], 0).tolist() == [0, 1, 2]


def test_inverse_and_compose():
    p = np.array([3, 0, 2, 1])
    assert compose(p, inverse(p)).tolist() == identity(4).tolist()
    q = np.array([1, 2, 3, 0])
    x = np.array([0, 1, 2, 3])
    assert apply_permutation(compose(q, p), x).tolist() == apply_permutation(q, apply_permutation(p, x)).tolist()


@pytest.mark.parametrize("bad", [[0, 0, 1], [1, 2, 3], [], [[0, 1]]])
def test_check_permutation_rejects(bad):
    with pytest.raises(ValidationError):
        check_permutation(bad)


def test_base_count_is_ceil_log2():
    assert [n_base_permutations(N) for N in (2, 3, 4, 5, 8, 9, 1024)] == [1, 2, 2, 3, 3, 4, 10]


def test_type2_resolution_by_key_bits():
    s1, s2 = np.array([1, 0, 2]), np.array([0, 2, 1])
    c = TypeIICipher(n_keys=4, block_length=3)
    c.base_permutations_ = np.array([s1, s2])
    c.n_features_in_ = 3
    assert c.resolve(0).tolist() == [0, 1, 2]
    assert c.resolve(1).tolist() == s1.tolist()
    assert c.resolve(2).tolist() == s2.tolist()
    # key 3: sigma_1 first, then sigma_2
    assert c.resolve(3).tolist() == compose(s2, s1).tolist()
    assert np.array_equal(c.resolved_permutations(), c.resolve_many(np.arange(4)))


def test_doubling_matches_bitwise_resolution():
    c = TypeIICipher(n_keys=13, block_length=7, random_state=3).fit()
    assert np.array_equal(resolve_all_type2(c.base_permutations_, 13), c.resolve_many(np.arange(13)))


def test_storage_counts():
    assert storage_count("I", 1024) == 1024
    assert storage_count("II", 1024) == 10
    assert TypeIICipher(n_keys=1024, block_length=5, random_state=0).fit().stored_permutations().shape == (10, 5)


@pytest.mark.parametrize("kind", ["I", "II"])
def test_batch_round_trip(kind, rng):
    c = build_cipher(kind, 16, 64, rng)
    X = rng.integers(0, 4, size=(500, 16))
    K = rng.integers(0, 64, size=500)
    Y = c.transform(X, K)
    assert np.array_equal(c.inverse_transform(Y, K), X)
    assert all(type_of(y, 4) == type_of(x, 4) for x, y in zip(X[:50], Y[:50]))


def test_key_validation():
    c = TypeICipher(n_keys=4, block_length=3, random_state=0).fit()
    for bad in (-1, 4):
        with pytest.raises(ValidationError):
            c.encrypt([0, 1, 0], bad)
    with pytest.raises(ValidationError):
        c.encrypt([0, 1, 0, 1], 0)
    with pytest.raises(ValidationError):
        c.encrypt([0, 1, 0], SecretKey(0, 8))
    assert c.encrypt([0, 1, 0], SecretKey(1, 4)).shape == (3,)


def test_type2_needs_two_keys():
    with pytest.raises(ValidationError):
        TypeIICipher(n_keys=1, block_length=4).fit()


def test_estimator_protocol():
    c = TypeICipher(n_keys=8, block_length=5, random_state=1)
    assert clone(c).get_params() == c.get_params()
    fitted = c.fit()
    refit = TypeICipher(n_keys=8, block_length=5, random_state=1).fit()
    assert np.array_equal(fitted.permutations_, refit.permutations_)
    inferred = TypeICipher(n_keys=2, random_state=1).fit(np.zeros((3, 6), dtype=int))
    assert inferred.n_features_in_ == 6


def test_key_rate():
    c = TypeICipher(n_keys=16, block_length=4, random_state=0).fit()
    assert c.key_rate() == pytest.approx(math.log(16) / 4)
    assert SecretKey(3, 16).rate(4) == pytest.approx(math.log(16) / 4)


@pytest.mark.parametrize("kind", ["I", "II"])
def test_save_and_load(tmp_path, kind):
    c = build_cipher(kind, 6, 5, np.random.default_rng(9))
    path = tmp_path / "cipher.json"
    save_cipher(c, path)
    again = load_cipher(path)
    assert again.kind == kind
    assert np.array_equal(again.resolved_permutations(), c.resolved_permutations())


def test_load_rejects_foreign_files(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValidationError):
        load_cipher(p)


def test_modulo_sum():
    c = ModuloSumCipher(8)
    assert c.encrypt(5, 6) == 3
    assert c.decrypt(3, 6) == 5
    assert modulo_sum_encrypt(7, 1, 8) == 0
    with pytest.raises(ValidationError):
        c.encrypt(8, 0)
    with pytest.raises(ValidationError):
        ModuloSumCipher(1)


def test_uniform_permutation_frequencies():
    rng = np.random.default_rng(0)
    counts = {}
    for _ in range(6000):
        key = tuple(sample_uniform_permutation(3, rng))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    assert max(abs(v / 6000 - 1 / 6) for v in counts.values()) < 0.02


@pytest.mark.parametrize("n,trials", [(3, 1200), (4, 4800)])
def test_type2_marginals(n, trials):
    rows = resolved_marginal_report("II", n, 4, trials=trials, seed=0)
    assert rows[0]["distinct"] == 1  # key 0 is always the identity
    assert all(r["tv_distance"] < 0.15 for r in rows[1:])


def test_type1_marginals_are_uniform():
    rows = resolved_marginal_report("I", 3, 4, trials=1200, seed=0)
    assert all(r["tv_distance"] < 0.1 and r["distinct"] == 6 for r in rows)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_round_trip_property(n, N, seed):
    rng = np.random.default_rng(seed)
    kind = "I" if N == 1 else ("II" if seed % 2 else "I")
    c = build_cipher(kind, n, N, rng)
    x = rng.integers(0, 3, size=n)
    k = int(rng.integers(N))
    assert np.array_equal(c.decrypt(c.encrypt(x, k), k), x)
