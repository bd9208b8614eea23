import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permcodec.core import BudgetExceeded, SourceModel, ValidationError
from permcodec.typeclass import (
    SequenceIndex,
    TypeComposition,
    all_types,
    enumerate_type_class,
    type_class_array,
    type_class_size,
    type_distribution,
    type_entropy,
    type_info_bound,
    type_of,
    type_probability,
)


def test_balanced_binary_class_has_252_members():
    assert type_class_size(TypeComposition((5, 5))) == 252


def test_ternary_multinomial():
    assert type_class_size(TypeComposition((2, 1, 1))) == 12


def test_type_of_counts_symbols():
    assert type_of([0, 2, 2, 1, 2], 3).counts == (1, 1, 3)
    with pytest.raises(ValidationError):
        type_of([0, 3], 3)


def test_enumeration_is_lexicographic_and_complete():
    P = TypeComposition((2, 2))
    seqs = list(enumerate_type_class(P))
    assert seqs == sorted(set(itertools.permutations([0, 0, 1, 1])))


def test_generator_restarts_cleanly():
    P = TypeComposition((1, 2))
    assert list(enumerate_type_class(P)) == list(enumerate_type_class(P))


def test_array_matches_generator():
    P = TypeComposition((2, 1, 2))
    arr = type_class_array(P)
    assert [tuple(r) for r in arr] == list(enumerate_type_class(P))
    assert not arr.flags.writeable


def test_budget_refused_before_any_output():
    P = TypeComposition((10, 10))
    with pytest.raises(BudgetExceeded):
        enumerate_type_class(P, budget=1000)
    with pytest.raises(BudgetExceeded):
        type_class_array(P, budget=1000)


def test_type_probabilities_sum_to_one():
    src = SourceModel([0.2, 0.3, 0.5])
    _, probs = type_distribution(src, 5)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_type_probability_binomial():
    src = SourceModel.bernoulli(0.3)
    P = TypeComposition((7, 3))
    assert type_probability(P, src) == pytest.approx(math.comb(10, 3) * 0.3**3 * 0.7**7)


def test_impossible_type_has_zero_probability():
    src = SourceModel([1.0, 0.0])
    assert type_probability(TypeComposition((1, 1)), src) == 0.0


def test_type_entropy_respects_polynomial_bound():
    for n in (1, 4, 12):
        assert type_entropy(SourceModel.bernoulli(0.5), n) <= type_info_bound(2, n)


def test_all_types_count():
    assert len(all_types(6, 3)) == math.comb(8, 2)


def test_sequence_index_lookup():
    arr = type_class_array(TypeComposition((2, 2)))
    idx = SequenceIndex(arr, 2)
    assert idx.lookup(arr).tolist() == list(range(6))
    assert idx.lookup(np.array([[1, 1, 1, 1]])).tolist() == [-1]


def test_sequence_index_wide_fallback():
    rng = np.random.default_rng(0)
    rows = np.unique(rng.integers(0, 4, size=(20, 40)), axis=0)
    idx = SequenceIndex(rows, 4)
    assert idx.lookup(rows[::-1]).tolist() == list(range(len(rows)))[::-1]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=4).filter(lambda c: 0 < sum(c) <= 7))
def test_enumeration_size_matches_multinomial(counts):
    P = TypeComposition(counts)
    seqs = list(enumerate_type_class(P))
    assert len(seqs) == len(set(seqs)) == type_class_size(P)
    assert all(type_of(s, P.alphabet_size) == P for s in seqs)
