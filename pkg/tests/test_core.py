import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permcodec.core import (
    BudgetExceeded,
    DistortionMeasure,
    SourceModel,
    ValidationError,
    check_pmf,
    check_sequence,
    conditional_entropy,
    derive_rng,
    distortion,
    entropy,
    mutual_information,
    mutual_information_from_counts,
    sample_iid,
    to_bits,
)


def test_entropy_of_biased_coin():
    assert entropy([0.3, 0.7]) == pytest.approx(0.610864, abs=1e-6)


def test_entropy_ignores_zero_mass():
    assert entropy([1.0, 0.0]) == 0.0


def test_mutual_information_of_symmetric_table():
    joint = [[0.4, 0.1], [0.1, 0.4]]
    assert mutual_information(joint) == pytest.approx(0.192745, abs=1e-6)


def test_independent_table_has_zero_information():
    assert mutual_information(np.outer([0.2, 0.8], [0.5, 0.5])) == pytest.approx(0.0, abs=1e-15)


def test_conditional_entropy_chain_rule():
    joint = np.array([[0.1, 0.2], [0.3, 0.4]])
    h_a = entropy(joint.sum(axis=1))
    h_b = entropy(joint.sum(axis=0))
    h_ab = entropy(joint.ravel())
    assert conditional_entropy(joint) == pytest.approx(h_ab - h_a)
    assert mutual_information(joint) == pytest.approx(h_a + h_b - h_ab)


def test_counts_agree_with_normalized_table():
    counts = np.array([[3, 1], [2, 6]])
    assert mutual_information_from_counts(counts) == pytest.approx(mutual_information(counts / counts.sum()))


def test_counts_with_row_weights():
    counts = np.array([[1, 1], [2, 0]])
    w = np.array([0.25, 0.75])
    joint = w[:, None] * counts / counts.sum(axis=1, keepdims=True)
    assert mutual_information_from_counts(counts, w) == pytest.approx(mutual_information(joint))


@pytest.mark.parametrize("bad", [[0.5, 0.6], [-0.1, 1.1], [], [[0.5, 0.5]], [float("nan"), 1.0]])
def test_check_pmf_rejects(bad):
    with pytest.raises(ValidationError):
        check_pmf(bad)


def test_source_model_constructors():
    assert SourceModel.bernoulli(0.1).pmf == (0.9, 0.1)
    assert SourceModel.uniform(4).alphabet_size == 4
    with pytest.raises(ValidationError):
        SourceModel([0.2, 0.2])


def test_hamming_table():
    d = DistortionMeasure.hamming(3)
    assert d.matrix.tolist() == [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
    assert d.scaled(2.0).matrix[0, 1] == 2.0


def test_distortion_rejects_negative_entries():
    with pytest.raises(ValidationError):
        DistortionMeasure([[0, -1], [1, 0]])


def test_per_letter_distortion():
    d = DistortionMeasure.hamming(2)
    assert distortion([0, 1, 1, 0], [0, 0, 1, 1], d) == 0.5
    with pytest.raises(ValidationError):
        distortion([0, 1], [0, 1, 1], d)


def test_check_sequence_validation():
    assert check_sequence([0, 1, 2]).dtype == np.int64
    for bad in ([], [-1, 0], [0.5, 1], [[[0]]]):
        with pytest.raises(ValidationError):
            check_sequence(bad)
    with pytest.raises(ValidationError):
        check_sequence([0, 3], alphabet_size=2)


def test_derive_rng_is_stable_and_tag_separated():
    a = derive_rng(7, "x").integers(1 << 30, size=4)
    b = derive_rng(7, "x").integers(1 << 30, size=4)
    c = derive_rng(7, "y").integers(1 << 30, size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_iid_frequencies(rng):
    x = sample_iid(SourceModel.bernoulli(0.3), 20000, rng)
    assert abs(x.mean() - 0.3) < 0.02


def test_to_bits():
    assert to_bits(math.log(2)) == pytest.approx(1.0)


def test_budget_message_carries_numbers():
    exc = BudgetExceeded("widgets", 10, 5)
    assert "10" in str(exc) and "5" in str(exc)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(0, 20), min_size=3, max_size=3), min_size=2, max_size=4))
def test_information_is_bounded_by_marginal_entropies(rows):
    counts = np.array(rows)
    if counts.sum() == 0:
        return
    joint = counts / counts.sum()
    mi = mutual_information_from_counts(counts)
    assert -1e-12 <= mi <= min(entropy(joint.sum(1)), entropy(joint.sum(0))) + 1e-12
