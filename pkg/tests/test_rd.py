import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from permcodec.core import BudgetExceeded, DistortionMeasure, SourceModel, ValidationError, derive_rng
from permcodec.rd import (
    Codebook,
    ConvergenceError,
    RateDistortionCodec,
    binary_hamming_rd,
    blahut_arimoto,
    build_codebook,
    compress,
    compress_many,
    distortion_range,
    load_codebook,
    measure_performance,
    rd_point_at_distortion,
    rd_point_at_rate,
    rd_sweep,
    reconstruct,
    save_codebook,
)


def h2(t):
    return -t * math.log2(t) - (1 - t) * math.log2(1 - t)


def test_closed_form_example():
    assert binary_hamming_rd(0.3, 0.1) == pytest.approx(h2(0.3) - h2(0.1))
    assert binary_hamming_rd(0.3, 0.1) == pytest.approx(0.412295, abs=1e-6)
    assert binary_hamming_rd(0.3, 0.4) == 0.0


def test_ba_matches_closed_form_at_a_target():
    pt = rd_point_at_distortion(SourceModel.bernoulli(0.3), DistortionMeasure.hamming(2), 0.1)
    assert pt.distortion == pytest.approx(0.1, abs=1e-7)
    assert pt.rate_bits == pytest.approx(binary_hamming_rd(0.3, 0.1), abs=1e-6)


def test_fair_coin_at_rate_half_bit():
    pt = rd_point_at_rate(SourceModel.bernoulli(0.5), DistortionMeasure.hamming(2), 0.5 * math.log(2))
    assert h2(pt.distortion) == pytest.approx(0.5, abs=1e-6)
    assert pt.distortion == pytest.approx(0.110028, abs=1e-5)


def test_output_marginal_for_binary_hamming():
    p, D = 0.3, 0.1
    pt = rd_point_at_distortion(SourceModel.bernoulli(p), DistortionMeasure.hamming(2), D)
    # reverse test channel: q1 = (p - D) / (1 - 2D)
    assert pt.output_marginal[1] == pytest.approx((p - D) / (1 - 2 * D), abs=1e-6)


def test_endpoints():
    src, d = SourceModel.bernoulli(0.2), DistortionMeasure.hamming(2)
    assert distortion_range(src, d) == (0.0, pytest.approx(0.2))
    zero = rd_point_at_distortion(src, d, 0.5)
    assert zero.rate == 0.0 and zero.distortion == pytest.approx(0.2)
    full = rd_point_at_distortion(src, d, 0.0)
    assert full.distortion == 0.0 and full.rate == pytest.approx(0.500402, abs=1e-6)


def test_sweep_is_monotone_and_convex(fair, hamming2):
    pts = rd_sweep(fair, hamming2, [0.0, 0.5, 1, 2, 4, 8])
    D = [p.distortion for p in pts]
    R = [p.rate for p in pts]
    assert D == sorted(D, reverse=True)
    assert R == sorted(R)


def test_sweep_rejects_unsorted(fair, hamming2):
    with pytest.raises(ValidationError):
        rd_sweep(fair, hamming2, [2, 1])


def test_convergence_error_carries_last_iterate(fair, hamming2):
    with pytest.raises(ConvergenceError) as info:
        blahut_arimoto(SourceModel([0.2, 0.3, 0.5]), DistortionMeasure([[0, 1, 4], [1, 0, 1], [4, 1, 0]]),
                       3.0, tol=1e-30, max_iter=3)
    assert info.value.last.iterations == 3


def test_negative_slope_rejected(fair, hamming2):
    with pytest.raises(ValidationError):
        blahut_arimoto(fair, hamming2, -1.0)


def test_nearest_codeword_breaks_ties_low():
    cb = Codebook(np.array([[0, 0], [1, 1], [0, 0]]), 2)
    d = DistortionMeasure.hamming(2)
    assert compress(cb, [0, 1], d) == 0
    assert compress(cb, [1, 1], d) == 1
    assert compress_many(cb, np.array([[0, 0], [1, 0]]), d).tolist() == [0, 0]
    assert reconstruct(cb, 1).tolist() == [1, 1]


def test_codebook_draws_from_marginal():
    pt = rd_point_at_distortion(SourceModel.bernoulli(0.3), DistortionMeasure.hamming(2), 0.1)
    cb = build_codebook(pt, 50, 400, np.random.default_rng(0))
    assert abs(cb.codewords.mean() - pt.output_marginal[1]) < 0.02


def test_codebook_size_cap():
    pt = rd_point_at_rate(SourceModel.bernoulli(0.5), DistortionMeasure.hamming(2), 0.3)
    with pytest.raises(BudgetExceeded):
        build_codebook(pt, 10, 2**21, 0)


def test_codebook_persistence(tmp_path):
    cb = Codebook(np.array([[0, 1, 2], [2, 2, 0]]), 3)
    save_codebook(cb, tmp_path / "cb.json")
    again = load_codebook(tmp_path / "cb.json")
    assert np.array_equal(again.codewords, cb.codewords) and again.alphabet_size == 3
    bad = cb.to_dict() | {"n_codewords": 5}
    with pytest.raises(ValidationError):
        Codebook.from_dict(bad)


def test_codec_estimator(fair, hamming2):
    codec = RateDistortionCodec(n_codewords=8, source_pmf=[0.5, 0.5], random_state=1)
    assert clone(codec).get_params() == codec.get_params()
    codec.fit(np.zeros((2, 6), dtype=int))
    J = codec.transform(np.eye(6, dtype=int))
    assert J.shape == (6,) and J.max() < 8
    assert codec.inverse_transform(J).shape == (6, 6)
    assert codec.codebook_.rate == pytest.approx(math.log(8) / 6)
    assert np.array_equal(codec(np.eye(6, dtype=int)), J)


def test_codec_learns_source_law_from_data():
    X = np.array([[0, 0, 0, 1]] * 5)
    codec = RateDistortionCodec(n_codewords=2, random_state=0).fit(X)
    assert codec.source_.pmf == pytest.approx((0.75, 0.25))


def test_performance_beats_zero_rate_distortion(fair, hamming2):
    codec = RateDistortionCodec(n_codewords=2**6, source_pmf=[0.5, 0.5], random_state=derive_rng(0, "cb")).fit(
        np.zeros((1, 12), dtype=int))
    perf = measure_performance(codec.codebook_, fair, hamming2, 400, derive_rng(0, "x"))
    assert perf.mean_distortion < 0.5 - 3 * perf.std_error
    assert perf.mean_distortion > codec.rd_point_.distortion - 3 * perf.std_error


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(0.01, 0.99))
def test_ba_tracks_closed_form(p, frac):
    D = frac * min(p, 0.2)
    pt = rd_point_at_distortion(SourceModel.bernoulli(p), DistortionMeasure.hamming(2), D)
    assert pt.rate_bits == pytest.approx(binary_hamming_rd(p, D), abs=1e-5)
