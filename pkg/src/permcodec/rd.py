"""Rate-distortion function (Blahut-Arimoto) and a random-codebook lossy codec."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import (
    BudgetExceeded,
    DistortionMeasure,
    SourceModel,
    ValidationError,
    check_sequence,
    to_bits,
)

BA_TOL = 1e-10
BA_MAX_ITER = 10_000
MAX_CODEWORDS = 2**20
CODEBOOK_FORMAT = "permcodec-codebook"
CODEBOOK_VERSION = 1


class ConvergenceError(RuntimeError):
    def __init__(self, message, last):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class RDPoint:
    """One point on the rate-distortion curve, rate in nats per symbol."""

    slope: float
    rate: float
    distortion: float
    channel: np.ndarray = field(repr=False, compare=False)
    output_marginal: np.ndarray = field(repr=False, compare=False)
    iterations: int = 0

    @property
    def rate_bits(self) -> float:
        return to_bits(self.rate)


def _point_from_channel(p, dmat, log_Q, slope, iterations) -> RDPoint:
    Q = np.exp(log_Q)
    q = p @ Q
    with np.errstate(divide="ignore", invalid="ignore"):
        log_q = np.log(q)
        terms = np.where(Q > 0, Q * (log_Q - log_q[None, :]), 0.0)
    rate = max(0.0, float(p @ terms.sum(axis=1)))
    dist = float(p @ np.where(Q > 0, Q * dmat, 0.0).sum(axis=1))
    return RDPoint(float(slope), rate, dist, Q, q, iterations)


def blahut_arimoto(
    source: SourceModel,
    d: DistortionMeasure,
    slope: float,
    tol: float = BA_TOL,
    max_iter: int = BA_MAX_ITER,
    init_marginal=None,
) -> RDPoint:
    """Point on R(D) whose tangent has slope ``-slope`` (nats per unit distortion).

    Alternates the optimal channel for the current output marginal and the
    marginal induced by that channel, in the log domain.  Stops when two
    successive rates differ by less than ``tol``.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` iterations pass without convergence.  The last
        iterate is attached as ``.last``.
    """
    if slope < 0 or not math.isfinite(slope):
        raise ValidationError("slope must be finite and >= 0")
    p = source.probabilities
    dmat = d.matrix
    if dmat.shape[0] != p.size:
        raise ValidationError("distortion table rows must match the source alphabet")
    # support restricted to symbols with mass; zero-mass rows never matter
    support = p > 0
    ps, ds = p[support], dmat[support]
    k_y = ds.shape[1]
    if init_marginal is None:
        log_q = np.full(k_y, -math.log(k_y))
    else:
        with np.errstate(divide="ignore"):
            log_q = np.log(np.asarray(init_marginal, dtype=float))
    scaled = -slope * np.where(np.isfinite(ds), ds, np.inf)
    prev_rate = math.inf
    log_Q = None
    for it in range(1, max_iter + 1):
        log_Q = scaled + log_q[None, :]
        log_Q -= logsumexp(log_Q, axis=1, keepdims=True)
        log_q = logsumexp(np.log(ps)[:, None] + log_Q, axis=0)
        with np.errstate(invalid="ignore"):
            rate = float(ps @ np.where(log_Q > -np.inf, np.exp(log_Q) * (log_Q - log_q[None, :]), 0.0).sum(axis=1))
        if abs(rate - prev_rate) < tol:
            break
        prev_rate = rate
    else:
        full = np.full((p.size, k_y), -np.inf)
        full[support] = log_Q
        raise ConvergenceError(
            f"Blahut-Arimoto did not converge in {max_iter} iterations at slope {slope}",
            _point_from_channel(p, dmat, full, slope, max_iter),
        )
    full = np.full((p.size, k_y), -math.log(k_y))
    full[support] = log_Q
    return _point_from_channel(p, dmat, full, slope, it)


def distortion_range(source: SourceModel, d: DistortionMeasure) -> tuple[float, float]:
    """``(D_min, D_max)``: zero-rate distortion is ``D_max``."""
    p, dmat = source.probabilities, d.matrix
    dmin = float(p @ dmat.min(axis=1))
    dmax = float((p @ dmat).min())
    return dmin, dmax


def _zero_rate_point(source, d) -> RDPoint:
    p, dmat = source.probabilities, d.matrix
    y = int(np.argmin(p @ dmat))
    Q = np.zeros_like(dmat)
    Q[:, y] = 1.0
    log_Q = np.log(Q, where=Q > 0, out=np.full_like(Q, -np.inf))
    return _point_from_channel(p, dmat, log_Q, 0.0, 0)


def _min_distortion_point(source, d) -> RDPoint:
    p, dmat = source.probabilities, d.matrix
    Q = np.zeros_like(dmat)
    Q[np.arange(dmat.shape[0]), dmat.argmin(axis=1)] = 1.0
    log_Q = np.log(Q, where=Q > 0, out=np.full_like(Q, -np.inf))
    return _point_from_channel(p, dmat, log_Q, math.inf, 0)


def _bisect_slope(source, d, f, target, tol, increasing):
    """Find slope with ``f(point) ~= target``; ``f`` monotone in slope."""
    lo, hi = 0.0, 1.0
    pt_hi = blahut_arimoto(source, d, hi)
    while (f(pt_hi) < target) if increasing else (f(pt_hi) > target):
        lo, hi = hi, hi * 2
        if hi > 1e6:
            raise ConvergenceError("slope search diverged", pt_hi)
        pt_hi = blahut_arimoto(source, d, hi, init_marginal=pt_hi.output_marginal)
    best = pt_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pt = blahut_arimoto(source, d, mid, init_marginal=best.output_marginal)
        val = f(pt)
        if abs(val - target) < tol:
            return pt
        if (val < target) if increasing else (val > target):
            lo = mid
        else:
            hi, best = mid, pt
        if hi - lo < 1e-14:
            return pt
    return best


def rd_point_at_distortion(
    source: SourceModel, d: DistortionMeasure, target: float, tol: float = 1e-8
) -> RDPoint:
    """R(D) at a target distortion, by bisection over the slope."""
    dmin, dmax = distortion_range(source, d)
    if target >= dmax:
        return _zero_rate_point(source, d)
    if target <= dmin:
        return _min_distortion_point(source, d)
    return _bisect_slope(source, d, lambda pt: pt.distortion, target, tol, increasing=False)


def rd_point_at_rate(source: SourceModel, d: DistortionMeasure, rate: float, tol: float = 1e-9) -> RDPoint:
    """Point on the curve with the given rate (nats per symbol)."""
    if rate <= 0:
        return _zero_rate_point(source, d)
    top = _min_distortion_point(source, d)
    if rate >= top.rate:
        return top
    return _bisect_slope(source, d, lambda pt: pt.rate, rate, tol, increasing=True)


def rd_sweep(source: SourceModel, d: DistortionMeasure, slopes) -> list[RDPoint]:
    """Trace the curve at sorted nonnegative slopes; checks monotonicity and convexity."""
    slopes = [float(s) for s in slopes]
    if any(s < 0 for s in slopes) or slopes != sorted(slopes):
        raise ValidationError("slopes must be nonnegative and sorted ascending")
    points, q = [], None
    for s in slopes:
        pt = blahut_arimoto(source, d, s, init_marginal=q)
        q = pt.output_marginal
        points.append(pt)
    check_curve(points)
    return points


def check_curve(points, tol: float = 1e-7) -> None:
    for a, b in zip(points, points[1:]):
        if b.distortion > a.distortion + tol or b.rate < a.rate - tol:
            raise ConvergenceError("R(D) sweep is not monotone", b)
    # convexity: slope of chords non-increasing in magnitude as D grows
    pts = sorted({(round(p.distortion, 12), p.rate) for p in points})
    for (d0, r0), (d1, r1), (d2, r2) in zip(pts, pts[1:], pts[2:]):
        if d1 - d0 < 1e-9 or d2 - d1 < 1e-9:
            continue
        if (r1 - r0) / (d1 - d0) > (r2 - r1) / (d2 - d1) + 1e-5:
            raise ConvergenceError("R(D) sweep is not convex", points[-1])


def binary_hamming_rd(p: float, D: float) -> float:
    """Closed form ``h(p) - h(D)`` in bits for a Bernoulli(p) source, 0 <= D <= min(p, 1-p)."""

    def h(t):
        return 0.0 if t <= 0 or t >= 1 else -t * math.log2(t) - (1 - t) * math.log2(1 - t)

    return max(0.0, h(p) - h(D)) if D < min(p, 1 - p) else 0.0


@dataclass(frozen=True)
class Codebook:
    """``M`` reconstruction codewords of length ``n``; index space ``{0..M-1}``."""

    codewords: np.ndarray
    alphabet_size: int

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=np.int64)
        if cw.ndim != 2 or cw.shape[0] < 1 or cw.shape[1] < 1:
            raise ValidationError("codebook must be a non-empty (M, n) array")
        if np.any(cw < 0) or np.any(cw >= self.alphabet_size):
            raise ValidationError("codeword symbol outside reconstruction alphabet")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @property
    def block_length(self) -> int:
        return self.codewords.shape[1]

    @property
    def rate(self) -> float:
        return math.log(self.size) / self.block_length

    @property
    def rate_bits(self) -> float:
        return math.log2(self.size) / self.block_length

    def to_dict(self) -> dict:
        return {
            "format": CODEBOOK_FORMAT,
            "version": CODEBOOK_VERSION,
            "block_length": self.block_length,
            "n_codewords": self.size,
            "alphabet_size": int(self.alphabet_size),
            "codewords": self.codewords.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Codebook":
        if data.get("format") != CODEBOOK_FORMAT:
            raise ValidationError("not a permcodec codebook file")
        if data.get("version") != CODEBOOK_VERSION:
            raise ValidationError(f"unsupported codebook version {data.get('version')!r}")
        cb = cls(np.asarray(data["codewords"]), int(data["alphabet_size"]))
        if cb.size != data["n_codewords"] or cb.block_length != data["block_length"]:
            raise ValidationError("codebook header does not match codeword table")
        return cb


def save_codebook(cb: Codebook, path) -> None:
    Path(path).write_text(json.dumps(cb.to_dict(), sort_keys=True) + "\n")


def load_codebook(path) -> Codebook:
    return Codebook.from_dict(json.loads(Path(path).read_text()))


def build_codebook(rd: RDPoint, n: int, M: int, rng) -> Codebook:
    """Draw ``M`` codewords i.i.d. from the point's output marginal ``Q_Y``."""
    if M < 1:
        raise ValidationError("M must be >= 1")
    if M > MAX_CODEWORDS:
        raise BudgetExceeded("codebook size", M, MAX_CODEWORDS)
    q = np.asarray(rd.output_marginal, dtype=float)
    q = np.clip(q, 0, None)
    q = q / q.sum()
    rng = np.random.default_rng(rng)
    return Codebook(rng.choice(q.size, size=(M, n), p=q), q.size)


def distance_matrix(cb: Codebook, X, d: DistortionMeasure) -> np.ndarray:
    """Total (unnormalized) distortion of each row of ``X`` to each codeword."""
    dmat = d.matrix
    out = np.zeros((X.shape[0], cb.size))
    for i in range(cb.block_length):
        out += dmat[X[:, i][:, None], cb.codewords[:, i][None, :]]
    return out


def compress_many(cb: Codebook, X, d: DistortionMeasure, chunk: int = 1 << 22) -> np.ndarray:
    """Nearest-codeword indices for a batch; ties go to the lowest index."""
    X = check_sequence(X, d.source_alphabet_size, "X")
    X = np.atleast_2d(X)
    if X.shape[1] != cb.block_length:
        raise ValidationError("sequence length does not match codebook block length")
    rows = max(1, chunk // cb.size)
    out = np.empty(X.shape[0], dtype=np.int64)
    for s in range(0, X.shape[0], rows):
        out[s : s + rows] = distance_matrix(cb, X[s : s + rows], d).argmin(axis=1)
    return out


def compress(cb: Codebook, x, d: DistortionMeasure) -> int:
    x = check_sequence(x, d.source_alphabet_size, "x")
    if x.ndim != 1:
        raise ValidationError("compress expects one sequence; use compress_many for batches")
    return int(compress_many(cb, x[None, :], d)[0])


def reconstruct(cb: Codebook, j) -> np.ndarray:
    j_arr = np.asarray(j, dtype=np.int64)
    if np.any(j_arr < 0) or np.any(j_arr >= cb.size):
        raise ValidationError(f"index outside {{0..{cb.size - 1}}}")
    return cb.codewords[j_arr].copy()


@dataclass(frozen=True)
class Performance:
    rate: float
    mean_distortion: float
    half_width: float
    std_error: float
    trials: int

    @property
    def rate_bits(self) -> float:
        return to_bits(self.rate)


def per_trial_distortions(cb, source, d, trials, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    X = rng.choice(source.alphabet_size, size=(trials, cb.block_length), p=source.probabilities)
    Y = reconstruct(cb, compress_many(cb, X, d))
    return d.matrix[X, Y].mean(axis=1)


def summarize(values, rate) -> Performance:
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return Performance(rate, float(v.mean()), 1.96 * se, se, int(v.size))


def measure_performance(cb: Codebook, source: SourceModel, d: DistortionMeasure, trials: int, rng) -> Performance:
    """Monte Carlo end-to-end distortion of ``reconstruct(compress(X))``."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    return summarize(per_trial_distortions(cb, source, d, trials, rng), cb.rate)


class RateDistortionCodec(TransformerMixin, BaseEstimator):
    """Fixed-rate lossy codec backed by a random codebook.

    ``fit`` estimates the source law (or takes ``source_pmf``), solves for
    the rate-distortion point, and draws ``n_codewords`` codewords from its
    output marginal.  ``transform`` maps sequences to codeword indices and
    ``inverse_transform`` maps indices back to reconstructions.

    Parameters
    ----------
    n_codewords : int
        Codebook size ``M``; the rate is ``ln(M) / n`` nats per symbol.
    distortion : DistortionMeasure, optional
        Hamming distortion on the source alphabet when omitted.
    target_distortion : float, optional
        Draw codewords for the point at this distortion.  By default the
        point whose rate equals the codebook rate is used.
    source_pmf : array-like, optional
        Known source law; otherwise estimated from symbol frequencies in ``X``.
    random_state : int, Generator or None
    """

    def __init__(
        self,
        n_codewords=2,
        distortion=None,
        target_distortion=None,
        source_pmf=None,
        random_state=None,
    ):
        self.n_codewords = n_codewords
        self.distortion = distortion
        self.target_distortion = target_distortion
        self.source_pmf = source_pmf
        self.random_state = random_state

    def fit(self, X, y=None):
        X = np.atleast_2d(check_sequence(X, name="X"))
        n = X.shape[1]
        if self.source_pmf is not None:
            source = SourceModel(self.source_pmf)
        else:
            k = int(X.max()) + 1 if self.distortion is None else self.distortion.source_alphabet_size
            source = SourceModel(np.bincount(X.ravel(), minlength=max(k, 2)) / X.size)
        d = self.distortion or DistortionMeasure.hamming(source.alphabet_size)
        if d.source_alphabet_size != source.alphabet_size:
            raise ValidationError("distortion table does not match source alphabet")
        if self.target_distortion is None:
            point = rd_point_at_rate(source, d, math.log(self.n_codewords) / n)
        else:
            point = rd_point_at_distortion(source, d, float(self.target_distortion))
        self.source_ = source
        self.distortion_ = d
        self.rd_point_ = point
        self.codebook_ = build_codebook(point, n, int(self.n_codewords), self.random_state)
        self.n_features_in_ = n
        return self

    @classmethod
    def from_codebook(cls, codebook: Codebook, distortion: DistortionMeasure | None = None):
        codec = cls(n_codewords=codebook.size, distortion=distortion)
        codec.codebook_ = codebook
        codec.distortion_ = distortion or DistortionMeasure.hamming(codebook.alphabet_size)
        codec.n_features_in_ = codebook.block_length
        return codec

    def transform(self, X):
        check_is_fitted(self, "codebook_")
        X = check_sequence(X, name="X")
        if X.ndim == 1:
            return compress(self.codebook_, X, self.distortion_)
        return compress_many(self.codebook_, X, self.distortion_)

    def inverse_transform(self, J):
        check_is_fitted(self, "codebook_")
        return reconstruct(self.codebook_, J)

    def __call__(self, X):
        """Batch compressor view ``g``: rows of ``X`` to indices."""
        return compress_many(self.codebook_, X, self.distortion_)

    @property
    def n_bins(self) -> int:
        return self.codebook_.size

    def score(self, X, y=None):
        """Negative mean per-letter distortion on ``X``."""
        X = np.atleast_2d(check_sequence(X, name="X"))
        Y = self.inverse_transform(self.transform(X))
        return -float(self.distortion_.matrix[X, Y].mean())
