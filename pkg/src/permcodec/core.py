"""Source models, distortion measures and exact discrete information measures.

All information quantities are in nats.  Use :func:`to_bits` for reporting.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

PMF_TOL = 1e-12
TINY = 1e-300


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class BudgetExceeded(RuntimeError):
    """Raised when an exact computation would exceed its configured budget."""

    def __init__(self, what: str, required: int, budget: int):
        self.what = what
        self.required = required
        self.budget = budget
        super().__init__(f"{what}: requires {required} evaluations, budget is {budget}")


def to_bits(nats: float) -> float:
    return nats / math.log(2)


def derive_rng(seed: int, tag: str) -> np.random.Generator:
    """Independent generator for ``(seed, tag)``.

    The tag is hashed so that streams for different roles (``"cipher"``,
    ``"codebook"``, ...) derived from one master seed never overlap.
    """
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed), *words]))


def check_pmf(pmf, name: str = "pmf") -> np.ndarray:
    p = np.asarray(pmf, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > PMF_TOL:
        raise ValidationError(f"{name} sums to {p.sum()!r}, not 1")
    return p


@dataclass(frozen=True)
class SourceModel:
    """i.i.d. source law ``P_X`` on ``{0, ..., alphabet_size - 1}``."""

    pmf: tuple

    def __init__(self, pmf):
        p = check_pmf(pmf, "source pmf")
        if p.size < 2:
            raise ValidationError("alphabet_size must be >= 2")
        object.__setattr__(self, "pmf", tuple(float(v) for v in p))

    @property
    def alphabet_size(self) -> int:
        return len(self.pmf)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array(self.pmf)

    @classmethod
    def bernoulli(cls, p1: float) -> "SourceModel":
        """Binary source with ``P(X = 1) = p1``."""
        return cls([1.0 - p1, p1])

    @classmethod
    def uniform(cls, k: int) -> "SourceModel":
        return cls(np.full(k, 1.0 / k))


@dataclass(frozen=True)
class DistortionMeasure:
    """Per-letter distortion table ``d(x, y)``, shape ``(|X|, |Y|)``."""

    table: tuple

    def __init__(self, table):
        d = np.asarray(table, dtype=float)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValidationError("distortion table must be 2-d and non-empty")
        if np.any(np.isnan(d)) or np.any(d < 0):
            raise ValidationError("distortion entries must be >= 0")
        if not np.all(np.isfinite(d).any(axis=1)):
            raise ValidationError("every source symbol needs a finite-distortion reconstruction")
        object.__setattr__(self, "table", tuple(tuple(float(v) for v in row) for row in d))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.table)

    @property
    def source_alphabet_size(self) -> int:
        return len(self.table)

    @property
    def reconstruction_alphabet_size(self) -> int:
        return len(self.table[0])

    @classmethod
    def hamming(cls, k: int) -> "DistortionMeasure":
        return cls(1.0 - np.eye(k))

    def scaled(self, c: float) -> "DistortionMeasure":
        return DistortionMeasure(self.matrix * c)


def check_sequence(x, alphabet_size: int | None = None, name: str = "sequence") -> np.ndarray:
    """Validate a single sequence (1-d) or a batch of sequences (2-d)."""
    a = np.asarray(x)
    if a.size and not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.equal(np.mod(a, 1), 0)):
            raise ValidationError(f"{name} must contain integer symbols")
    a = a.astype(np.int64)
    if a.ndim not in (1, 2) or a.shape[-1] < 1:
        raise ValidationError(f"{name} must have length >= 1")
    if np.any(a < 0):
        raise ValidationError(f"{name} contains negative symbols")
    if alphabet_size is not None and np.any(a >= alphabet_size):
        raise ValidationError(f"{name} contains symbols outside alphabet of size {alphabet_size}")
    return a


def entropy(pmf) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``.

    >>> round(entropy([0.5, 0.5]), 6)
    0.693147
    """
    p = check_pmf(pmf)
    p = p[p > TINY]
    return float(max(0.0, -np.sum(p * np.log(p))))


def _check_joint(joint) -> np.ndarray:
    j = np.asarray(joint, dtype=float)
    if j.ndim != 2:
        raise ValidationError("joint table must be 2-d")
    if not np.all(np.isfinite(j)) or np.any(j < 0):
        raise ValidationError("joint table has negative or non-finite entries")
    if abs(j.sum() - 1.0) > PMF_TOL:
        raise ValidationError(f"joint table sums to {j.sum()!r}, not 1")
    return j


def mutual_information(joint) -> float:
    """``I(A; B)`` in nats from a joint probability table ``p(a, b)``.

    Tiny negative round-off is clamped to zero.
    """
    j = _check_joint(joint)
    pa = j.sum(axis=1, keepdims=True)
    pb = j.sum(axis=0, keepdims=True)
    mask = j > TINY
    ratio = j[mask] / (pa @ pb)[mask]
    return float(max(0.0, np.sum(j[mask] * np.log(ratio))))


def conditional_entropy(joint) -> float:
    """``H(B | A)`` in nats, rows indexing ``A``."""
    j = _check_joint(joint)
    pa = j.sum(axis=1, keepdims=True)
    mask = j > TINY
    cond = j[mask] / np.broadcast_to(pa, j.shape)[mask]
    return float(max(0.0, -np.sum(j[mask] * np.log(cond))))


def mutual_information_from_counts(counts, row_weights=None) -> float:
    """``I(A; B)`` from a nonnegative integer count table.

    With ``row_weights=None`` the joint law is ``counts / counts.sum()``.
    Otherwise row ``a`` is rescaled so the joint is
    ``row_weights[a] * counts[a, b] / counts[a].sum()``; this is how an
    i.i.d. prior over sequences is combined with uniform-key hit counts.
    Counts stay integral until the final logarithm.
    """
    c = np.asarray(counts)
    if np.any(c < 0):
        raise ValidationError("counts must be nonnegative")
    rows = c.sum(axis=1)
    if row_weights is None:
        total = c.sum()
        if total == 0:
            raise ValidationError("empty count table")
        # p(a,b)/(p(a)p(b)) = c * total / (row * col), all integer
        cols = c.sum(axis=0)
        a, b = np.nonzero(c)
        num = c[a, b].astype(float)
        ratio = num * float(total) / (rows[a].astype(float) * cols[b].astype(float))
        return float(max(0.0, np.sum(num / total * np.log(ratio))))
    w = np.asarray(row_weights, dtype=float)
    if w.shape != rows.shape:
        raise ValidationError("row_weights must have one entry per row")
    keep = (w > 0) & (rows > 0)
    joint = c[keep] * (w[keep] / rows[keep])[:, None]
    s = joint.sum()
    if s <= 0:
        return 0.0
    return mutual_information(joint / s)


def sample_iid(source: SourceModel, n: int, rng, size: int | None = None) -> np.ndarray:
    """Draw one length-``n`` sequence (or ``size`` of them) from ``source``."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = np.random.default_rng(rng)
    shape = (n,) if size is None else (size, n)
    return rng.choice(source.alphabet_size, size=shape, p=source.probabilities).astype(np.int64)


def distortion(x, y, d: DistortionMeasure) -> float:
    """Mean per-letter distortion ``(1/n) sum_i d(x_i, y_i)``."""
    x = check_sequence(x, d.source_alphabet_size, "x")
    y = check_sequence(y, d.reconstruction_alphabet_size, "y")
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"length mismatch: {x.shape} vs {y.shape}")
    return float(d.matrix[x, y].mean())
