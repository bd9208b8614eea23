"""Method of types: compositions, type classes and their probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .core import BudgetExceeded, SourceModel, ValidationError, check_sequence, entropy

DEFAULT_ENUMERATION_BUDGET = 10**7


@dataclass(frozen=True)
class TypeComposition:
    """Symbol-count vector of a length-``n`` sequence."""

    counts: tuple

    def __init__(self, counts):
        c = tuple(int(v) for v in counts)
        if len(c) < 1 or any(v < 0 for v in c):
            raise ValidationError("type counts must be nonnegative")
        if sum(c) < 1:
            raise ValidationError("type must describe a sequence of length >= 1")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def alphabet_size(self) -> int:
        return len(self.counts)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array(self.counts, dtype=float) / self.n

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.counts)) + ")"


def type_of(x, alphabet_size: int) -> TypeComposition:
    x = check_sequence(x, alphabet_size, "x")
    if x.ndim != 1:
        raise ValidationError("type_of expects a single sequence")
    return TypeComposition(np.bincount(x, minlength=alphabet_size))


def type_class_size(P: TypeComposition) -> int:
    """Exact multinomial coefficient ``n! / prod(counts!)``."""
    size, remaining = 1, P.n
    for c in P.counts:
        size *= math.comb(remaining, c)
        remaining -= c
    return size


def _check_budget(P: TypeComposition, budget: int) -> int:
    size = type_class_size(P)
    if size > budget:
        raise BudgetExceeded(f"enumerating type class {P}", size, budget)
    return size


def enumerate_type_class(
    P: TypeComposition, budget: int = DEFAULT_ENUMERATION_BUDGET
) -> Iterator[tuple]:
    """Yield every sequence of type ``P`` in lexicographic order.

    Each call returns a fresh, independently restartable generator.
    Refuses (before yielding anything) when ``|T_P|`` exceeds ``budget``.
    """
    _check_budget(P, budget)

    def gen():
        seq = [a for a, c in enumerate(P.counts) for _ in range(c)]
        n = len(seq)
        while True:
            yield tuple(seq)
            # next multiset permutation in lexicographic order
            i = n - 2
            while i >= 0 and seq[i] >= seq[i + 1]:
                i -= 1
            if i < 0:
                return
            j = n - 1
            while seq[j] <= seq[i]:
                j -= 1
            seq[i], seq[j] = seq[j], seq[i]
            seq[i + 1 :] = reversed(seq[i + 1 :])

    return gen()


@lru_cache(maxsize=64)
def _class_array(counts: tuple) -> np.ndarray:
    n = sum(counts)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    blocks = []
    for a, c in enumerate(counts):
        if c == 0:
            continue
        rest = list(counts)
        rest[a] -= 1
        tail = _class_array(tuple(rest))
        head = np.full((tail.shape[0], 1), a, dtype=np.int8)
        blocks.append(np.hstack([head, tail]))
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def type_class_array(P: TypeComposition, budget: int = DEFAULT_ENUMERATION_BUDGET) -> np.ndarray:
    """All sequences of type ``P`` as a read-only ``(|T_P|, n)`` array, lexicographic rows."""
    _check_budget(P, budget)
    return _class_array(P.counts)


def all_types(n: int, alphabet_size: int) -> list[TypeComposition]:
    """Every composition of ``n`` into ``alphabet_size`` parts, lexicographic."""
    if n < 1 or alphabet_size < 1:
        raise ValidationError("need n >= 1 and alphabet_size >= 1")

    def rec(remaining, parts):
        if parts == 1:
            yield (remaining,)
            return
        for first in range(remaining + 1):
            for rest in rec(remaining - first, parts - 1):
                yield (first, *rest)

    return [TypeComposition(c) for c in rec(n, alphabet_size)]


def type_log_probability(P: TypeComposition, source: SourceModel) -> float:
    """``log Pr(type(X^n) = P)``; ``-inf`` for impossible types."""
    if P.alphabet_size != source.alphabet_size:
        raise ValidationError("type and source alphabet sizes differ")
    logp = math.log(type_class_size(P))
    for c, p in zip(P.counts, source.pmf):
        if c == 0:
            continue
        if p == 0.0:
            return -math.inf
        logp += c * math.log(p)
    return logp


def type_probability(P: TypeComposition, source: SourceModel) -> float:
    return math.exp(type_log_probability(P, source))


def type_info_bound(alphabet_size: int, n: int) -> float:
    """Upper bound ``|X| ln(n + 1)`` on the entropy of the type of ``X^n``."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    return alphabet_size * math.log(n + 1)


def type_distribution(source: SourceModel, n: int) -> tuple[list[TypeComposition], np.ndarray]:
    types = all_types(n, source.alphabet_size)
    probs = np.array([type_probability(P, source) for P in types])
    return types, probs


def type_entropy(source: SourceModel, n: int) -> float:
    """Exact ``H(P_{X^n})`` in nats, by summing over all types of length ``n``."""
    _, probs = type_distribution(source, n)
    return entropy(probs / probs.sum())


class SequenceIndex:
    """Map rows of a lexicographically sorted sequence array to their row numbers.

    Sequences are packed into integers (base ``alphabet_size``) when they fit
    in 62 bits; otherwise a bytes-keyed dictionary is used.
    """

    def __init__(self, sequences: np.ndarray, alphabet_size: int):
        self.sequences = np.asarray(sequences)
        self.alphabet_size = int(alphabet_size)
        n = self.sequences.shape[1]
        self._packed = n * math.log2(max(self.alphabet_size, 2)) <= 62
        if self._packed:
            self._weights = self.alphabet_size ** np.arange(n - 1, -1, -1, dtype=np.int64)
            self._codes = self._encode(self.sequences)
            if np.any(np.diff(self._codes) <= 0):
                raise ValidationError("SequenceIndex needs strictly sorted, distinct rows")
        else:
            rows = np.ascontiguousarray(self.sequences, dtype=np.int8)
            self._table = {r.tobytes(): i for i, r in enumerate(rows)}

    def _encode(self, seqs: np.ndarray) -> np.ndarray:
        return np.asarray(seqs, dtype=np.int64) @ self._weights

    def __len__(self) -> int:
        return self.sequences.shape[0]

    def lookup(self, seqs) -> np.ndarray:
        """Row numbers of ``seqs`` (any leading shape, last axis = n); -1 if absent."""
        seqs = np.asarray(seqs)
        lead = seqs.shape[:-1]
        flat = seqs.reshape(-1, seqs.shape[-1])
        if self._packed:
            codes = self._encode(flat)
            pos = np.searchsorted(self._codes, codes)
            pos_c = np.minimum(pos, len(self._codes) - 1)
            out = np.where(self._codes[pos_c] == codes, pos_c, -1)
        else:
            rows = np.ascontiguousarray(flat, dtype=np.int8)
            out = np.array([self._table.get(r.tobytes(), -1) for r in rows], dtype=np.int64)
        return out.reshape(lead)
