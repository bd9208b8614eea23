"""Exact information leakage of permutation-then-compress systems.

Given a type ``P``, the plaintext is uniform on the type class ``T_P`` and the
key is uniform on ``{0..N-1}``.  The adversary sees ``J = g(pi_K(X^n))`` and
knows both ``g`` and the cipher.  Everything here is computed by exhaustive
enumeration of ``T_P`` and the key space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .cipher import build_cipher, inverse, n_base_permutations
from .core import (
    BudgetExceeded,
    SourceModel,
    ValidationError,
    entropy,
    mutual_information_from_counts,
    to_bits,
)
from .typeclass import (
    DEFAULT_ENUMERATION_BUDGET,
    SequenceIndex,
    TypeComposition,
    type_class_array,
    type_class_size,
    type_distribution,
    type_info_bound,
)

log = logging.getLogger(__name__)

DEFAULT_PAIR_BUDGET = 10**8
DEFAULT_DELTA = 0.5


def resolve_compressor(g, n_bins=None):
    """Return ``(fn, M)`` for a compressor given as a codec or a batch callable."""
    if hasattr(g, "codebook_"):
        return g, g.codebook_.size
    if not callable(g):
        raise ValidationError("compressor must be a fitted codec or a callable on (B, n) arrays")
    return g, n_bins


def _permutation_table(cipher) -> np.ndarray:
    if hasattr(cipher, "resolved_permutations"):
        return cipher.resolved_permutations()
    table = np.atleast_2d(np.asarray(cipher, dtype=np.int64))
    return table


def _cipher_kind(cipher) -> str:
    return getattr(cipher, "kind", None) or "I"


@dataclass
class TypeHits:
    """Per-type enumeration: sequences, their bins, and key-hit counts.

    ``counts[x, j]`` is the number of keys ``k`` with ``g(pi_k(x)) = j``.
    """

    P: TypeComposition
    sequences: np.ndarray
    labels: np.ndarray
    counts: np.ndarray
    n_bins: int


def type_hits(cipher, g, P: TypeComposition, n_bins=None, pair_budget=DEFAULT_PAIR_BUDGET,
              enumeration_budget=DEFAULT_ENUMERATION_BUDGET, chunk_pairs=1 << 21) -> TypeHits:
    fn, M = resolve_compressor(g, n_bins)
    perms = _permutation_table(cipher)
    if perms.shape[1] != P.n:
        raise ValidationError(f"cipher block length {perms.shape[1]} != type length {P.n}")
    size = type_class_size(P)
    if size * perms.shape[0] > pair_budget:
        raise BudgetExceeded(f"leakage for type {P}", size * perms.shape[0], pair_budget)
    seqs = type_class_array(P, enumeration_budget)
    labels = np.asarray(fn(seqs), dtype=np.int64)
    if M is None:
        M = int(labels.max()) + 1
    if np.any(labels < 0) or np.any(labels >= M):
        raise ValidationError("compressor returned an index outside {0..M-1}")
    index = SequenceIndex(seqs, P.alphabet_size)
    # pi(x) = x[inverse(pi)] position-wise
    inv = inverse(perms)
    N = perms.shape[0]
    counts = np.zeros((size, M), dtype=np.int64)
    step = max(1, chunk_pairs // size)
    rows = np.arange(size)[:, None]
    for s in range(0, N, step):
        block = seqs[:, inv[s : s + step]]  # (T, c, n)
        j = labels[index.lookup(block)]  # (T, c)
        flat = (rows * M + j).ravel()
        counts += np.bincount(flat, minlength=size * M).reshape(size, M)
    return TypeHits(P, seqs, labels, counts, M)


@dataclass
class BinPartition:
    """Preimages ``g_P^{-1}(j)`` restricted to the type class, as row numbers."""

    P: TypeComposition
    bins: list
    type_size: int

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(b) for b in self.bins], dtype=np.int64)

    def check(self) -> None:
        members = np.concatenate([np.asarray(b, dtype=np.int64) for b in self.bins])
        if members.size != self.type_size or np.unique(members).size != self.type_size:
            raise AssertionError("bins do not partition the type class")


def partition_type_by_bins(g, P: TypeComposition, n_bins=None,
                           enumeration_budget=DEFAULT_ENUMERATION_BUDGET) -> BinPartition:
    fn, M = resolve_compressor(g, n_bins)
    seqs = type_class_array(P, enumeration_budget)
    labels = np.asarray(fn(seqs), dtype=np.int64)
    if M is None:
        M = int(labels.max()) + 1
    bins = [np.flatnonzero(labels == j) for j in range(M)]
    bp = BinPartition(P, bins, seqs.shape[0])
    bp.check()
    return bp


@dataclass
class SmallSetReport:
    Delta: float
    normal_bins: list
    normal_size: int
    type_size: int
    eta: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.eta <= self.bound + 1e-15


def small_set_report(bp: BinPartition, Delta: float) -> SmallSetReport:
    """Normal bins (relative size at least ``1/Delta``) and the small-set mass ``eta``."""
    if Delta <= 0:
        raise ValidationError("Delta must be > 0")
    thr = Fraction(Delta)
    normal = [j for j, s in enumerate(bp.sizes) if s > 0 and s * thr >= bp.type_size]
    normal_size = int(bp.sizes[normal].sum()) if normal else 0
    eta = 1.0 - normal_size / bp.type_size
    report = SmallSetReport(float(Delta), normal, normal_size, bp.type_size, eta, bp.n_bins / float(Delta))
    if not report.holds:
        raise AssertionError(f"eta={eta} exceeds M/Delta={report.bound}")
    return report


def exact_leakage_given_type(cipher, g, P: TypeComposition, n_bins=None,
                             pair_budget=DEFAULT_PAIR_BUDGET) -> float:
    """``I(X^n; g(pi_K(X^n)) | X^n in T_P)`` in nats for one fixed cipher."""
    hits = type_hits(cipher, g, P, n_bins, pair_budget)
    return mutual_information_from_counts(hits.counts)


@dataclass
class LeakageBoundTerms:
    T1: float
    T2: float
    T3: float
    M: int
    N: int
    Delta: float
    delta: float
    type_size: int
    kind: str
    warnings: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.T1 + self.T2 + self.T3


def leakage_bound(M: int, N: int, Delta: float, delta: float, type_size: int, kind: str = "I") -> LeakageBoundTerms:
    """Upper bound ``T1 + T2 + T3`` on the given-type leakage of a random cipher ensemble.

    ``T1 = (M/Delta) ln|T|``, ``T3 = delta``, and ``T2`` is
    ``2 ln|T| exp(-delta^2 N / (2 (2 + delta) Delta))`` for Type I or
    ``ln|T| / (delta^2 N / Delta)`` for Type II.
    """
    if min(M, N, Delta, delta, type_size) <= 0:
        raise ValidationError("M, N, Delta, delta and type_size must all be positive")
    kind = str(kind).upper()
    log_t = math.log(type_size)
    ratio = N / Delta
    if kind == "I":
        t2 = log_t * 2.0 * math.exp(-(delta**2) / (2.0 * (2.0 + delta)) * ratio)
    elif kind == "II":
        t2 = log_t / (delta**2 * ratio)
    else:
        raise ValidationError(f"unknown cipher kind {kind!r}")
    warns = []
    if delta >= 1:
        warns.append(f"delta={delta} is not small (>= 1)")
    if Delta < M:
        warns.append(f"Delta={Delta} < M={M}: T1 exceeds ln|T|")
    for w in warns:
        log.warning("leakage_bound: %s", w)
    return LeakageBoundTerms(M / Delta * log_t, t2, float(delta), int(M), int(N), float(Delta),
                             float(delta), int(type_size), kind, warns)


@dataclass
class AsymptoticSettings:
    Delta: float
    N: float
    delta: float
    epsilon: float
    n: int
    M: int
    consistent: bool
    in_regime: bool
    warnings: list = field(default_factory=list)


def asymptotic_settings(n: int, eps: float, M: int, desk_budget: float = DEFAULT_PAIR_BUDGET) -> AsymptoticSettings:
    """``Delta = M e^{n eps/2}``, ``N = Delta e^{n eps/2}``, ``delta = e^{-n eps/6}``."""
    if eps <= 0:
        raise ValidationError("epsilon must be > 0")
    half = math.exp(0.5 * n * eps)
    Delta = M * half
    N = Delta * half
    delta = math.exp(-n * eps / 6.0)
    consistent = abs(math.log(N / M) / n - eps) <= 1e-12
    warns = []
    if N > desk_budget:
        warns.append(f"N={N:.4g} exceeds the desk-scale budget {desk_budget:.4g}")
    in_regime = delta < 1 and Delta >= M and delta**2 * N / Delta > 1
    if not in_regime:
        warns.append("parameters outside the large-Delta / small-delta regime (tail bound vacuous)")
    return AsymptoticSettings(Delta, N, delta, eps, n, M, consistent, in_regime, warns)


@dataclass
class TypeLeakage:
    counts: tuple
    type_size: int
    probability: float
    leakage: float
    eta: float
    bound: LeakageBoundTerms

    @property
    def leakage_bits(self) -> float:
        return to_bits(self.leakage)


@dataclass
class LeakageReport:
    n: int
    M: int
    N: int
    kind: str
    seed: object
    per_type: list
    conditional_leakage: float
    type_entropy: float
    type_entropy_bound: float
    Delta: float
    delta: float

    @property
    def decomposition_upper(self) -> float:
        """``H(P_{X^n}) + I(X^n; J | P_{X^n})``."""
        return self.type_entropy + self.conditional_leakage

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "M": self.M,
            "N": self.N,
            "cipher_kind": self.kind,
            "seed": self.seed,
            "Delta": self.Delta,
            "delta": self.delta,
            "conditional_leakage_nats": self.conditional_leakage,
            "conditional_leakage_bits": to_bits(self.conditional_leakage),
            "type_entropy_nats": self.type_entropy,
            "type_entropy_bound_nats": self.type_entropy_bound,
            "decomposition_upper_nats": self.decomposition_upper,
            "per_type": [
                {
                    "counts": list(t.counts),
                    "type_size": t.type_size,
                    "probability": t.probability,
                    "leakage_nats": t.leakage,
                    "leakage_bits": t.leakage_bits,
                    "eta": t.eta,
                    "bound": {k: v for k, v in asdict(t.bound).items() if k != "warnings"}
                    | {"total": t.bound.total},
                }
                for t in self.per_type
            ],
        }

    CSV_COLUMNS = ("type", "type_size", "probability", "leakage_nats", "leakage_bits", "T1", "T2", "T3",
                   "bound_total", "eta", "Delta", "delta", "N", "M", "seed")

    def csv_rows(self) -> list[tuple]:
        return [
            (" ".join(map(str, t.counts)), t.type_size, t.probability, t.leakage, t.leakage_bits,
             t.bound.T1, t.bound.T2, t.bound.T3, t.bound.total, t.eta, self.Delta, self.delta,
             self.N, self.M, self.seed)
            for t in self.per_type
        ]


def _default_Delta(M):
    return 4.0 * M


def leakage_given_type_marginal(cipher, g, source: SourceModel, n: int, n_bins=None,
                                Delta=None, delta=DEFAULT_DELTA, seed=None,
                                pair_budget=DEFAULT_PAIR_BUDGET) -> LeakageReport:
    """Type-weighted conditional leakage ``I(X^n; J | P_{X^n})`` with per-type detail.

    Types of probability zero contribute nothing and are skipped.
    """
    fn, M = resolve_compressor(g, n_bins)
    types, probs = type_distribution(source, n)
    N = _permutation_table(cipher).shape[0]
    kind = _cipher_kind(cipher)
    rows, total = [], 0.0
    for P, w in zip(types, probs):
        if w <= 0:
            continue
        hits = type_hits(cipher, fn, P, M, pair_budget)
        M = hits.n_bins
        leak = mutual_information_from_counts(hits.counts)
        Dl = Delta if Delta is not None else _default_Delta(M)
        bp = BinPartition(P, [np.flatnonzero(hits.labels == j) for j in range(M)], hits.sequences.shape[0])
        eta = small_set_report(bp, Dl).eta
        bound = leakage_bound(M, N, Dl, delta, bp.type_size, kind)
        rows.append(TypeLeakage(P.counts, bp.type_size, float(w), leak, eta, bound))
        total += w * leak
    return LeakageReport(n, int(M), int(N), kind, seed, rows, float(total),
                         entropy(probs / probs.sum()), type_info_bound(source.alphabet_size, n),
                         float(Delta if Delta is not None else _default_Delta(M)), float(delta))


@dataclass
class DecompositionCheck:
    lhs: float
    type_entropy: float
    conditional: float
    holds: bool

    @property
    def rhs(self) -> float:
        return self.type_entropy + self.conditional

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def total_leakage_decomposition_check(cipher, g, source: SourceModel, n: int, n_bins=None,
                                      pair_budget=DEFAULT_PAIR_BUDGET) -> DecompositionCheck:
    """Compare exact ``I(X^n; J)`` with ``H(P_{X^n}) + I(X^n; J | P_{X^n})``.

    ``X^n`` is i.i.d. from ``source`` over all of ``X^n``.  The comparison
    allows 1e-12 nats of floating-point slack for the tight case.
    """
    fn, M = resolve_compressor(g, n_bins)
    N = _permutation_table(cipher).shape[0]
    total = source.alphabet_size**n * N
    if total > pair_budget:
        raise BudgetExceeded("total leakage enumeration", total, pair_budget)
    types, probs = type_distribution(source, n)
    blocks, weights, conditional = [], [], 0.0
    for P, w in zip(types, probs):
        if w <= 0:
            continue
        hits = type_hits(cipher, fn, P, M, pair_budget)
        M = hits.n_bins
        blocks.append(hits.counts)
        weights.append(np.full(hits.counts.shape[0], w / hits.counts.shape[0]))
        conditional += float(w) * mutual_information_from_counts(hits.counts)
    width = max(b.shape[1] for b in blocks)
    stacked = np.vstack([np.pad(b, ((0, 0), (0, width - b.shape[1]))) for b in blocks])
    lhs = mutual_information_from_counts(stacked, np.concatenate(weights))
    h_type = entropy(probs / probs.sum())
    return DecompositionCheck(float(lhs), float(h_type), float(conditional),
                              bool(lhs <= h_type + conditional + 1e-12))


def _spawn(seed, trials):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


@dataclass
class EnsembleCheck:
    values: np.ndarray
    bound: LeakageBoundTerms

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std_error(self) -> float:
        v = self.values
        return float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0

    @property
    def upper(self) -> float:
        return self.mean + 3.0 * self.std_error

    @property
    def holds(self) -> bool:
        return self.upper <= self.bound.total


def ensemble_bound_check(kind, n_keys, g, P: TypeComposition, Delta, delta, trials, seed,
                          n_bins=None, pair_budget=DEFAULT_PAIR_BUDGET) -> EnsembleCheck:
    """Mean exact leakage over ``trials`` seeded random ciphers against ``T1 + T2 + T3``.

    The bound controls the ensemble average, so the verdict compares
    ``mean + 3 * standard error`` with the bound.
    """
    fn, M = resolve_compressor(g, n_bins)
    values = []
    for rng in _spawn(seed, trials):
        cipher = build_cipher(kind, P.n, n_keys, rng)
        hits = type_hits(cipher, fn, P, M, pair_budget)
        M = hits.n_bins
        values.append(mutual_information_from_counts(hits.counts))
    bound = leakage_bound(M, n_keys, Delta, delta, type_class_size(P), kind)
    return EnsembleCheck(np.array(values), bound)


@dataclass
class SearchResult:
    best_index: int
    best_cipher: object
    best_leakage: float
    leakages: np.ndarray
    rate: float
    key_rate: float
    bound: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.leakages))

    @property
    def std_error(self) -> float:
        v = self.leakages
        return float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0


def best_cipher_search(kind, n_keys, g, source: SourceModel, n: int, trials: int, seed,
                    n_bins=None, Delta=None, delta=DEFAULT_DELTA,
                    pair_budget=DEFAULT_PAIR_BUDGET) -> SearchResult:
    """Draw ``trials`` random ciphers and keep the one with the least conditional leakage.

    The result witnesses, at this block length, a deterministic cipher whose
    type-conditional leakage is at most the ensemble mean.  ``bound`` is the
    type-weighted ``T1 + T2 + T3`` of the ensemble.

    Raises
    ------
    ValidationError
        If the key rate ``ln(N)/n`` does not exceed the compression rate ``ln(M)/n``.
    """
    fn, M = resolve_compressor(g, n_bins)
    if M is None:
        raise ValidationError("n_bins is required for a plain callable compressor")
    rate, key_rate = math.log(M) / n, math.log(n_keys) / n
    if not key_rate > rate:
        raise ValidationError(f"key rate {key_rate:.6g} must exceed compression rate {rate:.6g} nats/symbol")
    if str(kind).upper() == "II" and n_keys < 2:
        raise ValidationError("type II cipher needs n_keys >= 2")
    best, best_val, vals, bound = None, math.inf, [], 0.0
    for i, rng in enumerate(_spawn(seed, trials)):
        cipher = build_cipher(kind, n, n_keys, rng)
        rep = leakage_given_type_marginal(cipher, fn, source, n, M, Delta, delta, pair_budget=pair_budget)
        vals.append(rep.conditional_leakage)
        if rep.conditional_leakage < best_val:
            best, best_val = (i, cipher), rep.conditional_leakage
        if i == 0:
            bound = sum(t.probability * t.bound.total for t in rep.per_type)
    return SearchResult(best[0], best[1], best_val, np.array(vals), rate, key_rate, bound)


def storage_count(kind: str, n_keys: int) -> int:
    """Permutations a cipher of this kind must store."""
    return int(n_keys) if str(kind).upper() == "I" else n_base_permutations(n_keys)
