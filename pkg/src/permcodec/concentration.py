"""Monte Carlo checks of the tail bounds on the posterior of a probe sequence.

For an ensemble ``pi_1..pi_N``, a probe ``x`` in ``T_P`` and a bin ``B``
inside ``T_P``, the posterior ``Pr(X = x | pi_K(X) in B)`` equals
``#{i : pi_i(x) in B} / (N |B|)``.  A deviation is the event that it differs
from ``1/|T_P|`` by more than ``delta/|T_P|``.  Its probability over a
mutually independent ensemble obeys a Chernoff bound; over a pairwise
independent ensemble, a Chebyshev bound.

The upper- and lower-tail events are both counted (the two-sided event).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .cipher import inverse, n_base_permutations, resolve_all_type2, sample_uniform_permutations
from .core import ValidationError, check_sequence
from .typeclass import SequenceIndex, TypeComposition, type_class_array, type_class_size, type_of

KINDS = {"mutual": "mutual", "I": "mutual", "pairwise": "pairwise", "II": "pairwise"}
MIN_EVENTS_FOR_VIOLATION = 10


def chernoff_bound(delta: float, N: float, Delta: float) -> float:
    """``2 exp(-delta^2 / (2 (2 + delta)) * N / Delta)``, clamped to 1."""
    _check_positive(delta, N, Delta)
    return min(1.0, 2.0 * math.exp(-(delta**2) / (2.0 * (2.0 + delta)) * N / Delta))


def chebyshev_bound(delta: float, N: float, Delta: float) -> float:
    """``(delta^2 N / Delta)^{-1}``, clamped to 1."""
    _check_positive(delta, N, Delta)
    return min(1.0, Delta / (delta**2 * N))


def _check_positive(*vals):
    if any(v <= 0 for v in vals):
        raise ValidationError("delta, N and Delta must be > 0")


def bound_crossover(delta: float) -> float:
    """Smallest ``N/Delta`` beyond which the Chernoff bound never exceeds Chebyshev's.

    Compares the unclamped formulas; ``log`` of their ratio is concave in
    ``N/Delta`` so the crossover is the larger root (or 0 when there is none).
    """
    a = delta**2 / (2.0 * (2.0 + delta))

    def gap(r):
        return math.log(2.0) - a * r + math.log(delta**2 * r)

    peak = 1.0 / a
    if gap(peak) <= 0:
        return 0.0
    hi = peak * 2
    while gap(hi) > 0:
        hi *= 2
    return float(brentq(gap, peak, hi))


def _bin_index(bin_seqs, P):
    seqs = np.asarray(bin_seqs, dtype=np.int64)
    if seqs.ndim != 2 or seqs.shape[0] == 0:
        raise ValidationError("bin must be a non-empty set of sequences")
    if seqs.shape[1] != P.n:
        raise ValidationError("bin sequences must have length n")
    counts = np.stack([np.bincount(r, minlength=P.alphabet_size) for r in seqs])
    if np.any(counts != np.array(P.counts)):
        raise ValidationError("bin is not contained in the type class")
    order = np.lexsort(seqs.T[::-1])
    seqs = np.unique(seqs[order], axis=0)
    return SequenceIndex(seqs, P.alphabet_size)


def _hits(perms, x, index) -> np.ndarray:
    images = x[inverse(perms)]
    return index.lookup(images) >= 0


def conditional_prob_statistic(ensemble, x, bin_seqs, P: TypeComposition, exact: bool = False):
    """Posterior of ``x`` given ``pi_K(X) in bin`` for a fixed ensemble.

    Returns a float, or a :class:`fractions.Fraction` when ``exact`` is true.
    """
    x = check_sequence(x, P.alphabet_size, "x")
    if type_of(x, P.alphabet_size) != P:
        raise ValidationError("probe x is not in the type class")
    index = _bin_index(bin_seqs, P)
    perms = np.atleast_2d(np.asarray(ensemble, dtype=np.int64))
    hits = int(_hits(perms, x, index).sum())
    value = Fraction(hits, perms.shape[0] * len(index))
    return value if exact else float(value)


@dataclass(frozen=True)
class DeviationExperiment:
    """One Monte Carlo deviation experiment.

    ``bin_rows`` and ``probe_row`` index the lexicographic enumeration of
    the type class.
    """

    P: TypeComposition
    bin_rows: tuple
    probe_row: int
    n_keys: int
    delta: float
    Delta: float
    kind: str
    trials: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {sorted(KINDS)}")
        object.__setattr__(self, "kind", KINDS[self.kind])
        size = type_class_size(self.P)
        if not self.bin_rows:
            raise ValidationError("bin must be non-empty")
        if min(self.bin_rows) < 0 or max(self.bin_rows) >= size or not 0 <= self.probe_row < size:
            raise ValidationError("bin or probe row outside the type class")
        if self.delta <= 0 or self.trials < 1 or self.n_keys < 1 or self.Delta <= 0:
            raise ValidationError("need delta > 0, Delta > 0, n_keys >= 1, trials >= 1")
        if self.kind == "pairwise" and self.n_keys < 2:
            raise ValidationError("pairwise ensembles need n_keys >= 2")
        if len(self.bin_rows) * Fraction(self.Delta) < size:
            raise ValidationError("bin fraction below 1/Delta: outside the bound's regime")

    @classmethod
    def from_fraction(cls, P, q, n_keys, delta, Delta, kind, trials, probe_row=0):
        """Bin made of the first ``ceil(q |T_P|)`` sequences in lexicographic order."""
        size = type_class_size(P)
        m = max(1, math.ceil(Fraction(q) * size))
        return cls(P, tuple(range(m)), probe_row, n_keys, delta, Delta, kind, trials)

    @property
    def type_size(self) -> int:
        return type_class_size(self.P)

    @property
    def q(self) -> float:
        return len(self.bin_rows) / self.type_size

    def bound(self) -> float:
        f = chernoff_bound if self.kind == "mutual" else chebyshev_bound
        return f(self.delta, self.n_keys, self.Delta)


@dataclass(frozen=True)
class TailEstimate:
    events: int
    trials: int
    empirical: float
    half_width: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.empirical - self.half_width <= self.bound

    @property
    def verdict(self) -> str:
        if self.holds or self.events < MIN_EVENTS_FOR_VIOLATION:
            return "consistent"
        return "violated"


def _draw_ensemble(kind, N, n, rng):
    if kind == "mutual":
        return sample_uniform_permutations(N, n, rng)
    bases = sample_uniform_permutations(n_base_permutations(N), n, rng)
    return resolve_all_type2(bases, N)


def deviation_tail_estimate(exp: DeviationExperiment, seed) -> TailEstimate:
    """Fraction of redrawn ensembles whose probe posterior deviates by more than ``delta``.

    Each trial draws a fresh ensemble from its own seed substream: ``N``
    uniform permutations for the mutual kind, or ``ceil(log2 N)`` base
    permutations resolved for every key for the pairwise kind.
    """
    seqs = type_class_array(exp.P)
    index = SequenceIndex(seqs[sorted(set(exp.bin_rows))], exp.P.alphabet_size)
    x = seqs[exp.probe_row].astype(np.int64)
    T, B, N = exp.type_size, len(exp.bin_rows), exp.n_keys
    # |hits/(N B) - 1/T| > delta/T  <=>  |hits*T - N*B| > delta*N*B
    tol = Fraction(exp.delta) * N * B
    events = 0
    for child in np.random.SeedSequence(seed).spawn(exp.trials):
        perms = _draw_ensemble(exp.kind, N, exp.P.n, np.random.default_rng(child))
        hits = int(_hits(perms, x, index).sum())
        if abs(hits * T - N * B) > tol:
            events += 1
    p = events / exp.trials
    hw = 1.96 * math.sqrt(p * (1 - p) / exp.trials)
    return TailEstimate(events, exp.trials, p, hw, exp.bound())


CSV_COLUMNS = ("kind", "q", "N", "Delta", "delta", "trials", "empirical", "ci_half_width", "bound", "verdict")


def csv_row(exp: DeviationExperiment, est: TailEstimate) -> tuple:
    return (exp.kind, exp.q, exp.n_keys, exp.Delta, exp.delta, exp.trials, est.empirical,
            est.half_width, est.bound, est.verdict)
