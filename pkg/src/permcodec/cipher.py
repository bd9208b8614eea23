"""Permutation ciphers (Type I and Type II) and the modulo-sum baseline.

A permutation is stored as an integer vector ``mapping`` where ``mapping[i]``
is the destination position of input position ``i``; applying it to ``x``
gives ``y`` with ``y[mapping[i]] = x[i]``.

Type II keys use the least-significant bit as the first key bit: bit ``i``
(0-based) of the key integer selects base permutation ``sigma_{i+1}``, and
lower bits are applied first, so key ``0b11`` resolves to ``sigma_2 o sigma_1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import ValidationError, check_sequence

CIPHER_FORMAT = "permcodec-cipher"
CIPHER_VERSION = 1


def check_permutation(mapping) -> np.ndarray:
    p = np.asarray(mapping)
    if p.ndim != 1 or p.size < 1:
        raise ValidationError("permutation must be a non-empty 1-d vector")
    p = p.astype(np.int64)
    if not np.array_equal(np.sort(p), np.arange(p.size)):
        raise ValidationError("mapping is not a bijection on {0..n-1}")
    return p


def identity(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def inverse(mapping) -> np.ndarray:
    p = np.asarray(mapping)
    inv = np.empty_like(p)
    inv[..., :] = np.argsort(p, axis=-1)
    return inv


def compose(outer, inner) -> np.ndarray:
    """Mapping of ``outer o inner`` (``inner`` applied first)."""
    return np.take_along_axis(np.asarray(outer), np.asarray(inner), axis=-1)


def apply_permutation(mapping, x) -> np.ndarray:
    """Move ``x[..., i]`` to position ``mapping[i]``.

    >>> apply_permutation([1, 2, 3, 0], [0, 1, 2, 3]).tolist()
    [3, 0, 1, 2]
    """
    x = np.asarray(x)
    return x[..., inverse(mapping)]


def sample_uniform_permutation(n: int, rng) -> np.ndarray:
    if n < 1:
        raise ValidationError("n must be >= 1")
    return np.random.default_rng(rng).permutation(n).astype(np.int64)


def sample_uniform_permutations(count: int, n: int, rng) -> np.ndarray:
    """``count`` independent uniform permutations, shape ``(count, n)``."""
    rng = np.random.default_rng(rng)
    base = np.broadcast_to(np.arange(n, dtype=np.int64), (count, n))
    return rng.permuted(base, axis=1)


@dataclass(frozen=True)
class SecretKey:
    value: int
    key_space_size: int

    def __post_init__(self):
        if self.key_space_size < 1 or not 0 <= self.value < self.key_space_size:
            raise ValidationError(f"key {self.value} outside {{0..{self.key_space_size - 1}}}")

    @classmethod
    def uniform(cls, key_space_size: int, rng) -> "SecretKey":
        return cls(int(np.random.default_rng(rng).integers(key_space_size)), key_space_size)

    def rate(self, n: int) -> float:
        """Key rate ``(1/n) ln N`` in nats per symbol."""
        return math.log(self.key_space_size) / n


def n_base_permutations(n_keys: int) -> int:
    """``ceil(log2 N)``, computed exactly on integers."""
    return max(1, (int(n_keys) - 1).bit_length())


class _PermutationCipher(TransformerMixin, BaseEstimator):
    kind = None

    def __init__(self, n_keys=2, block_length=None, random_state=None):
        self.n_keys = n_keys
        self.block_length = block_length
        self.random_state = random_state

    def _block_length(self, X):
        if self.block_length is not None:
            n = int(self.block_length)
        elif X is not None:
            n = check_sequence(X, name="X").shape[-1]
        else:
            raise ValidationError("fit needs X or block_length")
        if n < 1:
            raise ValidationError("block length must be >= 1")
        return n

    def _keys(self, keys, n_rows):
        if isinstance(keys, SecretKey):
            if keys.key_space_size != self.n_keys:
                raise ValidationError("key space size does not match the cipher")
            keys = keys.value
        k = np.asarray(keys, dtype=np.int64)
        if k.ndim == 0:
            k = np.full(n_rows, int(k))
        if k.shape != (n_rows,):
            raise ValidationError("need one key per sequence")
        if np.any(k < 0) or np.any(k >= self.n_keys):
            raise ValidationError(f"key outside {{0..{self.n_keys - 1}}}")
        return k

    def _check_X(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_sequence(X, name="X")
        if X.shape[-1] != self.n_features_in_:
            raise ValidationError(
                f"sequence length {X.shape[-1]} does not match block length {self.n_features_in_}"
            )
        return X

    def _apply(self, X, keys, invert):
        X = self._check_X(X)
        single = X.ndim == 1
        X2 = X[None, :] if single else X
        k = self._keys(keys, X2.shape[0])
        maps = self.resolve_many(k)
        if invert:
            maps = inverse(maps)
        # y[mapping[i]] = x[i]  <=>  y = x[inverse(mapping)]
        out = np.take_along_axis(X2, inverse(maps), axis=1)
        return out[0] if single else out

    def transform(self, X, keys):
        """Encrypt each row of ``X`` under the matching key."""
        return self._apply(X, keys, invert=False)

    def inverse_transform(self, X, keys):
        """Decrypt each row of ``X`` under the matching key."""
        return self._apply(X, keys, invert=True)

    def encrypt(self, x, key):
        return self.transform(x, key)

    def decrypt(self, y, key):
        return self.inverse_transform(y, key)

    def resolve(self, key) -> np.ndarray:
        k = self._keys(key, 1)
        return self.resolve_many(k)[0]

    def resolved_permutations(self) -> np.ndarray:
        """Mappings for every key ``0..N-1``, shape ``(N, n)``."""
        check_is_fitted(self, "n_features_in_")
        return self.resolve_many(np.arange(self.n_keys))

    def key_rate(self) -> float:
        check_is_fitted(self, "n_features_in_")
        return math.log(self.n_keys) / self.n_features_in_

    def to_dict(self) -> dict:
        check_is_fitted(self, "n_features_in_")
        return {
            "format": CIPHER_FORMAT,
            "version": CIPHER_VERSION,
            "kind": self.kind,
            "block_length": int(self.n_features_in_),
            "n_keys": int(self.n_keys),
            "permutations": self.stored_permutations().tolist(),
        }


class TypeICipher(_PermutationCipher):
    """Stores ``N`` independent uniform permutations; key ``k`` selects the k-th.

    Parameters
    ----------
    n_keys : int
        Key space size ``N``.
    block_length : int, optional
        Sequence length ``n``.  Inferred from ``X`` in :meth:`fit` when omitted.
    random_state : int, Generator or None
        Seed for drawing the permutations.

    Attributes
    ----------
    permutations_ : ndarray of shape (n_keys, n)
    n_features_in_ : int
    """

    kind = "I"

    def fit(self, X=None, y=None):
        if int(self.n_keys) < 1:
            raise ValidationError("type I cipher needs n_keys >= 1")
        n = self._block_length(X)
        rng = np.random.default_rng(self.random_state)
        self.permutations_ = sample_uniform_permutations(int(self.n_keys), n, rng)
        self.n_features_in_ = n
        return self

    def stored_permutations(self) -> np.ndarray:
        return self.permutations_

    def resolve_many(self, keys) -> np.ndarray:
        return self.permutations_[np.asarray(keys, dtype=np.int64)]


class TypeIICipher(_PermutationCipher):
    """Stores ``L = ceil(log2 N)`` base permutations composed by key bits.

    Parameters
    ----------
    n_keys : int
        Key space size ``N >= 2``.  Need not be a power of two; keys
        ``>= N`` are never issued.
    block_length : int, optional
    random_state : int, Generator or None

    Attributes
    ----------
    base_permutations_ : ndarray of shape (L, n)
    n_features_in_ : int
    """

    kind = "II"

    def fit(self, X=None, y=None):
        if int(self.n_keys) < 2:
            raise ValidationError("type II cipher needs n_keys >= 2")
        n = self._block_length(X)
        rng = np.random.default_rng(self.random_state)
        self.base_permutations_ = sample_uniform_permutations(n_base_permutations(self.n_keys), n, rng)
        self.n_features_in_ = n
        return self

    @property
    def n_bases(self) -> int:
        return n_base_permutations(self.n_keys)

    def stored_permutations(self) -> np.ndarray:
        return self.base_permutations_

    def resolve_many(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        n = self.n_features_in_
        out = np.broadcast_to(np.arange(n, dtype=np.int64), (keys.size, n)).copy()
        for i, sigma in enumerate(self.base_permutations_):
            sel = ((keys >> i) & 1).astype(bool)
            if sel.any():
                # apply sigma_{i+1} after the lower-bit factors
                out[sel] = sigma[out[sel]]
        return out

    def resolved_permutations(self) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        return resolve_all_type2(self.base_permutations_, int(self.n_keys))


def resolve_all_type2(bases: np.ndarray, n_keys: int) -> np.ndarray:
    """All ``N`` resolved permutations by doubling: keys with top bit ``i`` are ``sigma_i o pi_rest``."""
    bases = np.asarray(bases, dtype=np.int64)
    n = bases.shape[1]
    table = np.arange(n, dtype=np.int64)[None, :]
    for sigma in bases:
        if table.shape[0] >= n_keys:
            break
        table = np.vstack([table, sigma[table]])
    return table[:n_keys]


def build_type1(n: int, n_keys: int, rng) -> TypeICipher:
    return TypeICipher(n_keys=n_keys, block_length=n, random_state=rng).fit()


def build_type2(n: int, n_keys: int, rng) -> TypeIICipher:
    return TypeIICipher(n_keys=n_keys, block_length=n, random_state=rng).fit()


def build_cipher(kind: str, n: int, n_keys: int, rng):
    kind = str(kind).upper()
    if kind == "I":
        return build_type1(n, n_keys, rng)
    if kind == "II":
        return build_type2(n, n_keys, rng)
    raise ValidationError(f"unknown cipher kind {kind!r}; use 'I' or 'II'")


class FixedPermutationCipher(TypeICipher):
    """Type I cipher with caller-supplied permutations (for hand-built instances)."""

    def __init__(self, permutations=None):
        self.permutations = permutations
        super().__init__(n_keys=None)

    def fit(self, X=None, y=None):
        perms = np.atleast_2d(np.asarray(self.permutations, dtype=np.int64))
        for p in perms:
            check_permutation(p)
        self.permutations_ = perms
        self.n_keys = perms.shape[0]
        self.n_features_in_ = perms.shape[1]
        return self


def cipher_from_dict(data: dict):
    if data.get("format") != CIPHER_FORMAT:
        raise ValidationError("not a permcodec cipher file")
    if data.get("version") != CIPHER_VERSION:
        raise ValidationError(f"unsupported cipher file version {data.get('version')!r}")
    perms = np.asarray(data["permutations"], dtype=np.int64)
    n, N = int(data["block_length"]), int(data["n_keys"])
    for p in perms:
        check_permutation(p)
    if perms.ndim != 2 or perms.shape[1] != n:
        raise ValidationError("permutation table does not match block_length")
    if data["kind"] == "I":
        if perms.shape[0] != N:
            raise ValidationError("type I file must store n_keys permutations")
        c = TypeICipher(n_keys=N, block_length=n)
        c.permutations_ = perms
    elif data["kind"] == "II":
        if perms.shape[0] != n_base_permutations(N):
            raise ValidationError("type II file must store ceil(log2 n_keys) permutations")
        c = TypeIICipher(n_keys=N, block_length=n)
        c.base_permutations_ = perms
    else:
        raise ValidationError(f"unknown cipher kind {data['kind']!r}")
    c.n_features_in_ = n
    return c


def save_cipher(cipher, path) -> None:
    Path(path).write_text(json.dumps(cipher.to_dict(), sort_keys=True) + "\n")


def load_cipher(path):
    return cipher_from_dict(json.loads(Path(path).read_text()))


class ModuloSumCipher:
    """Additive cipher ``c = (m + k) mod modulus``, element-wise or on an index."""

    def __init__(self, modulus: int):
        if int(modulus) < 2:
            raise ValidationError("modulus must be >= 2")
        self.modulus = int(modulus)

    def _check(self, v, name):
        a = np.asarray(v, dtype=np.int64)
        if np.any(a < 0) or np.any(a >= self.modulus):
            raise ValidationError(f"{name} outside {{0..{self.modulus - 1}}}")
        return a

    def encrypt(self, payload, key):
        p, k = self._check(payload, "payload"), self._check(key, "key")
        if k.ndim and p.shape != k.shape:
            raise ValidationError("key stream and payload shapes differ")
        out = (p + k) % self.modulus
        return int(out) if out.ndim == 0 else out

    def decrypt(self, ciphertext, key):
        c, k = self._check(ciphertext, "ciphertext"), self._check(key, "key")
        out = (c - k) % self.modulus
        return int(out) if out.ndim == 0 else out


def modulo_sum_encrypt(key, payload, modulus: int):
    return ModuloSumCipher(modulus).encrypt(payload, key)


def resolved_marginal_report(
    kind: str, n: int, n_keys: int, trials: int, seed: int
) -> list[dict]:
    """Empirical law of each key's resolved permutation over fresh ciphers.

    For every key, tallies the resolved permutation across ``trials``
    independently drawn ciphers and reports the total-variation distance
    to the uniform law on ``S_n`` and a chi-square p-value.  For Type II
    the all-zero key always resolves to the identity.
    """
    if n > 6:
        raise ValidationError("marginal report enumerates S_n; use n <= 6")
    n_perm = math.factorial(n)
    weights = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
    all_perms = np.array(sorted(_all_perms(n)), dtype=np.int64)
    codes = all_perms @ weights
    tallies = np.zeros((n_keys, n_perm), dtype=np.int64)
    seq = np.random.SeedSequence(seed)
    for child in seq.spawn(trials):
        table = build_cipher(kind, n, n_keys, np.random.default_rng(child)).resolved_permutations()
        idx = np.searchsorted(codes, table @ weights)
        tallies[np.arange(n_keys), idx] += 1
    rows = []
    for k in range(n_keys):
        freq = tallies[k] / trials
        tv = 0.5 * float(np.abs(freq - 1.0 / n_perm).sum())
        pval = float(stats.chisquare(tallies[k]).pvalue) if tallies[k].sum() else float("nan")
        rows.append({"key": k, "tv_distance": tv, "chi2_pvalue": pval, "distinct": int((tallies[k] > 0).sum())})
    return rows


def _all_perms(n):
    from itertools import permutations

    return [list(p) for p in permutations(range(n))]
