"""Deterministic, replayable randomness for one-pass sketching.

Everything here is a pure function of (seed, index): pairwise-independent
hash families over a prime field, and indexed Cauchy / truncated-Cauchy
generators. No per-index state is ever stored, so any value can be
re-evaluated at any time, which is what lets a sketch bank replay the
same randomness across stream chunks, merges and serialization.

The generator core is a counter-based 64-bit mixer (splitmix64 finalizer)
keyed by an arbitrary tuple of integers. It is not cryptographic; it is
chosen for exact cross-platform reproducibility with fixed-width integer
arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Prime modulus for the (a*i + b) mod p family. Must exceed 2^31 so that
# threshold probabilities are quantized no coarser than 2^-31, and must be
# small enough that a*i fits in uint64 (p^2 < 2^64).
FIELD_PRIME = 2**31 + 11

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# u = (z >> 11) * 2^-53 lies in [0, 1 - 2^-53]; the guard floor keeps
# tan(pi*(u - 1/2)) finite (|value| < 2^53).
_U53 = float(2.0**-53)


def mix64(x):
    """splitmix64 finalizer; accepts uint64 scalars or arrays, wraps mod 2^64."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def derive_key(seed, *parts):
    """Fold integers into a single 64-bit key, order-sensitively.

    `seed` and any part may be uint64 arrays for batched derivation;
    chaining holds: derive_key(s, a, b) == derive_key(derive_key(s, a), b).
    """
    if isinstance(seed, np.ndarray):
        h = seed.astype(np.uint64)
    else:
        h = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        for p in parts:
            if isinstance(p, np.ndarray):
                h = mix64(h + _GOLDEN + p.astype(np.uint64))
            else:
                h = mix64(h + _GOLDEN + np.uint64(int(p) & 0xFFFFFFFFFFFFFFFF))
    return h


def counter_uniform(key, index):
    """Deterministic uniform in [2^-53, 1 - 2^-53] for each index.

    `key` and `index` may be scalars or broadcastable integer arrays;
    vectorized evaluation returns a float64 array of the broadcast shape.
    """
    idx = np.asarray(index, dtype=np.uint64)
    k = np.asarray(key, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = mix64(k + (idx + np.uint64(1)) * _GOLDEN)
    u = (z >> np.uint64(11)).astype(np.float64) * _U53
    return np.maximum(u, _U53)


@dataclass(frozen=True)
class ZeroOneHash:
    """Pairwise-independent hash [1, n] -> {0, 1} with P(h(i)=1) = q.

    Realized by thresholding the field hash (a*i + b) mod p: the output is 1
    iff the field value is below round(q*p), so the achieved probability is
    exact to within the documented quantization 1/p.
    """

    seed: int
    n: int
    q: float
    a: int = field(init=False)
    b: int = field(init=False)
    threshold: int = field(init=False)

    def __post_init__(self):
        if not (0.0 <= self.q <= 1.0):
            raise ValueError(f"probability q={self.q} outside [0, 1]")
        key = derive_key(self.seed, 0x5A01)
        object.__setattr__(self, "a", int(mix64(key + np.uint64(1))) % FIELD_PRIME)
        object.__setattr__(self, "b", int(mix64(key + np.uint64(2))) % FIELD_PRIME)
        object.__setattr__(self, "threshold", int(round(self.q * FIELD_PRIME)))

    def __call__(self, i):
        self._check(i)
        return int((self.a * int(i) + self.b) % FIELD_PRIME < self.threshold)

    def table(self, n=None):
        """Vectorized evaluation over [1, n] as a uint8 array (index 0 <-> i=1)."""
        n = self.n if n is None else n
        i = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            v = (np.uint64(self.a) * i + np.uint64(self.b)) % np.uint64(FIELD_PRIME)
        return (v < np.uint64(self.threshold)).astype(np.uint8)

    def _check(self, i):
        if not 1 <= int(i) <= self.n:
            raise IndexError(f"index {i} outside [1, {self.n}]")


@dataclass(frozen=True)
class BucketHash:
    """Pairwise-independent hash [1, n] -> [1, buckets].

    Buckets are taken as 1 + (field value mod buckets); each bucket
    probability is within the quantization error buckets/p of 1/buckets.
    """

    seed: int
    n: int
    buckets: int
    a: int = field(init=False)
    b: int = field(init=False)

    def __post_init__(self):
        if self.buckets < 1:
            raise ValueError("buckets must be >= 1")
        key = derive_key(self.seed, 0x5A02)
        object.__setattr__(self, "a", int(mix64(key + np.uint64(1))) % FIELD_PRIME)
        object.__setattr__(self, "b", int(mix64(key + np.uint64(2))) % FIELD_PRIME)

    def __call__(self, i):
        if not 1 <= int(i) <= self.n:
            raise IndexError(f"index {i} outside [1, {self.n}]")
        return 1 + ((self.a * int(i) + self.b) % FIELD_PRIME) % self.buckets

    def table(self, n=None):
        n = self.n if n is None else n
        i = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            v = (np.uint64(self.a) * i + np.uint64(self.b)) % np.uint64(FIELD_PRIME)
        return (np.uint64(1) + v % np.uint64(self.buckets)).astype(np.int64)


def eval_zero_one(h: ZeroOneHash, i: int) -> int:
    return h(i)


def eval_bucket(h: BucketHash, i: int) -> int:
    return h(i)


@dataclass(frozen=True)
class CauchySource:
    """Indexed standard-Cauchy generator: value(i) = tan(pi*(u_i - 1/2)).

    u_i is the counter uniform of (seed, i), floored into
    [2^-53, 1 - 2^-53] so values stay finite. With `truncation` set to a
    positive omega, values are clamped to [-omega, omega] exactly.
    """

    seed: int
    truncation: float | None = None

    def __post_init__(self):
        if self.truncation is not None and self.truncation <= 0:
            raise ValueError("truncation must be positive when set")

    def __call__(self, i):
        return float(self.table_at(np.asarray([int(i)]))[0])

    def table_at(self, indices):
        """Vectorized values at the given integer indices."""
        u = counter_uniform(derive_key(self.seed, 0x5A03), np.asarray(indices))
        v = np.tan(np.pi * (u - 0.5))
        if self.truncation is not None:
            v = np.clip(v, -self.truncation, self.truncation)
        return v

    def table(self, n):
        """Values at indices 1..n (index 0 of the array <-> i=1)."""
        return self.table_at(np.arange(1, n + 1))


def cauchy_at(src: CauchySource, i: int) -> float:
    return src(i)


def batched_cauchy_tables(
    row_seeds: np.ndarray, families: int, n: int, omega: float
) -> np.ndarray:
    """Cauchy tables [rows, families, n] for many repetitions at once.

    Row r with family j reproduces CauchySource(seed=derive_key(row_seeds[r], j))
    exactly; family 0 is untruncated, the rest clamp at omega.
    """
    rows = np.asarray(row_seeds, dtype=np.uint64)
    idx = np.arange(1, n + 1, dtype=np.uint64)
    out = np.empty((rows.shape[0], families, n), dtype=np.float64)
    for j in range(families):
        keys = derive_key(derive_key(rows, j), 0x5A03)
        u = counter_uniform(keys[:, None], idx[None, :])
        vals = np.tan(np.pi * (u - 0.5))
        if j > 0:
            np.clip(vals, -omega, omega, out=vals)
        out[:, j, :] = vals
    return out


def default_truncation(k: int, n: int) -> float:
    """Default clamp magnitude for the truncated Cauchy families: 100*k*n."""
    return 100.0 * k * n


def cauchy_from_uniform(u: float) -> float:
    """Reference inverse-CDF map used by tests: tan(pi*(u - 1/2))."""
    return math.tan(math.pi * (u - 0.5))
