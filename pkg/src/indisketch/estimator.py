"""The approximation stack over implicit tensors.

Composition, bottom to top:

1. *Certifying tournament* (``tensor_tournament``): given a coarse
   beta-factor estimator and a sharp (1 +- eps) estimator for the
   collapsed tensor, repeatedly split the masked coordinates in half with
   a pairwise hash and compare the two halves' coarse estimates. A
   lopsided ratio certifies a dominant hyperplane, in which case the sharp
   estimate of the heavy half approximates that hyperplane's norm. The
   result is a threshold-max: either 0 or an approximation of some masked
   coordinate, guaranteed to find any coordinate holding all but an alpha
   fraction of the masked mass.

2. *Cover* (``cover_algorithm``): hash coordinates into many buckets and
   run one tournament per bucket; the positive outputs approximate
   distinct coordinates and include every significant one.

3. *Layered summation* (``layered_l1_estimate``): run covers against
   geometrically subsampled coordinate sets, bucket the returned values
   into multiplicative layers, pick for each layer the deepest subsampling
   level whose count falls in a calibrated window, and sum the rescaled
   counts. This turns covers into an L1 estimate of the whole vector.

4. *Dimension reduction* (``dimension_reduce``): steps 1-3 applied to the
   absolute-hyperplane vector of a tensor turn per-hyperplane estimators
   into a full-norm estimator, with median amplification of the 2/3
   success probability.

5. *End-to-end* (``StreamDistanceEstimator`` / ``independence_distance``):
   the reduction applied recursively to the independence tensor, with
   every sub-estimator backed by one-pass product-sketch banks. All
   randomness is drawn before the pass; each stream record fans out to
   every registered bank exactly once.

Exact sub-oracles built from the dense tensor module can be injected
anywhere a sketch-backed estimator is expected, which is how most
property tests isolate the combinatorial logic from sketch noise.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, fields
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConfigurationError,
    EmptyStreamError,
    MalformedInputError,
    SubAlgorithmError,
)
from .hashing import (
    BucketHash,
    ZeroOneHash,
    batched_cauchy_tables,
    counter_uniform,
    default_truncation,
    derive_key,
)
from .sketches import repetition_seeds
from .stream import EstimateReport, TupleKey, TupleStream

Mask = np.ndarray  # uint8 0/1 vector over [1, n], index 0 <-> coordinate 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubAlgorithms:
    """Injected per-hyperplane estimators for one tensor.

    ``approx_a(mask, delta)`` returns a beta-factor estimate of
    l1_norm(prefix_zero(M, [mask])); ``approx_b(mask, eps, delta)`` returns
    a (1 +- eps) estimate of l1_norm(suffix_sum(prefix_zero(M, [mask]), 1)).
    """

    approx_a: Callable[[Mask, float], float]
    approx_b: Callable[[Mask, float, float], float]
    beta: float

    def __post_init__(self):
        if self.beta < 1.0:
            raise ConfigurationError("beta must be >= 1")


@dataclass(frozen=True)
class TournamentConfig:
    """All constants of one certifying tournament."""

    epsilon: float
    delta: float
    beta: float
    detect_prob: float
    rounds: int
    subcall_delta: float
    base_ratio: float       # the split-comparison gap for this epsilon
    ratio_threshold: float  # (1 + epsilon) * base_ratio
    alpha: float            # significance threshold epsilon / (64 beta^2)

    @classmethod
    def from_targets(
        cls,
        epsilon: float,
        delta: float,
        beta: float,
        rounds: Optional[int] = None,
        rounds_scale: float = 1.0,
    ) -> "TournamentConfig":
        if not 0.0 < epsilon < 1.0:
            raise ConfigurationError(f"epsilon={epsilon} outside (0, 1)")
        if not 0.0 < delta < 1.0:
            raise ConfigurationError(f"delta={delta} outside (0, 1)")
        if beta < 1.0:
            raise ConfigurationError("beta must be >= 1")
        p = 1.0 - math.sqrt(1.0 - epsilon / 2.0)
        if rounds is None:
            rounds = max(1, math.ceil(rounds_scale * math.log(1.0 / delta) / p))
        subcall_delta = p * epsilon / (4.0 * math.log(1.0 / delta))
        root = (1.0 - epsilon) ** 0.25
        lam = 1.0 + 2.0 * root / (1.0 - root)
        return cls(
            epsilon=epsilon,
            delta=delta,
            beta=beta,
            detect_prob=p,
            rounds=int(rounds),
            subcall_delta=subcall_delta,
            base_ratio=lam,
            ratio_threshold=(1.0 + epsilon) * lam,
            alpha=epsilon / (64.0 * beta**2),
        )


@dataclass(frozen=True)
class CoverConfig:
    """Bucket layout of one cover run."""

    epsilon: float
    delta: float
    alpha: float
    significance: float  # epsilon' = epsilon^2 * delta / 3
    rho: int             # number of buckets

    @classmethod
    def from_targets(
        cls,
        epsilon: float,
        delta: float,
        alpha: float,
        rho: Optional[int] = None,
        rho_cap: int = 2**31 - 1,
    ) -> "CoverConfig":
        if not 0.0 < epsilon < 1.0 or not 0.0 < delta < 1.0:
            raise ConfigurationError("epsilon and delta must lie in (0, 1)")
        if alpha <= 0.0:
            raise ConfigurationError("alpha must be positive")
        eps_sig = epsilon**2 * delta / 3.0
        if rho is None:
            rho = min(rho_cap, math.ceil(1.0 / (eps_sig * alpha)))
        if rho < 1:
            raise ConfigurationError("bucket count must be >= 1")
        return cls(
            epsilon=epsilon,
            delta=delta,
            alpha=alpha,
            significance=eps_sig,
            rho=int(rho),
        )


@dataclass(frozen=True)
class LayerConfig:
    """Level/layer bookkeeping constants of the layered L1 estimator.

    ``scale_override`` multiplies the count threshold, the calibration
    base and the phase-step count down to desk scale; the achieved failure
    rates are then measured by the acceptance suite rather than assumed
    from the proofs.
    """

    epsilon: float
    levels: int            # number of geometric subsampling levels
    layers: int            # number of multiplicative value layers
    base_count: int        # failure/precision calibration constant
    count_threshold: int   # minimum windowed layer count
    phase_steps: int
    phase_ratio: float     # (1 + epsilon)^(1/phase_steps) - 1
    cover_precision: float
    cover_delta: float
    scale: float

    @classmethod
    def from_targets(
        cls,
        epsilon: float,
        n: int,
        value_bound: float,
        scale_override: Optional[float] = None,
        levels: Optional[int] = None,
        layers: Optional[int] = None,
        base_count: Optional[int] = None,
        count_threshold: Optional[int] = None,
        phase_steps: Optional[int] = None,
    ) -> "LayerConfig":
        if not 0.0 < epsilon < 1.0:
            raise ConfigurationError(f"epsilon={epsilon} outside (0, 1)")
        growth = math.log1p(epsilon)
        a = levels if levels is not None else max(1, math.ceil(math.log(max(n, 2)) / growth))
        b = (
            layers
            if layers is not None
            else max(1, math.ceil(math.log(max(value_bound, 2.0)) / growth))
        )
        scale = 1.0 if scale_override is None else float(scale_override)
        if not 0.0 < scale <= 1.0:
            raise ConfigurationError("scale_override must lie in (0, 1]")
        cp = base_count if base_count is not None else 10 * (a + b)
        cp = max(2, math.ceil(cp * scale))
        chi = (
            count_threshold
            if count_threshold is not None
            else math.ceil(16.0 / epsilon**3 * cp)
        )
        chi = max(4, math.ceil(chi * scale)) if count_threshold is None else int(chi)
        q_steps = (
            phase_steps
            if phase_steps is not None
            else math.ceil(20.0 * cp / epsilon**2)
        )
        q_steps = max(2, math.ceil(q_steps * scale)) if phase_steps is None else int(q_steps)
        zeta = (1.0 + epsilon) ** (1.0 / q_steps) - 1.0
        if zeta < epsilon / (2.0 * q_steps) - 1e-12:
            raise ConfigurationError("phase ratio fell below epsilon / (2 * steps)")
        precision = min(zeta / (2.0 * (1.0 + zeta)), epsilon / (4.0 * chi * cp**2))
        return cls(
            epsilon=epsilon,
            levels=int(a),
            layers=int(b),
            base_count=int(cp),
            count_threshold=int(chi),
            phase_steps=int(q_steps),
            phase_ratio=zeta,
            cover_precision=precision,
            cover_delta=1.0 / cp,
            scale=scale,
        )


@dataclass(frozen=True)
class EstimatorOverrides:
    """Desk-scale knobs for the sketch-backed pipeline.

    The defaults form the documented desk profile: repetition counts,
    round counts and the amplification factor are fixed small numbers
    whose achieved accuracy the acceptance suite measures directly. A
    ``None`` means "use the analysis formula", which can be astronomically
    expensive; ``formula_profile()`` selects all of those at once. Every
    effective value lands in the run diagnostics so a report can be
    audited against the configuration formulas.
    """

    amplification: Optional[int] = 9      # median runs; formula: ceil(24*ln(1/delta))
    rounds: Optional[int] = 3             # tournament rounds per instance
    eps_reps: int = 200                   # repetitions per sharp-estimator bank
    polylog_reps: int = 24                # repetitions per coarse-estimator bank
    beta: Optional[float] = 2.0           # configured coarse factor; None: log2(n)^k
    cover_epsilon: Optional[float] = 0.3  # floor for the per-cover precision
    rho: Optional[int] = None
    rho_cap: int = 2**31 - 1
    scale_override: Optional[float] = None
    omega: Optional[float] = None
    value_bound: Optional[float] = None
    max_chunk: int = 8192

    def replace(self, **kw) -> "EstimatorOverrides":
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update(kw)
        return EstimatorOverrides(**current)

    @classmethod
    def formula_profile(cls) -> "EstimatorOverrides":
        """Formula-driven counts everywhere.

        The resulting round/amplification products are astronomically large;
        this profile exists so the formula values can be audited against the
        desk profile, not for execution.
        """
        return cls(
            amplification=None,
            rounds=None,
            beta=None,
            cover_epsilon=None,
        )


# ---------------------------------------------------------------------------
# pure decision helpers (shared by the oracle-driven functions and the
# sketch-backed pipeline)
# ---------------------------------------------------------------------------


def _decide_round(u0: float, u1: float, ratio: float) -> float:
    """One tournament round: the side beating the other by `ratio`, else 0."""
    win1 = u1 >= ratio * u0
    win0 = u0 >= ratio * u1
    if win0 and win1:
        return 0.0  # simultaneous wins only happen at u0 = u1 = 0
    if win1:
        return u1
    if win0:
        return u0
    return 0.0


def _combine_rounds(round_values: Iterable[float]) -> float:
    """Raw minimum over all round outputs.

    A single null round certifies the absence of a dominant coordinate and
    zeroes the result; this is what drives the false-positive probability
    down exponentially in the round count. In the detection regime (one
    coordinate holding all but an alpha fraction of the mass) every round
    fires, so the minimum is a minimum over valid approximations.
    """
    vals = list(round_values)
    return min(vals) if vals else 0.0


def _assign_layer(value: float, shift: float, cfg: LayerConfig) -> Optional[int]:
    """Layer index l with shift*(1+eps)^l <= value < shift*(1+eps)^(l+1)."""
    if value <= 0.0:
        return None
    growth = 1.0 + cfg.epsilon
    x = value / shift
    l = math.floor(math.log(x) / math.log(growth) + 1e-12)
    while growth ** (l + 1) <= x:
        l += 1
    while growth**l > x:
        l -= 1
    if l < -1 or l > cfg.layers:
        return None
    return l


def _window_holds(count: int, cfg: LayerConfig) -> bool:
    chi = cfg.count_threshold
    return chi / (1.0 + cfg.epsilon) ** 2 < count <= (1.0 + 3.0 * cfg.epsilon) * chi


def _layer_sum(counts: Dict[Tuple[int, int], int], cfg: LayerConfig, shift: float) -> float:
    """Select the deepest in-window level per layer and sum the rescaled counts."""
    growth = 1.0 + cfg.epsilon
    by_layer: Dict[int, Dict[int, int]] = defaultdict(dict)
    for (l, j), c in counts.items():
        by_layer[l][j] = c
    total = 0.0
    for l, per_level in by_layer.items():
        z = 0
        for j, c in per_level.items():
            if j > 0 and _window_holds(c, cfg):
                z = max(z, j)
        c = per_level.get(z, 0)
        total += growth ** (z + l) * c
    return shift * total


# ---------------------------------------------------------------------------
# randomness derivation shared between construction and evaluation
# ---------------------------------------------------------------------------

_TAG_SPLIT = 0x7A01
_TAG_BUCKET = 0x7A02
_TAG_LEVEL = 0x7A03
_TAG_PHASE = 0x7A04
_TAG_AMP = 0x7A05
_TAG_TOURN = 0x7A06
_TAG_BANK_A = 0x7A07
_TAG_BANK_B = 0x7A08
_TAG_CHILD = 0x7A09


def _as_mask(H, n: int) -> Mask:
    m = np.asarray(H, dtype=np.uint8)
    if m.shape != (n,):
        raise ConfigurationError(f"mask must have shape ({n},), got {m.shape}")
    return m


def _split_masks(H: Mask, rounds: int, seed: int):
    """Per-round halving masks (round, kept-by-1, kept-by-0)."""
    n = H.shape[0]
    for r in range(rounds):
        z = ZeroOneHash(seed=int(derive_key(seed, _TAG_SPLIT, r)), n=n, q=0.5).table(n)
        yield r, H * (1 - z), H * z


def _bucket_masks(H: Mask, rho: int, seed: int):
    """Occupied (bucket, mask) pairs; unoccupied buckets are exactly null."""
    n = H.shape[0]
    g = BucketHash(seed=int(derive_key(seed, _TAG_BUCKET)), n=n, buckets=rho).table(n)
    occupied = np.unique(g[H > 0])
    for s in occupied.tolist():
        yield int(s), (H * (g == s)).astype(np.uint8)


def _level_masks(n: int, cfg: LayerConfig, seed: int):
    """Subsampling levels (j, mask, level seed); levels that can never
    enter the count window are skipped (their counts are bounded by the
    selected-coordinate population, which already falls below the window).
    """
    floor = cfg.count_threshold / (1.0 + cfg.epsilon) ** 2
    yield 0, np.ones(n, dtype=np.uint8), int(derive_key(seed, _TAG_LEVEL, 0))
    if n <= floor:
        return
    for j in range(1, cfg.levels + 1):
        keep = (1.0 + cfg.epsilon) ** (-j)
        mask = ZeroOneHash(
            seed=int(derive_key(seed, _TAG_LEVEL, j, 1)), n=n, q=keep
        ).table(n)
        if int(mask.sum()) <= floor:
            continue
        yield j, mask, int(derive_key(seed, _TAG_LEVEL, j))


def _draw_phase(seed: int, steps: int) -> int:
    u = float(counter_uniform(derive_key(seed, _TAG_PHASE), 0))
    return min(steps - 1, int(u * steps))


# ---------------------------------------------------------------------------
# oracle-driven operations (the public stack; also used with sketch-backed
# callables)
# ---------------------------------------------------------------------------


def split_compare_ratio(V, Z) -> Tuple[float, float]:
    """Exact halves (X, Y) of a nonnegative vector under a 0/1 split hash."""
    v = np.asarray(V, dtype=np.float64)
    if (v < 0).any():
        raise ConfigurationError("split comparison requires nonnegative entries")
    z = np.asarray(
        Z if not callable(Z) or isinstance(Z, np.ndarray) else Z.table(v.shape[0]),
        dtype=np.float64,
    )
    x = float((v * z).sum())
    return x, float(v.sum() - x)


def tensor_tournament(
    H, cfg: TournamentConfig, subs: SubAlgorithms, seed: int = 0
) -> float:
    """Certifying tournament over the masked absolute-hyperplane vector.

    Returns 0 or an approximation of some masked coordinate; any
    coordinate holding a (1 - alpha) fraction of the masked mass is found
    and approximated with probability 1 - delta. Output approximations
    carry a (1 +- 3*epsilon) guarantee in terms of the round epsilon.
    """
    n = np.asarray(H).shape[0]
    H = _as_mask(H, n)
    ratio = cfg.ratio_threshold * cfg.beta**2
    round_values = []
    for r, m0, m1 in _split_masks(H, cfg.rounds, seed):
        u = []
        for side, mask in enumerate((m0, m1)):
            if not mask.any():
                u.append(0.0)
                continue
            try:
                sharp = subs.approx_b(mask, cfg.epsilon, cfg.subcall_delta)
                coarse = subs.approx_a(mask, cfg.subcall_delta)
            except Exception as e:  # annotate with round context
                raise SubAlgorithmError(f"round {r}, side {side}: {e}") from e
            u.append(max(coarse / cfg.beta, sharp, 0.0))
        round_values.append(_decide_round(u[0], u[1], ratio))
    return _combine_rounds(round_values)


def cover_algorithm(
    H,
    cfg: CoverConfig,
    tcfg: TournamentConfig,
    subs: SubAlgorithms,
    seed: int = 0,
) -> Dict[int, float]:
    """One tournament per occupied hash bucket; strictly positive outputs.

    With probability 1 - delta the outputs approximate distinct positive
    coordinates of the masked vector and include every
    epsilon-significant one.
    """
    n = np.asarray(H).shape[0]
    H = _as_mask(H, n)
    out: Dict[int, float] = {}
    for s, mask in _bucket_masks(H, cfg.rho, seed):
        u = tensor_tournament(
            mask, tcfg, subs, seed=int(derive_key(seed, _TAG_TOURN, s))
        )
        if u > 0.0:
            out[s] = u
    return out


def sampling_level(x: float, cfg: LayerConfig) -> int:
    """Smallest level f with x <= threshold*(1+eps)^f (requires x > threshold)."""
    chi = cfg.count_threshold
    if x <= chi:
        raise ConfigurationError(f"sampling_level domain requires x > {chi}, got {x}")
    growth = 1.0 + cfg.epsilon
    f = math.ceil(math.log(x / chi) / math.log(growth) - 1e-12)
    while chi * growth**f < x:
        f += 1
    while f > 1 and chi * growth ** (f - 1) >= x:
        f -= 1
    return f


def layered_l1_estimate(
    n: int,
    cfg: LayerConfig,
    run_cover: Callable[[Mask, int], Iterable[float]],
    seed: int = 0,
) -> float:
    """Layered summation of cover outputs across subsampling levels.

    ``run_cover(mask, seed)`` must return the positive values of a cover
    of the vector restricted to the masked coordinates, at precision
    ``cfg.cover_precision`` and failure ``cfg.cover_delta``.
    """
    q = _draw_phase(seed, cfg.phase_steps)
    shift = (1.0 + cfg.phase_ratio) ** q
    counts: Dict[Tuple[int, int], int] = defaultdict(int)
    for j, mask, level_seed in _level_masks(n, cfg, seed):
        for value in run_cover(mask, level_seed):
            l = _assign_layer(float(value), shift, cfg)
            if l is not None:
                counts[(l, j)] += 1
    return _layer_sum(counts, cfg, shift)


def dimension_reduce(
    n: int,
    subs: SubAlgorithms,
    epsilon: float,
    delta: float,
    seed: int = 0,
    overrides: Optional[EstimatorOverrides] = None,
    value_bound: Optional[float] = None,
) -> float:
    """Full-norm estimate of a tensor from its per-hyperplane estimators.

    Builds the tournament -> cover -> layered-summation stack over the
    absolute-hyperplane vector and amplifies the 2/3 success probability
    by a median of independent runs.
    """
    ov = overrides or EstimatorOverrides()
    bound = value_bound if value_bound is not None else (ov.value_bound or 2.0**48)
    lcfg = LayerConfig.from_targets(
        epsilon, n, bound, scale_override=ov.scale_override
    )
    cover_eps = lcfg.cover_precision
    if ov.cover_epsilon is not None:
        cover_eps = max(cover_eps, ov.cover_epsilon)
    tour_eps = cover_eps / 3.0
    tcfg = TournamentConfig.from_targets(
        tour_eps,
        max(lcfg.cover_delta / 4.0, 1e-9),
        subs.beta,
        rounds=ov.rounds,
    )
    ccfg = CoverConfig.from_targets(
        cover_eps,
        lcfg.cover_delta,
        tcfg.alpha,
        rho=ov.rho,
        rho_cap=ov.rho_cap,
    )

    def run_cover(mask: Mask, cover_seed: int) -> List[float]:
        return list(cover_algorithm(mask, ccfg, tcfg, subs, seed=cover_seed).values())

    amp = ov.amplification
    if amp is None:
        amp = max(1, math.ceil(24.0 * math.log(1.0 / delta)))
    estimates = [
        layered_l1_estimate(n, lcfg, run_cover, seed=int(derive_key(seed, _TAG_AMP, r)))
        for r in range(amp)
    ]
    return float(np.median(estimates))


def exact_sub_oracles(M, beta: float = 1.0) -> SubAlgorithms:
    """Exact dense-tensor sub-estimators for tests and demos.

    ``approx_a`` returns the exact masked norm (trivially a valid
    beta-factor estimate), ``approx_b`` the exact collapsed masked norm.
    """
    from . import tensor as tensor_ops

    def approx_a(mask: Mask, _delta: float) -> float:
        return float(tensor_ops.l1_norm(tensor_ops.prefix_zero(M, [mask])))

    def approx_b(mask: Mask, _eps: float, _delta: float) -> float:
        return float(
            tensor_ops.l1_norm(tensor_ops.suffix_sum(tensor_ops.prefix_zero(M, [mask]), 1))
        )

    return SubAlgorithms(approx_a=approx_a, approx_b=approx_b, beta=beta)


def vector_sub_oracles(v, beta: float = 1.0) -> SubAlgorithms:
    """Exact sub-estimators for an explicit nonnegative vector.

    Models the tensor whose hyperplanes are disjoint singletons holding the
    vector entries, for which both the masked norm and its collapse equal
    the masked entry sum. Fast path for vector-level tournament/cover tests.
    """
    vec = np.asarray(v, dtype=np.float64)
    if (vec < 0).any():
        raise ConfigurationError("vector oracles require nonnegative entries")

    def approx_a(mask: Mask, _delta: float) -> float:
        return float(vec @ mask)

    def approx_b(mask: Mask, _eps: float, _delta: float) -> float:
        return float(vec @ mask)

    return SubAlgorithms(approx_a=approx_a, approx_b=approx_b, beta=beta)


# ---------------------------------------------------------------------------
# sketch-backed one-pass pipeline
# ---------------------------------------------------------------------------


class _BankRegistry:
    """Flat storage for every product-sketch repetition of a run.

    Rows are grouped by (prefix depth s, collapse depth s'); each row is
    one repetition with its own prefix-mask tables and Cauchy tables.
    Updates are vectorized across rows, so a pass costs O(distinct tuple
    values x rows) regardless of how many logical banks exist.
    """

    def __init__(self, k: int, n: int, omega: float):
        self.k, self.n, self.omega = k, n, float(omega)
        self._pending: Dict[Tuple[int, int], List[Tuple[np.ndarray, int, int]]] = (
            defaultdict(list)
        )
        self._rows: Dict[Tuple[int, int], int] = defaultdict(int)
        self.groups: Dict[Tuple[int, int], Dict[str, np.ndarray]] = {}
        self.m_seen = 0
        self.frozen = False

    def add_bank(self, prefix: Sequence[Mask], s_prime: int, reps: int, seed: int):
        """Register `reps` repetitions; returns a handle for later medians."""
        if self.frozen:
            raise ConfigurationError("registry is frozen once the pass begins")
        s = len(prefix)
        key = (s, s_prime)
        table = np.asarray(prefix, dtype=np.float64).reshape(s, self.n)
        start = self._rows[key]
        self._pending[key].append((table, reps, int(seed)))
        self._rows[key] = start + reps
        return (key, start, start + reps)

    def freeze(self):
        """Materialize all tables; no banks may be added afterwards.

        Per-row Cauchy tables replay exactly what repetition r of a
        SketchBank built from the same bank seed would draw, so any row can
        be cross-checked against the reference implementation.
        """
        for key, entries in self._pending.items():
            s, s_prime = key
            fams = self.k - s_prime
            rows = self._rows[key]
            prefix = np.empty((rows, s, self.n), dtype=np.float64)
            seeds = np.empty(rows, dtype=np.uint64)
            at = 0
            for table, reps, seed in entries:
                prefix[at : at + reps] = table
                seeds[at : at + reps] = repetition_seeds(seed, reps)
                at += reps
            self.groups[key] = {
                "prefix": prefix,
                "coeff": batched_cauchy_tables(seeds, fams, self.n, self.omega),
                "joint": np.zeros(rows, dtype=np.float64),
                "margins": np.zeros((rows, self.k), dtype=np.float64),
            }
        self._pending.clear()
        self.frozen = True

    def bulk_update(self, counts: Dict[TupleKey, int]):
        if not self.frozen:
            raise ConfigurationError("freeze the registry before streaming")
        k = self.k
        total = 0
        for t, c in counts.items():
            total += int(c)
            for (s, sp), g in self.groups.items():
                prefix, coeff = g["prefix"], g["coeff"]
                sel = None
                for j in range(s):
                    col = prefix[:, j, t[j] - 1]
                    sel = col if sel is None else sel * col
                if sel is None:
                    sel = 1.0
                csel = None
                for j in range(k - sp):
                    col = coeff[:, j, t[sp + j] - 1]
                    csel = col if csel is None else csel * col
                joint_inc = sel * csel if csel is not None else sel
                g["joint"] += float(c) * joint_inc
                margins = g["margins"]
                for j in range(k):
                    x = t[j] - 1
                    if j < sp:
                        margins[:, j] += c * prefix[:, j, x]
                    elif j < s:
                        margins[:, j] += c * prefix[:, j, x] * coeff[:, j - sp, x]
                    else:
                        margins[:, j] += c * coeff[:, j - sp, x]
        self.m_seen += total

    def update(self, rec: TupleKey):
        self.bulk_update({tuple(int(x) for x in rec): 1})

    def values(self, key) -> np.ndarray:
        g = self.groups[key]
        scale = float(self.m_seen) ** (self.k - 1)
        return scale * g["joint"] - np.prod(g["margins"], axis=1)


@dataclass
class _LeafRef:
    """A registered bank slice evaluated as the median |sketch value|."""

    handle: Tuple
    kind: str

    def evaluate(self, reg: _BankRegistry, _cache: Dict) -> float:
        key, start, stop = self.handle
        cache_key = ("values", key)
        if cache_key not in _cache:
            _cache[cache_key] = reg.values(key)
        return float(np.median(np.abs(_cache[cache_key][start:stop])))


@dataclass
class _TournamentPlan:
    cfg: TournamentConfig
    rounds: List[Tuple[Optional[Tuple[_LeafRef, object]], Optional[Tuple[_LeafRef, object]]]]

    def evaluate(self, reg, cache) -> float:
        ratio = self.cfg.ratio_threshold * self.cfg.beta**2
        vals = []
        for side0, side1 in self.rounds:
            u = []
            for node in (side0, side1):
                if node is None:
                    u.append(0.0)
                    continue
                a_ref, b_node = node
                coarse = a_ref.evaluate(reg, cache)
                sharp = b_node.evaluate(reg, cache)
                u.append(max(coarse / self.cfg.beta, sharp, 0.0))
            vals.append(_decide_round(u[0], u[1], ratio))
        return _combine_rounds(vals)


@dataclass
class _CoverPlan:
    buckets: Dict[int, _TournamentPlan]

    def evaluate(self, reg, cache) -> List[float]:
        out = []
        for plan in self.buckets.values():
            u = plan.evaluate(reg, cache)
            if u > 0.0:
                out.append(u)
        return out


@dataclass
class _AmpPlan:
    q: int
    lcfg: LayerConfig
    levels: List[Tuple[int, _CoverPlan]]

    def evaluate(self, reg, cache) -> float:
        shift = (1.0 + self.lcfg.phase_ratio) ** self.q
        counts: Dict[Tuple[int, int], int] = defaultdict(int)
        for j, cover in self.levels:
            for value in cover.evaluate(reg, cache):
                l = _assign_layer(value, shift, self.lcfg)
                if l is not None:
                    counts[(l, j)] += 1
        return _layer_sum(counts, self.lcfg, shift)


@dataclass
class _ReducePlan:
    amps: List[_AmpPlan]
    diagnostics: Dict[str, object]

    def evaluate(self, reg, cache) -> float:
        return float(np.median([a.evaluate(reg, cache) for a in self.amps]))


def _build_reduce_plan(
    reg: _BankRegistry,
    k: int,
    n: int,
    depth: int,
    prefix: List[Mask],
    epsilon: float,
    delta: float,
    seed: int,
    ov: EstimatorOverrides,
    beta: float,
) -> _ReducePlan:
    """Register all banks of one dimension-reduction instance and record the
    evaluation structure. Everything random is drawn here, before the pass.
    """
    bound = ov.value_bound or 2.0**48
    lcfg = LayerConfig.from_targets(epsilon, n, bound, scale_override=ov.scale_override)
    cover_eps = lcfg.cover_precision
    if ov.cover_epsilon is not None:
        cover_eps = max(cover_eps, ov.cover_epsilon)
    tour_eps = cover_eps / 3.0
    tcfg = TournamentConfig.from_targets(
        tour_eps, max(lcfg.cover_delta / 4.0, 1e-9), beta, rounds=ov.rounds
    )
    ccfg = CoverConfig.from_targets(
        cover_eps, lcfg.cover_delta, tcfg.alpha, rho=ov.rho, rho_cap=ov.rho_cap
    )
    amp = ov.amplification
    if amp is None:
        amp = max(1, math.ceil(24.0 * math.log(1.0 / delta)))

    amps: List[_AmpPlan] = []
    for r in range(amp):
        seed_r = int(derive_key(seed, _TAG_AMP, r))
        level_plans: List[Tuple[int, _CoverPlan]] = []
        for j, level_mask, level_seed in _level_masks(n, lcfg, seed_r):
            buckets: Dict[int, _TournamentPlan] = {}
            for s, bucket_mask in _bucket_masks(level_mask, ccfg.rho, level_seed):
                tour_seed = int(derive_key(level_seed, _TAG_TOURN, s))
                rounds = []
                for rd, m0, m1 in _split_masks(bucket_mask, tcfg.rounds, tour_seed):
                    sides = []
                    for side, mask in enumerate((m0, m1)):
                        if not mask.any():
                            sides.append(None)
                            continue
                        leaf_seed = derive_key(tour_seed, _TAG_BANK_A, rd, side)
                        a_ref = _LeafRef(
                            handle=reg.add_bank(
                                prefix + [mask], depth, ov.polylog_reps, int(leaf_seed)
                            ),
                            kind="coarse",
                        )
                        if depth + 1 == k - 1:
                            b_seed = derive_key(tour_seed, _TAG_BANK_B, rd, side)
                            b_node: object = _LeafRef(
                                handle=reg.add_bank(
                                    prefix + [mask], k - 1, ov.eps_reps, int(b_seed)
                                ),
                                kind="sharp",
                            )
                        else:
                            child_seed = int(derive_key(tour_seed, _TAG_CHILD, rd, side))
                            b_node = _build_reduce_plan(
                                reg,
                                k,
                                n,
                                depth + 1,
                                prefix + [mask],
                                epsilon,
                                delta,
                                child_seed,
                                ov,
                                beta,
                            )
                        sides.append((a_ref, b_node))
                    rounds.append((sides[0], sides[1]))
                buckets[s] = _TournamentPlan(cfg=tcfg, rounds=rounds)
            level_plans.append((j, _CoverPlan(buckets=buckets)))
        amps.append(
            _AmpPlan(q=_draw_phase(seed_r, lcfg.phase_steps), lcfg=lcfg, levels=level_plans)
        )
    diagnostics = {
        "depth": depth,
        "epsilon": epsilon,
        "delta": delta,
        "beta": beta,
        "amplification": amp,
        "rounds": tcfg.rounds,
        "ratio_threshold": tcfg.ratio_threshold,
        "alpha": tcfg.alpha,
        "subcall_delta": tcfg.subcall_delta,
        "detect_prob": tcfg.detect_prob,
        "rho": ccfg.rho,
        "cover_epsilon": ccfg.epsilon,
        "cover_delta": lcfg.cover_delta,
        "count_threshold": lcfg.count_threshold,
        "base_count": lcfg.base_count,
        "phase_steps": lcfg.phase_steps,
        "phase_ratio": lcfg.phase_ratio,
        "cover_precision": lcfg.cover_precision,
        "levels": lcfg.levels,
        "layers": lcfg.layers,
        "scale_override": lcfg.scale,
    }
    return _ReducePlan(amps=amps, diagnostics=diagnostics)


class StreamDistanceEstimator:
    """One-pass sketch pipeline for the independence-tensor norm.

    Construction draws every hash and Cauchy seed and registers every
    product-sketch bank; ``update``/``consume`` feed stream tuples exactly
    once; ``tensor_norm_estimate`` evaluates the tournament/cover/layer
    recursion on the final accumulators.
    """

    def __init__(
        self,
        k: int,
        n: int,
        epsilon: float,
        delta: float,
        seed: int = 0,
        overrides: Optional[EstimatorOverrides] = None,
    ):
        if k < 2:
            raise ConfigurationError("arity k must be >= 2")
        if not 0.0 < epsilon < 1.0 or not 0.0 < delta < 1.0:
            raise ConfigurationError("epsilon and delta must lie in (0, 1)")
        self.k, self.n = k, n
        self.epsilon, self.delta = epsilon, delta
        self.seed = int(seed)
        ov = overrides or EstimatorOverrides()
        if ov.beta is None:
            ov = ov.replace(beta=max(2.0, math.log2(max(n, 4))) ** k)
        if ov.omega is None:
            ov = ov.replace(omega=default_truncation(k, n))
        self.overrides = ov
        self.registry = _BankRegistry(k, n, ov.omega)
        self.plan = _build_reduce_plan(
            self.registry,
            k,
            n,
            depth=0,
            prefix=[],
            epsilon=epsilon,
            delta=delta,
            seed=self.seed,
            ov=ov,
            beta=ov.beta,
        )
        self.registry.freeze()
        self.records_consumed = 0
        self._chunk: Dict[TupleKey, int] = {}

    def update(self, rec: TupleKey) -> None:
        t = tuple(int(x) for x in rec)
        if len(t) != self.k:
            raise MalformedInputError(
                f"expected {self.k} coordinates, got {len(t)}",
                self.records_consumed + 1,
            )
        for x in t:
            if not 1 <= x <= self.n:
                raise MalformedInputError(
                    f"coordinate {x} outside [1, {self.n}]",
                    self.records_consumed + 1,
                )
        self._chunk[t] = self._chunk.get(t, 0) + 1
        self.records_consumed += 1
        if len(self._chunk) >= self.overrides.max_chunk:
            self._flush()

    def consume(self, stream: Iterable[TupleKey]) -> int:
        for rec in stream:
            self.update(rec)
        self._flush()
        return self.records_consumed

    def _flush(self):
        if self._chunk:
            self.registry.bulk_update(self._chunk)
            self._chunk = {}

    @property
    def m_seen(self) -> int:
        return self.registry.m_seen + sum(self._chunk.values())

    def tensor_norm_estimate(self) -> float:
        self._flush()
        if self.registry.m_seen < 1:
            raise EmptyStreamError("no tuples were consumed")
        cache: Dict = {}
        return self.plan.evaluate(self.registry, cache)

    def bank_rows(self) -> int:
        return sum(g["joint"].shape[0] for g in self.registry.groups.values())

    def diagnostics(self) -> Dict[str, object]:
        d = dict(self.plan.diagnostics)
        d.update(
            {
                "bank_rows": self.bank_rows(),
                "eps_reps": self.overrides.eps_reps,
                "polylog_reps": self.overrides.polylog_reps,
                "omega": self.overrides.omega,
                "seed": self.seed,
            }
        )
        return d


def approximate_tensor(
    stream: TupleStream,
    epsilon: float,
    delta: float,
    seed: int = 0,
    overrides: Optional[EstimatorOverrides] = None,
) -> float:
    """(1 +- eps, delta) estimate of the independence-tensor norm, one pass."""
    est = StreamDistanceEstimator(
        stream.k, stream.n, epsilon, delta, seed=seed, overrides=overrides
    )
    est.consume(stream)
    return est.tensor_norm_estimate()


def independence_distance(
    stream: TupleStream,
    epsilon: float,
    delta: float,
    seed: int = 0,
    overrides: Optional[EstimatorOverrides] = None,
) -> EstimateReport:
    """End-to-end one-pass estimate of the joint/product statistical distance."""
    est = StreamDistanceEstimator(
        stream.k, stream.n, epsilon, delta, seed=seed, overrides=overrides
    )
    est.consume(stream)
    if est.registry.m_seen < 1:
        raise EmptyStreamError("cannot estimate the distance of an empty stream")
    norm = est.tensor_norm_estimate()
    m, k = est.registry.m_seen, stream.k
    raw = norm / (2.0 * float(m) ** k)
    diag = est.diagnostics()
    diag["tensor_norm_estimate"] = norm
    diag["raw_distance_estimate"] = raw
    return EstimateReport(
        distance_estimate=min(1.0, max(0.0, raw)),
        m=m,
        n=stream.n,
        k=stream.k,
        mode="sketch",
        seed=int(seed),
        diagnostics=diag,
    )
