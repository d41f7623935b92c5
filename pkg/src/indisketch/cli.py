"""Batch command-line front end.

Reads k-tuple records (one per line, integers separated by commas or
whitespace, '#' comments allowed), or generates synthetic streams, and
reports the exact and/or sketched statistical distance as JSON or TSV.

Exit codes: 0 success, 1 input error, 2 configuration error, 3 budget
error, 4 internal error. Identical (input, configuration, seed) produce
byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, TextIO

from .errors import (
    BudgetExceededError,
    ConfigurationError,
    EmptyStreamError,
    IndisketchError,
    MalformedInputError,
)
from .estimator import EstimatorOverrides, StreamDistanceEstimator
from .hashing import counter_uniform, derive_key
from .stream import (
    EstimateReport,
    TupleKey,
    TupleStream,
    build_frequency_table,
    exact_statistical_distance,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_INTERNAL = 4

DENSE_MODE_BUDGET = 2**24


@dataclass
class RunConfig:
    k: int
    n: int
    epsilon: float = 0.3
    delta: float = 0.1
    mode: str = "exact"
    seed: int = 0
    input_path: Optional[str] = None
    output_format: str = "json"
    generate: Optional[str] = None
    m: Optional[int] = None
    mixture_rho: float = 0.5
    overrides: Dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigurationError("k must be >= 2")
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")
        if self.mode not in ("exact", "sketch", "both"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.mode != "exact" and not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError("epsilon must lie in (0, 1)")
        if self.mode != "exact" and not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")
        if self.output_format not in ("json", "tsv"):
            raise ConfigurationError(f"unknown format {self.output_format!r}")
        if self.mode == "both" and self.n**self.k > DENSE_MODE_BUDGET:
            raise BudgetExceededError(
                f"mode=both requires n^k <= {DENSE_MODE_BUDGET}, got {self.n ** self.k}"
            )
        if self.generate is not None:
            base = self.generate.split("(")[0]
            if base not in ("independent", "diagonal", "mixture"):
                raise ConfigurationError(f"unknown generator kind {self.generate!r}")
            if self.m is None or self.m < 1:
                raise ConfigurationError("--generate requires --m >= 1")


class CountingReader:
    """Wraps a record iterator; counts and forbids a second traversal."""

    def __init__(self, records: Iterable[TupleKey]):
        self._it = iter(records)
        self.records_read = 0
        self.traversals = 0
        self._consumed = False

    def __iter__(self) -> Iterator[TupleKey]:
        if self._consumed:
            raise RuntimeError("single-pass reader was traversed twice")
        self._consumed = True
        self.traversals += 1
        for rec in self._it:
            self.records_read += 1
            yield rec


def parse_records(lines: Iterable[str], k: int, n: int) -> Iterator[TupleKey]:
    """Parse text records into tuples, reporting the offending line number."""
    for lineno, line in enumerate(lines, start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        tokens = body.replace(",", " ").split()
        if len(tokens) != k:
            raise MalformedInputError(
                f"expected {k} values, got {len(tokens)}", index=lineno
            )
        out: List[int] = []
        for tok in tokens:
            try:
                v = int(tok)
            except ValueError:
                raise MalformedInputError(
                    f"non-integer token {tok!r}", index=lineno
                ) from None
            if not 1 <= v <= n:
                raise MalformedInputError(
                    f"value {v} outside [1, {n}]", index=lineno
                )
            out.append(v)
        yield tuple(out)


def generate_synthetic(
    kind: str, k: int, n: int, m: int, seed: int, mixture_rho: float = 0.5
) -> Iterator[TupleKey]:
    """Deterministic synthetic streams.

    independent: coordinates i.i.d. uniform on [1, n]; diagonal: constant
    tuples (i, ..., i) with i uniform; mixture(rho): each tuple diagonal
    with probability rho, otherwise independent.
    """
    if m < 1:
        raise ConfigurationError("m must be >= 1")
    if kind.startswith("mixture"):
        if "(" in kind:
            try:
                mixture_rho = float(kind[kind.index("(") + 1 : kind.rindex(")")])
            except (ValueError, IndexError):
                raise ConfigurationError(f"cannot parse mixture kind {kind!r}") from None
        if not 0.0 <= mixture_rho <= 1.0:
            raise ConfigurationError("mixture rho must lie in [0, 1]")
        kind = "mixture"
    if kind not in ("independent", "diagonal", "mixture"):
        raise ConfigurationError(f"unknown generator kind {kind!r}")
    key = derive_key(seed, 0x6E0)
    for i in range(m):
        if kind == "mixture":
            diag = float(counter_uniform(derive_key(key, i, 0xD0), 0)) < mixture_rho
        else:
            diag = kind == "diagonal"
        if diag:
            v = 1 + int(float(counter_uniform(derive_key(key, i, 0xD1), 0)) * n)
            yield (min(v, n),) * k
        else:
            coords = []
            for j in range(k):
                v = 1 + int(float(counter_uniform(derive_key(key, i, 0xD2, j), 0)) * n)
                coords.append(min(v, n))
            yield tuple(coords)


_OVERRIDE_TYPES = {
    "amplification": int,
    "rounds": int,
    "eps_reps": int,
    "polylog_reps": int,
    "beta": float,
    "cover_epsilon": float,
    "rho": int,
    "rho_cap": int,
    "scale_override": float,
    "omega": float,
    "value_bound": float,
    "max_chunk": int,
}


def parse_overrides(pairs: Iterable[str]) -> EstimatorOverrides:
    ov = EstimatorOverrides()
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(f"override {pair!r} is not KEY=VALUE")
        key, value = pair.split("=", 1)
        key = key.strip()
        if key not in _OVERRIDE_TYPES:
            raise ConfigurationError(f"unknown override key {key!r}")
        try:
            ov = ov.replace(**{key: _OVERRIDE_TYPES[key](value)})
        except ValueError:
            raise ConfigurationError(f"bad value for override {key}: {value!r}") from None
    return ov


def _file_lines(path: str) -> Iterator[str]:
    with open(path, "r", encoding="utf-8") as fh:
        yield from fh


def run(cfg: RunConfig, stdin: Optional[TextIO] = None) -> EstimateReport:
    """Execute one run and return the report (raises on errors)."""
    cfg.validate()
    overrides = parse_overrides(
        f"{key}={val}" for key, val in sorted(cfg.overrides.items())
    )

    if cfg.generate is not None:
        records: Iterable[TupleKey] = generate_synthetic(
            cfg.generate, cfg.k, cfg.n, cfg.m or 0, cfg.seed, cfg.mixture_rho
        )
    else:
        if cfg.input_path in (None, "-"):
            lines: Iterable[str] = stdin if stdin is not None else sys.stdin
        else:
            lines = _file_lines(cfg.input_path)
        records = parse_records(lines, cfg.k, cfg.n)

    reader = CountingReader(records)
    diagnostics: Dict[str, object] = {"config": _config_dict(cfg)}

    if cfg.mode == "exact":
        table = build_frequency_table(TupleStream(cfg.k, cfg.n, reader))
        if table.m == 0:
            raise EmptyStreamError("input stream is empty")
        exact = exact_statistical_distance(table)
        diagnostics["records_read"] = reader.records_read
        return EstimateReport(
            distance_estimate=float(exact),
            exact_distance=float(exact),
            m=table.m,
            n=cfg.n,
            k=cfg.k,
            mode="exact",
            seed=cfg.seed,
            diagnostics=diagnostics,
        )

    if cfg.mode == "sketch":
        est = StreamDistanceEstimator(
            cfg.k, cfg.n, cfg.epsilon, cfg.delta, seed=cfg.seed, overrides=overrides
        )
        est.consume(reader)
        if est.m_seen == 0:
            raise EmptyStreamError("input stream is empty")
        norm = est.tensor_norm_estimate()
        raw = norm / (2.0 * float(est.m_seen) ** cfg.k)
        diagnostics.update(est.diagnostics())
        diagnostics["tensor_norm_estimate"] = norm
        diagnostics["raw_distance_estimate"] = raw
        diagnostics["records_read"] = reader.records_read
        diagnostics["reader_traversals"] = reader.traversals
        return EstimateReport(
            distance_estimate=min(1.0, max(0.0, raw)),
            m=est.m_seen,
            n=cfg.n,
            k=cfg.k,
            mode="sketch",
            seed=cfg.seed,
            diagnostics=diagnostics,
        )

    # both: one traversal of the reader, materialized so the oracle and the
    # sketch see identical data (requires the dense-mode budget).
    tuples = list(reader)
    if not tuples:
        raise EmptyStreamError("input stream is empty")
    table = build_frequency_table(TupleStream(cfg.k, cfg.n, tuples))
    exact = exact_statistical_distance(table)
    est = StreamDistanceEstimator(
        cfg.k, cfg.n, cfg.epsilon, cfg.delta, seed=cfg.seed, overrides=overrides
    )
    est.consume(tuples)
    norm = est.tensor_norm_estimate()
    raw = norm / (2.0 * float(est.m_seen) ** cfg.k)
    estimate = min(1.0, max(0.0, raw))
    diagnostics.update(est.diagnostics())
    diagnostics["tensor_norm_estimate"] = norm
    diagnostics["raw_distance_estimate"] = raw
    diagnostics["records_read"] = reader.records_read
    exact_f = float(exact)
    diagnostics["relative_error"] = (
        abs(estimate - exact_f) / exact_f if exact_f > 0 else None
    )
    return EstimateReport(
        distance_estimate=estimate,
        exact_distance=exact_f,
        m=table.m,
        n=cfg.n,
        k=cfg.k,
        mode="both",
        seed=cfg.seed,
        diagnostics=diagnostics,
    )


def _config_dict(cfg: RunConfig) -> Dict[str, object]:
    return {
        "k": cfg.k,
        "n": cfg.n,
        "epsilon": cfg.epsilon,
        "delta": cfg.delta,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "input": cfg.input_path,
        "generate": cfg.generate,
        "m": cfg.m,
        "overrides": dict(sorted(cfg.overrides.items())),
    }


def format_report(report: EstimateReport, fmt: str) -> str:
    if fmt == "json":
        return report.to_json()
    rows = []
    d = report.to_dict()
    diagnostics = d.pop("diagnostics")
    for key in sorted(d):
        rows.append(f"{key}\t{d[key]}")
    for key in sorted(diagnostics):
        rows.append(f"diagnostics.{key}\t{json.dumps(diagnostics[key], sort_keys=True)}")
    return "\n".join(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="indisketch",
        description="Estimate the statistical distance between the joint and "
        "product distributions of a stream of k-tuples.",
    )
    p.add_argument("--input", default=None, help="record file, or '-' for stdin")
    p.add_argument("--k", type=int, required=True, help="tuple arity (>= 2)")
    p.add_argument("--n", type=int, required=True, help="domain size per coordinate")
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--mode", choices=("exact", "sketch", "both"), default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "tsv"), default="json")
    p.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="estimator override (repeatable): amplification, rounds, eps_reps, "
        "polylog_reps, beta, cover_epsilon, rho, scale_override, omega, ...",
    )
    p.add_argument(
        "--generate",
        default=None,
        help="synthesize the input: independent | diagonal | mixture(RHO)",
    )
    p.add_argument("--m", type=int, default=None, help="length of a generated stream")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for pair in args.override:
        if "=" not in pair:
            print(f"error: override {pair!r} is not KEY=VALUE", file=sys.stderr)
            return EXIT_CONFIG
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value
    cfg = RunConfig(
        k=args.k,
        n=args.n,
        epsilon=args.epsilon,
        delta=args.delta,
        mode=args.mode,
        seed=args.seed,
        input_path=args.input,
        output_format=args.format,
        generate=args.generate,
        m=args.m,
        overrides=overrides,
    )
    try:
        report = run(cfg)
    except (MalformedInputError, EmptyStreamError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetExceededError as e:
        print(f"budget error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except IndisketchError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    print(format_report(report, cfg.output_format))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
