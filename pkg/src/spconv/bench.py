"""Layer-table ingestion, timing harness and report rendering."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import sparse
from .reference import im2col_conv
from .transform import ConvError, ConvSpec, build_transform, convolve

log = logging.getLogger(__name__)

METHODS = ("CSR-SpMV", "CSC-SpMV", "im2col")
LAYER_HEADER = ["name", "m", "n", "k", "s", "p"]
REPORT_COLUMNS = ["layer", "method", "mean_us", "sem_us", "build_time_us"]
TOTAL_LAYER = "TOTAL"

CROSS_CHECK_TOL = 1e-10
LAYOUT_TOL = 1e-12


class BenchError(RuntimeError):
    pass


class LayerTableError(ValueError):
    pass


@dataclass(frozen=True)
class LayerConfig:
    name: str
    m: int
    n: int
    k: int
    s: int
    p: int

    @property
    def spec(self) -> ConvSpec:
        return ConvSpec(self.m, self.n, self.k, self.s, self.p)


@dataclass(frozen=True)
class BenchResult:
    layer: str
    method: str
    trials: int
    mean_us: float
    sem_us: float
    build_time_us: float | None = None


def default_layer_table() -> Path:
    return Path(str(resources.files("spconv") / "data" / "densenet121.csv"))


def load_layer_table(path=None) -> list[LayerConfig]:
    """Read a ``name,m,n,k,s,p`` CSV; defaults to the shipped DenseNet121 table."""
    path = Path(path) if path is not None else default_layer_table()
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_layer_table(fh)


def parse_layer_table(fh: Iterable[str]) -> list[LayerConfig]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != LAYER_HEADER:
        raise LayerTableError(f"line 1: expected header {','.join(LAYER_HEADER)}")
    layers = []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 6:
            raise LayerTableError(f"line {lineno}: expected 6 fields, got {len(row)}")
        name = row[0].strip()
        try:
            dims = [int(c) for c in row[1:]]
        except ValueError as exc:
            raise LayerTableError(f"line {lineno}: {exc}") from None
        cfg = LayerConfig(name, *dims)
        try:
            cfg.spec
        except ConvError as exc:
            raise LayerTableError(f"layer {name!r} (line {lineno}): {exc}") from None
        layers.append(cfg)
    return layers


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 seeded from ``(seed, stream)``; bit-identical across platforms."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def layer_inputs(cfg: LayerConfig, seed: int, stream: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Standard-normal input (m x n) then kernel (k x k), in that draw order."""
    rng = make_rng(seed, stream)
    a = rng.standard_normal((cfg.m, cfg.n))
    kern = rng.standard_normal((cfg.k, cfg.k))
    return a, kern


def _time_calls(fn: Callable[[], object], trials: int, warmup: int) -> np.ndarray:
    for _ in range(warmup):
        fn()
    samples = np.empty(trials)
    clock = time.perf_counter_ns
    for t in range(trials):
        start = clock()
        fn()
        samples[t] = clock() - start
    return samples / 1e3


def _summary(samples_us: np.ndarray) -> tuple[float, float]:
    mean = float(samples_us.mean())
    if samples_us.size < 2:
        return mean, 0.0
    return mean, float(samples_us.std(ddof=1) / math.sqrt(samples_us.size))


def run_layer_bench(cfg: LayerConfig, trials: int, warmup: int = 10, seed: int = 0,
                    stream: int = 0) -> list[BenchResult]:
    """Time the CSR and CSC SpMV paths and im2col on one layer.

    The sparse transforms are built once (build time reported separately);
    im2col lowers the input on every trial. All outputs are cross-checked
    before any timing is taken.
    """
    if trials < 1:
        raise BenchError(f"trials must be >= 1, got {trials}")
    spec = cfg.spec
    a, kern = layer_inputs(cfg, seed, stream)

    transforms = {}
    build_us = {}
    for method, layout in (("CSR-SpMV", sparse.CSR), ("CSC-SpMV", sparse.CSC)):
        start = time.perf_counter_ns()
        transforms[method] = build_transform(kern, spec, layout)
        build_us[method] = (time.perf_counter_ns() - start) / 1e3

    reference = im2col_conv(a, kern, spec)
    csr_out = convolve(transforms["CSR-SpMV"], a)
    csc_out = convolve(transforms["CSC-SpMV"], a)
    dev = max(_maxdev(csr_out, reference), _maxdev(csc_out, reference))
    if dev > CROSS_CHECK_TOL:
        raise BenchError(f"layer {cfg.name}: SpMV and im2col outputs differ by {dev:.3e}")
    layout_dev = _maxdev(csr_out, csc_out)
    if layout_dev > LAYOUT_TOL:
        raise BenchError(f"layer {cfg.name}: CSR and CSC outputs differ by {layout_dev:.3e}")

    calls = {
        "CSR-SpMV": lambda t=transforms["CSR-SpMV"]: convolve(t, a),
        "CSC-SpMV": lambda t=transforms["CSC-SpMV"]: convolve(t, a),
        "im2col": lambda: im2col_conv(a, kern, spec),
    }
    results = []
    for method in METHODS:
        mean, sem = _summary(_time_calls(calls[method], trials, warmup))
        results.append(BenchResult(cfg.name, method, trials, mean, sem, build_us.get(method)))
    return results


def _maxdev(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def run_table(layers: Sequence[LayerConfig], trials: int, warmup: int = 10, seed: int = 0,
              threads: int = 1, progress: Callable[[int, LayerConfig], None] | None = None
              ) -> list[BenchResult]:
    previous = sparse.set_num_threads(threads)
    try:
        results = []
        for i, cfg in enumerate(layers):
            if progress is not None:
                progress(i, cfg)
            results.extend(run_layer_bench(cfg, trials, warmup, seed, stream=i))
        return results
    finally:
        sparse.set_num_threads(previous)


def totals(results: Sequence[BenchResult]) -> dict[str, float]:
    """Sum of per-layer mean times for each method, in first-seen order."""
    out: dict[str, float] = {}
    for r in results:
        out[r.method] = out.get(r.method, 0.0) + r.mean_us
    return out


def _fmt(x: float | None) -> str:
    # shortest round-trip repr, so totals re-add exactly from the printed rows
    return "" if x is None else repr(float(x))


def report_rows(results: Sequence[BenchResult]) -> list[list[str]]:
    rows = [[r.layer, r.method, _fmt(r.mean_us), _fmt(r.sem_us), _fmt(r.build_time_us)] for r in results]
    if len({r.layer for r in results}) < 2:
        # a single layer is its own total
        return rows
    for method, total in totals(results).items():
        rows.append([TOTAL_LAYER, method, _fmt(total), "", ""])
    return rows


REPORT_NOTE = ("im2col comparator: in-repo single-threaded dense GEMV over a freshly "
               "lowered patch matrix, not an optimized BLAS; times in microseconds.")


def emit_report(results: Sequence[BenchResult], format: str = "csv") -> str:
    """Render per-layer rows plus, for multi-layer runs, one TOTAL row per method.

    ``format`` is ``"csv"`` or ``"markdown"``. Totals sum the per-layer
    means exactly as reported, without re-timing.
    """
    if not results:
        raise BenchError("no results to report")
    rows = report_rows(results)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if format == "markdown":
        lines = [f"<!-- {REPORT_NOTE} -->",
                 "| " + " | ".join(REPORT_COLUMNS) + " |",
                 "|" + "|".join(["---"] * len(REPORT_COLUMNS)) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    raise BenchError(f"unknown report format {format!r}")
