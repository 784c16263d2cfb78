"""Command-line entry point: build, convolve, verify, nnz, bench."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import sparse
from .analysis import NnzReport, nnz_report
from .bench import REPORT_NOTE, emit_report, load_layer_table, make_rng, run_table
from .textio import read_dense, write_dense
from .transform import ConvSpec, build_transform, convolve, load_transform, save_transform
from .verify import run_sweep

log = logging.getLogger("spconv")


def _add_spec_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    for name in ("m", "n", "k"):
        p.add_argument(f"--{name}", type=int, required=required)
    p.add_argument("--s", type=int, default=1, help="stride (default 1)")
    p.add_argument("--p", type=int, default=0, help="zero padding (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spconv",
                                     description="Padded, strided 2-D convolution as sparse SpMV.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="construct a transform and save it")
    _add_spec_args(b)
    src = b.add_mutually_exclusive_group()
    src.add_argument("--kernel", type=Path, help="dense-format k x k kernel file")
    src.add_argument("--seed", type=int, default=0, help="seed for a standard-normal kernel")
    b.add_argument("--layout", choices=sparse.LAYOUTS, default=sparse.CSR)
    b.add_argument("--method", choices=("spgemm", "gather"), default="spgemm")
    b.add_argument("--out", type=Path, required=True)

    c = sub.add_parser("convolve", help="apply a saved transform to a dense input file")
    c.add_argument("--transform", type=Path, required=True)
    c.add_argument("--input", type=Path, required=True)
    c.add_argument("--out", type=Path, help="output file (default stdout)")

    v = sub.add_parser("verify", help="run the oracle sweep; exit 1 on any mismatch")
    v.add_argument("--max-dim", type=int, default=12)
    v.add_argument("--seeds", type=int, default=3)
    v.add_argument("--seed", type=int, default=0, help="first seed")

    n = sub.add_parser("nnz", help="non-padding multiplication counts as CSV")
    _add_spec_args(n, required=False)
    n.add_argument("--layers", type=Path, help="layer table CSV (use '-' for the shipped table)")

    bench = sub.add_parser("bench", help="time CSR/CSC SpMV against im2col over a layer table")
    bench.add_argument("--trials", type=int, default=1000)
    bench.add_argument("--warmup", type=int, default=10)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--layers", type=Path, help="layer table CSV (default: shipped DenseNet121)")
    bench.add_argument("--format", choices=("csv", "markdown"), default="csv")
    bench.add_argument("--threads", type=int, default=1, help="SpMV threads (default 1)")
    bench.add_argument("--out", type=Path, help="report file (default stdout)")
    return parser


def _spec(args) -> ConvSpec:
    return ConvSpec(args.m, args.n, args.k, args.s, args.p)


def _write_text(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def cmd_build(args) -> int:
    spec = _spec(args)
    if args.kernel is not None:
        with open(args.kernel, encoding="utf-8") as fh:
            kern = read_dense(fh)
    else:
        kern = make_rng(args.seed).standard_normal((spec.k, spec.k))
    t = build_transform(kern, spec, args.layout, args.method)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        save_transform(t, fh)
    log.info("wrote %s: %dx%d, nnz=%d", args.out, *t.matrix.shape, t.nnz)
    return 0


def cmd_convolve(args) -> int:
    with open(args.transform, encoding="utf-8") as fh:
        t = load_transform(fh)
    with open(args.input, encoding="utf-8") as fh:
        a = read_dense(fh)
    out = convolve(t, a)
    if args.out is None:
        write_dense(out, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            write_dense(out, fh)
    return 0


def cmd_verify(args) -> int:
    report = run_sweep(args.max_dim, args.seeds, args.seed)
    for line in report.failures:
        print(f"FAIL {line}")
    status = "ok" if report.ok else f"{len(report.failures)} failures"
    print(f"verify: {report.specs} specs, {report.cases} cases, {status}")
    print(f"input digest: {report.digest}")
    return 0 if report.ok else 1


def cmd_nnz(args) -> int:
    lines = []
    if args.layers is not None:
        layers = load_layer_table(None if str(args.layers) == "-" else args.layers)
        lines.append("name," + NnzReport.CSV_HEADER)
        lines += [f"{cfg.name},{nnz_report(cfg.spec).csv_row()}" for cfg in layers]
    else:
        if None in (args.m, args.n, args.k):
            print("spconv nnz: error: --m, --n and --k are required without --layers", file=sys.stderr)
            return 2
        lines.append(NnzReport.CSV_HEADER)
        lines.append(nnz_report(_spec(args)).csv_row())
    print("\n".join(lines))
    return 0


def cmd_bench(args) -> int:
    layers = load_layer_table(args.layers)
    print(REPORT_NOTE, file=sys.stderr)

    def progress(i, cfg):
        log.info("[%d/%d] %s %s", i + 1, len(layers), cfg.name, cfg.spec.astuple())

    results = run_table(layers, args.trials, args.warmup, args.seed, args.threads, progress)
    _write_text(emit_report(results, args.format), args.out)
    return 0


COMMANDS = {
    "build": cmd_build,
    "convolve": cmd_convolve,
    "verify": cmd_verify,
    "nnz": cmd_nnz,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"spconv {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
