"""Command-line front end: calibrate, test, diagnose, power.

Exit codes: 0 when a command completes (whatever the statistical
decision), 1 for usage errors, 2 for data errors, 3 for surface-cache
errors.  The reject/accept decision lives in the report body, never in
the exit code, because scripting statistical decisions through exit
codes invites silent misuse.
"""

from __future__ import annotations

import argparse
import csv as csvmod
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .calibrate import (
    CalibrationConfig,
    calibrate_eta,
    generate_null_ensemble,
    load_surfaces,
    save_surfaces,
)
from .depcore import Sample, compute_ranks
from .errors import CacheError, CritsurfError, DataError, InputError
from .heatmap import HeatmapSpec, emit_heatmap, emit_rank_scatter
from .localtest import TestReport, fit_simple_ols, run_test
from .simlab import empirical_power, models_from_config

__all__ = ["DatasetFile", "ingest_xy", "report_to_dict", "build_parser", "main", "entrypoint"]


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetFile:
    """Where and how to read the two test columns.

    Column selectors are names when the file has a header (numeric
    strings fall back to 0-based indices); without a header they must be
    0-based indices.  ``filter_nonzero`` names columns that only gate
    row selection: rows where any of them is zero are dropped before
    testing.
    """

    path: str
    columns: tuple[str, str]
    delimiter: str = ","
    header: bool = True
    filter_nonzero: tuple[str, ...] = ()


def _resolve_column(selector: str, names: list[str] | None, width: int) -> int:
    if names is not None and selector in names:
        return names.index(selector)
    if selector.lstrip("-").isdigit():
        idx = int(selector)
        if 0 <= idx < width:
            return idx
        raise DataError(f"column index {idx} out of range for {width} columns")
    if names is None:
        raise DataError(
            f"column {selector!r} is not an index and the file has no header"
        )
    raise DataError(f"column {selector!r} not found; header has {names}")


def ingest_xy(dataset: DatasetFile) -> Sample:
    """Read, filter, and validate the two numeric test columns.

    Rows failing to provide a finite number in any used column are
    rejected with their file line numbers; rows where a filter column is
    zero are silently dropped, which is the documented way of selecting
    a sub-population before testing.
    """
    try:
        with open(dataset.path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csvmod.reader(fh, delimiter=dataset.delimiter))
    except OSError as exc:
        raise DataError(f"cannot read dataset {dataset.path}: {exc}") from exc
    if not rows:
        raise DataError(f"dataset {dataset.path} is empty")

    names = None
    first_data_line = 1
    if dataset.header:
        names = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
        first_data_line = 2
    if not rows:
        raise DataError(f"dataset {dataset.path} has a header but no data rows")

    width = max(len(row) for row in rows)
    if len(dataset.columns) != 2:
        raise InputError("exactly two test columns must be selected")
    ix = _resolve_column(dataset.columns[0], names, width)
    iy = _resolve_column(dataset.columns[1], names, width)
    ifilter = [_resolve_column(c, names, width) for c in dataset.filter_nonzero]
    used = [ix, iy, *ifilter]

    xs: list[float] = []
    ys: list[float] = []
    bad_lines: list[int] = []
    for offset, row in enumerate(rows):
        line = first_data_line + offset
        parsed = {}
        ok = True
        for idx in used:
            cell = row[idx].strip() if idx < len(row) else ""
            try:
                value = float(cell)
            except ValueError:
                ok = False
                break
            if not np.isfinite(value):
                ok = False
                break
            parsed[idx] = value
        if not ok:
            bad_lines.append(line)
            continue
        if any(parsed[idx] == 0.0 for idx in ifilter):
            continue
        xs.append(parsed[ix])
        ys.append(parsed[iy])
    if bad_lines:
        shown = ", ".join(str(line) for line in bad_lines[:20])
        suffix = "" if len(bad_lines) <= 20 else f" (and {len(bad_lines) - 20} more)"
        raise DataError(
            f"dataset {dataset.path} has missing or non-numeric values in "
            f"rows: {shown}{suffix}"
        )
    try:
        return Sample(np.array(xs), np.array(ys))
    except InputError as exc:
        raise DataError(f"dataset {dataset.path} unusable after filtering: {exc}") from exc


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------


def report_to_dict(report: TestReport) -> dict:
    """JSON-compatible report body; surface values are lossless hex."""
    cs = report.surfaces_used
    return {
        "decision": "reject" if report.reject_global else "accept",
        "eta": cs.eta,
        "alpha": cs.config.alpha,
        "n": cs.config.n,
        "k": cs.config.k,
        "cells": [
            {
                "s": hit.s,
                "t": hit.t,
                "sign": hit.sign,
                "value": hit.value,
                "threshold": hit.threshold,
            }
            for hit in report.significant_cells
        ],
        "tie_broken": report.tie_broken,
        "surface": [[float(v).hex() for v in row] for row in report.surface.cells],
    }


def _sign_matrix(report: TestReport) -> np.ndarray:
    signs = np.zeros_like(report.surface.cells)
    for hit in report.significant_cells:
        signs[hit.s - 1, hit.t - 1] = 1.0 if hit.sign == "positive" else -1.0
    return signs


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def _emit_report_plots(report: TestReport, sample: Sample, seed, prefix: str) -> list[str]:
    ranks = compute_ranks(sample, seed)
    paths = [f"{prefix}_scatter.svg", f"{prefix}_surface.svg", f"{prefix}_significant.svg"]
    try:
        emit_rank_scatter(ranks.r, ranks.s, paths[0], title="rank-transformed sample")
        emit_heatmap(
            HeatmapSpec(
                values=report.surface.cells,
                out_path=paths[1],
                title="quantile dependence surface",
            )
        )
        emit_heatmap(
            HeatmapSpec(
                values=_sign_matrix(report),
                out_path=paths[2],
                title="significant cells by sign",
            )
        )
    except OSError as exc:
        raise DataError(f"cannot write heatmaps with prefix {prefix}: {exc}") from exc
    return paths


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_calibrate(args) -> int:
    config = CalibrationConfig(
        n=args.n,
        k=args.k,
        alpha=args.alpha,
        replicates=args.reps,
        master_seed=args.seed,
    )
    ensemble = generate_null_ensemble(config)
    cs = calibrate_eta(ensemble, config.alpha)
    try:
        save_surfaces(cs, args.out)
    except OSError as exc:
        raise CacheError(f"cannot write surface cache {args.out}: {exc}") from exc
    print(f"calibrated n={config.n} k={config.k} alpha={config.alpha} replicates={config.replicates}")
    print(f"local level eta = {cs.eta:.6g}")
    print(f"achieved global size = {cs.achieved_global_size:.6g}")
    print(f"surfaces written to {args.out}")
    return 0


def _dataset_from_args(args) -> DatasetFile:
    columns = tuple(part.strip() for part in args.columns.split(","))
    if len(columns) != 2 or not all(columns):
        raise InputError("--columns must name exactly two columns, e.g. --columns x,y")
    delimiter = args.delimiter
    if delimiter == "\\t":
        delimiter = "\t"
    return DatasetFile(
        path=args.data,
        columns=columns,  # type: ignore[arg-type]
        delimiter=delimiter,
        header=not args.no_header,
        filter_nonzero=tuple(args.filter_nonzero or ()),
    )


def _finish_report(report: TestReport, sample: Sample, args) -> int:
    text = json.dumps(report_to_dict(report), indent=2) + "\n"
    if args.out:
        _write_text(args.out, text)
        print(f"report written to {args.out}")
    else:
        print(text, end="")
    if args.heatmap_prefix:
        for path in _emit_report_plots(report, sample, args.seed, args.heatmap_prefix):
            print(f"plot written to {path}")
    decision = "reject" if report.reject_global else "accept"
    print(
        f"decision: {decision} ({len(report.significant_cells)} significant cells, "
        f"eta={report.surfaces_used.eta:.6g}, alpha={report.surfaces_used.config.alpha})"
    )
    return 0


def _cmd_test(args) -> int:
    cs = load_surfaces(args.surfaces)
    sample = ingest_xy(_dataset_from_args(args))
    report = run_test(sample, cs, seed=args.seed)
    return _finish_report(report, sample, args)


def _cmd_diagnose(args) -> int:
    cs = load_surfaces(args.surfaces)
    raw = ingest_xy(_dataset_from_args(args))
    diag = fit_simple_ols(raw.x, raw.y)
    print(f"fit: slope={diag.slope:.6g} intercept={diag.intercept:.6g}")
    sample = Sample(diag.fitted, diag.studentized_residuals)
    report = run_test(sample, cs, seed=args.seed)
    return _finish_report(report, sample, args)


def _cmd_power(args) -> int:
    cs = load_surfaces(args.surfaces)
    try:
        with open(args.models, "r", encoding="utf-8") as fh:
            models = models_from_config(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read model config {args.models}: {exc}") from exc
    buffer = io.StringIO()
    writer = csvmod.writer(buffer, lineterminator="\n")
    writer.writerow(["model", "n", "k", "alpha", "repetitions", "power", "half_width"])
    for idx, model in enumerate(models):
        seed = np.random.SeedSequence(entropy=args.seed, spawn_key=(idx,))
        result = empirical_power(model, cs, args.reps, seed=seed)
        writer.writerow(
            [
                model.name,
                cs.config.n,
                cs.config.k,
                repr(cs.config.alpha),
                result.repetitions,
                repr(result.power),
                repr(result.mc_half_width),
            ]
        )
    if args.out:
        _write_text(args.out, buffer.getvalue())
        print(f"power results written to {args.out}")
    else:
        print(buffer.getvalue(), end="")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage problems must exit 1, not argparse's default 2
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="critsurf",
        description=(
            "Local independence testing with Monte-Carlo calibrated critical "
            "surfaces for the quantile dependence function."
        ),
    )
    parser.add_argument("--version", action="version", version=f"critsurf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cal = sub.add_parser("calibrate", help="build and cache critical surfaces")
    cal.add_argument("--n", type=int, required=True, help="sample size the surfaces are for")
    cal.add_argument("--k", type=int, default=None, help="grid size (default floor(sqrt(n)))")
    cal.add_argument("--alpha", type=float, default=0.05, help="global significance level")
    cal.add_argument("--reps", type=int, default=100_000, help="Monte-Carlo replicates")
    cal.add_argument("--seed", type=int, default=0, help="master seed")
    cal.add_argument("--out", required=True, help="surface cache path")
    cal.set_defaults(func=_cmd_calibrate)

    def add_data_flags(p, columns_help):
        p.add_argument("--data", required=True, help="CSV file with the observations")
        p.add_argument("--columns", required=True, help=columns_help)
        p.add_argument("--delimiter", default=",", help="field delimiter (default ','; use \\t for tabs)")
        p.add_argument("--no-header", action="store_true", help="file has no header row")
        p.add_argument(
            "--filter-nonzero",
            action="append",
            metavar="COLUMN",
            help="drop rows where this column is zero (repeatable; the column itself is not tested)",
        )
        p.add_argument("--surfaces", required=True, help="surface cache from 'calibrate'")
        p.add_argument("--out", default=None, help="report path (default: print to stdout)")
        p.add_argument("--heatmap-prefix", default=None, help="write PREFIX_{scatter,surface,significant}.svg")
        p.add_argument("--seed", type=int, default=0, help="tie-breaking seed")

    tst = sub.add_parser("test", help="test a dataset for local dependence")
    add_data_flags(tst, "the two columns to test, e.g. --columns buildings,contents")
    tst.set_defaults(func=_cmd_test)

    dia = sub.add_parser("diagnose", help="regression diagnostics: residuals vs fitted")
    add_data_flags(dia, "predictor and response columns, e.g. --columns horsepower,mpg")
    dia.set_defaults(func=_cmd_diagnose)

    pwr = sub.add_parser("power", help="empirical power study over model families")
    pwr.add_argument("--models", required=True, help="JSON model registry file")
    pwr.add_argument("--surfaces", required=True, help="surface cache from 'calibrate'")
    pwr.add_argument("--reps", type=int, default=1000, help="repetitions per model")
    pwr.add_argument("--seed", type=int, default=0, help="master seed")
    pwr.add_argument("--out", default=None, help="CSV output path (default: print to stdout)")
    pwr.set_defaults(func=_cmd_power)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except CacheError as exc:
        print(f"cache error: {exc}", file=sys.stderr)
        return 3
    except CritsurfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
