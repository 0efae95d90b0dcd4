"""Data ingestion/generation and the line-structured report serialization.

Data tables travel as plain CSV with header x1..xd,f and one row per grid
point.  Reports use a versioned, diff-friendly text schema (v1):

    phasefit-report v1
    [config]
    key = value
    [sensitivity]
    param = y1
    ...
    step = n=11 p=0.25 decision=accept
    [trim]
    ...
    [final]
    ...
    [telemetry]
    ...
    [end]

Sections are ordered and keys may repeat within a section; values are plain
strings (floats rendered with repr, so identical runs serialize to identical
bytes).  wall_seconds is the only line expected to differ between reruns.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import DataTable, DomainGrid, NoiseSpec
from .errors import GridDataError, ReportFormatError
from .expr import evaluate_on_grid, parse
from .trimmer import FitReport, TrimConfig

SCHEMA_TAG = "phasefit-report v1"


# ---------------------------------------------------------------------------
# Data tables
# ---------------------------------------------------------------------------

def generate(
    expression: str,
    dims: Iterable[int],
    noise: NoiseSpec = NoiseSpec(),
    seed: int | None = None,
) -> DataTable:
    """Evaluate a parameter-free expression over the grid and add noise.

    A seed argument overrides the one carried by the noise spec; identical
    inputs give identical tables.
    """
    dims = tuple(int(d) for d in dims)
    grid = DomainGrid(dims)
    ast = parse(expression, (len(dims), 0))
    if seed is not None:
        noise = NoiseSpec(kind=noise.kind, half_width=noise.half_width,
                          sigma=noise.sigma, seed=seed)
    values = evaluate_on_grid(ast, grid.coordinate_arrays(), ())
    values = values + noise.sample(grid.total_size)
    provenance = (
        f"generated expr={expression!r} dims={'x'.join(str(d) for d in dims)} "
        f"noise={noise.describe()} seed={noise.seed}"
    )
    return DataTable(grid, values, provenance=provenance)


def write_data_csv(table: DataTable, path: str) -> None:
    dims = table.grid.dims
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"x{j + 1}" for j in range(len(dims))] + ["f"])
        for i, point in enumerate(table.grid.points()):
            writer.writerow(list(point) + [int(table.values[i])])


def ingest_csv(path: str) -> DataTable:
    """Load a complete integer grid; duplicates, gaps and ragged rows are
    rejected with the offending row numbers/coordinates."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise GridDataError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[-1] != "f":
        raise GridDataError(f"{path}: header must be x1..xd,f, got {header}")
    d = len(header) - 1
    if header[:-1] != [f"x{j + 1}" for j in range(d)]:
        raise GridDataError(f"{path}: header must be x1..xd,f, got {header}")

    entries: dict[tuple[int, ...], int] = {}
    first_row_of: dict[tuple[int, ...], int] = {}
    maxima = [0] * d
    for row_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 1:
            raise GridDataError(f"{path}: row {row_no} has {len(row)} fields, expected {d + 1}")
        try:
            numbers = [int(cell.strip()) for cell in row]
        except ValueError:
            raise GridDataError(f"{path}: row {row_no} has a non-integer value: {row}")
        coords = tuple(numbers[:-1])
        if any(c < 0 for c in coords):
            raise GridDataError(f"{path}: row {row_no} has a negative coordinate {coords}")
        if coords in entries:
            raise GridDataError(
                f"{path}: duplicate grid point {coords} (rows {first_row_of[coords]} and {row_no})"
            )
        entries[coords] = numbers[-1]
        first_row_of[coords] = row_no
        maxima = [max(m, c) for m, c in zip(maxima, coords)]

    if not entries:
        raise GridDataError(f"{path}: no data rows")
    dims = tuple(m + 1 for m in maxima)
    grid = DomainGrid(dims)
    if len(entries) != grid.total_size:
        for point in itertools.product(*(range(n) for n in dims)):
            if point not in entries:
                raise GridDataError(
                    f"{path}: incomplete grid for inferred dims {dims}: missing point {point}"
                )
    values = np.empty(grid.total_size, dtype=np.int64)
    for i, point in enumerate(grid.points()):
        values[i] = entries[point]
    return DataTable(grid, values, provenance="ingested")


def write_surface_csv(rows, path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["r", "ystar", "p_zero", "w_low", "w_mid", "w_high"])
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# Run configuration and report documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorSpec:
    expression: str
    dims: tuple[int, ...]
    noise: NoiseSpec = NoiseSpec()

    def describe(self) -> str:
        dims = "x".join(str(d) for d in self.dims)
        return f"gen:{self.expression}|dims={dims}|noise={self.noise.describe()}|seed={self.noise.seed}"

    def build(self) -> DataTable:
        return generate(self.expression, self.dims, self.noise)


@dataclass(frozen=True)
class RunConfig:
    data: str | GeneratorSpec  # csv path or generator spec
    trial: str
    bits: tuple[tuple[str, int], ...]
    signed: tuple[str, ...] = ()
    trim: TrimConfig = field(default_factory=TrimConfig)
    seed: int = 0
    threads: int = 1
    report_path: str | None = None

    def data_description(self) -> str:
        return self.data.describe() if isinstance(self.data, GeneratorSpec) else str(self.data)


Section = tuple[str, tuple[tuple[str, str], ...]]


@dataclass(frozen=True)
class ReportDocument:
    """Serialization-level report: ordered sections of (key, value) lines."""

    sections: tuple[Section, ...]

    def section(self, name: str) -> list[tuple[str, str]]:
        for sec, lines in self.sections:
            if sec == name:
                return list(lines)
        return []

    def sections_named(self, name: str) -> list[tuple[tuple[str, str], ...]]:
        return [lines for sec, lines in self.sections if sec == name]

    def to_text(self) -> str:
        out = [SCHEMA_TAG]
        for name, lines in self.sections:
            out.append(f"[{name}]")
            for key, value in lines:
                out.append(f"{key} = {value}")
        out.append("[end]")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ReportDocument":
        lines = text.splitlines()
        if not lines or lines[0].strip() != SCHEMA_TAG:
            raise ReportFormatError(
                f"expected schema tag {SCHEMA_TAG!r}, got {lines[0]!r}" if lines
                else "empty report"
            )
        sections: list[tuple[str, list[tuple[str, str]]]] = []
        current: list[tuple[str, str]] | None = None
        ended = False
        for line_no, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            if line.startswith("["):
                if not line.endswith("]"):
                    raise ReportFormatError(f"line {line_no}: malformed section header")
                name = line[1:-1]
                if name == "end":
                    ended = True
                    break
                current = []
                sections.append((name, current))
                continue
            if current is None:
                raise ReportFormatError(f"line {line_no}: data before any section")
            key, sep, value = line.partition(" = ")
            if not sep:
                raise ReportFormatError(f"line {line_no}: expected 'key = value'")
            current.append((key, value))
        if not ended:
            raise ReportFormatError("missing [end] marker")
        return cls(tuple((name, tuple(lines)) for name, lines in sections))


def _space_text(signature) -> str:
    parts = []
    for lo, hi in signature:
        parts.append(f"[{lo},{hi}]" if lo != hi else str(lo))
    return " ".join(parts)


def build_report_document(
    config: RunConfig,
    report: FitReport,
    evaluations: int,
    wall_seconds: float,
) -> ReportDocument:
    sens = config.trim.sensitivity
    config_lines = (
        ("data", config.data_description()),
        ("trial", config.trial),
        ("bits", ",".join(f"{name}:{b}" for name, b in config.bits)),
        ("signed", ",".join(config.signed)),
        ("threshold", repr(config.trim.threshold)),
        ("band", f"{sens.band[0]!r},{sens.band[1]!r}"),
        ("mode", config.trim.effective_mode),
        ("shots", str(sens.effective_shots) if config.trim.effective_mode == "sampled" else "-"),
        ("initial_n", str(sens.initial_n)),
        ("seed", str(config.seed)),
        ("threads", str(config.threads)),
    )
    sections: list[Section] = [("config", config_lines)]
    for param, signature, outcome in report.sensitivity_traces:
        lines = [("param", param), ("space", _space_text(signature))]
        for step in outcome.trace:
            lines.append(("step", f"n={step.n_exp} p={step.estimate!r} decision={step.decision}"))
        lines.append(("verdict", outcome.verdict))
        sections.append(("sensitivity", tuple(lines)))
    for step in report.steps:
        lines = [
            ("param", step.param_name),
            ("space", _space_text(step.space_before)),
            ("n", str(step.n_exp)),
            ("p_zero", repr(step.p_zero)),
            ("kind", step.kind),
            ("probabilities", ",".join(repr(p) for p in step.probabilities)),
            ("choice", step.choice if step.choice is not None else "none"),
            ("active_bits", str(step.resulting_active_bits)),
        ]
        sections.append(("trim", tuple(lines)))
    final_lines = []
    for fld in report.final_space.fields:
        lo, hi = fld.value_range()
        shown = str(lo) if lo == hi else f"[{lo},{hi}]"
        final_lines.append((fld.name, shown))
    final_lines.append(("termination", report.termination))
    sections.append(("final", tuple(final_lines)))
    sections.append((
        "telemetry",
        (("g_evaluations", str(evaluations)), ("wall_seconds", repr(wall_seconds))),
    ))
    return ReportDocument(tuple(sections))


def strip_volatile_lines(text: str) -> str:
    """Drop timing lines so reruns of the same config compare byte-equal."""
    kept = [line for line in text.splitlines() if not line.startswith("wall_seconds")]
    return "\n".join(kept) + "\n"
