"""Survey and rich-list ingestion, wealth-to-income conversion, and the
gap-eliminating merge.

Rich-list wealth is turned into "effective income" as the year-over-year
difference (positive-only), converted at a caller-supplied exchange rate,
scaled by the factor that removes the horizontal gap in the joint CCDF,
and concatenated with the survey incomes.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .empirical import IncomeSample, Source
from .errors import ParseError, PreconditionError

__all__ = [
    "WealthRecord",
    "MergeReport",
    "ConversionResult",
    "LoadResult",
    "load_samples",
    "incomes_from_wealth",
    "find_scale_factor",
    "gap_score",
    "merge",
]


@dataclass(frozen=True)
class WealthRecord:
    """Wealth of one rich-list entity across the years it was ranked."""

    entity_id: str
    wealth_by_year: dict
    currency: str = "EUR"

    def __post_init__(self):
        if not self.entity_id:
            raise PreconditionError("entity_id must be non-empty")
        if len(self.wealth_by_year) < 2:
            raise PreconditionError(
                f"entity {self.entity_id!r}: need wealth in at least two years"
            )
        for year, w in self.wealth_by_year.items():
            if not (isinstance(year, int) and np.isfinite(w) and w > 0):
                raise PreconditionError(
                    f"entity {self.entity_id!r}: invalid wealth entry {year!r}: {w!r}"
                )


@dataclass(frozen=True)
class MergeReport:
    scale_factor: float
    overlap_window: tuple
    n_survey: int
    n_richlist_kept: int
    n_richlist_dropped_nonpositive: int
    exchange_rate_used: float

    def __post_init__(self):
        if not self.scale_factor > 0:
            raise PreconditionError("scale factor must be positive")
        if min(self.n_survey, self.n_richlist_kept,
               self.n_richlist_dropped_nonpositive) < 0:
            raise PreconditionError("counts must be non-negative")


@dataclass(frozen=True)
class ConversionResult:
    """incomes_from_wealth output: kept samples plus the drop accounting
    the merge report needs."""

    samples: list
    n_dropped_nonpositive: int
    n_skipped_missing_year: int


@dataclass(frozen=True)
class LoadResult:
    """Typed rows plus row-level error accumulation (line numbers kept)."""

    kind: str
    samples: list = field(default_factory=list)
    records: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    n_rows: int = 0
    notices: list = field(default_factory=list)


def _schema_get(schema, key, default):
    v = schema.get(key, default)
    return v if v is not None else default


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def load_samples(path, schema) -> LoadResult:
    """Parse a delimited text file under a key-value schema.

    schema keys: kind = survey | wealth; column names via income_column,
    id_column, year_column, wealth_column, currency_column, source_column;
    max_malformed_fraction (default 0.01). Malformed rows are collected
    with their line numbers; more than the allowed fraction aborts.
    """
    kind = _schema_get(schema, "kind", "survey").strip().lower()
    if kind not in ("survey", "wealth"):
        raise ParseError(f"unknown schema kind {kind!r}")
    try:
        max_bad = float(_schema_get(schema, "max_malformed_fraction", "0.01"))
    except ValueError as exc:
        raise ParseError(f"bad max_malformed_fraction: {exc}") from exc
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        return LoadResult(kind=kind)
    delim = _sniff_delimiter(lines[0])
    rows = list(csv.reader(lines, delimiter=delim))
    header = [h.strip() for h in rows[0]]
    col = {name: i for i, name in enumerate(header)}

    def col_idx(key, default, required):
        name = _schema_get(schema, key, default).strip()
        if name in col:
            return col[name]
        if required:
            raise ParseError(f"{path}: missing required column {name!r}")
        return None

    errors: list = []
    notices: list = []
    n_rows = 0
    if kind == "survey":
        i_income = col_idx("income_column", "income", True)
        i_year = col_idx("year_column", "year", False)
        i_source = col_idx("source_column", "source", False)
        samples = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not any(cell.strip() for cell in row):
                continue
            n_rows += 1
            try:
                income = float(row[i_income])
                if not math.isfinite(income):
                    raise ValueError("income not finite")
                if income <= 0:
                    raise ValueError("income must be positive")
                year = int(row[i_year]) if i_year is not None and row[i_year].strip() else None
                source = Source.SURVEY
                if i_source is not None and row[i_source].strip():
                    source = Source(row[i_source].strip().lower())
                samples.append(IncomeSample(income=income, source=source, year=year))
            except (ValueError, IndexError, PreconditionError) as exc:
                errors.append((lineno, f"{exc}"))
        result = LoadResult(kind=kind, samples=samples, errors=errors,
                            n_rows=n_rows, notices=notices)
    else:
        i_id = col_idx("id_column", "id", True)
        i_year = col_idx("year_column", "year", True)
        i_wealth = col_idx("wealth_column", "wealth", True)
        i_cur = col_idx("currency_column", "currency", False)
        by_id: dict = {}
        currency_of: dict = {}
        for lineno, row in enumerate(rows[1:], start=2):
            if not any(cell.strip() for cell in row):
                continue
            n_rows += 1
            try:
                ent = row[i_id].strip()
                if not ent:
                    raise ValueError("empty id")
                year = int(row[i_year])
                wealth = float(row[i_wealth])
                if not (math.isfinite(wealth) and wealth > 0):
                    raise ValueError("wealth must be positive and finite")
                cur = row[i_cur].strip() if i_cur is not None else "EUR"
                if ent in currency_of and currency_of[ent] != cur:
                    raise ValueError(f"currency mismatch for id {ent!r}")
                if year in by_id.get(ent, {}):
                    raise ValueError(f"duplicate year {year} for id {ent!r}")
                currency_of.setdefault(ent, cur)
                by_id.setdefault(ent, {})[year] = wealth
            except (ValueError, IndexError) as exc:
                errors.append((lineno, f"{exc}"))
        records = []
        for ent, wy in by_id.items():
            if len(wy) < 2:
                notices.append(f"entity {ent!r} has a single ranked year; skipped")
                continue
            records.append(WealthRecord(ent, wy, currency_of[ent]))
        for note in notices:
            warnings.warn(note)
        result = LoadResult(kind=kind, records=records, errors=errors,
                            n_rows=n_rows, notices=notices)
    if n_rows and len(errors) / n_rows > max_bad:
        head = "; ".join(f"line {ln}: {msg}" for ln, msg in errors[:5])
        raise ParseError(
            f"{path}: {len(errors)}/{n_rows} malformed rows "
            f"(limit {max_bad:.2%}): {head}"
        )
    return result


def incomes_from_wealth(records, year_from: int, year_to: int, fx: float) -> ConversionResult:
    """Effective income = (wealth[year_to] - wealth[year_from]) * fx.

    Non-positive differences are dropped and counted; records missing
    either year are skipped with a notice.
    """
    if not fx > 0:
        raise PreconditionError("exchange rate fx must be positive")
    samples = []
    dropped = 0
    skipped = 0
    for rec in records:
        wy = rec.wealth_by_year
        if year_from not in wy or year_to not in wy:
            warnings.warn(
                f"entity {rec.entity_id!r} missing year "
                f"{year_from if year_from not in wy else year_to}; skipped"
            )
            skipped += 1
            continue
        diff = (wy[year_to] - wy[year_from]) * fx
        if diff <= 0:
            dropped += 1
            continue
        samples.append(IncomeSample(income=diff, source=Source.RICHLIST, year=year_to))
    return ConversionResult(samples, dropped, skipped)


def gap_score(incomes: np.ndarray) -> float:
    """Largest log-ratio between consecutive order statistics inside the
    top decile; this is the width of any horizontal CCDF segment there."""
    x = np.sort(np.asarray(incomes, dtype=float))
    if np.any(x <= 0):
        raise PreconditionError("gap score needs positive incomes")
    k = max(2, math.ceil(len(x) / 10))
    top = np.log(x[-k:])
    return float(np.max(np.diff(top)))


def _incomes(samples) -> np.ndarray:
    seq = list(samples)
    if seq and isinstance(seq[0], IncomeSample):
        return np.array([s.income for s in seq], dtype=float)
    return np.asarray(seq, dtype=float)


def find_scale_factor(survey, richlist) -> float:
    """Factor f applied to rich-list incomes that removes the horizontal
    gap of the joint CCDF.

    Grid search over 400 log-spaced factors in [min(survey)/max(richlist), 1],
    then golden-section refinement of the best bracket; ties go to the
    larger factor. With no initial gap the factor is 1.
    """
    s = _incomes(survey)
    r = _incomes(richlist)
    if len(s) == 0 or len(r) == 0:
        raise PreconditionError("both survey and rich-list samples are required")
    if np.any(s <= 0) or np.any(r <= 0):
        raise PreconditionError("scale-factor search needs positive incomes")
    if s.max() >= r.min():
        return 1.0

    def score(f: float) -> float:
        return gap_score(np.concatenate([s, r * f]))

    f_lo = s.min() / r.max()
    grid = np.geomspace(f_lo, 1.0, 400)
    best_f, best_score = None, math.inf
    scores = np.empty(len(grid))
    for i, f in enumerate(grid):
        scores[i] = score(float(f))
        if scores[i] <= best_score:
            best_f, best_score = float(f), float(scores[i])
    i_best = int(np.argwhere(grid == best_f)[-1][0])
    lo = math.log(grid[max(i_best - 1, 0)])
    hi = math.log(grid[min(i_best + 1, len(grid) - 1)])
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = score(math.exp(c)), score(math.exp(d))
    for _ in range(60):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = score(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = score(math.exp(d))
    f_gold = math.exp((a + b) / 2.0)
    s_gold = score(f_gold)
    if s_gold < best_score or (s_gold == best_score and f_gold > best_f):
        return f_gold
    return best_f


def merge(survey, richlist, f: float, *, n_richlist_dropped_nonpositive: int = 0,
          exchange_rate_used: float = 1.0):
    """Concatenate survey samples with f-scaled rich-list samples.

    Provenance tags and years are preserved; only the rich-list income
    values are multiplied by f.
    """
    if not f > 0:
        raise PreconditionError("scale factor must be positive")
    survey = list(survey)
    richlist = list(richlist)
    scaled = [
        IncomeSample(income=rs.income * f, source=rs.source, year=rs.year)
        for rs in richlist
    ]
    merged = survey + scaled
    if survey and scaled:
        window = (
            float(min(x.income for x in scaled)),
            float(max(x.income for x in survey)),
        )
    else:
        window = (math.nan, math.nan)
    report = MergeReport(
        scale_factor=float(f),
        overlap_window=window,
        n_survey=len(survey),
        n_richlist_kept=len(scaled),
        n_richlist_dropped_nonpositive=n_richlist_dropped_nonpositive,
        exchange_rate_used=exchange_rate_used,
    )
    return merged, report
