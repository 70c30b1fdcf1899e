"""Quarterly panel ingestion: delimited-file parsing and universe filtering.

Input files are UTF-8 delimited text (comma or tab, auto-detected from the
header), optionally gzip-compressed.  Each row is one establishment in one
quarter.  Malformed rows go to a reject log; too many rejects is a hard
failure because it usually means the schema mapping is wrong, not the data.
"""

import csv
import gzip
import io
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import IngestError
from .quarters import parse_quarter

_NAICS_RE = re.compile(r"^[0-9]{2,6}$")

SECTOR_PRIVATE = "private"
SECTOR_PUBLIC = "public"

#: Canonical record fields that must be mappable from the input header.
REQUIRED_COLUMNS = ("establishment_id", "quarter", "employment", "naics")
#: Optional fields; absent columns fall back to private / single-unit / no-change.
OPTIONAL_COLUMNS = ("sector_kind", "multi_unit", "ownership_change")

#: Two-digit sector prefixes of the service-providing range (utilities excluded).
SERVICE_PROVIDING_PREFIXES = tuple(str(code) for code in range(42, 82))
#: Private households, plus the utilities sector.
DEFAULT_EXCLUDED_NAICS = ("814110", "22")


@dataclass(frozen=True, slots=True)
class QuarterlyRecord:
    """One establishment in one quarter."""

    establishment_id: str
    quarter: int
    employment: int
    naics: str
    sector_kind: str = SECTOR_PRIVATE
    multi_unit: bool = False
    ownership_change: bool = False


@dataclass(frozen=True)
class UniverseFilter:
    """Which records belong to the analysis universe.

    ``exclude_naics`` entries are matched as code prefixes, so ``"22"``
    drops the whole utilities sector while ``"814110"`` drops exactly
    private households.
    """

    include_naics_prefixes: tuple = SERVICE_PROVIDING_PREFIXES
    exclude_naics: tuple = DEFAULT_EXCLUDED_NAICS
    exclude_public: bool = True
    exclude_multi_unit: bool = True

    def __post_init__(self):
        if not self.include_naics_prefixes:
            raise ValueError("include_naics_prefixes must be non-empty")


@dataclass
class RejectEntry:
    line_no: int
    reason: str


_TRUE_VALUES = {"1", "true", "t", "yes", "y"}
_FALSE_VALUES = {"0", "false", "f", "no", "n", ""}


def _parse_flag(text, name):
    value = text.strip().lower()
    if value in _TRUE_VALUES:
        return True
    if value in _FALSE_VALUES:
        return False
    raise ValueError(f"bad {name} flag: {text!r}")


def _parse_row(row, colidx):
    """Build one record from a csv row; raises ValueError on any bad field."""
    def get(name, default=None):
        idx = colidx.get(name)
        if idx is None or idx >= len(row):
            return default
        return row[idx]

    establishment_id = get("establishment_id", "").strip()
    if not establishment_id:
        raise ValueError("empty establishment_id")

    quarter = parse_quarter(get("quarter", ""))

    raw_emp = get("employment", "").strip()
    try:
        employment = int(raw_emp)
    except ValueError:
        raise ValueError(f"employment not an integer: {raw_emp!r}") from None
    if employment < 0:
        raise ValueError(f"negative employment: {employment}")

    naics = get("naics", "").strip()
    if not _NAICS_RE.match(naics):
        raise ValueError(f"bad naics code: {naics!r}")

    sector = get("sector_kind")
    if sector is None or not sector.strip():
        sector_kind = SECTOR_PRIVATE
    else:
        sector_kind = sector.strip().lower()
        if sector_kind not in (SECTOR_PRIVATE, SECTOR_PUBLIC):
            raise ValueError(f"bad sector_kind: {sector!r}")

    multi_unit = _parse_flag(get("multi_unit", "0") or "0", "multi_unit")
    ownership_change = _parse_flag(get("ownership_change", "0") or "0", "ownership_change")

    return QuarterlyRecord(
        establishment_id=establishment_id,
        quarter=quarter,
        employment=employment,
        naics=naics,
        sector_kind=sector_kind,
        multi_unit=multi_unit,
        ownership_change=ownership_change,
    )


def _parse_chunk(lines, first_line_no, delimiter, colidx):
    """Parse a block of data lines.  Pure function, safe for worker processes."""
    records = []
    rejects = []
    reader = csv.reader(lines, delimiter=delimiter)
    for offset, row in enumerate(reader):
        line_no = first_line_no + offset
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            records.append(_parse_row(row, colidx))
        except ValueError as exc:
            rejects.append(RejectEntry(line_no=line_no, reason=str(exc)))
    return records, rejects


def _open_text(source):
    """Open a path or binary stream as UTF-8 text, transparently un-gzipping."""
    if hasattr(source, "read"):
        raw = source.read()
        if isinstance(raw, str):
            return io.StringIO(raw)
        if raw[:2] == b"\x1f\x8b":
            raw = gzip.decompress(raw)
        return io.StringIO(raw.decode("utf-8"))
    with open(source, "rb") as fh:
        magic = fh.read(2)
    opener = gzip.open if magic == b"\x1f\x8b" else open
    return opener(source, "rt", encoding="utf-8", newline="")


def _detect_delimiter(header_line):
    return "\t" if header_line.count("\t") > header_line.count(",") else ","


def _column_index(header, schema):
    """Map canonical field names to column positions via the schema column map."""
    schema = dict(schema or {})
    positions = {name.strip(): i for i, name in enumerate(header)}
    colidx = {}
    missing = []
    for canonical in REQUIRED_COLUMNS + OPTIONAL_COLUMNS:
        file_column = schema.get(canonical, canonical)
        if file_column in positions:
            colidx[canonical] = positions[file_column]
        elif canonical in REQUIRED_COLUMNS:
            missing.append(file_column)
    if missing:
        raise IngestError(f"header is missing required columns: {', '.join(missing)}")
    return colidx


def parse_records(source, schema=None, reject_threshold=0.01, workers=1):
    """Parse delimited panel rows into records.

    Returns ``(records, rejects)``.  Raises :class:`IngestError` when the
    reject fraction exceeds ``reject_threshold`` or when two rows carry the
    same (establishment_id, quarter) key.  With ``workers > 1`` the data
    lines are parsed in partitions; the record multiset is identical to a
    serial parse.
    """
    with _open_text(source) as fh:
        header_line = fh.readline()
        if not header_line:
            raise IngestError("empty input: no header row")
        delimiter = _detect_delimiter(header_line)
        header = next(csv.reader([header_line], delimiter=delimiter))
        colidx = _column_index(header, schema)
        lines = fh.readlines()

    if workers > 1 and len(lines) > 1:
        chunk_size = (len(lines) + workers - 1) // workers
        chunks = [
            (lines[start:start + chunk_size], 2 + start, delimiter, colidx)
            for start in range(0, len(lines), chunk_size)
        ]
        records, rejects = [], []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk_records, chunk_rejects in pool.map(_parse_chunk, *zip(*chunks)):
                records.extend(chunk_records)
                rejects.extend(chunk_rejects)
    else:
        records, rejects = _parse_chunk(lines, 2, delimiter, colidx)

    total_rows = len(records) + len(rejects)
    if total_rows and len(rejects) / total_rows > reject_threshold:
        raise IngestError(
            f"{len(rejects)} of {total_rows} rows rejected, above the "
            f"{reject_threshold:.1%} threshold; first reject: "
            f"line {rejects[0].line_no}: {rejects[0].reason}"
        )

    seen = set()
    for record in records:
        key = (record.establishment_id, record.quarter)
        if key in seen:
            raise IngestError(
                f"duplicate (establishment_id, quarter) row: {key[0]!r} at "
                f"quarter {key[1]} - refusing to deduplicate corrupted input"
            )
        seen.add(key)

    return records, rejects


def write_reject_log(path, rejects):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["line_no", "reason"])
        for entry in rejects:
            writer.writerow([entry.line_no, entry.reason])


def _naics_in_universe(naics, universe):
    if not any(naics.startswith(p) for p in universe.include_naics_prefixes):
        return False
    return not any(naics.startswith(p) for p in universe.exclude_naics)


def filter_universe(records, universe=None):
    """Restrict records to the analysis universe.

    NAICS checks apply per record.  The public-sector and multi-unit flags
    contaminate the whole establishment: one flagged quarter drops every
    quarter of that establishment.
    """
    universe = universe or UniverseFilter()
    contaminated = set()
    for record in records:
        if universe.exclude_multi_unit and record.multi_unit:
            contaminated.add(record.establishment_id)
        elif universe.exclude_public and record.sector_kind == SECTOR_PUBLIC:
            contaminated.add(record.establishment_id)
    return [
        record
        for record in records
        if record.establishment_id not in contaminated
        and _naics_in_universe(record.naics, universe)
    ]


def write_records(path, records):
    """Write records in the canonical ingestion format (quarter as YYYYQn)."""
    from .quarters import format_quarter

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(REQUIRED_COLUMNS) + list(OPTIONAL_COLUMNS))
        for r in records:
            writer.writerow([
                r.establishment_id,
                format_quarter(r.quarter),
                r.employment,
                r.naics,
                r.sector_kind,
                int(r.multi_unit),
                int(r.ownership_change),
            ])
