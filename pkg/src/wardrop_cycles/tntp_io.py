"""Reading TNTP network/trips files and writing result tables.

The TNTP format is the plain-text layout used by the Transportation Networks
repository: a ``<TAG> value`` metadata block closed by ``<END OF METADATA>``
followed by ``;``-terminated records, with ``~`` starting a comment.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

__all__ = [
    "TNTPError",
    "MalformedHeader",
    "LinkCountMismatch",
    "NonNumericField",
    "NodeIdOutOfRange",
    "InvalidLinkParameter",
    "MalformedOriginBlock",
    "NegativeDemand",
    "TotalFlowMismatch",
    "ExtraLinkFields",
    "SinkWriteFailure",
    "RawLink",
    "RawNetworkFile",
    "DemandTable",
    "parse_network",
    "parse_trips",
    "read_network",
    "read_trips",
    "format_network",
    "format_trips",
    "ReportTable",
    "TABLE_COLUMNS",
    "write_report",
    "format_float",
]


class TNTPError(ValueError):
    """Base class for TNTP parse errors."""


class MalformedHeader(TNTPError):
    pass


class LinkCountMismatch(TNTPError):
    pass


class NonNumericField(TNTPError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NodeIdOutOfRange(TNTPError):
    pass


class InvalidLinkParameter(TNTPError):
    pass


class MalformedOriginBlock(TNTPError):
    pass


class NegativeDemand(TNTPError):
    pass


class TotalFlowMismatch(UserWarning):
    """Parsed demand does not add up to the declared ``<TOTAL OD FLOW>``."""


class ExtraLinkFields(UserWarning):
    """A link record carries more than the ten standard fields."""


class SinkWriteFailure(OSError):
    pass


_TAG_RE = re.compile(r"^\s*<([^>]+)>\s*(.*?)\s*$")
_LINK_FIELDS = (
    "init_node",
    "term_node",
    "capacity",
    "length",
    "free_flow_time",
    "b",
    "power",
    "speed",
    "toll",
    "link_type",
)


@dataclass(frozen=True)
class RawLink:
    init_node: int
    term_node: int
    capacity: float
    length: float
    free_flow_time: float
    b: float
    power: float
    speed: float = 0.0
    toll: float = 0.0
    link_type: float = 1.0


@dataclass(frozen=True)
class RawNetworkFile:
    node_count: int
    zone_count: int
    first_through_node: int
    links: tuple[RawLink, ...]


@dataclass
class DemandTable:
    """OD demand keyed by ``(origin, destination)``.

    Diagonal entries are kept (so totals reconcile with the file) but are
    excluded by :meth:`assignable`.
    """

    entries: dict[tuple[int, int], float] = field(default_factory=dict)
    zone_count: int | None = None
    declared_total: float | None = None

    @property
    def total(self) -> float:
        # fixed (sorted) summation order so repeated calls agree bit for bit
        return float(sum(self.entries[k] for k in sorted(self.entries)))

    @property
    def intrazonal(self) -> dict[tuple[int, int], float]:
        return {k: v for k, v in self.entries.items() if k[0] == k[1]}

    @property
    def intrazonal_total(self) -> float:
        return float(sum(v for k, v in sorted(self.intrazonal.items())))

    def assignable(self) -> dict[tuple[int, int], float]:
        """Positive off-diagonal demand, in sorted OD order."""
        return {k: self.entries[k] for k in sorted(self.entries) if k[0] != k[1] and self.entries[k] > 0}

    @property
    def total_mismatch(self) -> bool:
        if self.declared_total is None:
            return False
        return not math.isclose(self.total, self.declared_total, rel_tol=1e-6, abs_tol=1e-9)


def _read_text(text: str | TextIO) -> str:
    return text if isinstance(text, str) else text.read()


def _split_metadata(text: str) -> tuple[dict[str, str], list[tuple[int, str]]]:
    """Return (metadata tags, remaining (lineno, line) body)."""
    meta: dict[str, str] = {}
    lines = text.splitlines()
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped or stripped.startswith("~"):
            continue
        m = _TAG_RE.match(stripped)
        if m is None:
            raise MalformedHeader(f"line {i + 1}: expected a <TAG> metadata line, got {stripped[:40]!r}")
        tag = " ".join(m.group(1).upper().split())
        if tag == "END OF METADATA":
            return meta, [(j + 1, lines[j]) for j in range(i + 1, len(lines))]
        if tag in meta:
            raise MalformedHeader(f"line {i + 1}: duplicate metadata tag <{tag}>")
        meta[tag] = m.group(2)
    raise MalformedHeader("missing <END OF METADATA>")


def _meta_int(meta: dict[str, str], tag: str) -> int:
    if tag not in meta:
        raise MalformedHeader(f"missing metadata tag <{tag}>")
    try:
        value = float(meta[tag].split("~")[0])
    except ValueError:
        raise MalformedHeader(f"<{tag}> is not numeric: {meta[tag]!r}") from None
    if value != int(value):
        raise MalformedHeader(f"<{tag}> is not an integer: {meta[tag]!r}")
    return int(value)


def _strip_comment(line: str) -> str:
    return line.split("~", 1)[0]


def parse_network(text: str | TextIO) -> RawNetworkFile:
    """Parse a TNTP ``_net`` file.

    Raises MalformedHeader, LinkCountMismatch, NonNumericField,
    NodeIdOutOfRange or InvalidLinkParameter.
    """
    meta, body = _split_metadata(_read_text(text))
    node_count = _meta_int(meta, "NUMBER OF NODES")
    zone_count = _meta_int(meta, "NUMBER OF ZONES")
    first_thru = _meta_int(meta, "FIRST THRU NODE")
    link_count = _meta_int(meta, "NUMBER OF LINKS")
    if not node_count >= zone_count >= 1:
        raise MalformedHeader(f"need node_count >= zone_count >= 1, got {node_count}, {zone_count}")

    # records may in principle span lines; join the body and split on ';'
    links: list[RawLink] = []
    pending: list[str] = []
    pending_line = 0
    for lineno, line in body:
        content = _strip_comment(line)
        while content.strip():
            head, sep, content = content.partition(";")
            if head.strip():
                if not pending:
                    pending_line = lineno
                pending.extend(head.split())
            if not sep:
                break
            if pending:
                links.append(_make_link(pending, pending_line, node_count))
                pending = []
    if pending:
        raise NonNumericField("link record not terminated by ';'", pending_line)
    if len(links) != link_count:
        raise LinkCountMismatch(f"<NUMBER OF LINKS> says {link_count}, file has {len(links)} records")
    return RawNetworkFile(node_count, zone_count, first_thru, tuple(links))


def _make_link(tokens: list[str], lineno: int, node_count: int) -> RawLink:
    if len(tokens) < len(_LINK_FIELDS):
        raise NonNumericField(f"link record has {len(tokens)} fields, need {len(_LINK_FIELDS)}", lineno)
    if len(tokens) > len(_LINK_FIELDS):
        warnings.warn(f"line {lineno}: ignoring {len(tokens) - 10} extra link fields", ExtraLinkFields, stacklevel=4)
    values = []
    for name, tok in zip(_LINK_FIELDS, tokens):
        try:
            values.append(float(tok))
        except ValueError:
            raise NonNumericField(f"field {name} is not numeric: {tok!r}", lineno) from None
    init, term = values[0], values[1]
    for node in (init, term):
        if node != int(node) or not 1 <= node <= node_count:
            raise NodeIdOutOfRange(f"line {lineno}: node id {tok_fmt(node)} outside [1, {node_count}]")
    link = RawLink(int(init), int(term), *values[2:])
    if not link.capacity > 0:
        raise InvalidLinkParameter(f"line {lineno}: capacity must be positive")
    if link.free_flow_time < 0 or link.power < 0 or link.b < 0:
        raise InvalidLinkParameter(f"line {lineno}: free_flow_time, b and power must be nonnegative")
    return link


def tok_fmt(x: float) -> str:
    return str(int(x)) if x == int(x) else repr(x)


def parse_trips(text: str | TextIO) -> DemandTable:
    """Parse a TNTP ``_trips`` file into a DemandTable.

    A mismatch against ``<TOTAL OD FLOW>`` emits a TotalFlowMismatch warning
    and sets ``total_mismatch``; it is not fatal.
    """
    meta, body = _split_metadata(_read_text(text))
    zone_count = _meta_int(meta, "NUMBER OF ZONES") if "NUMBER OF ZONES" in meta else None
    declared = None
    if "TOTAL OD FLOW" in meta:
        try:
            declared = float(meta["TOTAL OD FLOW"].split("~")[0])
        except ValueError:
            raise MalformedHeader(f"<TOTAL OD FLOW> is not numeric: {meta['TOTAL OD FLOW']!r}") from None

    entries: dict[tuple[int, int], float] = {}
    origin: int | None = None
    for lineno, line in body:
        content = _strip_comment(line).strip()
        if not content:
            continue
        if content.lower().startswith("origin"):
            parts = content.split()
            if len(parts) != 2:
                raise MalformedOriginBlock(f"line {lineno}: expected 'Origin <zone>', got {content!r}")
            try:
                origin = int(parts[1])
            except ValueError:
                raise MalformedOriginBlock(f"line {lineno}: bad origin id {parts[1]!r}") from None
            continue
        if origin is None:
            raise MalformedOriginBlock(f"line {lineno}: demand entry before any 'Origin' line")
        for chunk in content.split(";"):
            if not chunk.strip():
                continue
            dest_s, colon, flow_s = chunk.partition(":")
            if not colon:
                raise MalformedOriginBlock(f"line {lineno}: expected 'dest : flow', got {chunk.strip()!r}")
            try:
                dest = int(dest_s)
                flow = float(flow_s)
            except ValueError:
                raise NonNumericField(f"bad demand entry {chunk.strip()!r}", lineno) from None
            if flow < 0:
                raise NegativeDemand(f"line {lineno}: negative demand {flow} for ({origin}, {dest})")
            if zone_count is not None and not (1 <= origin <= zone_count and 1 <= dest <= zone_count):
                raise NodeIdOutOfRange(f"line {lineno}: zone outside [1, {zone_count}]")
            entries[(origin, dest)] = entries.get((origin, dest), 0.0) + flow

    table = DemandTable(entries, zone_count, declared)
    if table.total_mismatch:
        warnings.warn(
            f"parsed total {table.total} differs from declared <TOTAL OD FLOW> {declared}",
            TotalFlowMismatch,
            stacklevel=2,
        )
    return table


def read_network(path: str | os.PathLike) -> RawNetworkFile:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh)


def read_trips(path: str | os.PathLike) -> DemandTable:
    with open(path, encoding="utf-8") as fh:
        return parse_trips(fh)


def format_network(net: RawNetworkFile) -> str:
    """Serialize back to TNTP text; ``parse_network`` inverts this exactly."""
    out = [
        f"<NUMBER OF ZONES> {net.zone_count}",
        f"<NUMBER OF NODES> {net.node_count}",
        f"<FIRST THRU NODE> {net.first_through_node}",
        f"<NUMBER OF LINKS> {len(net.links)}",
        "<END OF METADATA>",
        "",
        "~\t" + "\t".join(_LINK_FIELDS) + "\t;",
    ]
    for link in net.links:
        vals = [getattr(link, name) for name in _LINK_FIELDS]
        out.append("\t" + "\t".join(tok_fmt(v) for v in vals) + "\t;")
    return "\n".join(out) + "\n"


def format_trips(table: DemandTable) -> str:
    out = []
    if table.zone_count is not None:
        out.append(f"<NUMBER OF ZONES> {table.zone_count}")
    out.append(f"<TOTAL OD FLOW> {tok_fmt(table.total)}")
    out.append("<END OF METADATA>")
    origins = sorted({o for o, _ in table.entries})
    for o in origins:
        out.append("")
        out.append(f"Origin {o}")
        dests = sorted(d for oo, d in table.entries if oo == o)
        out.append(" ".join(f"{d} : {tok_fmt(table.entries[(o, d)])};" for d in dests))
    return "\n".join(out) + "\n"


# -- result tables ---------------------------------------------------------

TABLE_COLUMNS: dict[str, tuple[str, ...]] = {
    "poa_summary": ("city", "total_ue_minutes", "total_so_minutes", "poa"),
    "od_summary": ("origin", "destination", "q", "n_paths", "t_hat_so", "t_ue", "violated"),
    "cycle_lengths": ("origin", "destination", "q", "n_paths", "full", "gcd", "partition_max", "residual", "wardropian"),
    "cycle_length_stats": ("method", "count", "max", "mean", "median", "std", "p75", "p95"),
    "inequity_series": ("origin", "destination", "day", "I", "I_bar"),
    "inequity_distribution": ("metric", "day", "I_bar"),
    "inequity_ratios": ("city", "sum_I1", "ratio_5", "ratio_10", "ratio_20", "ratio_50"),
    "simulation_aggregate": ("origin", "destination", "day", "I", "I_bar", "min_mean", "max_mean"),
    "simulation_detail": ("origin", "destination", "day", "driver", "path", "deviation", "cumulative"),
    "rota": ("day", "driver", "path"),
}


@dataclass
class ReportTable:
    """One result table: ``kind`` selects the fixed column order."""

    kind: str
    rows: list[dict] = field(default_factory=list)
    name: str | None = None

    def __post_init__(self):
        if self.kind not in TABLE_COLUMNS:
            raise ValueError(f"unknown table kind {self.kind!r}; known: {sorted(TABLE_COLUMNS)}")

    @property
    def columns(self) -> tuple[str, ...]:
        return TABLE_COLUMNS[self.kind]

    @property
    def filename(self) -> str:
        return f"{self.name or self.kind}.csv"


def format_float(x) -> str:
    """Render a cell; floats get 6 significant digits."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".6g")
    if hasattr(x, "__float__") and not isinstance(x, str):
        return format(float(x), ".6g")
    return str(x)


def table_to_csv(table: ReportTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(table.columns)
    for row in table.rows:
        missing = set(table.columns) - set(row)
        if missing:
            raise KeyError(f"{table.kind} row lacks columns {sorted(missing)}")
        writer.writerow([format_float(row[c]) for c in table.columns])
    return buf.getvalue()


def write_report(
    tables: Iterable[ReportTable],
    destination: str | os.PathLike,
    settings: dict | None = None,
    manifest_name: str = "manifest.json",
) -> dict:
    """Write each table as RFC-4180 CSV under ``destination`` plus a JSON manifest.

    Returns the manifest dict. With no tables and no settings the manifest is
    ``{}`` and no CSV is written.
    """
    tables = list(tables)
    dest = Path(destination)
    manifest: dict = {}
    if settings:
        manifest["settings"] = settings
    if tables:
        manifest["tables"] = {t.filename: {"kind": t.kind, "columns": list(t.columns), "rows": len(t.rows)} for t in tables}
    try:
        dest.mkdir(parents=True, exist_ok=True)
        for t in tables:
            with open(dest / t.filename, "w", encoding="utf-8", newline="") as fh:
                fh.write(table_to_csv(t))
        with open(dest / manifest_name, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise SinkWriteFailure(f"cannot write report to {dest}: {exc}") from exc
    return manifest
