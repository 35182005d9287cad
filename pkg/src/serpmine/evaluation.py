"""Per-attribute precision/recall over extracted records.

Precision is CR/ER and recall is ER/TR, where TR counts ground-truth
records that carry an attribute, ER the records extracted with a value
for it, and CR those whose value set matches the truth exactly.  The
conventional recall CR/TR is reported alongside as ``recall_standard``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .integrator import VALUE_SEPARATOR, Record

logger = logging.getLogger(__name__)

TRUTH_HEADER = "# serpmine-truth v1"
CSV_COLUMNS = ("attribute", "system", "TR", "ER", "CR", "precision", "recall", "recall_standard")

# Published (TR, ER, CR) per attribute for the DEPTA baseline and WDICS.
TABLE4 = {
    "Name": {"DEPTA": (18234, 18204, 17325), "WDICS": (18234, 18234, 18234)},
    "Model": {"DEPTA": (18234, 17860, 17010), "WDICS": (18234, 18060, 18060)},
    "Company": {"DEPTA": (18234, 18095, 17208), "WDICS": (18234, 18234, 18198)},
    "Spec Version": {"DEPTA": (5508, 5410, 5016), "WDICS": (5508, 5508, 5426)},
    "Product Type": {"DEPTA": (18234, 17834, 17015), "WDICS": (18234, 18234, 18045)},
}


class TruthError(ValueError):
    pass


@dataclass(frozen=True)
class EvalCounts:
    attribute: str
    total_records: int
    extracted_records: int
    correct_records: int
    system: str = ""

    def __post_init__(self):
        if min(self.total_records, self.extracted_records, self.correct_records) < 0:
            raise ValueError("counts must be non-negative")
        if self.correct_records > self.extracted_records:
            raise ValueError("correct records cannot exceed extracted records")


def precision(counts: EvalCounts) -> Fraction | None:
    if counts.extracted_records == 0:
        return None
    return Fraction(counts.correct_records, counts.extracted_records)


def recall(counts: EvalCounts) -> Fraction | None:
    if counts.total_records == 0:
        return None
    if counts.extracted_records > counts.total_records:
        logger.warning("%s: ER > TR, recall exceeds 1", counts.attribute)
    return Fraction(counts.extracted_records, counts.total_records)


def standard_recall(counts: EvalCounts) -> Fraction | None:
    if counts.total_records == 0:
        return None
    return Fraction(counts.correct_records, counts.total_records)


@dataclass(frozen=True)
class EvalRow:
    counts: EvalCounts

    @property
    def precision(self):
        return precision(self.counts)

    @property
    def recall(self):
        return recall(self.counts)

    @property
    def recall_standard(self):
        return standard_recall(self.counts)


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def row(self, attribute: str, system: str | None = None) -> EvalRow:
        for r in self.rows:
            if r.counts.attribute == attribute and (system is None or r.counts.system == system):
                return r
        raise KeyError((attribute, system))


def table4_report() -> EvalReport:
    rows = []
    for attribute, systems in TABLE4.items():
        for system, (tr, er, cr) in systems.items():
            rows.append(EvalRow(EvalCounts(attribute, tr, er, cr, system)))
    return EvalReport(rows)


def _fmt(value) -> str:
    return "NA" if value is None else f"{float(value):.4f}"


def emit_table(report: EvalReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        c = row.counts
        writer.writerow([c.attribute, c.system, c.total_records, c.extracted_records,
                         c.correct_records, _fmt(row.precision), _fmt(row.recall),
                         _fmt(row.recall_standard)])
    return out.getvalue()


# -- ground truth ----------------------------------------------------------

def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out, i = [], 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            out.append({"t": "\t", "n": "\n", "\\": "\\"}.get(text[i + 1], text[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


@dataclass
class TruthManifest:
    """Planted records keyed by their key attributes.

    On disk, one tab-separated line per record: the key, then
    ``attribute=value`` pairs (repeated for set-valued cells) and
    ``@url=<detail page>`` pairs.  Header comments name the attributes and
    key; ``# conflict``/``# corrupted`` comments list planted anomalies.
    """

    attributes: tuple[str, ...]
    key_attributes: tuple[str, ...]
    records: dict[tuple[str, ...], Record] = field(default_factory=dict)
    urls: dict[tuple[str, ...], list[str]] = field(default_factory=dict)
    conflicts: list[tuple[tuple[str, ...], str]] = field(default_factory=list)
    corrupted: list[tuple[tuple[str, ...], str]] = field(default_factory=list)

    def add(self, record: Record, urls=()):
        key = record.key(self.key_attributes)
        if key in self.records:
            raise TruthError(f"duplicate truth key {key!r}")
        self.records[key] = record
        self.urls[key] = list(urls)

    def dumps(self) -> str:
        lines = [TRUTH_HEADER,
                 "# attributes\t" + "\t".join(map(_escape, self.attributes)),
                 "# key\t" + "\t".join(map(_escape, self.key_attributes))]
        for label, items in (("conflict", self.conflicts), ("corrupted", self.corrupted)):
            for key, attr in items:
                lines.append(f"# {label}\t{_escape(VALUE_SEPARATOR.join(key))}\t{_escape(attr)}")
        for key, record in self.records.items():
            parts = [_escape(VALUE_SEPARATOR.join(key))]
            for name in self.attributes:
                parts += [f"{_escape(name)}={_escape(v)}" for v in sorted(record.values.get(name, ()))]
            parts += [f"@url={_escape(u)}" for u in self.urls.get(key, ())]
            lines.append("\t".join(parts))
        return "\n".join(lines) + "\n"

    def write(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "TruthManifest":
        lines = text.splitlines()
        if not lines or lines[0].strip() != TRUTH_HEADER:
            raise TruthError("missing truth manifest header")
        attributes = key_attributes = None
        anomalies = {"conflict": [], "corrupted": []}
        body = []
        for lineno, line in enumerate(lines[1:], 2):
            if not line.strip():
                continue
            if line.startswith("#"):
                tag, *rest = line[1:].strip().split("\t")
                rest = [_unescape(r) for r in rest]
                if tag == "attributes":
                    attributes = tuple(rest)
                elif tag == "key":
                    key_attributes = tuple(rest)
                elif tag in anomalies and len(rest) == 2:
                    anomalies[tag].append((tuple(rest[0].split(VALUE_SEPARATOR)), rest[1]))
                continue
            body.append((lineno, line))
        if not attributes or not key_attributes:
            raise TruthError("truth manifest lacks attribute/key declarations")
        if not set(key_attributes) <= set(attributes):
            raise TruthError("truth key attributes are not declared attributes")
        manifest = cls(attributes, key_attributes, conflicts=anomalies["conflict"],
                       corrupted=anomalies["corrupted"])
        for lineno, line in body:
            key_field, *pairs = line.split("\t")
            values = {a: set() for a in attributes}
            urls = []
            for pair in pairs:
                name, sep, value = pair.partition("=")
                name, value = _unescape(name), _unescape(value)
                if not sep:
                    raise TruthError(f"line {lineno}: malformed pair {pair!r}")
                if name == "@url":
                    urls.append(value)
                elif name in values:
                    values[name].add(value)
                else:
                    raise TruthError(f"line {lineno}: unknown attribute {name!r}")
            record = Record(values)
            if VALUE_SEPARATOR.join(record.key(key_attributes)) != _unescape(key_field):
                raise TruthError(f"line {lineno}: key field disagrees with key attributes")
            try:
                manifest.add(record, urls)
            except TruthError as exc:
                raise TruthError(f"line {lineno}: {exc}") from None
        return manifest

    @classmethod
    def read(cls, path) -> "TruthManifest":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise TruthError(f"cannot read truth manifest {path}: {exc.strerror or exc}") from None
        return cls.loads(text)


def read_export(text: str) -> tuple[tuple[str, ...], list[Record]]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader, ()))
    records = []
    for row in reader:
        records.append(Record({name: set(cell.split(VALUE_SEPARATOR)) if cell else set()
                               for name, cell in zip(header, row)}))
    return header, records


def score_run(store_export: str, truth: TruthManifest, system: str = "WDICS") -> EvalReport:
    """Score a store export against planted truth, one row per truth attribute."""
    _, extracted = read_export(store_export)
    aligned = {}
    for record in extracted:
        aligned.setdefault(record.key(truth.key_attributes), record)
    rows = []
    for name in truth.attributes:
        tr = sum(1 for r in truth.records.values() if r.values.get(name))
        er = sum(1 for r in extracted if r.values.get(name))
        cr = 0
        for key, record in aligned.items():
            planted = truth.records.get(key)
            got = record.values.get(name)
            if planted is not None and got and got == planted.values.get(name, set()):
                cr += 1
        rows.append(EvalRow(EvalCounts(name, tr, er, cr, system)))
    return EvalReport(rows)
