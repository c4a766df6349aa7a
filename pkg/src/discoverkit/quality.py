"""Dublin Core completeness scoring and rights-statement detection."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from discoverkit.oai.records import DC_ELEMENTS, DublinCoreRecord

SCHEMA = "quality-report/1"
REQUIRED_ELEMENTS = ("title", "creator", "date", "identifier", "type", "rights")
LICENSES = (
    "CC-BY",
    "CC-BY-SA",
    "CC-BY-NC",
    "CC-BY-NC-SA",
    "CC-BY-ND",
    "CC-BY-NC-ND",
    "CC0",
    "rights-retained",
    "all-rights-reserved",
    "other",
)

_DOI_RE = re.compile(r"\b10\.\d{4,9}/\S+")
_HANDLE_RE = re.compile(r"(?:\bhdl\.handle\.net/|^hdl:|/handle/)\d+(?:\.\d+)*/\S+", re.IGNORECASE)


class EmptyInput(ValueError):
    pass


class GazetteerError(ValueError):
    pass


@dataclass(frozen=True)
class RightsPattern:
    pattern_id: str
    regex: re.Pattern
    normalized_license: str


@dataclass(frozen=True)
class RightsMatch:
    pattern_id: str
    matched_text: str
    normalized_license: str
    source: str
    offset: int

    @property
    def end(self) -> int:
        return self.offset + len(self.matched_text)

    def to_dict(self) -> dict:
        return {
            "pattern_id": self.pattern_id,
            "matched_text": self.matched_text,
            "normalized_license": self.normalized_license,
            "source": self.source,
            "offset": self.offset,
        }


def parse_gazetteer(text: str, origin: str = "<gazetteer>") -> list[RightsPattern]:
    patterns = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise GazetteerError(f"{origin}:{lineno}: expected 3 tab-separated columns, got {len(cols)}")
        pattern_id, regex, license_ = (c.strip() for c in cols)
        if license_ not in LICENSES:
            raise GazetteerError(f"{origin}:{lineno}: unknown normalized license {license_!r}")
        if pattern_id in seen:
            raise GazetteerError(f"{origin}:{lineno}: duplicate pattern id {pattern_id!r}")
        try:
            compiled = re.compile(regex, re.IGNORECASE)
        except re.error as exc:
            raise GazetteerError(f"{origin}:{lineno}: bad regex: {exc}") from None
        seen.add(pattern_id)
        patterns.append(RightsPattern(pattern_id, compiled, license_))
    return patterns


def load_gazetteer(path: Union[str, Path, None] = None) -> list[RightsPattern]:
    """Load a gazetteer file, or the built-in one when ``path`` is None."""
    if path is None:
        return list(_default_gazetteer())
    path = Path(path)
    return parse_gazetteer(path.read_text(encoding="utf-8"), str(path))


_DEFAULT: Optional[tuple[RightsPattern, ...]] = None


def _default_gazetteer() -> tuple[RightsPattern, ...]:
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("discoverkit.data").joinpath("rights_gazetteer.tsv").read_text("utf-8")
        _DEFAULT = tuple(parse_gazetteer(text, "rights_gazetteer.tsv"))
    return _DEFAULT


def find_rights_statements(
    text: str,
    source: str = "fulltext-snippet",
    gazetteer: Optional[Sequence[RightsPattern]] = None,
) -> list[RightsMatch]:
    """Locate rights and license statements in ``text``.

    Matching is leftmost-longest and non-overlapping. Results are sorted by
    offset and each ``matched_text`` equals ``text[offset:end]``.
    """
    patterns = _default_gazetteer() if gazetteer is None else gazetteer
    matches: list[RightsMatch] = []
    pos = 0
    while pos <= len(text):
        starts = [m.start() for p in patterns if (m := p.regex.search(text, pos)) is not None]
        if not starts:
            break
        start = min(starts)
        best = None
        for p in patterns:
            m = p.regex.match(text, start)
            if m is not None and m.end() > start and (best is None or m.end() > best[1].end()):
                best = (p, m)
        if best is None:
            # only empty matches at this position
            pos = start + 1
            continue
        p, m = best
        matches.append(RightsMatch(p.pattern_id, m.group(0), p.normalized_license, source, start))
        pos = m.end()
    return matches


def _present(record: DublinCoreRecord, element: str) -> bool:
    return any(v.strip() for v in record.values(element))


def missing_fields(record: DublinCoreRecord, required: Iterable[str] = REQUIRED_ELEMENTS) -> list[str]:
    """Required elements that are absent or whitespace-only, in canonical order."""
    required = set(required)
    unknown = required - set(DC_ELEMENTS)
    if unknown:
        raise ValueError(f"not Dublin Core elements: {sorted(unknown)}")
    return [e for e in DC_ELEMENTS if e in required and not _present(record, e)]


def has_persistent_identifier(record: DublinCoreRecord) -> bool:
    """True if any dc:identifier looks like a DOI or a Handle."""
    return any(_DOI_RE.search(v) or _HANDLE_RE.search(v) for v in record.values("identifier"))


@dataclass
class FieldCompleteness:
    element: str
    present_count: int
    total_records: int

    @property
    def fraction(self) -> float:
        return self.present_count / self.total_records

    def to_dict(self) -> dict:
        return {
            "element": self.element,
            "present_count": self.present_count,
            "total_records": self.total_records,
            "fraction": self.fraction,
        }


@dataclass
class QualityReport:
    """Completeness per element plus the derived coverage ratios.

    ``pid_coverage`` and ``datestamp_coverage`` are extra evidence for the
    compliance checks: the share of records with a DOI/Handle identifier and
    the share whose OAI header carried a parseable datestamp.
    """

    repository_id: str
    record_count: int
    completeness: list[FieldCompleteness]
    core_score: float
    rights_coverage: float
    required_elements: tuple[str, ...] = REQUIRED_ELEMENTS
    pid_coverage: float = 0.0
    datestamp_coverage: float = 0.0
    licenses: dict[str, int] = field(default_factory=dict)

    def fraction(self, element: str) -> float:
        for fc in self.completeness:
            if fc.element == element:
                return fc.fraction
        raise KeyError(element)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "repository_id": self.repository_id,
            "record_count": self.record_count,
            "completeness": [fc.to_dict() for fc in self.completeness],
            "core_score": self.core_score,
            "rights_coverage": self.rights_coverage,
            "required_elements": list(self.required_elements),
            "pid_coverage": self.pid_coverage,
            "datestamp_coverage": self.datestamp_coverage,
            "licenses": dict(sorted(self.licenses.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "QualityReport":
        if data.get("schema") != SCHEMA:
            raise ValueError(f"expected schema {SCHEMA}, got {data.get('schema')!r}")
        return cls(
            repository_id=data["repository_id"],
            record_count=int(data["record_count"]),
            completeness=[
                FieldCompleteness(c["element"], int(c["present_count"]), int(c["total_records"]))
                for c in data["completeness"]
            ],
            core_score=float(data["core_score"]),
            rights_coverage=float(data["rights_coverage"]),
            required_elements=tuple(data.get("required_elements", REQUIRED_ELEMENTS)),
            pid_coverage=float(data.get("pid_coverage", 0.0)),
            datestamp_coverage=float(data.get("datestamp_coverage", 0.0)),
            licenses=dict(data.get("licenses", {})),
        )


def score_records(
    records: Sequence[DublinCoreRecord],
    repository_id: str = "",
    required: Sequence[str] = REQUIRED_ELEMENTS,
    gazetteer: Optional[Sequence[RightsPattern]] = None,
) -> QualityReport:
    """Score completeness of non-deleted records.

    ``core_score`` is the mean completeness over ``required``. Rights coverage
    counts records whose dc:rights values contain at least one gazetteer match.
    """
    if not records:
        raise EmptyInput("no records to score")
    bad = set(required) - set(DC_ELEMENTS)
    if bad:
        raise ValueError(f"not Dublin Core elements: {sorted(bad)}")
    total = len(records)
    counts = dict.fromkeys(DC_ELEMENTS, 0)
    with_rights = with_pid = with_stamp = 0
    licenses: dict[str, int] = {}
    for record in records:
        for element in DC_ELEMENTS:
            if _present(record, element):
                counts[element] += 1
        found = [
            m for value in record.values("rights") for m in find_rights_statements(value, "dc:rights", gazetteer)
        ]
        if found:
            with_rights += 1
            for lic in {m.normalized_license for m in found}:
                licenses[lic] = licenses.get(lic, 0) + 1
        if has_persistent_identifier(record):
            with_pid += 1
        if record.header.datestamp is not None:
            with_stamp += 1
    completeness = [FieldCompleteness(e, counts[e], total) for e in DC_ELEMENTS]
    core = sum(counts[e] for e in required) / (total * len(required)) if required else 1.0
    return QualityReport(
        repository_id=repository_id,
        record_count=total,
        completeness=completeness,
        core_score=core,
        rights_coverage=with_rights / total,
        required_elements=tuple(required),
        pid_coverage=with_pid / total,
        datestamp_coverage=with_stamp / total,
        licenses=licenses,
    )
