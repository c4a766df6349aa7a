"""Find works from an external publication feed that the repository lacks.

Matching runs in strict precedence: exact DOI, exact normalized title, then
fuzzy title similarity (normalized Levenshtein) above a threshold.
"""

from __future__ import annotations

import json
import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

from discoverkit.oai.records import DublinCoreRecord
from discoverkit.timeutil import format_instant, utcnow

SCHEMA = "gap-report/1"
DEFAULT_THRESHOLD = 0.93
METHODS = ("doi-exact", "title-exact-normalized", "title-fuzzy", "none")

_ARTICLES = {"a", "an", "the"}
_DOI_PREFIX = re.compile(r"^(?:https?://(?:dx\.)?doi\.org/|doi:\s*)", re.IGNORECASE)
_DOI_IN_TEXT = re.compile(r"10\.\d{4,9}/[^\s\"<>]+", re.IGNORECASE)


def normalize_doi(value: str) -> str:
    """Lowercase DOI without resolver prefix; '' if ``value`` holds no DOI."""
    value = _DOI_PREFIX.sub("", value.strip())
    m = _DOI_IN_TEXT.search(value)
    if not m:
        return ""
    return m.group(0).rstrip(".,;)]").lower()


def _fold(text: str) -> str:
    text = unicodedata.normalize("NFKD", text).lower()
    text = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in text if not unicodedata.combining(ch))


def normalize_title(title: str) -> str:
    """Lowercase, strip accents and punctuation, collapse whitespace and drop
    leading articles."""
    folded = _fold(title)
    while True:  # folding can expose new combining marks or capitals
        again = _fold(folded)
        if again == folded:
            break
        folded = again
    cleaned = "".join(ch if ch.isalnum() else " " for ch in folded)
    words = cleaned.split()
    while words and words[0] in _ARTICLES:
        words.pop(0)
    return " ".join(words)


def levenshtein(a: str, b: str, max_distance: Optional[int] = None) -> int:
    """Edit distance; with ``max_distance`` the search is banded and any
    value above the bound is reported as ``max_distance + 1``."""
    if len(a) < len(b):
        a, b = b, a
    la, lb = len(a), len(b)
    if max_distance is None:
        max_distance = la
    if la - lb > max_distance:
        return max_distance + 1
    if lb == 0:
        return la
    big = max_distance + 1
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        lo = max(1, i - max_distance)
        hi = min(lb, i + max_distance)
        cur = [big] * (lb + 1)
        cur[0] = i if i <= max_distance else big
        ai = a[i - 1]
        row_min = cur[0]
        for j in range(lo, hi + 1):
            cost = 0 if ai == b[j - 1] else 1
            v = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if v > big:
                v = big
            cur[j] = v
            if v < row_min:
                row_min = v
        if row_min > max_distance:
            return big
        prev = cur
    return min(prev[lb], big)


def similarity(a: str, b: str) -> float:
    """1 - distance / longer length; 1.0 for two empty strings."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


@dataclass(frozen=True)
class ExternalWork:
    title: str = ""
    doi: Optional[str] = None
    authors: tuple[str, ...] = ()
    published: Optional[date] = None
    source: str = ""

    def __post_init__(self):
        doi = normalize_doi(self.doi) if self.doi else ""
        object.__setattr__(self, "doi", doi or None)
        object.__setattr__(self, "authors", tuple(self.authors))
        if not self.doi and not self.title.strip():
            raise ValueError("an external work needs a DOI or a title")

    def to_dict(self) -> dict:
        return {
            "doi": self.doi,
            "title": self.title,
            "authors": list(self.authors),
            "published": self.published.isoformat() if self.published else None,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExternalWork":
        published = data.get("published")
        return cls(
            title=data.get("title") or "",
            doi=data.get("doi") or None,
            authors=tuple(data.get("authors") or ()),
            published=date.fromisoformat(published[:10]) if published else None,
            source=data.get("source") or "",
        )


def read_feed(path: str | Path) -> list[ExternalWork]:
    """Read a line-delimited JSON feed (blank lines ignored)."""
    works = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                works.append(ExternalWork.from_dict(json.loads(line)))
            except (ValueError, TypeError, AttributeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return works


class FeedFetcher(Protocol):
    """Anything that can produce external works for a repository."""

    def fetch(self, repository_id: str) -> Iterable[ExternalWork]: ...


@dataclass
class MatchResult:
    external: ExternalWork
    matched_record: Optional[str]
    method: str
    similarity: float

    def to_dict(self) -> dict:
        return {
            "external": self.external.to_dict(),
            "matched_record": self.matched_record,
            "method": self.method,
            "similarity": self.similarity,
        }


class HoldingsIndex:
    """Lookup structures over a repository's non-deleted records."""

    def __init__(self, titles: dict[str, str], dois: dict[str, set[str]]):
        # record id -> normalized title
        self.titles = titles
        self.by_doi: dict[str, str] = {d: min(ids) for d, ids in dois.items()}
        by_title: dict[str, list[str]] = defaultdict(list)
        by_length: dict[int, list[tuple[str, str]]] = defaultdict(list)
        for rid, t in titles.items():
            by_title[t].append(rid)
            by_length[len(t)].append((rid, t))
        self.by_title = {t: min(ids) for t, ids in by_title.items()}
        self.by_length = dict(by_length)

    @classmethod
    def from_records(cls, records: Iterable[DublinCoreRecord]) -> "HoldingsIndex":
        titles: dict[str, str] = {}
        dois: dict[str, set[str]] = defaultdict(set)
        for r in records:
            if r.deleted:
                continue
            for value in r.values("identifier"):
                doi = normalize_doi(value)
                if doi:
                    dois[doi].add(r.identifier)
            for value in r.values("title"):
                t = normalize_title(value)
                if t:
                    titles.setdefault(r.identifier, t)
                    break
        return cls(titles, dict(dois))

    def __len__(self) -> int:
        return len(self.titles)

    def best_fuzzy(self, title: str, threshold: float) -> Optional[tuple[str, float]]:
        """Most similar holding with similarity >= threshold.

        Ties go to the lexicographically smallest record identifier.
        """
        n = len(title)
        best: Optional[tuple[str, float]] = None
        for length, bucket in self.by_length.items():
            longest = max(n, length)
            if longest == 0:
                continue
            # similarity >= threshold  <=>  distance <= (1 - threshold) * longest
            allowed = int((1.0 - threshold) * longest + 1e-9)
            if abs(n - length) > allowed:
                continue
            for rid, candidate in bucket:
                dist = levenshtein(title, candidate, allowed)
                if dist > allowed:
                    continue
                sim = 1.0 - dist / longest
                if sim < threshold:
                    continue
                if best is None or sim > best[1] or (sim == best[1] and rid < best[0]):
                    best = (rid, sim)
        return best


def match_work(work: ExternalWork, holdings: HoldingsIndex, threshold: float = DEFAULT_THRESHOLD) -> MatchResult:
    if work.doi and work.doi in holdings.by_doi:
        return MatchResult(work, holdings.by_doi[work.doi], "doi-exact", 1.0)
    title = normalize_title(work.title) if work.title else ""
    if title:
        if title in holdings.by_title:
            return MatchResult(work, holdings.by_title[title], "title-exact-normalized", 1.0)
        hit = holdings.best_fuzzy(title, threshold)
        if hit is not None:
            return MatchResult(work, hit[0], "title-fuzzy", hit[1])
    return MatchResult(work, None, "none", 0.0)


@dataclass
class GapReport:
    repository_id: str
    checked: int
    matched: int
    missing: list[ExternalWork]
    generated_at: datetime = field(default_factory=utcnow)
    results: list[MatchResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "repository_id": self.repository_id,
            "checked": self.checked,
            "matched": self.matched,
            "missing": [w.to_dict() for w in self.missing],
            "generated_at": format_instant(self.generated_at),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_markdown(self) -> str:
        lines = [
            f"# Fresh Finds: {self.repository_id}",
            "",
            f"Checked {self.checked} works; {self.matched} already held, {len(self.missing)} missing.",
            "",
        ]
        if self.missing:
            lines.append("## Missing from the repository")
            lines.append("")
        for w in self.missing:
            when = w.published.isoformat() if w.published else "undated"
            authors = "; ".join(w.authors) if w.authors else "unknown authors"
            doi = f" https://doi.org/{w.doi}" if w.doi else ""
            lines.append(f"- {when}: **{w.title or w.doi}** ({authors}){doi}")
        return "\n".join(lines) + "\n"


def gap_report(
    feed: Sequence[ExternalWork],
    holdings: HoldingsIndex,
    repository_id: str,
    threshold: float = DEFAULT_THRESHOLD,
    now: Optional[datetime] = None,
) -> GapReport:
    """Match every feed entry; unmatched works are listed newest first."""
    results = [match_work(w, holdings, threshold) for w in feed]
    missing = [r.external for r in results if r.method == "none"]
    missing.sort(key=lambda w: w.published or date.min, reverse=True)
    return GapReport(
        repository_id=repository_id,
        checked=len(results),
        matched=len(results) - len(missing),
        missing=missing,
        generated_at=now or utcnow(),
        results=results,
    )
