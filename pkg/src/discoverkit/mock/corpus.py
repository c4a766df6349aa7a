"""Seeded synthetic Dublin Core corpora for the mock repository."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from fractions import Fraction

from discoverkit.oai.records import DC_ELEMENTS, DublinCoreRecord, RecordHeader

_WORDS = (
    "adaptive analysis archive baseline behaviour carbon climate cohort coastal "
    "community comparative computational data design digital dynamics ecology "
    "education energy evidence field genome governance health history imaging "
    "infrastructure language learning library literacy marine measurement memory "
    "method migration model network nutrition ocean policy population practice "
    "protein quantum regional renewable resilience river rural sensor signal "
    "social soil spatial statistical structure survey sustainability teaching "
    "temporal theory transport urban water wildlife"
).split()
_SURNAMES = "Garcia Nguyen Okafor Smith Kowalski Tanaka Haddad Larsen Moreau Patel Silva Brown".split()
_GIVEN = "Ana Ben Chen Dana Eli Fatima Hugo Ines Jon Kira Lena Omar".split()
_TYPES = ("Article", "Thesis", "Report", "Dataset")
_PUBLISHERS = ("Mock University Press", "Mock Institute", "Mock Society")

PLANTED_RIGHTS = (
    "This work is licensed under CC BY 4.0",
    "https://creativecommons.org/licenses/by-nc/4.0/",
    "Released under CC-BY-NC-ND",
    "All rights reserved",
    "Author rights retention statement applies",
    "CC0 1.0",
)

MOCK_HOST = "repo.mock.example"


@dataclass(frozen=True)
class CorpusOptions:
    """Knobs for :func:`corpus_from_seed`.

    Fractions are turned into exact quotas (``round(n * fraction)`` records),
    chosen with the seeded generator, except full text, which is spread evenly
    so that any leading window of the corpus carries at least its share.
    ``dropout`` maps element names to the fraction of records lacking that
    element. The rights element is governed by ``rights_fraction`` alone.
    """

    dropout: dict = field(default_factory=dict)
    fulltext_fraction: float = 1.0
    rights_fraction: float = 0.5
    doi_fraction: float = 0.5
    deleted_fraction: float = 0.0
    page_size: int = 25
    start: str = "2020-01-01"


@dataclass
class MockCorpus:
    records: list[DublinCoreRecord]
    page_size: int = 25

    def __post_init__(self):
        if self.page_size < 1:
            raise ValueError("page_size must be at least 1")
        ids = [r.identifier for r in self.records]
        if len(ids) != len(set(ids)):
            raise ValueError("corpus identifiers must be unique")

    @property
    def identifiers(self) -> list[str]:
        return [r.identifier for r in self.records]

    def to_json(self) -> str:
        return json.dumps(
            {"page_size": self.page_size, "records": [r.to_dict() for r in self.records]},
            sort_keys=True,
            separators=(",", ":"),
        )


def _quota(rng: random.Random, n: int, fraction: float) -> set[int]:
    k = int(round(n * min(max(fraction, 0.0), 1.0)))
    return set(rng.sample(range(n), k))


def _spread(n: int, fraction: float) -> set[int]:
    """Evenly spaced indices such that every prefix of length m holds at
    least ``ceil(m * fraction)`` of them."""
    f = Fraction(min(max(fraction, 0.0), 1.0)).limit_denominator(10**6)
    return {i for i in range(n) if math.ceil((i + 1) * f) > math.ceil(i * f)}


def _title(rng: random.Random) -> str:
    words = rng.sample(_WORDS, rng.randint(5, 10))
    return " ".join(words).capitalize()


def corpus_from_seed(seed: int, n: int, options: CorpusOptions | None = None) -> MockCorpus:
    """Build a deterministic corpus of ``n`` records.

    The same ``(seed, n, options)`` always produces a byte-identical corpus.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    opts = options or CorpusOptions()
    rng = random.Random(seed)
    fulltext = _spread(n, opts.fulltext_fraction)
    rights = _quota(rng, n, opts.rights_fraction)
    dois = _quota(rng, n, opts.doi_fraction)
    deleted = _quota(rng, n, opts.deleted_fraction)
    dropped = {
        element: _quota(rng, n, rate)
        for element, rate in sorted(opts.dropout.items())
        if element in DC_ELEMENTS and element != "rights"
    }

    day = datetime.strptime(opts.start, "%Y-%m-%d").replace(tzinfo=timezone.utc)
    records = []
    for i in range(n):
        day += timedelta(days=rng.randint(0, 2))
        header = RecordHeader(
            identifier=f"oai:{MOCK_HOST}:{seed}-{i:06d}",
            datestamp=day,
            set_specs=(f"type:{_TYPES[i % len(_TYPES)].lower()}",),
            deleted=i in deleted,
        )
        if header.deleted:
            records.append(DublinCoreRecord(header=header))
            continue
        landing = f"https://{MOCK_HOST}/handle/{seed}/{i}"
        identifiers = [landing]
        if i in dois:
            identifiers.append(f"https://doi.org/10.5555/mock.{seed}.{i}")
        if i in fulltext:
            identifiers.append(f"https://{MOCK_HOST}/bitstream/{seed}/{i}/article.pdf")
        creators = [
            f"{rng.choice(_SURNAMES)}, {rng.choice(_GIVEN)}" for _ in range(rng.randint(1, 3))
        ]
        elements = {
            "title": [_title(rng)],
            "creator": creators,
            "subject": rng.sample(_WORDS, 2),
            "description": [f"A study of {rng.choice(_WORDS)} and {rng.choice(_WORDS)}."],
            "publisher": [rng.choice(_PUBLISHERS)],
            "contributor": [f"{rng.choice(_SURNAMES)}, {rng.choice(_GIVEN)}"],
            "date": [day.strftime("%Y-%m-%d")],
            "type": [_TYPES[i % len(_TYPES)]],
            "format": ["application/pdf" if i in fulltext else "text/html"],
            "identifier": identifiers,
            "source": [f"Mock Journal of {rng.choice(_WORDS).capitalize()}"],
            "language": ["en"],
            "relation": [f"https://{MOCK_HOST}/collection/{i % 7}"],
            "coverage": [str(2000 + i % 25)],
        }
        if i in rights:
            elements["rights"] = [PLANTED_RIGHTS[i % len(PLANTED_RIGHTS)]]
        for element, missing in dropped.items():
            if i in missing:
                elements.pop(element, None)
        ordered = {e: elements[e] for e in DC_ELEMENTS if e in elements}
        records.append(DublinCoreRecord(header=header, elements=ordered))
    return MockCorpus(records=records, page_size=opts.page_size)
