"""Synthetic holdings and feeds with planted DOI and title perturbations,
plus a brute-force matcher used as the oracle for Fresh Finds."""

import random
from datetime import date, timedelta

from rapidfuzz.distance import Levenshtein

from discoverkit.freshfinds import ExternalWork, normalize_doi, normalize_title
from discoverkit.oai.records import DublinCoreRecord, RecordHeader

WORDS = (
    "open access repository metadata harvesting protocol growth network survey analysis "
    "climate river soil genome protein neural learning quantum lattice policy health rural "
    "urban education history language music archive evidence model theory method study "
    "effects of on in for and from toward between under review case local global"
).split()


def _title(rng):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(5, 11))).capitalize()


def _typo(rng, text, edits):
    chars = list(text)
    for _ in range(edits):
        pos = rng.randrange(len(chars))
        op = rng.choice(("sub", "del", "ins"))
        letter = rng.choice("abcdefghijklmnopqrstuvwxyz")
        if op == "sub":
            chars[pos] = letter
        elif op == "del" and len(chars) > 1:
            del chars[pos]
        else:
            chars.insert(pos, letter)
    return "".join(chars)


def _record(rid, title, doi=None):
    elements = {"title": [title]}
    if doi:
        elements["identifier"] = [f"https://doi.org/{doi}"]
    return DublinCoreRecord(header=RecordHeader(rid, None), elements=elements)


def generate(seed, n_works=1000, n_holdings=1000):
    """Return (holdings records, feed) with a mix of DOI hits, exact and
    cosmetic title hits, 1-4 character typos, near-duplicate holdings and
    unrelated works."""
    rng = random.Random(seed)
    holdings = []
    for i in range(n_holdings):
        rid = f"oai:h:{rng.randrange(10**6):06d}-{i}"
        if holdings and rng.random() < 0.1:
            # near duplicate of an earlier holding, to create competing candidates
            base = normalize_title(rng.choice(holdings).values("title")[0])
            title = _typo(rng, base, rng.randint(0, 2))
        else:
            title = _title(rng)
        doi = f"10.{rng.randint(1000, 9999)}/h{i}" if rng.random() < 0.5 else None
        holdings.append(_record(rid, title, doi))
    feed = []
    day = date(2024, 1, 1)
    for i in range(n_works):
        src = rng.choice(holdings)
        title = src.values("title")[0]
        dois = [normalize_doi(v) for v in src.values("identifier")]
        kind = rng.random()
        published = day + timedelta(days=rng.randrange(365))
        if kind < 0.2 and dois:
            # DOI hit, title deliberately pointing elsewhere
            feed.append(ExternalWork(rng.choice(holdings).values("title")[0], f"DOI:{dois[0].upper()}", published=published))
        elif kind < 0.35:
            feed.append(ExternalWork(f"The {title.upper()}!!", published=published))
        elif kind < 0.7:
            feed.append(ExternalWork(_typo(rng, title, rng.randint(1, 4)), f"10.9000/miss{i}", published=published))
        else:
            feed.append(ExternalWork(_title(rng), published=published))
    return holdings, feed


class BruteForce:
    """Exhaustive all-pairs matcher over prepared holdings.

    Calling it with a work returns ``(method, record id, similarity)``.
    """

    def __init__(self, holdings, threshold=0.93):
        self.threshold = threshold
        self.dois = []
        self.titles = []
        for r in holdings:
            if r.deleted:
                continue
            self.dois.append((r.identifier, {normalize_doi(v) for v in r.values("identifier")}))
            for v in r.values("title"):
                if normalize_title(v):
                    self.titles.append((r.identifier, normalize_title(v)))
                    break

    def __call__(self, work):
        if work.doi:
            hits = sorted(rid for rid, dois in self.dois if work.doi in dois)
            if hits:
                return "doi-exact", hits[0], 1.0
        title = normalize_title(work.title)
        if not title:
            return "none", None, 0.0
        exact = sorted(rid for rid, t in self.titles if t == title)
        if exact:
            return "title-exact-normalized", exact[0], 1.0
        scored = []
        for rid, t in self.titles:
            sim = 1.0 - Levenshtein.distance(title, t) / max(len(t), len(title))
            if sim >= self.threshold:
                scored.append((-sim, rid))
        if not scored:
            return "none", None, 0.0
        neg, rid = min(scored)
        return "title-fuzzy", rid, -neg
