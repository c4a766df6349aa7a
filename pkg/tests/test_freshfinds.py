import json
import random
from collections import Counter
from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from rapidfuzz.distance import Levenshtein

import fresh_corpus
from discoverkit.freshfinds import (
    ExternalWork,
    HoldingsIndex,
    gap_report,
    levenshtein,
    match_work,
    normalize_doi,
    normalize_title,
    read_feed,
    similarity,
)
from discoverkit.oai.records import DublinCoreRecord, RecordHeader
from discoverkit.timeutil import parse_instant

NOW = parse_instant("2024-10-31T00:00:00Z")


def _rec(rid, title=None, identifiers=(), deleted=False):
    header = RecordHeader(rid, None, (), deleted)
    if deleted:
        return DublinCoreRecord(header=header)
    elements = {"identifier": list(identifiers)} if identifiers else {}
    if title:
        elements["title"] = [title]
    return DublinCoreRecord(header=header, elements=elements)


# -- normalization ------------------------------------------------------------------


@pytest.mark.parametrize(
    "raw,norm",
    [
        ("The  Órigins of X!", "origins of x"),
        ("", ""),
        ("An Apple a Day", "apple a day"),
        ("a", ""),
        ("Théorie   des\tNombres", "theorie des nombres"),
        ("Ångström-scale: imaging", "angstrom scale imaging"),
    ],
)
def test_normalize_title(raw, norm):
    assert normalize_title(raw) == norm


def test_normalize_title_is_idempotent_on_random_titles():
    rng = random.Random(500)
    alphabet = "abcXYZ éÉüßØæ-–:;!?'\"()  \tÅ" + "ﬁ" + "Ⅻ"
    for _ in range(500):
        t = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
        once = normalize_title(t)
        assert normalize_title(once) == once


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=60))
def test_normalize_title_idempotent_property(text):
    once = normalize_title(text)
    assert normalize_title(once) == once


@pytest.mark.parametrize(
    "raw,doi",
    [
        ("https://doi.org/10.1234/ABC.def", "10.1234/abc.def"),
        ("http://dx.doi.org/10.1234/x", "10.1234/x"),
        ("doi: 10.5555/Zz9.", "10.5555/zz9"),
        ("10.1000/182", "10.1000/182"),
        ("hdl:2027/42", ""),
    ],
)
def test_normalize_doi(raw, doi):
    assert normalize_doi(raw) == doi


def test_external_work_invariants():
    assert ExternalWork(doi="https://doi.org/10.1000/ABC").doi == "10.1000/abc"
    with pytest.raises(ValueError):
        ExternalWork(title="   ")


# -- matching -----------------------------------------------------------------------


def test_doi_exact():
    index = HoldingsIndex.from_records([_rec("oai:r:1", "Something", ["https://doi.org/10.1234/abc"])])
    result = match_work(ExternalWork("Other title", "10.1234/ABC"), index)
    assert (result.method, result.matched_record, result.similarity) == ("doi-exact", "oai:r:1", 1.0)


def test_doi_beats_title():
    index = HoldingsIndex.from_records(
        [_rec("oai:r:1", "Rivers of Europe"), _rec("oai:r:2", "Unrelated", ["doi:10.1000/x"])]
    )
    result = match_work(ExternalWork("Rivers of Europe", "10.1000/x"), index)
    assert (result.method, result.matched_record) == ("doi-exact", "oai:r:2")


def test_exact_title_beats_fuzzy():
    index = HoldingsIndex.from_records([_rec("oai:r:1", "Rivers of Europes"), _rec("oai:r:2", "RIVERS of europe.")])
    result = match_work(ExternalWork("Rivers of Europe"), index)
    assert (result.method, result.matched_record) == ("title-exact-normalized", "oai:r:2")


def test_fuzzy_single_typo():
    index = HoldingsIndex.from_records([_rec("oai:r:1", "Harvesting metadata from institutional repositories")])
    result = match_work(ExternalWork("Harvesting metadata from institutional repositores"), index)
    assert result.method == "title-fuzzy" and result.matched_record == "oai:r:1"
    assert 0.93 <= result.similarity < 1.0


def test_fuzzy_tie_goes_to_smallest_identifier():
    index = HoldingsIndex.from_records([_rec("oai:r:b", "abcdefghijklmnopqrstuvwxyz0"), _rec("oai:r:a", "abcdefghijklmnopqrstuvwxyz1")])
    result = match_work(ExternalWork("abcdefghijklmnopqrstuvwxyz2"), index)
    assert result.matched_record == "oai:r:a"


def test_below_threshold_is_missing():
    index = HoldingsIndex.from_records([_rec("oai:r:1", "Soil carbon in rural basins")])
    result = match_work(ExternalWork("Soil carbon in urban basins"), index)
    assert (result.method, result.matched_record, result.similarity) == ("none", None, 0.0)
    assert match_work(ExternalWork("Soil carbon in urban basins"), index, threshold=0.8).method == "title-fuzzy"


def test_deleted_records_are_not_holdings():
    index = HoldingsIndex.from_records([_rec("oai:r:1", deleted=True)])
    assert len(index) == 0


def test_levenshtein_agrees_with_reference():
    rng = random.Random(8)
    for _ in range(2000):
        a = "".join(rng.choice("abcde") for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice("abcde") for _ in range(rng.randint(0, 12)))
        d = Levenshtein.distance(a, b)
        assert levenshtein(a, b) == d
        bound = rng.randint(0, 6)
        assert levenshtein(a, b, bound) == (d if d <= bound else bound + 1)


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=30), st.text(max_size=30))
def test_similarity_is_symmetric(a, b):
    assert similarity(a, b) == similarity(b, a)
    assert 0.0 <= similarity(a, b) <= 1.0


def test_matches_equal_brute_force_oracle():
    holdings, feed = fresh_corpus.generate(seed=1, n_works=300, n_holdings=300)
    index = HoldingsIndex.from_records(holdings)
    oracle = fresh_corpus.BruteForce(holdings)
    methods = Counter()
    for work in feed:
        got = match_work(work, index)
        want = oracle(work)
        assert (got.method, got.matched_record, got.similarity) == want, work
        methods[got.method] += 1
    assert all(methods[m] > 0 for m in ("doi-exact", "title-exact-normalized", "title-fuzzy", "none"))


# -- gap reports --------------------------------------------------------------------


def _planted():
    holdings = [_rec(f"oai:r:{i}", f"Held work number {i} on river systems", [f"10.5000/held{i}"]) for i in range(6)]
    feed = [ExternalWork(doi=f"10.5000/held{i}", published=date(2024, 1, i + 1)) for i in range(3)]
    feed += [ExternalWork(f"held work number {i} on river systems.", published=date(2024, 2, i + 1)) for i in range(3, 6)]
    feed += [
        ExternalWork("Deep sea vents", "10.7000/a", ("Roe, R.",), date(2024, 3, 1)),
        ExternalWork("Alpine lichens", published=date(2024, 5, 1)),
        ExternalWork("Desert beetles", published=None),
        ExternalWork("Coastal fog", "10.7000/d", published=date(2024, 4, 1)),
    ]
    return holdings, feed


def test_planted_fixture():
    holdings, feed = _planted()
    report = gap_report(feed, HoldingsIndex.from_records(holdings), "demo", now=NOW)
    assert (report.checked, report.matched, len(report.missing)) == (10, 6, 4)
    assert [w.title for w in report.missing] == ["Alpine lichens", "Coastal fog", "Deep sea vents", "Desert beetles"]


def test_feed_contained_in_holdings():
    holdings, feed = _planted()
    report = gap_report(feed[:3], HoldingsIndex.from_records(holdings), "demo", now=NOW)
    assert report.missing == [] and report.matched == 3


def test_empty_feed():
    report = gap_report([], HoldingsIndex.from_records([]), "demo", now=NOW)
    assert (report.checked, report.matched, report.missing) == (0, 0, [])


def test_conservation_on_random_feeds():
    holdings, pool = fresh_corpus.generate(seed=3, n_works=400, n_holdings=200)
    index = HoldingsIndex.from_records(holdings)
    rng = random.Random(4)
    for _ in range(30):
        feed = rng.sample(pool, rng.randint(0, 60))
        report = gap_report(feed, index, "r", now=NOW)
        assert report.checked == len(feed) == report.matched + len(report.missing)


def test_markdown_and_json(tmp_path):
    holdings, feed = _planted()
    report = gap_report(feed, HoldingsIndex.from_records(holdings), "demo", now=NOW)
    md = report.to_markdown()
    assert md.startswith("# Fresh Finds: demo")
    assert md.count("\n- ") == 4
    assert "https://doi.org/10.7000/a" in md and "Roe, R." in md
    doc = json.loads(report.to_json())
    assert doc["schema"] == "gap-report/1" and doc["checked"] == 10 and len(doc["missing"]) == 4


def test_read_feed(tmp_path):
    path = tmp_path / "feed.ndjson"
    path.write_text(
        '{"doi": "https://doi.org/10.1000/A", "title": "T", "authors": ["X"], "published": "2024-02-03", "source": "idx"}\n'
        "\n"
        '{"title": "Only a title"}\n',
        encoding="utf-8",
    )
    works = read_feed(path)
    assert [w.doi for w in works] == ["10.1000/a", None]
    assert works[0].published == date(2024, 2, 3)
    path.write_text('{"title": ""}\n', encoding="utf-8")
    with pytest.raises(ValueError, match=":1:"):
        read_feed(path)
