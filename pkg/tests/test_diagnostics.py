import itertools
import json
import math

import pytest

from conftest import fast_endpoint, no_sleep
from discoverkit import diagnostics
from discoverkit.diagnostics import (
    PROBES,
    DiagnosisReport,
    EndpointStatus,
    ProbeResult,
    classify,
    diagnose,
    diagnose_many,
    extract_fulltext_candidates,
    status_from_label,
)
from discoverkit.oai.records import DublinCoreRecord, RecordHeader

S = EndpointStatus
FRACTIONS = (0.0, 0.1, 0.24, 0.25, 1.0)


def _probes(outcomes, identify_fault=None):
    return [
        ProbeResult(name, outcome, "", 0.0, identify_fault if name == "identify" and outcome == "fail" else None)
        for name, outcome in zip(PROBES, outcomes)
    ]


def _ladder_oracle(outcomes, fraction, identify_fault):
    """Straight transcription of the decision table, one rung per line."""
    o = dict(zip(PROBES, outcomes))
    rungs = [
        (o["reachability"] == "fail", S.NO_OAI_PMH),
        (o["identify"] == "fail" and identify_fault in {"http-404", "not-xml"}, S.NO_OAI_PMH),
        ("fail" in (o["identify"], o["list_formats"], o["sample_records"]), S.NON_OPERATING_OAI_PMH),
        (o["resolver_consistency"] == "fail", S.WRONG_OAI_RESOLVER),
        (fraction == 0, S.NO_FULLTEXT_HARVESTING),
        (0 < fraction < 0.25, S.LITTLE_FULLTEXT_INDEXING),
        (True, S.FUNCTIONAL),
    ]
    return next(status for cond, status in rungs if cond)


@pytest.mark.parametrize("identify_fault", [None, "http-404", "not-xml", "truncated", "http-500"])
def test_classify_all_outcome_combinations(identify_fault):
    seen = set()
    for outcomes in itertools.product(("pass", "fail", "skip"), repeat=6):
        for fraction in FRACTIONS:
            got = classify(_probes(outcomes, identify_fault), fraction)
            assert isinstance(got, EndpointStatus)
            assert got == _ladder_oracle(outcomes, fraction, identify_fault), (outcomes, fraction)
            seen.add(got)
    assert seen == set(EndpointStatus)


@pytest.mark.parametrize(
    "fraction,status",
    [(1.0, S.FUNCTIONAL), (0.0, S.NO_FULLTEXT_HARVESTING), (0.10, S.LITTLE_FULLTEXT_INDEXING), (0.25, S.FUNCTIONAL)],
)
def test_classify_examples(fraction, status):
    assert classify(_probes(["pass"] * 6), fraction) == status


def test_classify_threshold_is_a_knob():
    assert classify(_probes(["pass"] * 6), 0.3, threshold=0.5) == S.LITTLE_FULLTEXT_INDEXING


def _record(identifiers=(), formats=(), relations=(), deleted=False):
    header = RecordHeader("oai:x:1", None, (), deleted)
    if deleted:
        return DublinCoreRecord(header=header)
    elements = {}
    if formats:
        elements["format"] = list(formats)
    if identifiers:
        elements["identifier"] = list(identifiers)
    if relations:
        elements["relation"] = list(relations)
    return DublinCoreRecord(header=header, elements=elements)


def test_fulltext_suffix_match():
    assert extract_fulltext_candidates(_record(["https://r.example/bit/1.pdf"])) == ["https://r.example/bit/1.pdf"]


def test_landing_page_only_is_not_fulltext():
    assert extract_fulltext_candidates(_record(["https://r.example/handle/1/2"])) == []


def test_pdf_format_promotes_landing_page():
    rec = _record(["https://r.example/handle/1/2", "10.1/abc"], formats=["application/pdf"])
    assert extract_fulltext_candidates(rec) == ["https://r.example/handle/1/2"]


def test_relation_and_uppercase_suffix():
    rec = _record(["not a url.pdf"], relations=["HTTP://R.EXAMPLE/FILES/X.EPUB"])
    assert extract_fulltext_candidates(rec) == ["HTTP://R.EXAMPLE/FILES/X.EPUB"]


def test_deleted_record_has_no_candidates():
    assert extract_fulltext_candidates(_record(deleted=True)) == []


# -- diagnose against the mock ----------------------------------------------------


def test_healthy_endpoint_is_functional(mock_server):
    server = mock_server(n=120)
    report = diagnose(fast_endpoint(server.base_url), sleep=no_sleep)
    assert report.status == S.FUNCTIONAL
    assert report.fulltext_link_fraction >= 0.9
    assert [p.probe_name for p in report.probes] == list(PROBES)
    assert all(p.outcome == "pass" for p in report.probes)
    assert report.recommendations == []


def test_request_bound_on_healthy_endpoint(mock_server):
    for sample_size in (1, 25, 50, 60):
        server = mock_server(n=200)
        diagnose(fast_endpoint(server.base_url), sample_size, sleep=no_sleep)
        assert len(server.requests) <= 2 + math.ceil(sample_size / 25) + 1


def test_404_everywhere(mock_server):
    server = mock_server(fault="http-404-everywhere")
    report = diagnose(fast_endpoint(server.base_url), sleep=no_sleep)
    assert report.status == S.NO_OAI_PMH
    assert [p.outcome for p in report.probes][1:] == ["skip"] * 5


def test_malformed_list_records_is_non_operating(mock_server):
    server = mock_server(fault="malformed-xml-on-listrecords")
    report = diagnose(fast_endpoint(server.base_url), sleep=no_sleep)
    assert report.status == S.NON_OPERATING_OAI_PMH
    assert report.probe("identify").outcome == "pass"
    assert report.probe("sample_records").fault == "truncated"


FAULT_TABLE = [
    ("healthy", S.FUNCTIONAL),
    ("http-404-everywhere", S.NO_OAI_PMH),
    ("html-instead-of-xml", S.NO_OAI_PMH),
    ("malformed-xml-on-listrecords", S.NON_OPERATING_OAI_PMH),
    ("broken-resumption-token", S.NON_OPERATING_OAI_PMH),
    ("empty-list-records", S.NON_OPERATING_OAI_PMH),
    ("wrong-resolver-baseurl", S.WRONG_OAI_RESOLVER),
    ("no-fulltext-links", S.NO_FULLTEXT_HARVESTING),
    ("sparse-fulltext-links(0.1)", S.LITTLE_FULLTEXT_INDEXING),
]


@pytest.mark.parametrize("fault,status", FAULT_TABLE)
def test_fault_mode_round_trip(mock_server, fault, status):
    server = mock_server(n=100, fault=fault)
    report = diagnose(fast_endpoint(server.base_url), sleep=no_sleep)
    assert report.status == status
    assert report.rederived_status() == report.status


def test_fault_modes_cover_every_non_functional_status():
    covered = {status for fault, status in FAULT_TABLE if fault != "healthy"}
    assert covered == set(EndpointStatus) - {S.FUNCTIONAL}


def test_diagnosis_is_repeatable(mock_server):
    server = mock_server(n=90, fault="sparse-fulltext-links(0.2)")
    a = diagnose(fast_endpoint(server.base_url), sleep=no_sleep)
    b = diagnose(fast_endpoint(server.base_url), sleep=no_sleep)
    assert (a.status, a.fulltext_link_fraction) == (b.status, b.fulltext_link_fraction)


def test_report_json_round_trip(mock_server):
    server = mock_server(n=40, fault="wrong-resolver-baseurl")
    report = diagnose(fast_endpoint(server.base_url), sleep=no_sleep)
    doc = json.loads(report.to_json())
    assert doc["schema"] == "diagnosis-report/1"
    again = DiagnosisReport.from_dict(doc)
    assert again.to_json() == report.to_json()
    assert again.rederived_status() == S.WRONG_OAI_RESOLVER


def test_verify_links_scales_fraction(mock_server, monkeypatch):
    server = mock_server(n=50)
    verdicts = iter([True, False] * 10)
    monkeypatch.setattr(diagnostics, "_head_ok", lambda endpoint, url: next(verdicts))
    report = diagnose(fast_endpoint(server.base_url), verify_links=True, sleep=no_sleep)
    assert report.fulltext_link_fraction == pytest.approx(0.5)
    assert "verified by HEAD" in report.probe("fulltext_links").detail


def test_diagnose_many_keeps_order(mock_server):
    faults = ["healthy", "no-fulltext-links", "http-404-everywhere", "wrong-resolver-baseurl"]
    servers = [mock_server(n=30, fault=f) for f in faults]
    reports = diagnose_many([fast_endpoint(s.base_url) for s in servers], workers=4, sleep=no_sleep)
    assert [r.status for r in reports] == [
        S.FUNCTIONAL,
        S.NO_FULLTEXT_HARVESTING,
        S.NO_OAI_PMH,
        S.WRONG_OAI_RESOLVER,
    ]


def test_unreachable_host(monkeypatch):
    report = diagnose(fast_endpoint("http://127.0.0.1:9/oai", retries=0), sleep=no_sleep)
    assert report.status == S.NO_OAI_PMH


@pytest.mark.parametrize(
    "label,status",
    [
        ("Functional", S.FUNCTIONAL),
        ("Functioning", S.FUNCTIONAL),
        ("Functionarl", S.FUNCTIONAL),
        ("Non-operating OAI-PMH", S.NON_OPERATING_OAI_PMH),
        ("Did not have OAI-PMH", S.NO_OAI_PMH),
        ("No OAI-PMH", S.NO_OAI_PMH),
        ("Wrong OAI resolver", S.WRONG_OAI_RESOLVER),
        ("No full-text harvesting", S.NO_FULLTEXT_HARVESTING),
        ("Little full-text indexing", S.LITTLE_FULLTEXT_INDEXING),
    ],
)
def test_status_labels(label, status):
    assert status_from_label(label) == status


def test_unknown_label():
    with pytest.raises(ValueError):
        status_from_label("Mostly fine")
