import json
import random
import textwrap

import pytest

from discoverkit.compliance import (
    CatalogInvalid,
    ComplianceReport,
    EvidenceMismatch,
    default_catalog,
    evaluate,
    evaluate_rule,
    load_catalog,
    parse_catalog,
    parse_rule,
    render_report,
    score_outcomes,
)
from discoverkit.diagnostics import PROBES, DiagnosisReport, EndpointStatus, ProbeResult
from discoverkit.oai.records import OaiEndpoint
from discoverkit.quality import QualityReport
from discoverkit.registry import RepositoryProfile
from discoverkit.timeutil import parse_instant

NOW = parse_instant("2024-10-31T12:00:00Z")
URL = "https://repo.example.edu/oai"


def _profile(rid="demo"):
    return RepositoryProfile(rid, "Demo University", "public", "R1", "DSpace", OaiEndpoint(URL))


def _diagnosis(status=EndpointStatus.FUNCTIONAL, outcomes=None, fraction=1.0, url=URL):
    outcomes = outcomes or {}
    probes = [ProbeResult(n, outcomes.get(n, "pass"), "", 0.0) for n in PROBES]
    return DiagnosisReport(OaiEndpoint(url), probes, status, fraction, timestamp=NOW)


def _quality(rid="demo", core=1.0, pid=1.0, stamps=1.0):
    return QualityReport(rid, 50, [], core, 0.5, pid_coverage=pid, datestamp_coverage=stamps)


ALL_DECLARED = {"accessibility-statement": (True, "https://repo.example.edu/a11y"), "sustainability-plan": (True, "plan.pdf")}


# -- catalog ------------------------------------------------------------------------


def test_default_catalog():
    catalog = load_catalog()
    ids = [c.id for c in catalog]
    assert len(ids) >= 6 and len(set(ids)) == len(ids)
    assert ids[:6] == [
        "free-and-easy-discoverability-and-access",
        "persistent-identifiers",
        "metadata-quality",
        "common-formats",
        "provenance",
        "sustainability",
    ]
    checks = {k.id: k for _, k in catalog.checks()}
    assert checks["oai-pmh-functional"].kind == "automated"
    assert checks["accessibility-statement"].kind == "declared"
    assert checks["sustainability-plan"].kind == "declared"
    assert all(c.checks for c in catalog)


def test_empty_document():
    with pytest.raises(CatalogInvalid) as info:
        parse_catalog("")
    assert info.value.reason == "empty"


MINI = textwrap.dedent(
    """\
    schema: usrn-catalog/1
    characteristics:
      - id: alpha
        title: Alpha
        description: First.
        checks:
          - id: a-one
            title: A one
            kind: automated
            input: quality
            pass_rule: quality.core_score >= 0.5
            recommendation: Do A.
      - id: beta
        title: Beta
        description: Second.
        checks:
          - id: b-one
            title: B one
            kind: declared
            input: declaration
            pass_rule: operator says so
            recommendation: Do B.
    """
)


def test_mini_catalog_parses():
    catalog = parse_catalog(MINI)
    assert [c.id for c in catalog] == ["alpha", "beta"]
    assert catalog.toolkit_base is None


def test_duplicate_characteristic_id():
    doc = MINI.replace("id: beta", "id: alpha")
    with pytest.raises(CatalogInvalid) as info:
        parse_catalog(doc)
    assert info.value.reason == "duplicate-id"
    assert info.value.line == 13


def test_duplicate_check_id_across_characteristics():
    with pytest.raises(CatalogInvalid) as info:
        parse_catalog(MINI.replace("id: b-one", "id: a-one"))
    assert info.value.reason == "duplicate-id"


@pytest.mark.parametrize(
    "old,new,reason,field",
    [
        ("schema: usrn-catalog/1", "schema: usrn-catalog/9", "schema", "schema"),
        ("    title: Alpha\n", "", "missing-field", "title"),
        ("kind: automated", "kind: magic", "bad-field", "kind"),
        ("quality.core_score >= 0.5", "quality.core_score >= lots", "bad-rule", "pass_rule"),
        ("quality.core_score >= 0.5", "diagnosis.status == Functional", "bad-rule", "pass_rule"),
        ("input: quality", "input: declaration", "bad-field", "input"),
        ("id: alpha", "id: Alpha Beta", "bad-id", "id"),
        ("input: declaration", "input: quality", "bad-field", "input"),
    ],
)
def test_catalog_field_errors(old, new, reason, field):
    with pytest.raises(CatalogInvalid) as info:
        parse_catalog(MINI.replace(old, new, 1))
    assert info.value.reason == reason
    assert info.value.field == field
    assert info.value.line is not None
    assert f"line {info.value.line}" in str(info.value)


def test_characteristic_without_checks():
    doc = MINI.split("      - id: beta")[0] + "  - id: gamma\n    title: G\n    description: D\n    checks: []\n"
    with pytest.raises(CatalogInvalid) as info:
        parse_catalog(doc)
    assert info.value.field == "checks"


def test_yaml_syntax_error_has_line():
    with pytest.raises(CatalogInvalid) as info:
        parse_catalog("schema: usrn-catalog/1\ncharacteristics: [\n  - {")
    assert info.value.reason == "syntax"


def test_catalog_from_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(MINI, encoding="utf-8")
    assert len(load_catalog(path)) == 2


# -- rules --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "rule,outcome",
    [
        ("diagnosis.status == Functional", "yes"),
        ("diagnosis.status not in [NoOaiPmh, NonOperatingOaiPmh]", "yes"),
        ("diagnosis.status in [NoOaiPmh]", "no"),
        ("diagnosis.probe.identify == pass", "yes"),
        ("diagnosis.probe.teleport == pass", "unknown"),
        ("diagnosis.fulltext_link_fraction > 0.5", "yes"),
        ("quality.core_score >= 0.8", "no"),
        ("quality.completeness.title >= 0.5", "unknown"),
        ("profile.software == DSpace", "yes"),
        ("profile.endpoint exists", "yes"),
        ("profile.notes exists", "no"),
        ("profile.current_status == Functional", "unknown"),
    ],
)
def test_rule_evaluation(rule, outcome):
    evidence = {"diagnosis": _diagnosis(), "quality": _quality(core=0.7), "profile": _profile()}
    assert evaluate_rule(parse_rule(rule), evidence)[0] == outcome


def test_missing_evidence_is_unknown():
    assert evaluate_rule(parse_rule("quality.core_score >= 0.8"), {"quality": None})[0] == "unknown"


# -- evaluate -----------------------------------------------------------------------


def test_saturated_case():
    report = evaluate(_profile(), _diagnosis(), _quality(), ALL_DECLARED, now=NOW)
    assert set(report.characteristic_scores.values()) == {1.0}
    assert report.overall_score == 1.0
    assert report.recommendations == []


def test_no_oai_pmh_fails_the_endpoint_check():
    diag = _diagnosis(
        EndpointStatus.NO_OAI_PMH,
        {"reachability": "fail", **{n: "skip" for n in PROBES[1:]}},
        fraction=0.0,
    )
    report = evaluate(_profile(), diag, _quality(), ALL_DECLARED, now=NOW)
    assert report.outcome("oai-pmh-functional") == "no"
    assert report.characteristic_scores["free-and-easy-discoverability-and-access"] < 1
    assert any("OAI-PMH endpoint" in r and "toolkit" in r.lower() for r in report.recommendations)


def test_hand_computed_fixture_trio():
    diag = _diagnosis(EndpointStatus.NON_OPERATING_OAI_PMH, {"sample_records": "fail", "fulltext_links": "skip"}, 0.0)
    qual = _quality(core=0.7, pid=0.9, stamps=1.0)
    decl = {"accessibility-statement": {"value": True, "evidence": "page"}, "sustainability-plan": False}
    report = evaluate(_profile(), diag, qual, decl, now=NOW)
    assert report.characteristic_scores == {
        "free-and-easy-discoverability-and-access": 1 / 3,
        "persistent-identifiers": 1.0,
        "metadata-quality": 0.0,
        "common-formats": 1.0,
        "provenance": 1.0,
        "sustainability": 0.0,
    }
    assert report.overall_score == 5 / 9
    assert len(report.recommendations) == 4


def test_absent_declarations_are_unknown_and_count_against():
    report = evaluate(_profile(), _diagnosis(), _quality(), {}, now=NOW)
    assert report.outcome("accessibility-statement") == "unknown"
    assert report.outcome("sustainability-plan") == "unknown"
    assert report.characteristic_scores["sustainability"] == 0.0
    assert report.overall_score < 1.0


def test_every_check_gets_exactly_one_outcome():
    report = evaluate(_profile(), None, None, {}, now=NOW)
    ids = [r.check_id for r in report.results]
    assert ids == [k.id for _, k in default_catalog().checks()]
    assert all(r.outcome in ("yes", "no", "unknown") for r in report.results)


def test_repository_mismatch():
    with pytest.raises(EvidenceMismatch):
        evaluate(_profile(), _diagnosis(), _quality(rid="other"), {}, now=NOW)
    with pytest.raises(EvidenceMismatch):
        evaluate(_profile(), _diagnosis(url="https://elsewhere.example/oai"), _quality(), {}, now=NOW)


def test_evaluate_is_deterministic():
    args = (_profile(), _diagnosis(EndpointStatus.WRONG_OAI_RESOLVER, {"resolver_consistency": "fail"}), _quality(core=0.81))
    a = evaluate(*args, {"sustainability-plan": (True, "x")}, now=NOW).to_json()
    b = evaluate(*args, {"sustainability-plan": (True, "x")}, now=NOW).to_json()
    assert a == b


# -- scoring properties -------------------------------------------------------------


def test_score_monotone_under_flips():
    catalog = default_catalog()
    ids = [k.id for _, k in catalog.checks()]
    rng = random.Random(6)
    for _ in range(200):
        vec = {i: rng.choice(("yes", "no", "unknown")) for i in ids}
        scores, overall = score_outcomes(catalog, vec)
        for i in ids:
            if vec[i] == "yes":
                continue
            flipped_scores, flipped_overall = score_outcomes(catalog, {**vec, i: "yes"})
            assert flipped_overall >= overall
            assert all(flipped_scores[c] >= scores[c] for c in scores)


def test_flat_mean_scoring():
    scores, overall = score_outcomes(parse_catalog(MINI), {"a-one": "yes", "b-one": "unknown"})
    assert scores == {"alpha": 1.0, "beta": 0.0} and overall == 0.5


# -- rendering ----------------------------------------------------------------------


def _mixed_report():
    diag = _diagnosis(fraction=1.0)
    return evaluate(_profile(), diag, _quality(core=0.5), ALL_DECLARED, now=NOW)


def test_markdown_has_one_heading_per_characteristic():
    md = render_report(_mixed_report(), "markdown")
    headings = [line for line in md.splitlines() if line.startswith("## ")]
    assert headings == [f"## {c.title}" for c in default_catalog()]
    assert md.count("Go to the toolkit") == len(headings)
    assert "**Yes**" in md and "**No**" in md


def test_one_recommendation_block_per_failed_check():
    report = _mixed_report()
    assert [r.check_id for r in report.results if r.outcome != "yes"] == ["core-metadata-complete"]
    md = render_report(report, "markdown")
    assert md.count("> **Recommendation") == 1
    assert "> **Recommendation (core-metadata-complete):**" in md


def test_json_round_trip():
    report = evaluate(_profile(), None, _quality(pid=0.5), {"sustainability-plan": True}, now=NOW)
    doc = json.loads(render_report(report, "json"))
    assert doc["schema"] == "compliance-report/1"
    assert ComplianceReport.from_dict(doc) == report


def test_unknown_format():
    with pytest.raises(ValueError):
        render_report(_mixed_report(), "pdf")
