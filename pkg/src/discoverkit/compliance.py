"""Score a repository against the Desirable Characteristics catalog.

The catalog is a YAML document (schema ``usrn-catalog/1``) listing
characteristics and their checks. Automated checks carry a small predicate
over machine evidence; declared checks are answered by the repository operator.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import yaml

from discoverkit.diagnostics import DiagnosisReport
from discoverkit.oai.client import normalize_base_url
from discoverkit.quality import QualityReport
from discoverkit.registry import RepositoryProfile
from discoverkit.timeutil import format_instant, parse_instant, utcnow

CATALOG_SCHEMA = "usrn-catalog/1"
SCHEMA = "compliance-report/1"
OUTCOMES = ("yes", "no", "unknown")
KINDS = ("automated", "declared")
INPUTS = ("diagnosis", "quality", "profile", "declaration")
OPERATORS = ("==", "!=", ">=", "<=", ">", "<", "not in", "in", "exists")

_SLUG = re.compile(r"^[a-z0-9]+(?:-[a-z0-9]+)*$")
_RULE = re.compile(
    r"^\s*(diagnosis|quality|profile)((?:\.[A-Za-z_][\w-]*)+)\s+(==|!=|>=|<=|>|<|not\s+in|in|exists)\s*(.*?)\s*$"
)


class CatalogInvalid(ValueError):
    """The catalog document does not validate.

    ``reason`` is a short machine-readable tag (``duplicate-id``,
    ``missing-field``, ...); ``line`` is 1-based when known.
    """

    def __init__(self, reason: str, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.reason = reason
        self.line = line
        self.field = field
        where = f"line {line}: " if line else ""
        what = f"{field}: " if field else ""
        super().__init__(f"{where}{what}{message} [{reason}]")


class EvidenceMismatch(ValueError):
    pass


class RuleError(ValueError):
    pass


# -- rules --------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    source: str
    path: tuple[str, ...]
    operator: str
    literal: Any

    def __str__(self) -> str:
        return f"{self.source}.{'.'.join(self.path)} {self.operator} {self.literal!r}".rstrip()


def _literal(text: str) -> Any:
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return tuple(_literal(p) for p in inner.split(",")) if inner else ()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_rule(text: str) -> Rule:
    """Parse ``<evidence>.<field> <operator> <literal>``."""
    m = _RULE.match(text)
    if not m:
        raise RuleError(f"cannot parse rule {text!r}")
    source, path, op, rest = m.groups()
    op = " ".join(op.split())
    if op == "exists":
        if rest:
            raise RuleError("'exists' takes no operand")
        literal = None
    else:
        if not rest:
            raise RuleError(f"operator {op!r} needs an operand")
        literal = _literal(rest)
        if op in ("in", "not in") and not isinstance(literal, tuple):
            raise RuleError(f"operator {op!r} needs a [list] operand")
        if op in (">=", "<=", ">", "<") and not isinstance(literal, (int, float)):
            raise RuleError(f"operator {op!r} needs a numeric operand")
    return Rule(source, tuple(path.lstrip(".").split(".")), op, literal)


_MISSING = object()


def _diagnosis_value(report: DiagnosisReport, path: tuple[str, ...]):
    head = path[0]
    if head == "status" and len(path) == 1:
        return report.status.value
    if head == "probe" and len(path) == 2:
        try:
            return report.probe(path[1]).outcome
        except KeyError:
            return _MISSING
    if head == "fulltext_link_fraction" and len(path) == 1:
        return report.fulltext_link_fraction
    return _MISSING


def _quality_value(report: QualityReport, path: tuple[str, ...]):
    if path[0] == "completeness" and len(path) == 2:
        try:
            return report.fraction(path[1])
        except KeyError:
            return _MISSING
    if len(path) == 1 and path[0] in ("record_count", "core_score", "rights_coverage", "pid_coverage", "datestamp_coverage"):
        return getattr(report, path[0])
    return _MISSING


def _profile_value(profile: RepositoryProfile, path: tuple[str, ...]):
    if len(path) != 1:
        return _MISSING
    name = path[0]
    if name == "current_status":
        status = profile.current_status
        return status.value if status is not None else _MISSING
    if name == "endpoint":
        return profile.endpoint.base_url if profile.endpoint else _MISSING
    if name in ("id", "institution", "visibility", "carnegie", "software"):
        value = getattr(profile, name)
        return value if value not in ("", None) else _MISSING
    return _MISSING


def evaluate_rule(rule: Rule, evidence: Mapping[str, Any]) -> tuple[str, str]:
    """Apply ``rule`` to the evidence; returns ``(outcome, evidence text)``.

    Missing evidence gives ``unknown`` rather than ``no``.
    """
    subject = evidence.get(rule.source)
    if subject is None:
        return "unknown", f"no {rule.source} evidence"
    getter = {"diagnosis": _diagnosis_value, "quality": _quality_value, "profile": _profile_value}[rule.source]
    value = getter(subject, rule.path)
    label = f"{rule.source}.{'.'.join(rule.path)}"
    if rule.operator == "exists":
        return ("yes" if value is not _MISSING else "no"), f"{label} {'present' if value is not _MISSING else 'absent'}"
    if value is _MISSING:
        return "unknown", f"{label} not available"
    op, lit = rule.operator, rule.literal
    if op == "==":
        ok = value == lit
    elif op == "!=":
        ok = value != lit
    elif op == "in":
        ok = value in lit
    elif op == "not in":
        ok = value not in lit
    else:
        if not isinstance(value, (int, float)):
            return "unknown", f"{label} = {value!r} is not numeric"
        ok = {">=": value >= lit, "<=": value <= lit, ">": value > lit, "<": value < lit}[op]
    shown = f"{value:.4f}".rstrip("0").rstrip(".") if isinstance(value, float) else str(value)
    return ("yes" if ok else "no"), f"{label} = {shown}"


# -- catalog ------------------------------------------------------------------


@dataclass(frozen=True)
class CheckSpec:
    id: str
    title: str
    kind: str
    input: str
    pass_rule: str
    recommendation: str
    rule: Optional[Rule] = None


@dataclass(frozen=True)
class Characteristic:
    id: str
    title: str
    description: str
    checks: tuple[CheckSpec, ...]
    toolkit_url: Optional[str] = None


@dataclass(frozen=True)
class Catalog:
    characteristics: tuple[Characteristic, ...]
    toolkit_base: Optional[str] = None

    def __iter__(self):
        return iter(self.characteristics)

    def __len__(self) -> int:
        return len(self.characteristics)

    def checks(self) -> list[tuple[Characteristic, CheckSpec]]:
        return [(c, k) for c in self.characteristics for k in c.checks]

    def toolkit_link(self, characteristic: Characteristic) -> Optional[str]:
        return characteristic.toolkit_url or self.toolkit_base


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that tags every mapping with its 1-based start line."""


def _construct_mapping(loader, node, deep=False):
    mapping = yaml.SafeLoader.construct_mapping(loader, node, deep=deep)
    mapping["__line__"] = node.start_mark.line + 1
    return mapping


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _require_str(node: dict, key: str, line: Optional[int], optional: bool = False) -> Optional[str]:
    value = node.get(key)
    if value is None:
        if optional:
            return None
        raise CatalogInvalid("missing-field", "required field is missing", line, key)
    if not isinstance(value, str) or not value.strip():
        raise CatalogInvalid("bad-field", "must be a non-empty string", line, key)
    return value.strip()


def _require_slug(node: dict, line: Optional[int]) -> str:
    value = node.get("id")
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = str(value)
        node["id"] = value
    slug = _require_str(node, "id", line)
    if not _SLUG.match(slug):
        raise CatalogInvalid("bad-id", f"{slug!r} is not a lowercase slug", line, "id")
    return slug


def _parse_check(node: Any, parent_line: Optional[int], seen: dict[str, int]) -> CheckSpec:
    if not isinstance(node, dict):
        raise CatalogInvalid("bad-field", "each check must be a mapping", parent_line, "checks")
    line = node.get("__line__")
    cid = _require_slug(node, line)
    if cid in seen:
        raise CatalogInvalid("duplicate-id", f"{cid!r} already defined on line {seen[cid]}", line, "id")
    seen[cid] = line
    title = _require_str(node, "title", line)
    kind = _require_str(node, "kind", line)
    if kind not in KINDS:
        raise CatalogInvalid("bad-field", f"kind must be one of {KINDS}", line, "kind")
    source = _require_str(node, "input", line)
    if source not in INPUTS:
        raise CatalogInvalid("bad-field", f"input must be one of {INPUTS}", line, "input")
    pass_rule = _require_str(node, "pass_rule", line)
    recommendation = _require_str(node, "recommendation", line)
    rule = None
    if kind == "automated":
        if source == "declaration":
            raise CatalogInvalid("bad-field", "automated checks must read machine evidence", line, "input")
        try:
            rule = parse_rule(pass_rule)
        except RuleError as exc:
            raise CatalogInvalid("bad-rule", str(exc), line, "pass_rule") from None
        if rule.source != source:
            raise CatalogInvalid("bad-rule", f"rule reads {rule.source} but input is {source}", line, "pass_rule")
    elif source != "declaration":
        raise CatalogInvalid("bad-field", "declared checks must have input: declaration", line, "input")
    return CheckSpec(cid, title, kind, source, pass_rule, recommendation, rule)


def parse_catalog(text: str) -> Catalog:
    """Validate a catalog document and return its characteristics in order."""
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise CatalogInvalid("syntax", str(getattr(exc, "problem", exc)), mark.line + 1 if mark else None) from None
    if doc is None:
        raise CatalogInvalid("empty", "catalog document is empty")
    if not isinstance(doc, dict):
        raise CatalogInvalid("bad-field", "top level must be a mapping", 1)
    if doc.get("schema") != CATALOG_SCHEMA:
        raise CatalogInvalid("schema", f"expected schema {CATALOG_SCHEMA!r}", doc.get("__line__"), "schema")
    toolkit_base = _require_str(doc, "toolkit_base", doc.get("__line__"), optional=True)
    chars = doc.get("characteristics")
    if not isinstance(chars, list) or not chars:
        raise CatalogInvalid("missing-field", "need a non-empty list", doc.get("__line__"), "characteristics")
    seen_chars: dict[str, int] = {}
    seen_checks: dict[str, int] = {}
    out = []
    for node in chars:
        if not isinstance(node, dict):
            raise CatalogInvalid("bad-field", "each characteristic must be a mapping", doc.get("__line__"), "characteristics")
        line = node.get("__line__")
        cid = _require_slug(node, line)
        if cid in seen_chars:
            raise CatalogInvalid("duplicate-id", f"{cid!r} already defined on line {seen_chars[cid]}", line, "id")
        seen_chars[cid] = line
        title = _require_str(node, "title", line)
        description = _require_str(node, "description", line)
        toolkit_url = _require_str(node, "toolkit_url", line, optional=True)
        checks = node.get("checks")
        if not isinstance(checks, list) or not checks:
            raise CatalogInvalid("missing-field", "every characteristic needs at least one check", line, "checks")
        specs = tuple(_parse_check(c, line, seen_checks) for c in checks)
        out.append(Characteristic(cid, title, description, specs, toolkit_url))
    overlap = set(seen_chars) & set(seen_checks)
    if overlap:
        dup = sorted(overlap)[0]
        raise CatalogInvalid("duplicate-id", f"{dup!r} names both a characteristic and a check", seen_checks[dup], "id")
    return Catalog(tuple(out), toolkit_base)


def load_catalog(source: Union[str, Path, None] = None) -> Catalog:
    """Load a catalog file, or the embedded default when ``source`` is None."""
    if source is None:
        text = resources.files("discoverkit.data").joinpath("usrn_catalog.yaml").read_text(encoding="utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    return parse_catalog(text)


_DEFAULT: Optional[Catalog] = None


def default_catalog() -> Catalog:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_catalog()
    return _DEFAULT


# -- evaluation ---------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    characteristic_id: str
    outcome: str
    evidence: str

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "characteristic_id": self.characteristic_id,
            "outcome": self.outcome,
            "evidence": self.evidence,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CheckResult":
        return cls(data["check_id"], data["characteristic_id"], data["outcome"], data["evidence"])


@dataclass
class ComplianceReport:
    repository_id: str
    results: list[CheckResult]
    characteristic_scores: dict[str, float]
    overall_score: float
    recommendations: list[str] = field(default_factory=list)
    generated_at: datetime = field(default_factory=utcnow)

    def outcome(self, check_id: str) -> str:
        for r in self.results:
            if r.check_id == check_id:
                return r.outcome
        raise KeyError(check_id)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "repository_id": self.repository_id,
            "results": [r.to_dict() for r in self.results],
            "characteristic_scores": dict(self.characteristic_scores),
            "overall_score": self.overall_score,
            "recommendations": list(self.recommendations),
            "generated_at": format_instant(self.generated_at),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ComplianceReport":
        if data.get("schema") != SCHEMA:
            raise ValueError(f"not a {SCHEMA} document")
        return cls(
            repository_id=data["repository_id"],
            results=[CheckResult.from_dict(r) for r in data["results"]],
            characteristic_scores={k: float(v) for k, v in data["characteristic_scores"].items()},
            overall_score=float(data["overall_score"]),
            recommendations=list(data["recommendations"]),
            generated_at=parse_instant(data["generated_at"]),
        )


def score_outcomes(catalog: Catalog, outcomes: Mapping[str, str]) -> tuple[dict[str, float], float]:
    """Per-characteristic pass ratio and their flat mean.

    Only ``yes`` counts as passed. Sums are exact fractions, converted to
    float once at the end.
    """
    ratios = {}
    for char in catalog:
        passed = sum(1 for k in char.checks if outcomes.get(k.id) == "yes")
        ratios[char.id] = Fraction(passed, len(char.checks))
    overall = sum(ratios.values(), Fraction(0)) / len(ratios)
    return {k: float(v) for k, v in ratios.items()}, float(overall)


def _declared(declarations: Mapping[str, Any], check_id: str) -> tuple[str, str]:
    if check_id not in declarations:
        return "unknown", "no declaration"
    value = declarations[check_id]
    if isinstance(value, dict):
        flag, note = value.get("value"), value.get("evidence", "")
    elif isinstance(value, (tuple, list)):
        flag, note = (value[0], value[1] if len(value) > 1 else "")
    else:
        flag, note = value, ""
    if not isinstance(flag, bool):
        return "unknown", f"declaration is not a boolean: {flag!r}"
    prefix = "declared yes" if flag else "declared no"
    return ("yes" if flag else "no"), f"{prefix}: {note}" if note else prefix


def _check_ids(profile: RepositoryProfile, diagnosis: Optional[DiagnosisReport], quality: Optional[QualityReport]):
    if quality is not None and quality.repository_id and quality.repository_id != profile.id:
        raise EvidenceMismatch(f"quality report is for {quality.repository_id!r}, profile is {profile.id!r}")
    if diagnosis is not None and profile.endpoint is not None:
        a = normalize_base_url(diagnosis.endpoint.base_url)
        b = normalize_base_url(profile.endpoint.base_url)
        if a != b:
            raise EvidenceMismatch(f"diagnosis is for {a}, profile endpoint is {b}")


def evaluate(
    profile: RepositoryProfile,
    diagnosis: Optional[DiagnosisReport],
    quality: Optional[QualityReport],
    declarations: Optional[Mapping[str, Any]] = None,
    catalog: Optional[Catalog] = None,
    now: Optional[datetime] = None,
) -> ComplianceReport:
    """Give every catalog check exactly one outcome and score the result.

    Declarations map a check id to ``(bool, evidence)``, ``{"value": bool,
    "evidence": str}`` or a bare bool. Missing evidence and missing
    declarations both yield ``unknown``, which scores as not passed.
    """
    catalog = catalog or default_catalog()
    declarations = declarations or {}
    _check_ids(profile, diagnosis, quality)
    evidence = {"diagnosis": diagnosis, "quality": quality, "profile": profile}
    results = []
    recommendations = []
    for char, check in catalog.checks():
        if check.kind == "declared":
            outcome, note = _declared(declarations, check.id)
        else:
            outcome, note = evaluate_rule(check.rule, evidence)
        results.append(CheckResult(check.id, char.id, outcome, note))
        if outcome != "yes":
            link = catalog.toolkit_link(char)
            text = f"{char.title} / {check.title} ({outcome}): {check.recommendation}"
            recommendations.append(f"{text} Go to the toolkit: {link}" if link else text)
    scores, overall = score_outcomes(catalog, {r.check_id: r.outcome for r in results})
    return ComplianceReport(
        repository_id=profile.id,
        results=results,
        characteristic_scores=scores,
        overall_score=overall,
        recommendations=recommendations,
        generated_at=now or utcnow(),
    )


def _pct(x: float) -> str:
    return f"{x * 100:.0f}%"


def render_report(report: ComplianceReport, format: str = "json", catalog: Optional[Catalog] = None) -> str:
    """Render as JSON or as a markdown page laid out like the checker's report."""
    if format == "json":
        return report.to_json()
    if format != "markdown":
        raise ValueError(f"unknown format {format!r}")
    catalog = catalog or default_catalog()
    by_id = {r.check_id: r for r in report.results}
    lines = [
        f"# Desirable Characteristics report: {report.repository_id}",
        "",
        f"Overall compliance: {_pct(report.overall_score)}",
        f"Generated: {format_instant(report.generated_at)}",
        "",
    ]
    for char in catalog:
        lines += [f"## {char.title}", "", char.description, ""]
        score = report.characteristic_scores.get(char.id)
        if score is not None:
            lines += [f"Score: {_pct(score)}", ""]
        blocks = []
        for check in char.checks:
            r = by_id.get(check.id)
            if r is None:
                continue
            answer = {"yes": "Yes", "no": "No", "unknown": "Unknown"}[r.outcome]
            lines.append(f"- {check.title}: **{answer}** ({r.evidence})")
            if r.outcome != "yes":
                blocks += ["", f"> **Recommendation ({check.id}):** {check.recommendation}"]
        lines += blocks
        link = catalog.toolkit_link(char)
        if link:
            lines += ["", f"[Go to the toolkit]({link})"]
        lines.append("")
    return "\n".join(lines)


def load_declarations(path: Union[str, Path]) -> dict[str, Any]:
    """Read a JSON declarations file: ``{check_id: {"value": bool, "evidence": str}}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"{path}: declarations must be a JSON object")
    return data


def outcome_vector(report: ComplianceReport) -> dict[str, str]:
    return {r.check_id: r.outcome for r in report.results}


def all_check_ids(catalog: Optional[Catalog] = None) -> Sequence[str]:
    return [k.id for _, k in (catalog or default_catalog()).checks()]
