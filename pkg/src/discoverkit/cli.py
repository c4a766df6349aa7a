"""Command-line entry point: ``discoverkit <command> ...``.

Exit status is 0 on success, 1 when the work itself fails (unknown
repository, unreachable data, invalid input file) and 2 on usage errors.
Only ``harvest``, ``reharvest``, ``upsert`` and ``diagnose --record`` write to
the registry; every other command opens it read-only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Optional, Sequence

from discoverkit import __version__
from discoverkit import compliance, freshfinds, metrics, quality
from discoverkit.diagnostics import DiagnosisReport, diagnose
from discoverkit.mock.corpus import CorpusOptions, corpus_from_seed
from discoverkit.mock.server import FaultProfile, PortInUse, serve
from discoverkit.oai.client import list_records
from discoverkit.oai.protocol import InvalidRequest, OaiProtocolError, TokenLoop, TransportFault
from discoverkit.oai.records import DAY_GRANULARITY, DublinCoreRecord, OaiEndpoint, format_datestamp
from discoverkit.registry import (
    PILOT_END,
    PILOT_START,
    HarvestRun,
    Registry,
    RegistryError,
    RepositoryProfile,
    _atomic_write,
    seed_table1,
)
from discoverkit.timeutil import format_instant, parse_instant

log = logging.getLogger("discoverkit")

ENV_REGISTRY = "DISCOVERKIT_REGISTRY"
DEFAULT_REGISTRY = ".discoverkit"
FORMATS = ("json", "markdown", "table")
MAX_TIMEOUT = 300.0
RECORDS_DIR = "records"

DOMAIN_ERRORS = (
    RegistryError,
    OaiProtocolError,
    TransportFault,
    TokenLoop,
    InvalidRequest,
    compliance.CatalogInvalid,
    compliance.EvidenceMismatch,
    quality.EmptyInput,
    metrics.NoObservation,
    PortInUse,
    OSError,
    ValueError,
    KeyError,
)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    registry_dir: Path
    timeout: float = 30.0
    retries: int = 3
    politeness: int = 1000
    output_format: str = "json"

    def __post_init__(self):
        if not 0 < self.timeout <= MAX_TIMEOUT:
            raise UsageError(f"timeout must be in (0, {MAX_TIMEOUT:g}] seconds")
        if not 0 <= self.retries <= 20:
            raise UsageError("retries must be between 0 and 20")
        if not 0 <= self.politeness <= 60000:
            raise UsageError("politeness must be between 0 and 60000 ms")
        if self.output_format not in FORMATS:
            raise UsageError(f"format must be one of {FORMATS}")
        if self.registry_dir.exists() and not self.registry_dir.is_dir():
            raise UsageError(f"registry {self.registry_dir} is not a directory")

    def endpoint(self, base_url: str) -> OaiEndpoint:
        return OaiEndpoint(base_url, timeout=self.timeout, max_retries=self.retries, politeness_delay=self.politeness)


def resolve_config(args: argparse.Namespace, environ=os.environ) -> CliConfig:
    """Merge config file, environment and flags; flags win."""
    file_conf: dict = {}
    if args.config:
        try:
            file_conf = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_conf, dict):
            raise UsageError(f"config {args.config} must hold a JSON object")
        unknown = set(file_conf) - {"registry", "timeout", "retries", "politeness", "format"}
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return file_conf.get(key, default)

    registry = args.registry or environ.get(ENV_REGISTRY) or file_conf.get("registry") or DEFAULT_REGISTRY
    try:
        return CliConfig(
            registry_dir=Path(registry),
            timeout=float(pick(args.timeout, "timeout", 30.0)),
            retries=int(pick(args.retries, "retries", 3)),
            politeness=int(pick(args.politeness, "politeness", 1000)),
            output_format=pick(args.format, "format", "json"),
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config value: {exc}") from None


# -- helpers ------------------------------------------------------------------


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _open_ro(conf: CliConfig) -> Registry:
    return Registry(conf.registry_dir, readonly=True)


def _cache_path(conf: CliConfig, repository_id: str) -> Path:
    return conf.registry_dir / RECORDS_DIR / f"{repository_id}.ndjson"


def read_cache(conf: CliConfig, repository_id: str) -> list[DublinCoreRecord]:
    path = _cache_path(conf, repository_id)
    if not path.exists():
        raise quality.EmptyInput(f"no harvested records for {repository_id}; run 'discoverkit harvest {repository_id}' first")
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(DublinCoreRecord.from_dict(json.loads(line)))
    return out


def _write_cache(conf: CliConfig, repository_id: str, records: dict[str, DublinCoreRecord]) -> None:
    path = _cache_path(conf, repository_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(records[k].to_dict(), sort_keys=True) for k in sorted(records)]
    _atomic_write(path, "".join(line + "\n" for line in lines))


def _diagnosis_markdown(report: DiagnosisReport) -> str:
    lines = [
        f"# Endpoint diagnosis: {report.endpoint.base_url}",
        "",
        f"Status: **{report.status.value}**",
        f"Full-text link fraction: {report.fulltext_link_fraction:.2f}",
        "",
        "| Probe | Outcome | Latency (s) | Detail |",
        "|---|---|---|---|",
    ]
    for p in report.probes:
        lines.append(f"| {p.probe_name} | {p.outcome} | {p.latency:.3f} | {p.detail} |")
    if report.recommendations:
        lines += ["", "## Recommendations", ""]
        lines += [f"- {r}" for r in report.recommendations]
    return "\n".join(lines) + "\n"


def _quality_markdown(report: quality.QualityReport) -> str:
    lines = [
        f"# Metadata quality: {report.repository_id}",
        "",
        f"Records scored: {report.record_count}",
        f"Core score: {report.core_score:.3f}",
        f"Rights coverage: {report.rights_coverage:.3f}",
        f"Persistent identifier coverage: {report.pid_coverage:.3f}",
        "",
        "| Element | Present | Total | Fraction |",
        "|---|---|---|---|",
    ]
    for fc in report.completeness:
        lines.append(f"| {fc.element} | {fc.present_count} | {fc.total_records} | {fc.fraction:.3f} |")
    return "\n".join(lines) + "\n"


# -- commands -----------------------------------------------------------------


def cmd_diagnose(args, conf: CliConfig) -> int:
    target = args.target
    profile = None
    if "://" in target:
        endpoint = conf.endpoint(target)
    else:
        with _open_ro(conf) as reg:
            profile = reg.get_profile(target)
        if profile.endpoint is None:
            raise ValueError(f"{target} has no OAI-PMH endpoint on record")
        endpoint = conf.endpoint(profile.endpoint.base_url)
    report = diagnose(endpoint, args.sample, fulltext_threshold=args.threshold, verify_links=args.verify_links)
    if args.record:
        if profile is None:
            raise UsageError("--record needs a repository id, not a URL")
        with Registry(conf.registry_dir) as reg:
            reg.record_status(profile.id, report.status)
    if args.save:
        Path(args.save).write_text(report.to_json() + "\n", encoding="utf-8")
    _emit(report.to_json() if conf.output_format == "json" else _diagnosis_markdown(report))
    return 0


def incremental_from(run: Optional[HarvestRun]) -> Optional[str]:
    """Day-granularity ``from`` for the next harvest: one day before the last
    complete run finished, so late datestamps on the boundary are re-read."""
    if run is None:
        return None
    return format_datestamp(run.finished - timedelta(days=1), DAY_GRANULARITY)


@dataclass
class _Harvest:
    """One repository's harvest, fetched but not yet written to the registry."""

    run: HarvestRun
    from_: Optional[str]
    cache: dict[str, DublinCoreRecord]
    error: Optional[Exception]


def _fetch(args, conf: CliConfig, profile: RepositoryProfile, last_run: Optional[HarvestRun], clock) -> _Harvest:
    """Page through one endpoint into the record cache; touches no registry state."""
    repo_id = profile.id
    endpoint = conf.endpoint(profile.endpoint.base_url)
    cache: dict[str, DublinCoreRecord] = {}
    if args.full:
        from_ = args.from_
    else:
        from_ = args.from_ or incremental_from(last_run)
        if _cache_path(conf, repo_id).exists():
            cache = {r.identifier: r for r in read_cache(conf, repo_id)}
    started = clock()
    stream = list_records(endpoint, args.prefix, from_=from_, set_spec=args.set)
    error: Optional[Exception] = None
    try:
        for record in stream:
            if record.deleted:
                cache.pop(record.identifier, None)
            else:
                cache[record.identifier] = record
    except (OaiProtocolError, TransportFault, TokenLoop) as exc:
        error = exc
    finished = max(clock(), started)
    resume = getattr(error, "resume_from", None) or stream.last_datestamp
    if error is None:
        outcome = "complete"
    elif resume is not None:
        outcome = "partial"
    else:
        outcome = "failed"
    run = HarvestRun(
        repository_id=repo_id,
        started=started,
        finished=finished,
        records_seen=stream.records_seen,
        records_deleted=stream.records_deleted,
        pages_fetched=stream.pages_fetched,
        outcome=outcome,
        resume_from=format_instant(resume) if outcome == "partial" else None,
    )
    if outcome != "failed":
        _write_cache(conf, repo_id, cache)
    return _Harvest(run, from_, cache, error)


def _commit(reg: Registry, profile: RepositoryProfile, result: _Harvest) -> dict:
    run = result.run
    reg.record_run(run)
    if run.outcome == "complete":
        last = profile.exposed_count_history[-1][0] if profile.exposed_count_history else None
        if last is None or run.finished > last:
            reg.record_count(profile.id, len(result.cache), at=run.finished)
    if result.error is not None:
        print(f"discoverkit: harvest {run.outcome} for {profile.id}: {result.error}", file=sys.stderr)
    return dict(run.to_dict(), from_=result.from_, cached_records=len(result.cache))


def cmd_harvest(args, conf: CliConfig) -> int:
    if (args.repo_id is None) == (not args.all):
        raise UsageError("harvest needs exactly one of REPO_ID or --all")
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    with Registry(conf.registry_dir) as reg:
        if args.all:
            profiles = [p for p in reg.profiles() if p.endpoint is not None]
        else:
            profiles = [reg.get_profile(args.repo_id)]
            if profiles[0].endpoint is None:
                raise ValueError(f"{args.repo_id} has no OAI-PMH endpoint on record")
        last_runs = {p.id: reg.last_complete_run(p.id) for p in profiles}
        # network work fans out across endpoints; registry writes stay on this thread
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(lambda p: _fetch(args, conf, p, last_runs[p.id], reg.clock), profiles))
        docs = [_commit(reg, p, r) for p, r in zip(profiles, results)]
    _emit(_dump({"runs": docs} if args.all else docs[0]))
    return 1 if any(r.error is not None for r in results) else 0


def cmd_score(args, conf: CliConfig) -> int:
    with _open_ro(conf) as reg:
        reg.get_profile(args.repo_id)
    report = quality.score_records(read_cache(conf, args.repo_id), repository_id=args.repo_id)
    found = []
    for path in args.snippets:
        text = Path(path).read_text(encoding="utf-8")
        found += [(path, m) for m in quality.find_rights_statements(text, source="fulltext-snippet")]
    if conf.output_format == "json":
        if not args.snippets:
            _emit(report.to_json())
        else:
            doc = json.loads(report.to_json())
            doc["snippet_rights"] = [dict(m.to_dict(), file=path) for path, m in found]
            _emit(_dump(doc))
    else:
        text = _quality_markdown(report)
        if args.snippets:
            lines = ["", "## Rights statements in snippets", ""]
            lines += [f"- `{path}` at {m.offset}: {m.normalized_license} ({m.matched_text!r})" for path, m in found]
            if not found:
                lines.append("None found.")
            text = text.rstrip("\n") + "\n" + "\n".join(lines) + "\n"
        _emit(text)
    return 0


def cmd_comply(args, conf: CliConfig) -> int:
    with _open_ro(conf) as reg:
        profile = reg.get_profile(args.repo_id)
    catalog = compliance.load_catalog(args.catalog) if args.catalog else compliance.default_catalog()
    declarations = compliance.load_declarations(args.declare) if args.declare else {}
    if args.diagnosis:
        diag = DiagnosisReport.from_dict(json.loads(Path(args.diagnosis).read_text(encoding="utf-8")))
    elif profile.endpoint is not None and not args.offline:
        diag = diagnose(conf.endpoint(profile.endpoint.base_url))
    else:
        diag = None
    if args.quality:
        qual = quality.QualityReport.from_dict(json.loads(Path(args.quality).read_text(encoding="utf-8")))
    elif _cache_path(conf, args.repo_id).exists():
        qual = quality.score_records(read_cache(conf, args.repo_id), repository_id=args.repo_id)
    else:
        qual = None
    report = compliance.evaluate(profile, diag, qual, declarations, catalog)
    fmt = "json" if conf.output_format == "json" else "markdown"
    _emit(compliance.render_report(report, fmt, catalog))
    return 0


def cmd_freshfinds(args, conf: CliConfig) -> int:
    with _open_ro(conf) as reg:
        reg.get_profile(args.repo_id)
    holdings = freshfinds.HoldingsIndex.from_records(read_cache(conf, args.repo_id))
    feed = freshfinds.read_feed(args.feed)
    report = freshfinds.gap_report(feed, holdings, args.repo_id, threshold=args.threshold)
    _emit(report.to_json() if conf.output_format == "json" else report.to_markdown())
    return 0


def cmd_metrics(args, conf: CliConfig) -> int:
    t_start = parse_instant(args.start)
    t_end = parse_instant(args.end)
    if t_end < t_start:
        raise UsageError("--end must not precede --start")
    with _open_ro(conf) as reg:
        profiles = reg.profiles()
    if not profiles:
        raise ValueError(f"registry {conf.registry_dir} holds no repositories")
    if args.anonymize:
        reports = metrics.anonymized_report(profiles, t_start, t_end, group_by=args.group_by, suppression_k=args.k)
        if conf.output_format == "json":
            _emit(metrics.reports_to_json(reports))
        else:
            _emit(metrics.aggregate_table(reports))
        return 0
    observed = []
    for p in profiles:
        try:
            metrics.growth(p, t_start, t_end)
        except metrics.NoObservation:
            continue
        observed.append(p)
    if conf.output_format != "json":
        _emit(metrics.growth_table(observed, t_start, t_end))
        return 0
    records = [metrics.growth(p, t_start, t_end) for p in observed]
    doc = {
        "schema": "growth-report/1",
        "start": format_instant(t_start),
        "end": format_instant(t_end),
        "repositories": [r.to_dict() for r in records],
        "totals": metrics.fleet_totals(records).to_dict() if records else None,
    }
    _emit(_dump(doc))
    return 0


def cmd_reharvest(args, conf: CliConfig) -> int:
    with Registry(conf.registry_dir) as reg:
        if args.advance:
            event = reg.advance_request(args.repo_id, args.advance)
            _emit(_dump(event.to_dict()))
        else:
            if not args.by:
                raise UsageError("--by is required when filing a request")
            req = reg.request_reharvest(args.repo_id, args.by)
            _emit(_dump(req.to_dict()))
    return 0


def cmd_upsert(args, conf: CliConfig) -> int:
    with Registry(conf.registry_dir) as reg:
        if args.table1:
            done = seed_table1(reg)
        elif args.file:
            data = json.loads(Path(args.file).read_text(encoding="utf-8"))
            items = data if isinstance(data, list) else [data]
            done = [reg.upsert_profile(RepositoryProfile.from_dict(d)) for d in items]
        else:
            if not args.repo_id:
                raise UsageError("give a repository id, --file or --table1")
            try:
                old = reg.get_profile(args.repo_id)
                base = old.to_dict()
            except RegistryError:
                base = {"id": args.repo_id, "institution": args.institution or args.repo_id}
            for key in ("institution", "visibility", "carnegie", "software"):
                value = getattr(args, key)
                if value is not None:
                    base[key] = value
            if args.url:
                base["endpoint"] = conf.endpoint(args.url).to_dict()
            done = [reg.upsert_profile(RepositoryProfile.from_dict(base))]
    _emit(_dump({"upserted": [p.id for p in done]}))
    return 0


def cmd_mock_serve(args, conf: CliConfig) -> int:
    fault = FaultProfile.parse(args.fault, latency_ms=args.latency)
    options = CorpusOptions(page_size=args.page_size, fulltext_fraction=args.fulltext_fraction)
    corpus = corpus_from_seed(args.corpus_seed, args.size, options)
    server = serve(corpus, fault, port=args.port, host=args.host)
    print(f"serving {args.size} records ({fault}) at {server.base_url}", flush=True)
    try:
        if args.duration is not None:
            time.sleep(args.duration)
        else:
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--registry", default=default, help=f"registry directory (default ${ENV_REGISTRY} or {DEFAULT_REGISTRY})")
    g.add_argument("--format", choices=FORMATS, default=default, help="output format (default json)")
    g.add_argument("--timeout", type=float, default=default, help="HTTP timeout in seconds, at most 300")
    g.add_argument("--retries", type=int, default=default, help="retries for transient HTTP failures")
    g.add_argument("--politeness", type=int, default=default, help="delay between pages in milliseconds")
    g.add_argument("--config", default=default, help="JSON config file; flags win over its values")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discoverkit", description="Repository discoverability toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    _global_options(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("diagnose", parents=[common], help="probe an OAI-PMH endpoint and classify it")
    p.add_argument("target", help="base URL, or a repository id from the registry")
    p.add_argument("--sample", type=int, default=50, help="records to sample (default 50)")
    p.add_argument("--threshold", type=float, default=0.25, help="full-text fraction below which indexing is 'little'")
    p.add_argument("--verify-links", action="store_true", help="HEAD-check a few full-text links")
    p.add_argument("--record", action="store_true", help="append the status to the repository's history")
    p.add_argument("--save", help="also write the JSON report to this file")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("harvest", parents=[common], help="incrementally harvest a repository into the record cache")
    p.add_argument("repo_id", nargs="?")
    p.add_argument("--all", action="store_true", help="harvest every repository that has an endpoint")
    p.add_argument("--workers", type=int, default=4, help="endpoints harvested at once with --all (default 4)")
    p.add_argument("--from", dest="from_", help="override the incremental start datestamp")
    p.add_argument("--full", action="store_true", help="ignore earlier runs and rebuild the cache")
    p.add_argument("--prefix", default="oai_dc", help="metadataPrefix (default oai_dc)")
    p.add_argument("--set", help="restrict to one setSpec")
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("score", parents=[common], help="metadata quality of the cached records")
    p.add_argument("repo_id")
    p.add_argument("--snippets", nargs="+", default=[], metavar="FILE", help="full-text snippet files to scan for rights statements")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("comply", parents=[common], help="Desirable Characteristics compliance report")
    p.add_argument("repo_id")
    p.add_argument("--declare", help="JSON file of operator declarations")
    p.add_argument("--diagnosis", help="use a saved diagnosis report instead of probing")
    p.add_argument("--quality", help="use a saved quality report instead of the record cache")
    p.add_argument("--catalog", help="alternative catalog document")
    p.add_argument("--offline", action="store_true", help="never contact the endpoint")
    p.set_defaults(func=cmd_comply)

    p = sub.add_parser("freshfinds", parents=[common], help="works in a feed that the repository lacks")
    p.add_argument("repo_id")
    p.add_argument("--feed", required=True, help="line-delimited JSON feed of external works")
    p.add_argument("--threshold", type=float, default=freshfinds.DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_freshfinds)

    p = sub.add_parser("metrics", parents=[common], help="growth of exposed content")
    p.add_argument("--group-by", nargs="+", choices=metrics.DEMOGRAPHIC_FIELDS, default=list(metrics.DEMOGRAPHIC_FIELDS))
    p.add_argument("--anonymize", action="store_true", help="report demographic groups only, with suppression")
    p.add_argument("--k", type=int, default=metrics.DEFAULT_SUPPRESSION_K, help="minimum group size (default 3)")
    p.add_argument("--start", default=PILOT_START)
    p.add_argument("--end", default=PILOT_END)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("reharvest", parents=[common], help="file or advance a reharvest request")
    p.add_argument("repo_id", help="repository id, or request id with --advance")
    p.add_argument("--by", help="who is asking")
    p.add_argument("--advance", choices=("scheduled", "done", "failed"), help="move request REPO_ID to this state")
    p.set_defaults(func=cmd_reharvest)

    p = sub.add_parser("upsert", parents=[common], help="add or update repository profiles")
    p.add_argument("repo_id", nargs="?")
    p.add_argument("--table1", action="store_true", help="seed the pilot fleet")
    p.add_argument("--file", help="JSON profile or list of profiles")
    p.add_argument("--url", help="OAI-PMH base URL")
    p.add_argument("--institution")
    p.add_argument("--visibility", choices=("public", "private", "n/a"))
    p.add_argument("--carnegie", choices=("R1", "R2", "n/a"))
    p.add_argument("--software")
    p.set_defaults(func=cmd_upsert)

    p = sub.add_parser("mock-serve", parents=[common], help="run a fault-injecting mock repository")
    p.add_argument("--corpus-seed", type=int, default=1)
    p.add_argument("--size", type=int, default=1000)
    p.add_argument("--page-size", type=int, default=25)
    p.add_argument("--fulltext-fraction", type=float, default=1.0)
    p.add_argument("--fault", default="healthy", help="fault mode, e.g. healthy or 'sparse-fulltext-links(0.1)'")
    p.add_argument("--latency", type=int, default=0, help="added latency per request in ms")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--duration", type=float, help="stop after this many seconds")
    p.set_defaults(func=cmd_mock_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        conf = resolve_config(args)
    except UsageError as exc:
        print(f"{exc}\n{parser.format_usage().strip()}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args, conf)
    except UsageError as exc:
        print(f"discoverkit: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"discoverkit: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


def run(argv: Optional[Sequence[str]] = None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
