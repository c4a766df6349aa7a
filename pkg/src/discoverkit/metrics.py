"""Growth of exposed content per repository, fleet totals, and anonymized
demographic aggregates with small-cell suppression.

All arithmetic is integer or :class:`fractions.Fraction`; percentages are only
rounded when rendered.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from discoverkit.registry import Registry, RepositoryProfile

DEMOGRAPHIC_FIELDS = ("visibility", "carnegie")
DEFAULT_SUPPRESSION_K = 3
ALL = "all"


class NoObservation(ValueError):
    pass


class DuplicateRepository(ValueError):
    pass


def render_percent(ratio: Optional[Fraction]) -> Optional[str]:
    """Render a growth ratio as a signed percentage with two decimals."""
    if ratio is None:
        return None
    with localcontext() as ctx:
        ctx.prec = 50
        value = (Decimal(ratio.numerator) * 100 / Decimal(ratio.denominator)).quantize(
            Decimal("0.01"), rounding=ROUND_HALF_UP
        )
    sign = "+" if value > 0 else ""
    return f"{sign}{value}%"


def _ratio(start: int, end: int) -> Optional[Fraction]:
    return Fraction(end - start, start) if start > 0 else None


@dataclass(frozen=True)
class GrowthRecord:
    repository_id: str
    count_start: int
    count_end: int

    @property
    def delta(self) -> int:
        return self.count_end - self.count_start

    @property
    def percent(self) -> Optional[Fraction]:
        """Growth as a ratio; None (undefined) when the start count is zero."""
        return _ratio(self.count_start, self.count_end)

    @property
    def percent_undefined(self) -> bool:
        return self.count_start == 0

    def to_dict(self) -> dict:
        return {
            "repository_id": self.repository_id,
            "count_start": self.count_start,
            "count_end": self.count_end,
            "delta": self.delta,
            "percent": render_percent(self.percent),
            "percent_undefined": self.percent_undefined,
        }


def _count_at(profile: RepositoryProfile, instant: datetime) -> int:
    observed = [c for t, c in profile.exposed_count_history if t <= instant]
    if not observed:
        raise NoObservation(f"{profile.id}: no exposed-count observation at or before {instant.isoformat()}")
    return observed[-1]


def growth(profile: RepositoryProfile, t_start: datetime, t_end: datetime) -> GrowthRecord:
    """Growth between the latest observations at or before each instant."""
    return GrowthRecord(profile.id, _count_at(profile, t_start), _count_at(profile, t_end))


@dataclass(frozen=True)
class FleetTotals:
    total_start: int
    total_end: int

    @property
    def percent(self) -> Optional[Fraction]:
        return _ratio(self.total_start, self.total_end)

    def to_dict(self) -> dict:
        return {
            "total_start": self.total_start,
            "total_end": self.total_end,
            "percent": render_percent(self.percent),
        }


def fleet_totals(records: Sequence[GrowthRecord]) -> FleetTotals:
    if not records:
        raise ValueError("no growth records")
    seen = set()
    for r in records:
        if r.repository_id in seen:
            raise DuplicateRepository(r.repository_id)
        seen.add(r.repository_id)
    return FleetTotals(sum(r.count_start for r in records), sum(r.count_end for r in records))


@dataclass(frozen=True)
class AggregateReport:
    group_key: Union[tuple[str, ...], str]
    group_fields: tuple[str, ...]
    repo_count: int
    total_start: Optional[int]
    total_end: Optional[int]
    suppressed: bool

    @property
    def percent_growth(self) -> Optional[Fraction]:
        if self.suppressed or self.total_start is None:
            return None
        return _ratio(self.total_start, self.total_end)

    def to_dict(self) -> dict:
        key = self.group_key if isinstance(self.group_key, str) else dict(zip(self.group_fields, self.group_key))
        return {
            "group_key": key,
            "repo_count": self.repo_count,
            "total_start": self.total_start,
            "total_end": self.total_end,
            "percent_growth": render_percent(self.percent_growth),
            "suppressed": self.suppressed,
        }


def _profiles(source: Union[Registry, Iterable[RepositoryProfile]]) -> list[RepositoryProfile]:
    if isinstance(source, Registry):
        return source.profiles()
    return list(source)


def group_totals(
    profiles: Iterable[RepositoryProfile],
    t_start: datetime,
    t_end: datetime,
    group_by: Sequence[str] = DEMOGRAPHIC_FIELDS,
) -> dict[Union[tuple[str, ...], str], tuple[int, int, int]]:
    """Unsuppressed ``(repo_count, total_start, total_end)`` per group.

    Internal figures for audits; never publish these directly.
    """
    for f in group_by:
        if f not in DEMOGRAPHIC_FIELDS:
            raise ValueError(f"cannot group by {f!r}; choose from {DEMOGRAPHIC_FIELDS}")
    groups: dict = defaultdict(lambda: [0, 0, 0])
    for prof in profiles:
        g = growth(prof, t_start, t_end)
        key = tuple(getattr(prof, f) for f in group_by) if group_by else ALL
        acc = groups[key]
        acc[0] += 1
        acc[1] += g.count_start
        acc[2] += g.count_end
    return {k: tuple(v) for k, v in groups.items()}


def anonymized_report(
    registry: Union[Registry, Iterable[RepositoryProfile]],
    t_start: datetime,
    t_end: datetime,
    group_by: Sequence[str] = DEMOGRAPHIC_FIELDS,
    suppression_k: int = DEFAULT_SUPPRESSION_K,
) -> list[AggregateReport]:
    """Growth by demographic group; groups with fewer than ``suppression_k``
    repositories are flagged and their totals withheld.

    Output carries group keys and counts only, never repository identities.
    Repositories without count observations in the window are left out.
    """
    if suppression_k < 1:
        raise ValueError("suppression_k must be at least 1")
    observed = []
    for prof in _profiles(registry):
        try:
            growth(prof, t_start, t_end)
        except NoObservation:
            continue
        observed.append(prof)
    reports = []
    totals = group_totals(observed, t_start, t_end, group_by)
    for key in sorted(totals, key=lambda k: k if isinstance(k, tuple) else (k,)):
        count, start, end = totals[key]
        hidden = count < suppression_k
        reports.append(
            AggregateReport(
                group_key=key,
                group_fields=tuple(group_by),
                repo_count=count,
                total_start=None if hidden else start,
                total_end=None if hidden else end,
                suppressed=hidden,
            )
        )
    return reports


def reports_to_json(reports: Sequence[AggregateReport]) -> str:
    return json.dumps({"schema": "aggregate-report/1", "groups": [r.to_dict() for r in reports]}, indent=2, sort_keys=True)


def _table(header: Sequence[str], rows: Sequence[Sequence[str]], right: set[int]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]

    def fmt(row):
        cells = [str(c).rjust(w) if i in right else str(c).ljust(w) for i, (c, w) in enumerate(zip(row, widths))]
        return "  ".join(cells).rstrip()

    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def _label(status) -> str:
    return status.value if status is not None else "-"


def growth_table(profiles: Sequence[RepositoryProfile], t_start: datetime, t_end: datetime) -> str:
    """Per-repository table in the pilot table's column order, with totals."""
    header = (
        "Institution",
        "Public or private",
        "Carnegie",
        "Repo software",
        "Status at start",
        "Status at end",
        "Content at start",
        "Content at end",
        "Change",
        "Growth",
    )
    rows = []
    records = []
    for p in profiles:
        g = growth(p, t_start, t_end)
        records.append(g)
        s_start = [s for t, s in p.status_history if t <= t_start]
        s_end = [s for t, s in p.status_history if t <= t_end]
        rows.append(
            (
                p.institution,
                p.visibility,
                p.carnegie,
                p.software,
                _label(s_start[-1] if s_start else None),
                _label(s_end[-1] if s_end else None),
                f"{g.count_start:,}",
                f"{g.count_end:,}",
                f"{g.delta:+,}",
                render_percent(g.percent) or "n/a",
            )
        )
    if records:
        tot = fleet_totals(records)
        rows.append(
            ("Totals", "", "", "", "", "", f"{tot.total_start:,}", f"{tot.total_end:,}",
             f"{tot.total_end - tot.total_start:+,}", render_percent(tot.percent) or "n/a")
        )
    return _table(header, rows, right={6, 7, 8, 9})


def aggregate_table(reports: Sequence[AggregateReport]) -> str:
    header = ("Group", "Repositories", "Content at start", "Content at end", "Growth")
    rows = []
    for r in reports:
        key = r.group_key if isinstance(r.group_key, str) else " / ".join(r.group_key)
        if r.suppressed:
            rows.append((key, str(r.repo_count), "suppressed", "suppressed", "-"))
        else:
            rows.append((key, str(r.repo_count), f"{r.total_start:,}", f"{r.total_end:,}", render_percent(r.percent_growth) or "n/a"))
    return _table(header, rows, right={1, 2, 3, 4})
