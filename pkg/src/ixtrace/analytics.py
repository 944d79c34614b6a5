"""Corpus statistics, IXP ranking, rule hit rates and registry-vs-BGP consistency."""
from __future__ import annotations

import csv
import io
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from ipaddress import IPv4Address
from typing import Callable, Iterable, Optional, Sequence, Union

from .model import (
    Detection,
    EvidenceKind,
    HopEvidence,
    MergedDataset,
    RuleId,
    Source,
    TraceroutePath,
    parse_asn,
)
from .reserved import is_reserved

Results = Sequence[tuple[TraceroutePath, Sequence[Detection]]]


class AnalyticsError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusStats:
    paths: int
    ixp_paths: int
    detections: int
    pct_paths_with_ixp: float
    avg_ixps_per_ixp_path: Optional[float]
    avg_hops_per_path: float
    avg_ixp_hop_position: Optional[float]
    avg_ases_per_path: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class StatsAccumulator:
    """Additive partial sums; merge accumulators from disjoint corpus shards."""

    paths: int = 0
    ixp_paths: int = 0
    ixps_on_ixp_paths: int = 0
    detections: int = 0
    hops: int = 0
    ixp_hop_sum: int = 0
    ases: int = 0

    def add(self, path: TraceroutePath, detections: Sequence[Detection], evidence: Sequence[HopEvidence]) -> None:
        self.paths += 1
        self.hops += len(path.hops)
        if detections:
            self.ixp_paths += 1
            self.ixps_on_ixp_paths += len({d.ixp_id for d in detections})
        self.detections += len(detections)
        self.ixp_hop_sum += sum(d.ixp_hop for d in detections)
        asns = set()
        for ev in evidence:
            if ev.kind in (EvidenceKind.TRIPLET, EvidenceKind.ORIGIN_AS):
                asns |= ev.asns
        self.ases += len(asns)

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        return StatsAccumulator(*(a + b for a, b in zip(self.__dict__.values(), other.__dict__.values())))

    def finish(self) -> CorpusStats:
        if not self.paths:
            raise AnalyticsError("empty corpus: averages are undefined")
        return CorpusStats(
            paths=self.paths,
            ixp_paths=self.ixp_paths,
            detections=self.detections,
            pct_paths_with_ixp=100.0 * self.ixp_paths / self.paths,
            avg_ixps_per_ixp_path=self.ixps_on_ixp_paths / self.ixp_paths if self.ixp_paths else None,
            avg_hops_per_path=self.hops / self.paths,
            avg_ixp_hop_position=self.ixp_hop_sum / self.detections if self.detections else None,
            avg_ases_per_path=self.ases / self.paths,
        )


def _evidence_fn(as_resolver) -> Callable[[TraceroutePath], list[HopEvidence]]:
    if hasattr(as_resolver, "resolve_many"):
        return lambda p: as_resolver.resolve_many([h.address for h in p.hops])
    return lambda p: [as_resolver(h.address) for h in p.hops]


def compute_stats(results: Results, as_resolver) -> CorpusStats:
    """Table-style corpus statistics.

    ``as_resolver`` is a :class:`~ixtrace.resolver.PrefixIndex` or any
    callable mapping a hop address (or ``None``) to :class:`HopEvidence`.
    ASes per path counts the distinct ASNs of triplet and origin-AS hops;
    every origin of a multi-origin prefix is counted.
    """
    evidence_of = _evidence_fn(as_resolver)
    acc = StatsAccumulator()
    for path, dets in results:
        acc.add(path, dets, evidence_of(path))
    return acc.finish()


@dataclass(frozen=True, order=True)
class RankEntry:
    ixp_id: str
    path_count: int
    member_count: int


def rank_ixps(results: Results, d: MergedDataset) -> list[RankEntry]:
    """IXPs by number of paths crossing them (a path counts once per IXP)."""
    counts: Counter = Counter()
    for _, dets in results:
        counts.update({det.ixp_id for det in dets})
    entries = [RankEntry(i, n, len(d.members(i))) for i, n in counts.items()]
    entries.sort(key=lambda e: (-e.path_count, -e.member_count, e.ixp_id))
    return entries


def rule_hit_rates(results: Results) -> dict[RuleId, float]:
    counts = Counter(det.rule_id for _, dets in results for det in dets)
    total = sum(counts.values())
    if not total:
        raise AnalyticsError("no detections: hit rates are undefined")
    return {rule: 100.0 * counts[rule] / total for rule in RuleId if counts[rule]}


def pearson(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Pearson r, or ``None`` with fewer than two points or zero variance."""
    if len(xs) < 2:
        return None
    try:
        return statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        return None


def members_paths_export(ranking: Iterable[RankEntry]) -> tuple[str, Optional[float]]:
    ranking = list(ranking)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ixp_id", "members", "paths"])
    for e in ranking:
        w.writerow([e.ixp_id, e.member_count, e.path_count])
    r = pearson([e.member_count for e in ranking], [e.path_count for e in ranking])
    return buf.getvalue(), r


# -- registry vs BGP -------------------------------------------------------------


@dataclass(frozen=True)
class BgpTuple:
    ixp_id: str
    asn: int
    ip: IPv4Address

    def __post_init__(self):
        if is_reserved(self.ip):
            raise ValueError(f"BGP next hop {self.ip} is not a unicast public address")


def parse_bgp_tuples(content: Union[str, bytes], d: MergedDataset, warnings: Optional[list[str]] = None) -> list[BgpTuple]:
    """Read ``BGP|ixp_name_or_id|asn|ip`` lines, resolving IXP names against ``d``."""
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    if warnings is None:
        warnings = []
    out = []
    for lineno, raw in enumerate(content.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        f = line.split("|")
        if len(f) != 4 or f[0] != "BGP":
            warnings.append(f"line {lineno}: expected BGP|ixp|asn|ip")
            continue
        rec = d.find_ixp(f[1].strip())
        if rec is None:
            warnings.append(f"line {lineno}: unknown or ambiguous IXP {f[1]!r}")
            continue
        try:
            out.append(BgpTuple(rec.ixp_id, parse_asn(f[2]), IPv4Address(f[3].strip())))
        except ValueError as exc:
            warnings.append(f"line {lineno}: {exc}")
    return out


@dataclass(frozen=True)
class Consistency:
    common_tuples: int
    consistent_tuples: int
    pct_consistent: Optional[float] = field(default=None)


def consistency_check(d: MergedDataset, bgp: Iterable[BgpTuple]) -> dict[Source, Consistency]:
    """Compare registry router addresses with BGP next hops per (IXP, AS) pair.

    A pair is consistent if any registry address for it was seen as a next
    hop for the same pair.
    """
    bgp_ips: dict[tuple[str, int], set[IPv4Address]] = defaultdict(set)
    for t in bgp:
        bgp_ips[(t.ixp_id, t.asn)].add(t.ip)
    report = {}
    for src in Source:
        registry_ips: dict[tuple[str, int], set[IPv4Address]] = defaultdict(set)
        for t in d.triplets_from(src):
            registry_ips[(t.ixp_id, t.asn)].add(t.ip)
        common = registry_ips.keys() & bgp_ips.keys()
        ok = sum(1 for pair in common if registry_ips[pair] & bgp_ips[pair])
        pct = 100.0 * ok / len(common) if common else None
        report[src] = Consistency(len(common), ok, pct)
    return report
