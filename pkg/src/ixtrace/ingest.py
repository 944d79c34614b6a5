"""Registry snapshot parsing and PDB/PCH merging.

Snapshot files are line oriented UTF-8 with ``|`` separated fields::

    SNAPSHOT|PDB
    # comment
    IXP|<local_id>|<name>|<active 0/1>
    PFX|<local_id>|<cidr>
    MEM|<local_id>|<asn>|<ip>[,<ip>...]

The merged dataset has its own canonical text form (``MERGED|1`` header)
written by :func:`dump_merged` and read back by :func:`load_merged`.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network
from typing import Iterable, Optional, Union

from .model import (
    DatasetError,
    IxpPrefix,
    IxpRecord,
    Member,
    MembershipTriplet,
    MergedDataset,
    Source,
    normalize_name,
    parse_asn,
)
from .reserved import is_reserved, is_reserved_network

log = logging.getLogger(__name__)

SNAPSHOT_HEADER = "SNAPSHOT"
MERGED_HEADER = "MERGED|1"


class SnapshotError(ValueError):
    """Fatal snapshot problem: bad header, unknown source, undecodable file."""


@dataclass
class SnapshotIxp:
    local_id: str
    name: str
    active: bool
    prefixes: list[IPv4Network] = field(default_factory=list)


@dataclass
class SnapshotMembership:
    local_id: str
    asn: int
    ips: list[IPv4Address] = field(default_factory=list)


@dataclass
class RegistrySnapshot:
    source: Source
    ixps: list[SnapshotIxp] = field(default_factory=list)
    memberships: list[SnapshotMembership] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def dumps(self) -> str:
        lines = [f"{SNAPSHOT_HEADER}|{self.source.value}"]
        for ixp in self.ixps:
            lines.append(f"IXP|{ixp.local_id}|{_clean_field(ixp.name)}|{int(ixp.active)}")
        for ixp in self.ixps:
            for pfx in ixp.prefixes:
                lines.append(f"PFX|{ixp.local_id}|{pfx}")
        for mem in self.memberships:
            lines.append(f"MEM|{mem.local_id}|{mem.asn}|{','.join(map(str, mem.ips))}")
        return "\n".join(lines) + "\n"


def _parse_source(tag: str) -> Source:
    try:
        return Source(tag.strip().upper())
    except ValueError:
        raise SnapshotError(f"unknown source tag {tag!r}") from None


def _clean_field(text: str) -> str:
    return text.replace("|", "/").replace("\n", " ").replace("\r", " ").strip()


def parse_snapshot(
    content: Union[bytes, str], source: Union[Source, str, None] = None
) -> RegistrySnapshot:
    """Parse a snapshot file.

    Bad records are skipped and described in ``snapshot.warnings``; only a
    missing/invalid header or a source mismatch is fatal.
    """
    if isinstance(content, bytes):
        try:
            content = content.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SnapshotError(f"snapshot is not UTF-8: {exc}") from None

    lines = content.split("\n")
    header_at = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            header_at = lineno
            break
    if header_at is None:
        raise SnapshotError("missing snapshot header")
    head = lines[header_at - 1].strip().split("|")
    if len(head) != 2 or head[0] != SNAPSHOT_HEADER:
        raise SnapshotError(f"line {header_at}: bad header {lines[header_at - 1]!r}")
    file_source = _parse_source(head[1])
    if source is not None and _parse_source(str(getattr(source, "value", source))) is not file_source:
        raise SnapshotError(f"snapshot is tagged {file_source.value}, expected {source}")

    snap = RegistrySnapshot(file_source)
    by_id: dict[str, SnapshotIxp] = {}
    pending_pfx: list[tuple[int, str, IPv4Network]] = []
    pending_mem: list[tuple[int, SnapshotMembership]] = []

    def warn(lineno: int, msg: str) -> None:
        snap.warnings.append(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(lines[header_at:], start=header_at + 1):
        line = raw.rstrip("\r").strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("|")
        kind = fields[0]
        if kind == "IXP":
            if len(fields) != 4:
                warn(lineno, "IXP record needs 4 fields")
                continue
            _, local_id, name, active = fields
            local_id, name, active = local_id.strip(), name.strip(), active.strip()
            if not local_id:
                warn(lineno, "empty local_id")
            elif not normalize_name(name):
                warn(lineno, f"IXP {local_id}: unusable name {name!r}")
            elif active not in ("0", "1"):
                warn(lineno, f"IXP {local_id}: active flag must be 0 or 1")
            elif local_id in by_id:
                warn(lineno, f"duplicate IXP local_id {local_id}")
            else:
                rec = SnapshotIxp(local_id, name, active == "1")
                by_id[local_id] = rec
                snap.ixps.append(rec)
        elif kind == "PFX":
            if len(fields) != 3:
                warn(lineno, "PFX record needs 3 fields")
                continue
            try:
                net = IPv4Network(fields[2].strip())
            except ValueError as exc:
                warn(lineno, f"bad prefix {fields[2]!r}: {exc}")
                continue
            if not 8 <= net.prefixlen <= 30:
                warn(lineno, f"prefix length out of [8, 30]: {net}")
                continue
            pending_pfx.append((lineno, fields[1].strip(), net))
        elif kind == "MEM":
            if len(fields) != 4:
                warn(lineno, "MEM record needs 4 fields")
                continue
            try:
                asn = parse_asn(fields[2])
                ips = [IPv4Address(x.strip()) for x in fields[3].split(",") if x.strip()]
            except ValueError as exc:
                warn(lineno, str(exc))
                continue
            pending_mem.append((lineno, SnapshotMembership(fields[1].strip(), asn, ips)))
        else:
            warn(lineno, f"unknown record type {kind!r}")

    # PFX/MEM may legally precede the IXP line they reference
    for lineno, local_id, net in pending_pfx:
        if local_id not in by_id:
            warn(lineno, f"prefix for unknown IXP {local_id}")
        elif net not in by_id[local_id].prefixes:
            by_id[local_id].prefixes.append(net)
    for lineno, mem in pending_mem:
        if mem.local_id not in by_id:
            warn(lineno, f"membership for unknown IXP {mem.local_id}")
        else:
            snap.memberships.append(mem)
    return snap


# ---------------------------------------------------------------------------
# merge


@dataclass
class _Entry:
    """One registry IXP reduced to the attributes the merger compares."""

    source: Source
    local_id: str
    name: str
    prefixes: set[IPv4Network]
    triplets: dict[IPv4Address, int]
    members: set[int]

    @property
    def key(self):
        return (self.source.value, self.local_id)


def _entries(snap: RegistrySnapshot, warnings: list[str]) -> list[_Entry]:
    entries = {}
    for ixp in snap.ixps:
        if not ixp.active:
            continue
        prefixes = set()
        for net in ixp.prefixes:
            if is_reserved_network(net):
                warnings.append(f"{snap.source.value} {ixp.local_id}: dropped reserved prefix {net}")
            else:
                prefixes.add(net)
        entries[ixp.local_id] = _Entry(snap.source, ixp.local_id, ixp.name, prefixes, {}, set())

    conflicted: set[tuple[str, IPv4Address]] = set()
    for mem in snap.memberships:
        entry = entries.get(mem.local_id)
        if entry is None:
            continue
        entry.members.add(mem.asn)
        for ip in mem.ips:
            if is_reserved(ip):
                warnings.append(f"{snap.source.value} {mem.local_id}: dropped reserved address {ip}")
                continue
            prev = entry.triplets.get(ip)
            if prev is not None and prev != mem.asn:
                conflicted.add((mem.local_id, ip))
            entry.triplets[ip] = mem.asn
    for local_id, ip in sorted(conflicted):
        warnings.append(f"{snap.source.value} {local_id}: {ip} listed under several ASNs, dropped")
        del entries[local_id].triplets[ip]
    return sorted(entries.values(), key=lambda e: e.key)


# match tiers, strongest first
_TIER_PREFIX, _TIER_IP, _TIER_NAME = 0, 1, 2


def _match_pairs(pdb: list[_Entry], pch: list[_Entry], warnings: list[str]) -> list[tuple[_Entry, _Entry]]:
    edges = []
    for a in pdb:
        name_a = normalize_name(a.name)
        for b in pch:
            shared_pfx = len(a.prefixes & b.prefixes)
            shared_ip = len(a.triplets.keys() & b.triplets.keys())
            same_name = name_a == normalize_name(b.name)
            if shared_pfx:
                edges.append((_TIER_PREFIX, -shared_pfx, a.key, b.key, a, b))
            if shared_ip:
                edges.append((_TIER_IP, -shared_ip, a.key, b.key, a, b))
            if same_name:
                edges.append((_TIER_NAME, 0, a.key, b.key, a, b))
    edges.sort(key=lambda e: e[:4])

    taken: set = set()
    pairs = []
    for tier, _, ka, kb, a, b in edges:
        if ka in taken or kb in taken:
            if not (ka in taken and kb in taken):
                warnings.append(
                    f"ignored {('prefix', 'address', 'name')[tier]} match "
                    f"PDB {a.local_id} ~ PCH {b.local_id}"
                )
            continue
        taken.update((ka, kb))
        pairs.append((a, b))
    return pairs


def _slug(name: str) -> str:
    return normalize_name(name).replace(" ", "-")


def merge_datasets(pdb: RegistrySnapshot, pch: RegistrySnapshot, warnings: Optional[list[str]] = None) -> MergedDataset:
    """Unify PDB and PCH snapshots into one :class:`MergedDataset`.

    Entries are paired one-to-one on a shared prefix, else a shared router
    address, else an equal normalized name. Inactive IXPs are dropped
    before pairing. Conflicting attributes are removed: an address with
    different ASNs across the sources, or an address/prefix claimed by two
    IXPs that were not unified. ``warnings`` collects what was dropped.
    """
    if pdb.source is not Source.PDB or pch.source is not Source.PCH:
        raise SnapshotError("merge_datasets expects a PDB and a PCH snapshot")
    if warnings is None:
        warnings = []
    pdb_entries = _entries(pdb, warnings)
    pch_entries = _entries(pch, warnings)
    pairs = _match_pairs(pdb_entries, pch_entries, warnings)
    paired = {e.key for pair in pairs for e in pair}

    groups: list[list[_Entry]] = [list(p) for p in pairs]
    groups += [[e] for e in pdb_entries + pch_entries if e.key not in paired]

    # deterministic ids: slug of the smallest name, suffixed on collision
    def group_sort_key(g):
        return (min(_slug(e.name) for e in g), sorted(e.key for e in g))

    groups.sort(key=group_sort_key)
    ids: list[str] = []
    used: dict[str, int] = {}
    for g in groups:
        base = group_sort_key(g)[0]
        used[base] = used.get(base, 0) + 1
        ids.append(base if used[base] == 1 else f"{base}-{used[base]}")
    # a suffixed id could collide with a real slug; re-suffix until unique
    seen: set[str] = set()
    for i, ixp_id in enumerate(ids):
        n = 2
        while ixp_id in seen:
            ixp_id = f"{ids[i]}-{n}"
            n += 1
        ids[i] = ixp_id
        seen.add(ixp_id)

    records = []
    prefix_claims: dict[IPv4Network, dict[str, set[Source]]] = defaultdict(dict)
    ip_claims: dict[IPv4Address, dict[str, dict[int, set[Source]]]] = defaultdict(dict)
    member_src: dict[tuple[int, str], set[Source]] = defaultdict(set)

    for ixp_id, group in zip(ids, groups):
        records.append(
            IxpRecord(ixp_id, tuple(sorted((e.source, e.name) for e in group)))
        )
        for e in group:
            for net in e.prefixes:
                prefix_claims[net].setdefault(ixp_id, set()).add(e.source)
            for ip, asn in e.triplets.items():
                ip_claims[ip].setdefault(ixp_id, {}).setdefault(asn, set()).add(e.source)
            for asn in e.members:
                member_src[(asn, ixp_id)].add(e.source)

    prefixes = []
    for net, claims in sorted(prefix_claims.items()):
        if len(claims) > 1:
            warnings.append(f"prefix {net} claimed by {', '.join(sorted(claims))}; dropped")
            continue
        (ixp_id, srcs), = claims.items()
        prefixes.append(IxpPrefix(net, ixp_id, frozenset(srcs)))

    triplets = []
    for ip, claims in sorted(ip_claims.items()):
        if len(claims) > 1:
            warnings.append(f"address {ip} claimed by {', '.join(sorted(claims))}; dropped")
            continue
        (ixp_id, by_asn), = claims.items()
        if len(by_asn) > 1:
            asns = ", ".join(f"AS{a}" for a in sorted(by_asn))
            warnings.append(f"{ixp_id}: address {ip} maps to {asns}; dropped")
            continue
        (asn, srcs), = by_asn.items()
        triplets.append(MembershipTriplet(ip, ixp_id, asn, frozenset(srcs)))

    memberships = [
        Member(asn, ixp_id, frozenset(srcs)) for (asn, ixp_id), srcs in member_src.items()
    ]
    for w in warnings:
        log.debug("merge: %s", w)
    return MergedDataset(records, triplets, prefixes, memberships)


def split_by_source(d: MergedDataset) -> tuple[RegistrySnapshot, RegistrySnapshot]:
    """Re-derive per-registry snapshots from a merged dataset's provenance."""
    snaps = {src: RegistrySnapshot(src) for src in Source}
    for rec in d.ixps.values():
        for src, raw in rec.source_names:
            snaps[src].ixps.append(SnapshotIxp(rec.ixp_id, raw, True))
    ixp_by_source = {
        src: {i.local_id: i for i in snap.ixps} for src, snap in snaps.items()
    }
    for p in d.ixp_prefixes:
        for src in p.sources:
            ixp_by_source[src][p.ixp_id].prefixes.append(p.prefix)
    ips: dict[tuple[Source, str, int], list[IPv4Address]] = defaultdict(list)
    for t in d.triplets:
        for src in t.sources:
            ips[(src, t.ixp_id, t.asn)].append(t.ip)
    for m in d.memberships:
        for src in m.sources:
            snaps[src].memberships.append(
                SnapshotMembership(m.ixp_id, m.asn, ips.get((src, m.ixp_id, m.asn), []))
            )
    return snaps[Source.PDB], snaps[Source.PCH]


# ---------------------------------------------------------------------------
# summary and serialization


@dataclass(frozen=True)
class DatasetSummary:
    ixps: int
    prefixes: int
    triplets: int
    memberships: int
    ixps_with_membership_data: int
    ixps_with_triplet_data: int
    ixps_with_prefix_data: int

    def as_dict(self) -> dict[str, int]:
        return dict(self.__dict__)


def dataset_summary(d: MergedDataset) -> DatasetSummary:
    return DatasetSummary(
        ixps=len(d.ixps),
        prefixes=len(d.ixp_prefixes),
        triplets=len(d.triplets),
        memberships=len(d.memberships),
        ixps_with_membership_data=len({m.ixp_id for m in d.memberships}),
        ixps_with_triplet_data=len({t.ixp_id for t in d.triplets}),
        ixps_with_prefix_data=len({p.ixp_id for p in d.ixp_prefixes}),
    )


def _src(sources: Iterable[Source]) -> str:
    return ",".join(sorted(s.value for s in sources))


def dump_merged(d: MergedDataset) -> str:
    lines = [MERGED_HEADER]
    for rec in d.ixps.values():
        for src, raw in rec.source_names:
            lines.append(f"IXP|{rec.ixp_id}|{src.value}|{_clean_field(raw)}")
    for p in d.ixp_prefixes:
        lines.append(f"PFX|{p.ixp_id}|{p.prefix}|{_src(p.sources)}")
    for m in d.memberships:
        lines.append(f"MEM|{m.ixp_id}|{m.asn}|{_src(m.sources)}")
    for t in d.triplets:
        lines.append(f"TRI|{t.ixp_id}|{t.asn}|{t.ip}|{_src(t.sources)}")
    return "\n".join(lines) + "\n"


def load_merged(content: Union[str, bytes]) -> MergedDataset:
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    lines = [ln for ln in content.split("\n") if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0].strip() != MERGED_HEADER:
        raise SnapshotError("not a merged dataset file")

    def sources(text: str) -> frozenset[Source]:
        return frozenset(_parse_source(s) for s in text.split(",") if s)

    names: dict[str, list[tuple[Source, str]]] = defaultdict(list)
    prefixes, memberships, triplets = [], [], []
    try:
        for line in lines[1:]:
            f = line.rstrip("\r").split("|")
            if f[0] == "IXP" and len(f) == 4:
                names[f[1]].append((_parse_source(f[2]), f[3]))
            elif f[0] == "PFX" and len(f) == 4:
                prefixes.append(IxpPrefix(IPv4Network(f[2]), f[1], sources(f[3])))
            elif f[0] == "MEM" and len(f) == 4:
                memberships.append(Member(int(f[2]), f[1], sources(f[3])))
            elif f[0] == "TRI" and len(f) == 5:
                triplets.append(MembershipTriplet(IPv4Address(f[3]), f[1], int(f[2]), sources(f[4])))
            else:
                raise SnapshotError(f"bad merged record {line!r}")
    except ValueError as exc:
        if isinstance(exc, SnapshotError):
            raise
        raise DatasetError(f"bad merged record: {exc}") from exc
    records = [IxpRecord(i, tuple(sorted(n))) for i, n in names.items()]
    return MergedDataset(records, triplets, prefixes, memberships)
