"""Per-address evidence: exact triplet, IXP prefix, origin AS, reserved or unknown."""
from __future__ import annotations

import logging
from ipaddress import IPv4Address, IPv4Network
from typing import Iterable, Optional, Union

from .lpm import PrefixTrie
from .model import (
    RESERVED_EVIDENCE,
    UNKNOWN_EVIDENCE,
    AsMapping,
    DatasetError,
    EvidenceKind,
    HopEvidence,
    Membership,
    MembershipTriplet,
    MergedDataset,
    parse_asn,
)
from .reserved import is_reserved_int

log = logging.getLogger(__name__)


class UnknownIxpError(KeyError):
    pass


def parse_as_mapping(content: Union[str, bytes], warnings: Optional[list[str]] = None) -> list[AsMapping]:
    """Parse ``cidr|asn[,asn...]`` lines. Bad lines are skipped with a warning."""
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    if warnings is None:
        warnings = []
    out = []
    for lineno, raw in enumerate(content.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) != 2:
            warnings.append(f"line {lineno}: expected cidr|asn[,asn...]")
            continue
        try:
            net = IPv4Network(parts[0].strip())
            asns = frozenset(parse_asn(a) for a in parts[1].split(","))
            out.append(AsMapping(net, asns))
        except (ValueError, DatasetError) as exc:
            warnings.append(f"line {lineno}: {exc}")
    return out


def parse_caida_pfx2as(content: Union[str, bytes], warnings: Optional[list[str]] = None) -> list[AsMapping]:
    """Parse CAIDA RouteViews ``prefix<TAB>length<TAB>asns`` files.

    MOAS origins are ``_`` separated; AS sets (``a,b``) are flattened.
    """
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    if warnings is None:
        warnings = []
    out = []
    for lineno, raw in enumerate(content.split("\n"), start=1):
        parts = raw.split()
        if not parts or raw.startswith("#"):
            continue
        try:
            net = IPv4Network(f"{parts[0]}/{parts[1]}")
            asns = frozenset(
                parse_asn(a) for origin in parts[2].split("_") for a in origin.split(",")
            )
            out.append(AsMapping(net, asns))
        except (ValueError, IndexError, DatasetError) as exc:
            warnings.append(f"line {lineno}: {exc}")
    return out


class PrefixIndex:
    """Lookup structures built once from a dataset and an AS table."""

    def __init__(self, dataset: MergedDataset, as_mappings: Iterable[AsMapping] = (), warnings=None):
        if warnings is None:
            warnings = []
        self.dataset = dataset
        self.triplet_map: dict[int, MembershipTriplet] = {int(t.ip): t for t in dataset.triplets}
        self.ixp_trie: PrefixTrie[str] = PrefixTrie(
            (p.prefix, p.ixp_id) for p in dataset.ixp_prefixes
        )
        self.as_trie: PrefixTrie[frozenset] = PrefixTrie()
        for m in as_mappings:
            old = self.as_trie.insert(m.prefix, m.asns)
            if old is not None and old != m.asns:
                warnings.append(f"{m.prefix}: AS set {sorted(old)} replaced by {sorted(m.asns)}")
        for w in warnings:
            log.warning("as mapping: %s", w)
        self.warnings = warnings

    def resolve_int(self, addr: Optional[int]) -> HopEvidence:
        if addr is None:
            return UNKNOWN_EVIDENCE
        if is_reserved_int(addr):
            return RESERVED_EVIDENCE
        t = self.triplet_map.get(addr)
        if t is not None:
            return HopEvidence.triplet(t.ixp_id, t.asn)
        ixp_id = self.ixp_trie.lookup_int(addr)
        if ixp_id is not None:
            return HopEvidence.ixp_prefix(ixp_id)
        asns = self.as_trie.lookup_int(addr)
        if asns is not None:
            return HopEvidence.origin_as(asns)
        return UNKNOWN_EVIDENCE

    def resolve_many(self, addrs: list[Optional[IPv4Address]]) -> list[HopEvidence]:
        """Batch form of :func:`resolve_ip`; LPM walks go through the kernel in bulk."""
        ints = [None if a is None else int(a) for a in addrs]
        todo = [i for i in ints if i is not None]
        ixp_hits = dict(zip(todo, self.ixp_trie.lookup_many(todo)))
        as_hits = dict(zip(todo, self.as_trie.lookup_many(todo)))
        out = []
        for addr in ints:
            if addr is None:
                out.append(UNKNOWN_EVIDENCE)
            elif is_reserved_int(addr):
                out.append(RESERVED_EVIDENCE)
            elif addr in self.triplet_map:
                t = self.triplet_map[addr]
                out.append(HopEvidence.triplet(t.ixp_id, t.asn))
            elif ixp_hits[addr] is not None:
                out.append(HopEvidence.ixp_prefix(ixp_hits[addr]))
            elif as_hits[addr] is not None:
                out.append(HopEvidence.origin_as(as_hits[addr]))
            else:
                out.append(UNKNOWN_EVIDENCE)
        return out

    def __repr__(self):
        return (
            f"PrefixIndex(triplets={len(self.triplet_map)}, ixp_prefixes={len(self.ixp_trie)}, "
            f"as_prefixes={len(self.as_trie)})"
        )


def build_index(dataset: MergedDataset, as_mappings: Iterable[AsMapping] = (), warnings=None) -> PrefixIndex:
    return PrefixIndex(dataset, as_mappings, warnings)


def resolve_ip(idx: PrefixIndex, ip: Optional[IPv4Address]) -> HopEvidence:
    """Classify one hop address; ``None`` stands for a non-responding hop."""
    if ip is not None and not isinstance(ip, IPv4Address):
        ip = IPv4Address(ip)
    return idx.resolve_int(None if ip is None else int(ip))


def as_set(ev: HopEvidence) -> frozenset[int]:
    """ASNs usable for membership checks; IXP-prefix hops carry none."""
    if ev.kind in (EvidenceKind.TRIPLET, EvidenceKind.ORIGIN_AS):
        return ev.asns
    return frozenset()


def membership_of(d: MergedDataset, asns: Iterable[int], ixp_id: str) -> Membership:
    """Any-of membership: a multi-origin hop is a member if one origin is."""
    if ixp_id not in d.ixps:
        raise UnknownIxpError(ixp_id)
    asns = frozenset(asns)
    if not asns:
        return Membership.UNKNOWN
    return Membership.MEMBER if asns & d.members(ixp_id) else Membership.NON_MEMBER
