"""Domain types shared by ingestion, resolution, detection and analytics.

Everything here is an immutable value type. Datasets are validated at
construction so downstream code can rely on referential integrity.
"""
from __future__ import annotations

import enum
import ipaddress
import re
import string
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

IPv4Address = ipaddress.IPv4Address
IPv4Network = ipaddress.IPv4Network

MAX_ASN = 2**32 - 1


class DatasetError(ValueError):
    """Raised when a dataset or one of its records violates an invariant."""


class Source(str, enum.Enum):
    PDB = "PDB"
    PCH = "PCH"


class EvidenceKind(str, enum.Enum):
    TRIPLET = "TRIPLET"
    IXP_PREFIX = "IXP_PREFIX"
    ORIGIN_AS = "ORIGIN_AS"
    RESERVED = "RESERVED"
    UNKNOWN = "UNKNOWN"

    @property
    def is_ixp(self) -> bool:
        return self in (EvidenceKind.TRIPLET, EvidenceKind.IXP_PREFIX)


class RuleId(str, enum.Enum):
    R1_1 = "R1_1"
    R1_2 = "R1_2"
    R1_3 = "R1_3"
    R1_4 = "R1_4"
    R1_5 = "R1_5"
    R1_6 = "R1_6"
    R1_7 = "R1_7"
    R2_0 = "R2_0"
    OTHER_STRONG = "OTHER_STRONG"
    OTHER_WEAK = "OTHER_WEAK"


STRONG_RULES = frozenset(
    {RuleId.R1_1, RuleId.R1_2, RuleId.R1_3, RuleId.R2_0, RuleId.OTHER_STRONG}
)
DOCUMENTED_RULES = (
    RuleId.R1_1, RuleId.R1_2, RuleId.R1_3, RuleId.R1_4,
    RuleId.R1_5, RuleId.R1_6, RuleId.R1_7, RuleId.R2_0,
)


class Link(str, enum.Enum):
    A = "A"
    B = "B"
    A_OR_B = "A_OR_B"


class Strength(str, enum.Enum):
    STRONG = "STRONG"
    WEAK = "WEAK"


class Membership(str, enum.Enum):
    MEMBER = "MEMBER"
    NON_MEMBER = "NON_MEMBER"
    UNKNOWN = "UNKNOWN"


_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_WS_RE = re.compile(r"\s+")


def normalize_name(name: str) -> str:
    """Lowercase, drop punctuation and collapse whitespace.

    >>> normalize_name("  Vienna   Internet eXchange (VIX) ")
    'vienna internet exchange vix'
    """
    return _WS_RE.sub(" ", name.lower().translate(_PUNCT_TABLE)).strip()


def parse_asn(text: str) -> int:
    """Parse ``64500`` or ``AS64500`` into a 32-bit AS number."""
    s = text.strip()
    if s[:2].upper() == "AS":
        s = s[2:]
    if not s.isdigit():
        raise ValueError(f"invalid ASN {text!r}")
    asn = int(s)
    if not 0 < asn <= MAX_ASN:
        raise ValueError(f"ASN out of range: {text!r}")
    return asn


@dataclass(frozen=True, order=True)
class IxpRecord:
    """One IXP in the merged registry view.

    ``source_names`` keeps the raw name each registry used so that the
    merged view can be split back into per-source snapshots.
    """

    ixp_id: str
    source_names: tuple[tuple[Source, str], ...]
    active: bool = True

    def __post_init__(self):
        if not self.ixp_id:
            raise DatasetError("empty ixp_id")
        if not self.source_names:
            raise DatasetError(f"{self.ixp_id}: no names")
        for _, raw in self.source_names:
            if not normalize_name(raw):
                raise DatasetError(f"{self.ixp_id}: name {raw!r} is empty after normalization")

    @property
    def names(self) -> frozenset[str]:
        return frozenset(normalize_name(raw) for _, raw in self.source_names)

    @property
    def sources(self) -> frozenset[Source]:
        return frozenset(src for src, _ in self.source_names)

    @property
    def label(self) -> str:
        """Human readable name; PDB spelling preferred."""
        by_source = dict(self.source_names)
        return by_source.get(Source.PDB) or by_source[Source.PCH]


@dataclass(frozen=True, order=True)
class MembershipTriplet:
    """An exact BGP router interface address on an IXP subnet."""

    ip: IPv4Address
    ixp_id: str
    asn: int
    sources: frozenset[Source] = field(default=frozenset(), compare=False)

    def __post_init__(self):
        if not isinstance(self.ip, IPv4Address):
            object.__setattr__(self, "ip", IPv4Address(self.ip))
        if not 0 < self.asn <= MAX_ASN:
            raise DatasetError(f"ASN out of range: {self.asn}")


@dataclass(frozen=True, order=True)
class IxpPrefix:
    prefix: IPv4Network
    ixp_id: str
    sources: frozenset[Source] = field(default=frozenset(), compare=False)

    def __post_init__(self):
        if not isinstance(self.prefix, IPv4Network):
            try:
                object.__setattr__(self, "prefix", IPv4Network(self.prefix))
            except ValueError as exc:
                raise DatasetError(str(exc)) from exc
        if not 8 <= self.prefix.prefixlen <= 30:
            raise DatasetError(f"IXP prefix length out of [8, 30]: {self.prefix}")


@dataclass(frozen=True, order=True)
class AsMapping:
    prefix: IPv4Network
    asns: frozenset[int]

    def __post_init__(self):
        if not isinstance(self.prefix, IPv4Network):
            object.__setattr__(self, "prefix", IPv4Network(self.prefix))
        if not self.asns:
            raise DatasetError(f"{self.prefix}: empty AS set")
        object.__setattr__(self, "asns", frozenset(self.asns))

    @property
    def multi_origin(self) -> bool:
        return len(self.asns) > 1


@dataclass(frozen=True, order=True)
class Member:
    """(asn, ixp_id) membership pair with registry provenance."""

    asn: int
    ixp_id: str
    sources: frozenset[Source] = field(default=frozenset(), compare=False)


class MergedDataset:
    """Validated, read-only union of registry data used for detection."""

    __slots__ = ("ixps", "triplets", "ixp_prefixes", "memberships", "_members_by_ixp")

    def __init__(
        self,
        ixps: Iterable[IxpRecord] = (),
        triplets: Iterable[MembershipTriplet] = (),
        ixp_prefixes: Iterable[IxpPrefix] = (),
        memberships: Iterable[Member] = (),
    ):
        ixps = tuple(sorted(ixps))
        by_id: dict[str, IxpRecord] = {}
        for rec in ixps:
            if rec.ixp_id in by_id:
                raise DatasetError(f"duplicate ixp_id {rec.ixp_id}")
            if not rec.active:
                raise DatasetError(f"inactive IXP {rec.ixp_id} in merged dataset")
            by_id[rec.ixp_id] = rec
        triplets = tuple(sorted(triplets))
        ixp_prefixes = tuple(sorted(ixp_prefixes))
        memberships = tuple(sorted(memberships))

        for kind, items in (("triplet", triplets), ("prefix", ixp_prefixes), ("membership", memberships)):
            for item in items:
                if item.ixp_id not in by_id:
                    raise DatasetError(f"{kind} references unknown IXP {item.ixp_id}")

        seen_ips = set()
        for t in triplets:
            if t.ip in seen_ips:
                raise DatasetError(f"more than one triplet for {t.ip}")
            seen_ips.add(t.ip)
        seen_pfx = set()
        for p in ixp_prefixes:
            if p.prefix in seen_pfx:
                raise DatasetError(f"prefix {p.prefix} mapped to more than one IXP")
            seen_pfx.add(p.prefix)

        members_by_ixp: dict[str, set[int]] = {i: set() for i in by_id}
        for m in memberships:
            members_by_ixp[m.ixp_id].add(m.asn)
        for t in triplets:
            if t.asn not in members_by_ixp[t.ixp_id]:
                raise DatasetError(
                    f"triplet {t.ip} -> ({t.ixp_id}, AS{t.asn}) without matching membership"
                )

        self.ixps: Mapping[str, IxpRecord] = by_id
        self.triplets = triplets
        self.ixp_prefixes = ixp_prefixes
        self.memberships = memberships
        self._members_by_ixp = {k: frozenset(v) for k, v in members_by_ixp.items()}

    def __setattr__(self, name, value):
        if hasattr(self, "_members_by_ixp"):
            raise AttributeError("MergedDataset is immutable")
        object.__setattr__(self, name, value)

    def __reduce__(self):
        return (
            MergedDataset,
            (tuple(self.ixps.values()), self.triplets, self.ixp_prefixes, self.memberships),
        )

    def __eq__(self, other):
        if not isinstance(other, MergedDataset):
            return NotImplemented
        return self.dumps() == other.dumps()

    def __hash__(self):
        return hash(self.dumps())

    def __repr__(self):
        return (
            f"MergedDataset(ixps={len(self.ixps)}, triplets={len(self.triplets)}, "
            f"prefixes={len(self.ixp_prefixes)}, memberships={len(self.memberships)})"
        )

    def members(self, ixp_id: str) -> frozenset[int]:
        try:
            return self._members_by_ixp[ixp_id]
        except KeyError:
            raise KeyError(f"unknown IXP {ixp_id!r}") from None

    def is_member(self, asn: int, ixp_id: str) -> bool:
        return asn in self.members(ixp_id)

    def triplets_from(self, source: Source) -> tuple[MembershipTriplet, ...]:
        return tuple(t for t in self.triplets if source in t.sources)

    def find_ixp(self, name_or_id: str) -> Optional[IxpRecord]:
        """Look up an IXP by id, then by normalized name."""
        if name_or_id in self.ixps:
            return self.ixps[name_or_id]
        key = normalize_name(name_or_id)
        hits = [rec for rec in self.ixps.values() if key in rec.names]
        return hits[0] if len(hits) == 1 else None

    def dumps(self) -> str:
        """Canonical text form; identical datasets give identical strings."""
        from .ingest import dump_merged

        return dump_merged(self)


@dataclass(frozen=True)
class Hop:
    index: int
    address: Optional[IPv4Address]  # None for a non-responding hop
    rtt: Optional[float] = None

    @property
    def replied(self) -> bool:
        return self.address is not None


@dataclass(frozen=True)
class TraceroutePath:
    path_id: str
    hops: tuple[Hop, ...]
    target: str = ""

    def __post_init__(self):
        object.__setattr__(self, "hops", tuple(self.hops))
        for pos, hop in enumerate(self.hops, start=1):
            if hop.index != pos:
                raise DatasetError(
                    f"path {self.path_id}: hop indices must run 1..n without gaps"
                )

    @classmethod
    def from_addresses(cls, path_id: str, addresses, target: str = "") -> "TraceroutePath":
        """Build a path from a list of dotted quads, ``None`` or ``'*'``."""
        hops = []
        for i, addr in enumerate(addresses, start=1):
            if addr is None or addr == "*":
                hops.append(Hop(i, None))
            else:
                hops.append(Hop(i, IPv4Address(addr)))
        return cls(path_id, tuple(hops), target)


@dataclass(frozen=True)
class HopEvidence:
    kind: EvidenceKind
    ixp_id: Optional[str] = None
    asns: frozenset[int] = frozenset()

    @classmethod
    def triplet(cls, ixp_id: str, asn: int) -> "HopEvidence":
        return cls(EvidenceKind.TRIPLET, ixp_id, frozenset({asn}))

    @classmethod
    def ixp_prefix(cls, ixp_id: str) -> "HopEvidence":
        return cls(EvidenceKind.IXP_PREFIX, ixp_id)

    @classmethod
    def origin_as(cls, asns: Iterable[int]) -> "HopEvidence":
        return cls(EvidenceKind.ORIGIN_AS, None, frozenset(asns))

    @property
    def asn(self) -> Optional[int]:
        """The router's AS for a triplet hop."""
        if self.kind is EvidenceKind.TRIPLET:
            return next(iter(self.asns))
        return None


RESERVED_EVIDENCE = HopEvidence(EvidenceKind.RESERVED)
UNKNOWN_EVIDENCE = HopEvidence(EvidenceKind.UNKNOWN)


@dataclass(frozen=True)
class Detection:
    path_id: str
    window_start: int
    rule_id: RuleId
    ixp_id: str
    crossed_link: Link
    strength: Strength

    def __post_init__(self):
        expected = Strength.STRONG if self.rule_id in STRONG_RULES else Strength.WEAK
        if self.strength is not expected:
            raise DatasetError(f"{self.rule_id.value} must be {expected.value}")

    @property
    def ixp_hop(self) -> int:
        """1-based index of the IXP address that triggered the detection."""
        return self.window_start + 1
