"""Three-hop sliding-window IXP detection.

Each window (k, k+1, k+2) is reduced to :class:`WindowFacts` (evidence
kinds, membership of the neighbouring ASes in the candidate IXP, AS
equality between the hops) and classified by :func:`classify_window`.

Single IXP address between two other hops (middle hop k+1):

    rule  middle   AS_k    AS_k+2   AS relations                 link   strength
    1.1   triplet  in      in       k+1 = k+2, k != k+1, k != k+2 A      strong
    1.2   triplet  in      not in   k != k+1, k != k+2           A      strong
    1.3   triplet  in      in       all three different          A|B    strong
    1.4   prefix   in      not in                                A      weak
    1.5   prefix   not in  in                                    B      weak
    1.6   triplet  not in  in       k+1 = k+2, k != k+1, k != k+2 B      weak
    1.7   triplet  not in  not in   k != k+1, k+1 != k+2         A|B    weak

Two consecutive addresses of the same IXP (hops k, k+1):

    2.0   triplet, triplet with different ASes                  A      strong

Anything else carrying IXP evidence becomes OTHER_STRONG (triplet in the
middle and at least one neighbour is a member) or OTHER_WEAK, link A|B.
A neighbour whose AS is unknown never counts as a member.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .model import (
    STRONG_RULES,
    UNKNOWN_EVIDENCE,
    Detection,
    EvidenceKind,
    HopEvidence,
    Link,
    Membership,
    MergedDataset,
    RuleId,
    Strength,
    TraceroutePath,
)
from .resolver import PrefixIndex, as_set, membership_of

TRIPLET = EvidenceKind.TRIPLET
PREFIX = EvidenceKind.IXP_PREFIX
MEMBER = Membership.MEMBER


@dataclass(frozen=True)
class WindowFacts:
    kinds: tuple[EvidenceKind, EvidenceKind, EvidenceKind]
    same_ixp01: bool  # hops k and k+1 are both IXP evidence for one IXP
    same_ixp12: bool
    member_k: Membership
    member_k2: Membership
    eq01: bool  # AS sets of hops k and k+1 intersect
    eq12: bool
    eq02: bool
    ixp_id: Optional[str] = None

    @property
    def consecutive(self) -> bool:
        return self.kinds[0].is_ixp and self.kinds[1].is_ixp and self.same_ixp01


def window_facts(e0: HopEvidence, e1: HopEvidence, e2: HopEvidence, d: MergedDataset) -> WindowFacts:
    same01 = e0.kind.is_ixp and e1.kind.is_ixp and e0.ixp_id == e1.ixp_id
    same12 = e1.kind.is_ixp and e2.kind.is_ixp and e1.ixp_id == e2.ixp_id
    ixp_id = e1.ixp_id if e1.kind.is_ixp else None
    s0, s1, s2 = as_set(e0), as_set(e1), as_set(e2)
    if ixp_id is None:
        m0 = m2 = Membership.UNKNOWN
    else:
        m0 = membership_of(d, s0, ixp_id)
        m2 = membership_of(d, s2, ixp_id)
    return WindowFacts(
        kinds=(e0.kind, e1.kind, e2.kind),
        same_ixp01=same01,
        same_ixp12=same12,
        member_k=m0,
        member_k2=m2,
        eq01=bool(s0 & s1),
        eq12=bool(s1 & s2),
        eq02=bool(s0 & s2),
        ixp_id=ixp_id,
    )


def _residual(f: WindowFacts) -> tuple[RuleId, Link]:
    if f.kinds[1] is TRIPLET and MEMBER in (f.member_k, f.member_k2):
        return RuleId.OTHER_STRONG, Link.A_OR_B
    return RuleId.OTHER_WEAK, Link.A_OR_B


def match_rule(f: WindowFacts) -> Optional[tuple[RuleId, Link]]:
    k0, k1, k2 = f.kinds
    if not k1.is_ixp:
        return None
    if f.consecutive:
        if k0 is TRIPLET and k1 is TRIPLET and not f.eq01:
            return RuleId.R2_0, Link.A
        return _residual(f)
    if k2.is_ixp and f.same_ixp12:
        # the next window sees hops k+1, k+2 as a consecutive pair
        return None

    left = f.member_k is MEMBER
    right = f.member_k2 is MEMBER
    if k1 is PREFIX:
        if left and not right:
            return RuleId.R1_4, Link.A
        if right and not left:
            return RuleId.R1_5, Link.B
        return _residual(f)

    if not f.eq01 and not f.eq02:
        if left and right:
            if f.eq12:
                return RuleId.R1_1, Link.A
            return RuleId.R1_3, Link.A_OR_B
        if left:
            return RuleId.R1_2, Link.A
        if right and f.eq12:
            return RuleId.R1_6, Link.B
    if not left and not right and not f.eq01 and not f.eq12:
        return RuleId.R1_7, Link.A_OR_B
    return _residual(f)


def classify_window(f: WindowFacts, path_id: str = "", window_start: int = 0) -> Optional[Detection]:
    hit = match_rule(f)
    if hit is None:
        return None
    rule, link = hit
    strength = Strength.STRONG if rule in STRONG_RULES else Strength.WEAK
    return Detection(path_id, window_start, rule, f.ixp_id or "", link, strength)


def detect_evidence(path_id: str, evidence: Sequence[HopEvidence], d: MergedDataset) -> list[Detection]:
    """Slide the window over already-resolved hop evidence (hop 1 first)."""
    n = len(evidence)
    padded = [UNKNOWN_EVIDENCE, *evidence, UNKNOWN_EVIDENCE]
    out = []
    k = 0
    while k < n:
        e1 = padded[k + 1]
        if not e1.kind.is_ixp:
            k += 1
            continue
        facts = window_facts(padded[k], e1, padded[k + 2], d)
        det = classify_window(facts, path_id, k)
        if det is not None:
            out.append(det)
            if facts.consecutive:
                k += 2
                continue
        k += 1
    return out


def detect_path(idx: PrefixIndex, d: MergedDataset, p: TraceroutePath) -> list[Detection]:
    evidence = idx.resolve_many([h.address for h in p.hops])
    return detect_evidence(p.path_id, evidence, d)


def preprocess_path(p: TraceroutePath) -> Optional[TraceroutePath]:
    """Drop paths with no replies or with a routing loop.

    A loop is the same address at two non-adjacent hops; repeats on
    adjacent hops are tolerated.
    """
    last_seen: dict = {}
    any_reply = False
    for hop in p.hops:
        if hop.address is None:
            continue
        any_reply = True
        prev = last_seen.get(hop.address)
        if prev is not None and hop.index - prev > 1:
            return None
        last_seen[hop.address] = hop.index
    return p if any_reply else None


# -- batch -------------------------------------------------------------------

_worker: dict = {}


def _init_worker(idx: PrefixIndex, d: MergedDataset) -> None:
    _worker["idx"], _worker["d"] = idx, d


def _detect_one(p: TraceroutePath) -> list[Detection]:
    return detect_path(_worker["idx"], _worker["d"], p)


def detect_corpus(
    idx: PrefixIndex, d: MergedDataset, paths: Iterable[TraceroutePath], jobs: int = 1
) -> list[tuple[TraceroutePath, list[Detection]]]:
    """Run detection over many paths; output order follows input order."""
    paths = list(paths)
    if jobs <= 1 or len(paths) < 2:
        return [(p, detect_path(idx, d, p)) for p in paths]
    chunk = max(1, len(paths) // (jobs * 4))
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(idx, d)) as pool:
        return list(zip(paths, pool.map(_detect_one, paths, chunksize=chunk)))
