"""Annotated traceroute output (text and JSON)."""
from __future__ import annotations

from collections import defaultdict
from typing import Optional, Sequence

from .model import (
    Detection,
    EvidenceKind,
    HopEvidence,
    Link,
    MergedDataset,
    Strength,
    TraceroutePath,
)


def _ixp_name(d: MergedDataset, ixp_id: Optional[str]) -> str:
    rec = d.ixps.get(ixp_id) if ixp_id else None
    return rec.label if rec else (ixp_id or "?")


def _asns(asns) -> str:
    return "/".join(f"AS{a}" for a in sorted(asns))


def hop_tag(ev: HopEvidence, d: MergedDataset) -> str:
    if ev.kind is EvidenceKind.TRIPLET:
        return f"(IXP:{_ixp_name(d, ev.ixp_id)} AS{ev.asn})"
    if ev.kind is EvidenceKind.IXP_PREFIX:
        return f"(IXP:{_ixp_name(d, ev.ixp_id)})"
    if ev.kind is EvidenceKind.ORIGIN_AS:
        return f"({_asns(ev.asns)})"
    if ev.kind is EvidenceKind.RESERVED:
        return "(reserved)"
    return "(?)"


def annotation_line(det: Detection, d: MergedDataset) -> str:
    name = _ixp_name(d, det.ixp_id)
    k = det.window_start
    details = f"rule {det.rule_id.value}, {det.strength.value.lower()}"
    if det.crossed_link is Link.A_OR_B:
        details += f", ambiguous link {k}-{k + 1} or {k + 1}-{k + 2}"
    if det.strength is Strength.STRONG:
        return f"=== IXP {name} crossed [{details}] ==="
    return f"=== possible IXP crossing: {name} [{details}] ==="


def crossing_after_hop(det: Detection) -> int:
    """Hop index after which the annotation is printed (0 = before hop 1)."""
    return det.window_start if det.crossed_link is Link.A else det.window_start + 1


def annotate(
    path: TraceroutePath,
    detections: Sequence[Detection],
    evidence: Sequence[HopEvidence],
    d: MergedDataset,
) -> str:
    """Render one hop per line with IXP crossings interposed between hops."""
    after: dict[int, list[str]] = defaultdict(list)
    for det in detections:
        after[crossing_after_hop(det)].append(annotation_line(det, d))
    target = f" to {path.target}" if path.target else ""
    lines = [f"path {path.path_id}{target}"]
    lines += after.get(0, [])
    for hop, ev in zip(path.hops, evidence):
        ip = str(hop.address) if hop.address is not None else "*"
        rtt = f"{hop.rtt:.3f} ms" if hop.rtt is not None else "*"
        lines.append(f"{hop.index:>2}  {ip}  {rtt}  {hop_tag(ev, d)}")
        lines += after.get(hop.index, [])
    return "\n".join(lines) + "\n"


def path_json(
    path: TraceroutePath,
    detections: Sequence[Detection],
    evidence: Sequence[HopEvidence],
    d: MergedDataset,
) -> dict:
    hops = []
    for hop, ev in zip(path.hops, evidence):
        entry = {
            "index": hop.index,
            "ip": str(hop.address) if hop.address is not None else None,
            "rtt": hop.rtt,
            "evidence": ev.kind.value,
        }
        if ev.ixp_id:
            entry["ixp_id"] = ev.ixp_id
            entry["ixp_name"] = _ixp_name(d, ev.ixp_id)
        if ev.asns:
            entry["asns"] = sorted(ev.asns)
        hops.append(entry)
    return {
        "path_id": path.path_id,
        "target": path.target,
        "hops": hops,
        "detections": [
            {
                "window_start": det.window_start,
                "ixp_hop": det.ixp_hop,
                "rule_id": det.rule_id.value,
                "link": det.crossed_link.value,
                "strength": det.strength.value,
                "ixp_id": det.ixp_id,
                "ixp_name": _ixp_name(d, det.ixp_id),
            }
            for det in detections
        ],
    }
