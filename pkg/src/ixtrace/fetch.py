"""Thin HTTPS clients that turn registry API data into snapshot files.

The detector never consumes API responses directly; everything goes
through :class:`~ixtrace.ingest.RegistrySnapshot`.

Expected layouts (base URL configurable, ``IXTRACE_PDB_URL`` /
``IXTRACE_PCH_URL``):

PDB, PeeringDB API style, each returning ``{"data": [...]}``:
    ``/ix`` (id, name, status), ``/ixlan`` (id, ix_id),
    ``/ixpfx`` (ixlan_id, prefix, protocol), ``/netixlan`` (ix_id, asn, ipaddr4)

PCH, JSON lists:
    ``/ixps`` (id, name, status, prefixes), ``/members`` (ixp_id, asn, ip)
"""
from __future__ import annotations

import logging
import os
import time
from collections import defaultdict
from ipaddress import IPv4Address, IPv4Network
from pathlib import Path
from typing import Optional, Union

import requests

from .ingest import RegistrySnapshot, SnapshotIxp, SnapshotMembership, _clean_field
from .model import Source, normalize_name, parse_asn

log = logging.getLogger(__name__)

DEFAULT_URLS = {
    Source.PDB: "https://www.peeringdb.com/api",
    Source.PCH: "https://www.pch.net/api/ixp",
}
ENV_VARS = {Source.PDB: "IXTRACE_PDB_URL", Source.PCH: "IXTRACE_PCH_URL"}


class FetchError(RuntimeError):
    pass


def endpoint_for(source: Source, override: Optional[str] = None) -> str:
    return (override or os.environ.get(ENV_VARS[source]) or DEFAULT_URLS[source]).rstrip("/")


class _Client:
    def __init__(self, base: str, retries: int, timeout: float, backoff: float, session=None):
        self.base = base
        self.retries = max(1, retries)
        self.timeout = timeout
        self.backoff = backoff
        self.session = session or requests.Session()

    def get(self, path: str):
        url = f"{self.base}/{path.lstrip('/')}"
        last = None
        for attempt in range(1, self.retries + 1):
            try:
                resp = self.session.get(url, timeout=self.timeout)
                if resp.status_code >= 500:
                    raise requests.HTTPError(f"HTTP {resp.status_code}", response=resp)
                resp.raise_for_status()
                return resp.json()
            except (requests.RequestException, ValueError) as exc:
                last = exc
                log.warning("GET %s failed (attempt %d/%d): %s", url, attempt, self.retries, exc)
                if attempt < self.retries and self.backoff:
                    time.sleep(self.backoff * attempt)
        raise FetchError(f"GET {url} failed after {self.retries} attempts: {last}")


def _rows(payload, key: Optional[str], warnings: list[str], what: str) -> list:
    rows = payload.get(key) if key and isinstance(payload, dict) else payload
    if not isinstance(rows, list):
        warnings.append(f"{what}: unexpected response shape, ignored")
        return []
    return [r for r in rows if isinstance(r, dict)]


def _pdb(client: _Client, warnings: list[str]) -> RegistrySnapshot:
    snap = RegistrySnapshot(Source.PDB)
    ixps = {}
    for row in _rows(client.get("ix"), "data", warnings, "ix"):
        try:
            local_id = str(row["id"])
            name = _clean_field(str(row["name"]))
        except KeyError as exc:
            warnings.append(f"ix record without {exc}")
            continue
        if not normalize_name(name):
            warnings.append(f"ix {local_id}: unusable name")
            continue
        ixps[local_id] = SnapshotIxp(local_id, name, row.get("status", "ok") == "ok")
    lan_to_ix = {}
    for row in _rows(client.get("ixlan"), "data", warnings, "ixlan"):
        if "id" in row and "ix_id" in row:
            lan_to_ix[str(row["id"])] = str(row["ix_id"])
        else:
            warnings.append("ixlan record without id/ix_id")
    for row in _rows(client.get("ixpfx"), "data", warnings, "ixpfx"):
        if str(row.get("protocol", "IPv4")).lower() != "ipv4":
            continue
        ix = ixps.get(lan_to_ix.get(str(row.get("ixlan_id"))))
        try:
            net = IPv4Network(str(row["prefix"]))
        except (KeyError, ValueError) as exc:
            warnings.append(f"ixpfx: bad prefix {exc}")
            continue
        if ix is None:
            warnings.append(f"ixpfx {net}: unknown ixlan {row.get('ixlan_id')}")
        elif 8 <= net.prefixlen <= 30 and net not in ix.prefixes:
            ix.prefixes.append(net)
    members: dict[tuple[str, int], list[IPv4Address]] = defaultdict(list)
    for row in _rows(client.get("netixlan"), "data", warnings, "netixlan"):
        ix_id = row.get("ix_id")
        if ix_id is None and "ixlan_id" in row:
            ix_id = lan_to_ix.get(str(row["ixlan_id"]))
        if str(ix_id) not in ixps:
            warnings.append(f"netixlan for unknown ix {ix_id}")
            continue
        try:
            asn = parse_asn(str(row["asn"]))
        except (KeyError, ValueError) as exc:
            warnings.append(f"netixlan: bad asn {exc}")
            continue
        ips = members[(str(ix_id), asn)]
        if row.get("ipaddr4"):
            try:
                ip = IPv4Address(str(row["ipaddr4"]))
            except ValueError:
                warnings.append(f"netixlan: bad ipaddr4 {row['ipaddr4']!r}")
                continue
            if ip not in ips:
                ips.append(ip)
    snap.ixps = list(ixps.values())
    snap.memberships = [SnapshotMembership(i, a, ips) for (i, a), ips in members.items()]
    return snap


def _pch(client: _Client, warnings: list[str]) -> RegistrySnapshot:
    snap = RegistrySnapshot(Source.PCH)
    ixps = {}
    for row in _rows(client.get("ixps"), None, warnings, "ixps"):
        try:
            local_id = str(row["id"])
            name = _clean_field(str(row["name"]))
        except KeyError as exc:
            warnings.append(f"ixps record without {exc}")
            continue
        if not normalize_name(name):
            warnings.append(f"ixp {local_id}: unusable name")
            continue
        ix = SnapshotIxp(local_id, name, str(row.get("status", "active")).lower() == "active")
        for text in row.get("prefixes") or []:
            try:
                net = IPv4Network(str(text))
            except ValueError:
                warnings.append(f"ixp {local_id}: bad prefix {text!r}")
                continue
            if net.version == 4 and 8 <= net.prefixlen <= 30 and net not in ix.prefixes:
                ix.prefixes.append(net)
        ixps[local_id] = ix
    members: dict[tuple[str, int], list[IPv4Address]] = defaultdict(list)
    for row in _rows(client.get("members"), None, warnings, "members"):
        ixp_id = str(row.get("ixp_id"))
        if ixp_id not in ixps:
            warnings.append(f"member of unknown ixp {ixp_id}")
            continue
        try:
            asn = parse_asn(str(row["asn"]))
            ip = IPv4Address(str(row["ip"])) if row.get("ip") else None
        except (KeyError, ValueError) as exc:
            warnings.append(f"members: bad record {exc}")
            continue
        ips = members[(ixp_id, asn)]
        if ip is not None and ip not in ips:
            ips.append(ip)
    snap.ixps = list(ixps.values())
    snap.memberships = [SnapshotMembership(i, a, ips) for (i, a), ips in members.items()]
    return snap


def fetch_registry(
    source: Union[Source, str],
    base_url: Optional[str] = None,
    out_path: Union[str, Path, None] = None,
    retries: int = 3,
    timeout: float = 30.0,
    backoff: float = 1.0,
    session=None,
) -> RegistrySnapshot:
    """Download one registry, normalize it and optionally write the snapshot file.

    Network failures raise :class:`FetchError` once ``retries`` attempts are
    used up. Records that do not fit the expected schema are skipped and
    listed in ``snapshot.warnings``.
    """
    source = Source(source)
    client = _Client(endpoint_for(source, base_url), retries, timeout, backoff, session)
    warnings: list[str] = []
    snap = (_pdb if source is Source.PDB else _pch)(client, warnings)
    snap.warnings.extend(warnings)
    if out_path is not None:
        Path(out_path).write_text(snap.dumps(), encoding="utf-8", newline="\n")
    return snap
