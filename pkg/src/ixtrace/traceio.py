"""Reading traceroute paths: path files, traceroute/scamper text, live probing.

Path files hold one block per path::

    PATH|<id>|<target>
    HOP|1|192.0.2.1|0.512
    HOP|2|*|
"""
from __future__ import annotations

import logging
import re
import shutil
import subprocess
from ipaddress import IPv4Address
from typing import Callable, Optional, Union

from .model import Hop, TraceroutePath

log = logging.getLogger(__name__)


class ExternalProgramError(RuntimeError):
    pass


class PathFileError(ValueError):
    pass


def _rtt(text: str) -> Optional[float]:
    text = text.strip()
    if text in ("", "*"):
        return None
    value = float(text)
    if value < 0:
        raise ValueError(f"negative rtt {text}")
    return value


def parse_trace_file(content: Union[str, bytes], warnings: Optional[list[str]] = None) -> list[TraceroutePath]:
    """Parse a path file; malformed paths are skipped and reported in ``warnings``."""
    if isinstance(content, bytes):
        try:
            content = content.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PathFileError(f"path file is not UTF-8: {exc}") from None
    if warnings is None:
        warnings = []
    paths: list[TraceroutePath] = []
    current: Optional[dict] = None

    def close():
        if current is None:
            return
        if current["error"]:
            warnings.append(f"path {current['id']!r} (line {current['line']}): {current['error']}; skipped")
            return
        try:
            paths.append(TraceroutePath(current["id"], tuple(current["hops"]), current["target"]))
        except ValueError as exc:
            warnings.append(f"path {current['id']!r} (line {current['line']}): {exc}; skipped")

    for lineno, raw in enumerate(content.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        f = line.split("|")
        if f[0] == "PATH":
            close()
            if len(f) != 3 or not f[1].strip():
                current = {"id": f[1] if len(f) > 1 else "?", "target": "", "hops": [], "line": lineno,
                           "error": "PATH needs id and target"}
            else:
                current = {"id": f[1].strip(), "target": f[2].strip(), "hops": [], "line": lineno, "error": None}
        elif f[0] == "HOP":
            if current is None:
                warnings.append(f"line {lineno}: HOP outside of a PATH block")
                continue
            if current["error"]:
                continue
            try:
                if len(f) != 4:
                    raise ValueError("HOP needs index, address and rtt")
                index = int(f[1])
                addr = None if f[2].strip() == "*" else IPv4Address(f[2].strip())
                current["hops"].append(Hop(index, addr, None if addr is None else _rtt(f[3])))
            except ValueError as exc:
                current["error"] = f"line {lineno}: {exc}"
        else:
            warnings.append(f"line {lineno}: unknown record {f[0]!r}")
    close()
    return paths


def dump_trace_file(paths) -> str:
    lines = []
    for p in paths:
        lines.append(f"PATH|{p.path_id}|{p.target}")
        for h in p.hops:
            rtt = "" if h.rtt is None else f"{h.rtt:g}"
            lines.append(f"HOP|{h.index}|{h.address or '*'}|{rtt}")
    return "\n".join(lines) + ("\n" if lines else "")


_HOP_RE = re.compile(r"^\s*(\d+)\s+(.*)$")
_IP_RE = re.compile(r"(?<![\d.])(\d{1,3}(?:\.\d{1,3}){3})(?![\d.])")
_RTT_RE = re.compile(r"([\d.]+)\s*ms\b")


def parse_traceroute_text(text: str, path_id: str = "trace", target: str = "",
                          warnings: Optional[list[str]] = None) -> TraceroutePath:
    """Parse classic ``traceroute`` or scamper text output.

    The first responding address of a hop wins. Lines that cannot be read
    become non-responding hops, as do gaps in the hop numbering.
    """
    if warnings is None:
        warnings = []
    hops: dict[int, tuple[Optional[IPv4Address], Optional[float]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        m = _HOP_RE.match(raw)
        if not m:
            if raw.strip() and not raw.lstrip().startswith("traceroute"):
                warnings.append(f"line {lineno}: ignored {raw.strip()!r}")
            continue
        index, rest = int(m.group(1)), m.group(2)
        if index < 1 or index in hops:
            warnings.append(f"line {lineno}: bad or repeated hop number {index}")
            continue
        ip_m = _IP_RE.search(rest)
        addr = None
        rtt = None
        if ip_m:
            try:
                addr = IPv4Address(ip_m.group(1))
            except ValueError:
                addr = None
        if addr is not None:
            rtt_m = _RTT_RE.search(rest, ip_m.end())
            rtt = float(rtt_m.group(1)) if rtt_m else None
        elif rest.replace("*", "").strip():
            warnings.append(f"line {lineno}: unparseable hop {rest.strip()!r}, treated as no reply")
        hops[index] = (addr, rtt)
    n = max(hops, default=0)
    return TraceroutePath(
        path_id,
        tuple(Hop(i, *hops.get(i, (None, None))) for i in range(1, n + 1)),
        target,
    )


def trace_command(target: str, probe: str = "udp", max_ttl: int = 30, backend: str = "traceroute") -> list[str]:
    if probe not in ("icmp", "udp"):
        raise ValueError(f"unknown probe method {probe!r}")
    if backend == "traceroute":
        cmd = ["traceroute", "-n", "-q", "1", "-m", str(max_ttl)]
        if probe == "icmp":
            cmd.append("-I")
        return cmd + [target]
    if backend == "scamper":
        method = "icmp-paris" if probe == "icmp" else "udp-paris"
        return ["scamper", "-O", "text", "-c", f"trace -P {method} -m {max_ttl}", "-i", target]
    raise ValueError(f"unknown backend {backend!r}")


def run_trace(
    target: str,
    probe: str = "udp",
    max_ttl: int = 30,
    backend: str = "traceroute",
    runner: Callable[..., subprocess.CompletedProcess] = subprocess.run,
    warnings: Optional[list[str]] = None,
    timeout: Optional[float] = None,
) -> TraceroutePath:
    """Probe ``target`` with the system traceroute (or scamper) and parse the result."""
    cmd = trace_command(target, probe, max_ttl, backend)
    if runner is subprocess.run and shutil.which(cmd[0]) is None:
        raise ExternalProgramError(
            f"{cmd[0]!r} not found on PATH; install it or pick another --backend"
        )
    try:
        proc = runner(cmd, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError:
        raise ExternalProgramError(f"{cmd[0]!r} not found on PATH") from None
    except subprocess.TimeoutExpired:
        raise ExternalProgramError(f"{cmd[0]} timed out after {timeout}s") from None
    if proc.returncode != 0 and not proc.stdout.strip():
        raise ExternalProgramError(f"{cmd[0]} exited with {proc.returncode}: {proc.stderr.strip()}")
    return parse_traceroute_text(proc.stdout, path_id=target, target=target, warnings=warnings)
