"""Reference implementations used only by the tests.

Nothing here imports the code paths it checks: the rule oracle is a data
table read straight off the published rule tables, and the resolver oracle
is a linear scan over every prefix.
"""
from __future__ import annotations

import ipaddress

import numpy as np

# ---------------------------------------------------------------------------
# decision table

ANY = None
IN = "in"    # MEMBER
OUT = "out"  # NON_MEMBER or UNKNOWN

# rule, middle kind, AS_k, AS_k+2, AS_k==AS_k+1, AS_k+1==AS_k+2, AS_k==AS_k+2, link
SINGLE_ROWS = [
    ("R1_1", "TRIPLET", IN, IN, False, True, False, "A"),
    ("R1_2", "TRIPLET", IN, OUT, False, ANY, False, "A"),
    ("R1_3", "TRIPLET", IN, IN, False, False, False, "A_OR_B"),
    ("R1_4", "IXP_PREFIX", IN, OUT, ANY, ANY, ANY, "A"),
    ("R1_5", "IXP_PREFIX", OUT, IN, ANY, ANY, ANY, "B"),
    ("R1_6", "TRIPLET", OUT, IN, False, True, False, "B"),
    ("R1_7", "TRIPLET", OUT, OUT, False, False, ANY, "A_OR_B"),
]
STRONG = {"R1_1", "R1_2", "R1_3", "R2_0", "OTHER_STRONG"}
IXP_KINDS = {"TRIPLET", "IXP_PREFIX"}
KINDS = ["TRIPLET", "IXP_PREFIX", "ORIGIN_AS", "RESERVED", "UNKNOWN"]
VERDICTS = ["MEMBER", "NON_MEMBER", "UNKNOWN"]


def _side(want, verdict):
    if want is ANY:
        return True
    return (verdict == "MEMBER") == (want == IN)


def _flag(want, value):
    return want is ANY or want == value


def context(kinds, same01, same12):
    """'pair', 'single', 'deferred' or None for a window."""
    k0, k1, k2 = kinds
    if k1 not in IXP_KINDS:
        return None
    if k0 in IXP_KINDS and same01:
        return "pair"
    if k2 in IXP_KINDS and same12:
        return "deferred"
    return "single"


def documented_matches(kinds, same01, same12, m0, m2, eq01, eq12, eq02):
    """Every documented rule whose conditions hold at this point."""
    ctx = context(kinds, same01, same12)
    hits = []
    if ctx == "pair" and kinds[0] == "TRIPLET" and kinds[1] == "TRIPLET" and not eq01:
        hits.append(("R2_0", "A"))
    if ctx == "single":
        for rule, middle, left, right, f01, f12, f02, link in SINGLE_ROWS:
            if (
                kinds[1] == middle
                and _side(left, m0)
                and _side(right, m2)
                and _flag(f01, eq01)
                and _flag(f12, eq12)
                and _flag(f02, eq02)
            ):
                hits.append((rule, link))
    return hits


def oracle(kinds, same01, same12, m0, m2, eq01, eq12, eq02):
    """(rule, link, strength) or None."""
    ctx = context(kinds, same01, same12)
    if ctx is None or ctx == "deferred":
        return None
    hits = documented_matches(kinds, same01, same12, m0, m2, eq01, eq12, eq02)
    if hits:
        rule, link = hits[0]
    elif kinds[1] == "TRIPLET" and "MEMBER" in (m0, m2):
        rule, link = "OTHER_STRONG", "A_OR_B"
    else:
        rule, link = "OTHER_WEAK", "A_OR_B"
    return rule, link, "STRONG" if rule in STRONG else "WEAK"


def fact_space():
    for k0 in KINDS:
        for k1 in KINDS:
            for k2 in KINDS:
                for same01 in (False, True):
                    for same12 in (False, True):
                        for m0 in VERDICTS:
                            for m2 in VERDICTS:
                                for eq01 in (False, True):
                                    for eq12 in (False, True):
                                        for eq02 in (False, True):
                                            yield ((k0, k1, k2), same01, same12, m0, m2, eq01, eq12, eq02)


# ---------------------------------------------------------------------------
# resolver

RESERVED_CIDRS = [
    "0.0.0.0/8", "10.0.0.0/8", "100.64.0.0/10", "127.0.0.0/8", "169.254.0.0/16",
    "172.16.0.0/12", "192.0.0.0/24", "192.0.2.0/24", "192.88.99.0/24",
    "192.168.0.0/16", "198.18.0.0/15", "198.51.100.0/24", "203.0.113.0/24",
    "224.0.0.0/4", "240.0.0.0/4", "255.255.255.255/32",
]


class LinearScanResolver:
    """Brute-force reference: compares every address against every prefix."""

    def __init__(self, triplets, ixp_prefixes, as_mappings):
        self.triplets = {int(ip): (ixp, asn) for ip, ixp, asn in triplets}
        self.ixp = self._table(ixp_prefixes)
        # identical prefixes: later entries replace earlier ones
        dedup = {}
        for net, asns in as_mappings:
            dedup[ipaddress.IPv4Network(net)] = frozenset(asns)
        self.asm = self._table(list(dedup.items()))
        self.reserved = self._table([(c, True) for c in RESERVED_CIDRS])

    @staticmethod
    def _table(entries):
        nets = [ipaddress.IPv4Network(n) for n, _ in entries]
        starts = np.array([int(n.network_address) for n in nets], dtype=np.uint64)
        ends = np.array([int(n.broadcast_address) for n in nets], dtype=np.uint64)
        lengths = np.array([n.prefixlen for n in nets], dtype=np.int64)
        return starts, ends, lengths, [v for _, v in entries]

    @staticmethod
    def _longest(table, addr):
        starts, ends, lengths, values = table
        if not len(values):
            return None
        hit = (starts <= addr) & (addr <= ends)
        if not hit.any():
            return None
        cand = np.flatnonzero(hit)
        return values[cand[np.argmax(lengths[cand])]]

    def resolve(self, addr):
        """('UNKNOWN'|'RESERVED'|'TRIPLET'|'IXP_PREFIX'|'ORIGIN_AS', payload)."""
        if addr is None:
            return ("UNKNOWN", None)
        a = int(addr)
        if self._longest(self.reserved, a):
            return ("RESERVED", None)
        if a in self.triplets:
            return ("TRIPLET", self.triplets[a])
        ixp = self._longest(self.ixp, a)
        if ixp is not None:
            return ("IXP_PREFIX", ixp)
        asns = self._longest(self.asm, a)
        if asns is not None:
            return ("ORIGIN_AS", asns)
        return ("UNKNOWN", None)


def linear_lpm(prefixes, addr):
    """Longest covering prefix among ``(network, payload)`` pairs, pure Python."""
    best, best_len = None, -1
    for net, payload in prefixes:
        if addr in net and net.prefixlen > best_len:
            best, best_len = payload, net.prefixlen
    return best


def pearson_textbook(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / (sxx * syy) ** 0.5


# ---------------------------------------------------------------------------
# whole-path reference detector over plain tuples (kind, ixp_id, asns)

def facts_of(e0, e1, e2, members):
    """Oracle inputs for one window; ``members`` maps ixp_id -> set of ASNs."""
    (k0, x0, a0), (k1, x1, a1), (k2, x2, a2) = e0, e1, e2
    same01 = k0 in IXP_KINDS and k1 in IXP_KINDS and x0 == x1
    same12 = k1 in IXP_KINDS and k2 in IXP_KINDS and x1 == x2
    s0, s1, s2 = (set(a) if k in ("TRIPLET", "ORIGIN_AS") else set() for k, a in ((k0, a0), (k1, a1), (k2, a2)))

    def verdict(s):
        if k1 not in IXP_KINDS or not s:
            return "UNKNOWN"
        return "MEMBER" if s & members[x1] else "NON_MEMBER"

    return ((k0, k1, k2), same01, same12, verdict(s0), verdict(s2), bool(s0 & s1), bool(s1 & s2), bool(s0 & s2))


def reference_detect(evidence, members):
    """[(window_start, rule, ixp_id, link)] sliding over hop tuples."""
    pad = ("UNKNOWN", None, frozenset())
    ev = [pad, *evidence, pad]
    out, k, n = [], 0, len(evidence)
    while k < n:
        f = facts_of(ev[k], ev[k + 1], ev[k + 2], members)
        hit = oracle(*f)
        if hit is not None:
            out.append((k, hit[0], ev[k + 1][1], hit[1]))
            if context(f[0], f[1], f[2]) == "pair":
                k += 2
                continue
        k += 1
    return out
