"""IANA special-purpose IPv4 blocks that must never be attributed to an IXP or AS."""
from __future__ import annotations

from ipaddress import IPv4Address, IPv4Network

RESERVED_BLOCKS = tuple(
    IPv4Network(cidr)
    for cidr in (
        "0.0.0.0/8",
        "10.0.0.0/8",
        "100.64.0.0/10",
        "127.0.0.0/8",
        "169.254.0.0/16",
        "172.16.0.0/12",
        "192.0.0.0/24",
        "192.0.2.0/24",
        "192.88.99.0/24",
        "192.168.0.0/16",
        "198.18.0.0/15",
        "198.51.100.0/24",
        "203.0.113.0/24",
        "224.0.0.0/4",
        "240.0.0.0/4",
        "255.255.255.255/32",
    )
)

# inclusive integer ranges, checked with a plain scan (16 entries)
_RANGES = tuple(
    (int(net.network_address), int(net.broadcast_address)) for net in RESERVED_BLOCKS
)


def is_reserved_int(addr: int) -> bool:
    for lo, hi in _RANGES:
        if lo <= addr <= hi:
            return True
    return False


def is_reserved(addr: IPv4Address) -> bool:
    return is_reserved_int(int(addr))


def is_reserved_network(net: IPv4Network) -> bool:
    """True if ``net`` overlaps any reserved block."""
    return any(net.overlaps(block) for block in RESERVED_BLOCKS)
