"""Binary-trie longest-prefix match over IPv4 prefixes.

The lookup kernel comes from the compiled ``_lpm`` extension when it is
importable and from ``_lpm_py`` otherwise. Set ``IXTRACE_PURE_PYTHON=1`` to
force the fallback.
"""
from __future__ import annotations

import os
from array import array
from ipaddress import IPv4Address, IPv4Network
from typing import Generic, Iterable, Optional, TypeVar

from . import _lpm_py

if os.environ.get("IXTRACE_PURE_PYTHON"):
    _kernel = _lpm_py
else:
    try:
        from . import _lpm as _kernel
    except ImportError:  # extension not built
        _kernel = _lpm_py

BACKEND: str = _kernel.BACKEND

T = TypeVar("T")


def available_backends() -> dict:
    kernels = {"python": _lpm_py}
    try:
        from . import _lpm

        kernels["cython"] = _lpm
    except ImportError:
        pass
    return kernels


class PrefixTrie(Generic[T]):
    """Read-only LPM table mapping IPv4 prefixes to payloads.

    Inserting the same prefix twice keeps the last payload; ``insert``
    returns the payload it replaced so callers can warn.
    """

    def __init__(self, items: Iterable[tuple[IPv4Network, T]] = (), kernel=None):
        self._kernel = kernel or _kernel
        self._child = [0, 0]
        self._value = [-1]
        self._payloads: list[T] = []
        self._frozen: Optional[tuple[array, array]] = None
        for net, payload in items:
            self.insert(net, payload)

    def insert(self, net: IPv4Network, payload: T) -> Optional[T]:
        if self._frozen is not None:
            raise RuntimeError("trie is frozen")
        bits = int(net.network_address)
        node = 0
        for depth in range(net.prefixlen):
            bit = (bits >> (31 - depth)) & 1
            nxt = self._child[2 * node + bit]
            if nxt == 0:
                nxt = len(self._value)
                self._child[2 * node + bit] = nxt
                self._child += (0, 0)
                self._value.append(-1)
            node = nxt
        slot = self._value[node]
        if slot >= 0:
            old = self._payloads[slot]
            self._payloads[slot] = payload
            return old
        self._value[node] = len(self._payloads)
        self._payloads.append(payload)
        return None

    def _arrays(self) -> tuple[array, array]:
        if self._frozen is None:
            self._frozen = (array("i", self._child), array("i", self._value))
            del self._child, self._value
        return self._frozen

    def __len__(self) -> int:
        return len(self._payloads)

    @property
    def node_count(self) -> int:
        return len(self._arrays()[1])

    def lookup_int(self, addr: int) -> Optional[T]:
        child, value = self._arrays()
        slot = self._kernel.lookup(child, value, addr)
        return None if slot < 0 else self._payloads[slot]

    def lookup(self, addr: IPv4Address) -> Optional[T]:
        return self.lookup_int(int(addr))

    def lookup_many(self, addrs: Iterable[int]) -> list[Optional[T]]:
        child, value = self._arrays()
        addrs = addrs if isinstance(addrs, array) else array("I", addrs)
        slots = self._kernel.lookup_many(child, value, addrs)
        payloads = self._payloads
        return [None if s < 0 else payloads[s] for s in slots]

    def __getstate__(self):
        child, value = self._arrays()
        return {"backend": self._kernel.BACKEND, "arrays": (child, value), "payloads": self._payloads}

    def __setstate__(self, state):
        self._kernel = available_backends().get(state["backend"], _lpm_py)
        self._frozen = state["arrays"]
        self._payloads = state["payloads"]

    def with_kernel(self, kernel) -> "PrefixTrie[T]":
        """Same table, different lookup kernel (used by the benchmark and tests)."""
        twin = PrefixTrie.__new__(PrefixTrie)
        twin._kernel = kernel
        twin._payloads = self._payloads
        twin._frozen = self._arrays()
        return twin
