"""Pure-Python longest-prefix-match kernel (fallback for the ``_lpm`` extension).

The trie is flattened into two int arrays: ``child[2*n + bit]`` is the index
of node ``n``'s child for ``bit`` (0 = none, the root is node 0 and is never
a child), and ``value[n]`` is the payload slot stored at node ``n`` or -1.
"""
from array import array

BACKEND = "python"


def lookup(child, value, addr):
    """Return the payload slot of the longest prefix covering ``addr``, or -1."""
    best = value[0]
    node = 0
    shift = 31
    while shift >= 0:
        node = child[2 * node + ((addr >> shift) & 1)]
        if node == 0:
            break
        v = value[node]
        if v >= 0:
            best = v
        shift -= 1
    return best


def lookup_many(child, value, addrs):
    out = array("i", bytes(4 * len(addrs)))
    for i, addr in enumerate(addrs):
        out[i] = lookup(child, value, addr)
    return out
