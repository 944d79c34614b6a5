# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled longest-prefix-match kernel; same contract as ``_lpm_py``."""
from array import array

BACKEND = "cython"


cdef inline int _walk(const int[:] child, const int[:] value, unsigned int addr) nogil:
    cdef int best = value[0]
    cdef int node = 0
    cdef int shift = 31
    cdef int v
    while shift >= 0:
        node = child[2 * node + ((addr >> shift) & 1)]
        if node == 0:
            break
        v = value[node]
        if v >= 0:
            best = v
        shift -= 1
    return best


def lookup(const int[:] child, const int[:] value, unsigned int addr):
    return _walk(child, value, addr)


def lookup_many(const int[:] child, const int[:] value, addrs):
    cdef const unsigned int[:] a
    cdef Py_ssize_t i, n = len(addrs)
    out = array("i", bytes(4 * n))
    cdef int[:] o = out
    if isinstance(addrs, array) and addrs.typecode == "I":
        a = addrs
    else:
        a = array("I", addrs)
    with nogil:
        for i in range(n):
            o[i] = _walk(child, value, a[i])
    return out
