# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled edit-distance kernel. Must agree exactly with kernels._pure."""

from libc.stdlib cimport free, malloc


def levenshtein(unicode a, unicode b):
    """Character-level Levenshtein distance (unit-cost insert/delete/substitute)."""
    cdef Py_ssize_t la = len(a)
    cdef Py_ssize_t lb = len(b)
    if a == b:
        return 0
    if la == 0:
        return lb
    if lb == 0:
        return la
    if lb > la:
        a, b = b, a
        la, lb = lb, la

    cdef int* prev = <int*> malloc((lb + 1) * sizeof(int))
    cdef int* cur = <int*> malloc((lb + 1) * sizeof(int))
    if prev == NULL or cur == NULL:
        free(prev)
        free(cur)
        raise MemoryError()

    cdef Py_ssize_t i, j
    cdef int cost, dele, ins
    cdef Py_UCS4 ca
    cdef int* tmp
    try:
        for j in range(lb + 1):
            prev[j] = <int> j
        for i in range(la):
            ca = a[i]
            cur[0] = <int> (i + 1)
            for j in range(lb):
                cost = prev[j] if ca == b[j] else prev[j] + 1
                dele = prev[j + 1] + 1
                if dele < cost:
                    cost = dele
                ins = cur[j] + 1
                if ins < cost:
                    cost = ins
                cur[j + 1] = cost
            tmp = prev
            prev = cur
            cur = tmp
        return prev[lb]
    finally:
        free(prev)
        free(cur)
