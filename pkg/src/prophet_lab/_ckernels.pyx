# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the two hot loops. Signatures match ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def first_exceed(const double[:, :] values, const double[:, :] ties,
                 const double[:, :] thr_values, const double[:, :] thr_ties):
    cdef Py_ssize_t trials = values.shape[0]
    cdef Py_ssize_t n = values.shape[1]
    cdef Py_ssize_t k, i
    cdef double v, tv
    out = np.full(trials, -1, dtype=np.int64)
    cdef cnp.int64_t[:] stop = out
    with nogil:
        for k in range(trials):
            for i in range(n):
                v = values[k, i]
                tv = thr_values[k, i]
                if v > tv or (v == tv and ties[k, i] > thr_ties[k, i]):
                    stop[k] = i
                    break
    return out


def enumerate_outcomes(const double[:] w, const cnp.int64_t[:] origin,
                       const cnp.uint8_t[:] is_y, const cnp.int64_t[:, :] ranks,
                       cnp.int64_t start, cnp.int64_t stop):
    cdef Py_ssize_t size = w.shape[0]
    cdef Py_ssize_t orders = ranks.shape[0]
    cdef Py_ssize_t j, p, best_j
    cdef cnp.int64_t mask, best_rank, r
    cdef Py_ssize_t first_real, tpos
    cdef int heads
    cdef double prophet = 0.0
    cdef double adversary = 0.0
    gambler_arr = np.zeros(orders, dtype=np.float64)
    cdef double[:] gambler = gambler_arr
    with nogil:
        for mask in range(start, stop):
            first_real = -1
            tpos = -1
            for j in range(size):
                heads = (mask >> origin[j]) & 1
                if heads == is_y[j]:
                    if first_real < 0:
                        first_real = j
                elif tpos < 0:
                    tpos = j
                if first_real >= 0 and tpos >= 0:
                    break
            prophet += w[first_real]
            if tpos > 0:
                adversary += w[tpos - 1]
                for p in range(orders):
                    best_j = 0
                    best_rank = ranks[p, origin[0]]
                    for j in range(1, tpos):
                        r = ranks[p, origin[j]]
                        if r < best_rank:
                            best_rank = r
                            best_j = j
                    gambler[p] += w[best_j]
    return prophet, gambler_arr, adversary
