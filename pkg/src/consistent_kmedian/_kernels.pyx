# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. ``_fallback.py`` mirrors this module in pure Python."""

from libc.stdlib cimport malloc, realloc, free

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _sift_up(double* h, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t parent
    cdef double v = h[i]
    while i > 0:
        parent = (i - 1) >> 1
        if h[parent] >= v:
            break
        h[i] = h[parent]
        i = parent
    h[i] = v


cdef inline void _sift_down(double* h, Py_ssize_t n, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t child
    cdef double v = h[i]
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and h[child + 1] > h[child]:
            child += 1
        if h[child] <= v:
            break
        h[i] = h[child]
        i = child
    h[i] = v


cdef class SiteHeaps:
    """Per-site max-heaps of the distances counted towards each natural weight.

    A site's weight is the size of its heap; the heap holds the smallest
    distances from the site to arrived points whose sum stays within 2B.
    """

    cdef double** heaps
    cdef Py_ssize_t* caps
    cdef long long* w
    cdef double* sums
    cdef Py_ssize_t n_sites
    cdef Py_ssize_t site_cap
    cdef double limit

    def __cinit__(self, double two_b, double tol):
        self.limit = two_b + tol
        self.n_sites = 0
        self.site_cap = 16
        self.heaps = <double**> malloc(self.site_cap * sizeof(double*))
        self.caps = <Py_ssize_t*> malloc(self.site_cap * sizeof(Py_ssize_t))
        self.w = <long long*> malloc(self.site_cap * sizeof(long long))
        self.sums = <double*> malloc(self.site_cap * sizeof(double))
        if not self.heaps or not self.caps or not self.w or not self.sums:
            raise MemoryError()

    def __dealloc__(self):
        cdef Py_ssize_t s
        if self.heaps:
            for s in range(self.n_sites):
                free(self.heaps[s])
            free(self.heaps)
        free(self.caps)
        free(self.w)
        free(self.sums)

    def __len__(self):
        return self.n_sites

    cdef int _push(self, Py_ssize_t s, double d) except -1:
        cdef Py_ssize_t n = self.w[s]
        cdef double* grown
        if n == self.caps[s]:
            grown = <double*> realloc(self.heaps[s], 2 * self.caps[s] * sizeof(double))
            if not grown:
                raise MemoryError()
            self.heaps[s] = grown
            self.caps[s] *= 2
        self.heaps[s][n] = d
        _sift_up(self.heaps[s], n)
        self.w[s] = n + 1
        self.sums[s] += d
        return 0

    def new_site(self, double[::1] dists, long long[::1] counts):
        """Register a site given its distances and multiplicities for every site
        (itself included, at distance 0)."""
        cdef Py_ssize_t s, j, m = dists.shape[0]
        cdef long long c, take
        cdef double d
        if self.n_sites == self.site_cap:
            self.site_cap *= 2
            self.heaps = <double**> realloc(self.heaps, self.site_cap * sizeof(double*))
            self.caps = <Py_ssize_t*> realloc(self.caps, self.site_cap * sizeof(Py_ssize_t))
            self.w = <long long*> realloc(self.w, self.site_cap * sizeof(long long))
            self.sums = <double*> realloc(self.sums, self.site_cap * sizeof(double))
            if not self.heaps or not self.caps or not self.w or not self.sums:
                raise MemoryError()
        s = self.n_sites
        self.caps[s] = 8
        self.heaps[s] = <double*> malloc(8 * sizeof(double))
        if not self.heaps[s]:
            raise MemoryError()
        self.w[s] = 0
        self.sums[s] = 0.0
        self.n_sites += 1
        order = np.argsort(np.asarray(dists), kind="stable")
        cdef cnp.intp_t[::1] idx = order
        for j in range(m):
            d = dists[idx[j]]
            c = counts[idx[j]]
            take = 0
            while take < c and self.sums[s] + d <= self.limit:
                self._push(s, d)
                take += 1
            if take < c:
                break
        return s

    def arrive(self, double[::1] dcol):
        """One new point lands at distance ``dcol[s]`` from each site ``s``."""
        cdef Py_ssize_t s, u = dcol.shape[0]
        cdef double d, top
        if u > self.n_sites:
            raise ValueError("more distances than sites")
        for s in range(u):
            d = dcol[s]
            if self.sums[s] + d <= self.limit:
                self._push(s, d)
            elif self.w[s] > 0:
                top = self.heaps[s][0]
                if d < top:
                    self.heaps[s][0] = d
                    _sift_down(self.heaps[s], self.w[s], 0)
                    self.sums[s] += d - top

    def weight(self, Py_ssize_t s):
        if s < 0 or s >= self.n_sites:
            raise IndexError(s)
        return self.w[s]

    def weights(self):
        out = np.empty(self.n_sites, dtype=np.int64)
        cdef long long[::1] o = out
        cdef Py_ssize_t s
        for s in range(self.n_sites):
            o[s] = self.w[s]
        return out


def first_separated_pair(double[:, ::1] dist, long long[::1] w, cnp.intp_t[::1] cand,
                         double threshold):
    """Lexicographically first (a, b), a before b in ``cand``, with
    min(w[a], w[b]) * dist[a, b] >= threshold. Returns (-1, -1) if none."""
    cdef Py_ssize_t i, j, m = cand.shape[0]
    cdef cnp.intp_t a, b
    cdef long long wa, wmin
    for i in range(m):
        a = cand[i]
        wa = w[a]
        for j in range(i + 1, m):
            b = cand[j]
            wmin = wa if wa < w[b] else w[b]
            if wmin * dist[a, b] >= threshold:
                return a, b
    return -1, -1


def exact_kmedian(double[:, ::1] dist, double[::1] mult, Py_ssize_t k):
    """Minimum-cost k-subset by lexicographic enumeration.

    ``dist`` is m x m over candidate sites, ``mult`` their multiplicities.
    Returns (cost, tuple of indices); the first subset in lexicographic order
    wins ties.
    """
    cdef Py_ssize_t m = dist.shape[0]
    cdef Py_ssize_t depth, p, i
    cdef double total, best = float("inf")
    if k <= 0 or m == 0:
        return 0.0 if m == 0 else float("inf"), ()
    if k >= m:
        return 0.0, tuple(range(m))
    mins_arr = np.empty((k + 1, m), dtype=np.float64)
    cdef double[:, ::1] mins = mins_arr
    mins_arr[0, :] = np.inf
    combo_arr = np.empty(k, dtype=np.intp)
    best_arr = np.empty(k, dtype=np.intp)
    cdef cnp.intp_t[::1] combo = combo_arr
    cdef cnp.intp_t[::1] best_combo = best_arr
    cdef double d
    depth = 0
    combo[0] = -1
    while depth >= 0:
        combo[depth] += 1
        if combo[depth] > m - (k - depth):
            depth -= 1
            continue
        i = combo[depth]
        for p in range(m):
            d = dist[p, i]
            mins[depth + 1, p] = d if d < mins[depth, p] else mins[depth, p]
        if depth == k - 1:
            total = 0.0
            for p in range(m):
                total += mult[p] * mins[k, p]
            if total < best:
                best = total
                for p in range(k):
                    best_combo[p] = combo[p]
        else:
            depth += 1
            combo[depth] = combo[depth - 1]
    return best, tuple(int(best_combo[p]) for p in range(k))
