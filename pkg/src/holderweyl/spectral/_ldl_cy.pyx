# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Up-looking sparse LDL^T (elimination-tree based) reduced to an inertia count.

Input is the upper triangle of a symmetric matrix in CSC form (``Ap``,
``Ai``, ``Ax``; row indices within a column need not be sorted).  The
factorisation is of ``A - shift * I`` with no pivoting, so the symmetric
ordering must already be applied.  Mirrors ``_ldl_py`` operation for
operation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdint cimport int64_t

cnp.import_array()


def symbolic(const int64_t[::1] Ap, const int64_t[::1] Ai):
    """Elimination tree and column pointers of L.

    Returns ``(Lp, parent)``; ``Lp[n]`` is the number of strictly lower
    entries of L.
    """
    cdef Py_ssize_t n = Ap.shape[0] - 1
    cdef int64_t[::1] parent = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] flag = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] lnz = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] Lp = np.zeros(n + 1, dtype=np.int64)
    cdef Py_ssize_t k, p
    cdef int64_t i
    with nogil:
        for k in range(n):
            parent[k] = -1
            flag[k] = k
            for p in range(Ap[k], Ap[k + 1]):
                i = Ai[p]
                if i < k:
                    while flag[i] != k:
                        if parent[i] == -1:
                            parent[i] = k
                        lnz[i] += 1
                        flag[i] = k
                        i = parent[i]
        for k in range(n):
            Lp[k + 1] = Lp[k] + lnz[k]
    return np.asarray(Lp), np.asarray(parent)


def numeric_inertia(const int64_t[::1] Ap, const int64_t[::1] Ai, const double[::1] Ax,
                    const int64_t[::1] Lp, const int64_t[::1] parent,
                    double shift, double tol):
    """Factor ``A - shift I`` and count negative pivots.

    Returns ``(n_negative, tiny_index, min_abs_pivot)``.  Stops at the first
    pivot with ``|d| <= tol`` and reports its index; ``tiny_index`` is -1
    when the factorisation completed.
    """
    cdef Py_ssize_t n = Ap.shape[0] - 1
    cdef int64_t nnz = Lp[n]
    cdef int64_t[::1] Li = np.empty(max(nnz, 1), dtype=np.int64)
    cdef double[::1] Lx = np.empty(max(nnz, 1), dtype=np.float64)
    cdef double[::1] D = np.empty(max(n, 1), dtype=np.float64)
    cdef double[::1] Y = np.zeros(max(n, 1), dtype=np.float64)
    cdef int64_t[::1] pattern = np.empty(max(n, 1), dtype=np.int64)
    cdef int64_t[::1] flag = np.empty(max(n, 1), dtype=np.int64)
    cdef int64_t[::1] lnz = np.zeros(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t k, p, top, length
    cdef int64_t i, p2, q
    cdef double yi, l_ki, d
    cdef int64_t n_neg = 0
    cdef int64_t tiny = -1
    cdef double min_piv = np.inf
    with nogil:
        for k in range(n):
            top = n
            flag[k] = k
            for p in range(Ap[k], Ap[k + 1]):
                i = Ai[p]
                if i <= k:
                    Y[i] += Ax[p]
                    length = 0
                    while flag[i] != k:
                        pattern[length] = i
                        length += 1
                        flag[i] = k
                        i = parent[i]
                    while length > 0:
                        top -= 1
                        length -= 1
                        pattern[top] = pattern[length]
            d = Y[k] - shift
            Y[k] = 0.0
            while top < n:
                i = pattern[top]
                top += 1
                yi = Y[i]
                Y[i] = 0.0
                p2 = Lp[i] + lnz[i]
                for q in range(Lp[i], p2):
                    Y[Li[q]] -= Lx[q] * yi
                l_ki = yi / D[i]
                d -= l_ki * yi
                Li[p2] = k
                Lx[p2] = l_ki
                lnz[i] += 1
            D[k] = d
            if fabs(d) < min_piv:
                min_piv = fabs(d)
            if fabs(d) <= tol:
                tiny = k
                break
            if d < 0:
                n_neg += 1
    return int(n_neg), int(tiny), float(min_piv)
