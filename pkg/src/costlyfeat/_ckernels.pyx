# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: single-state MLP forward, PUCT selection, edge backup."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, INFINITY
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


cdef void _affine(const double[:, ::1] W, const double[::1] b,
                  const double[::1] x, double[::1] out, bint relu) noexcept nogil:
    # W is row-major (m, n); as Fortran it is (n, m), so y = A^T x.
    cdef int m = W.shape[0]
    cdef int n = W.shape[1]
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b'T'
    cdef Py_ssize_t i
    dgemv(&trans, &n, &m, &one, <double*>&W[0, 0], &n, <double*>&x[0], &inc,
          &zero, &out[0], &inc)
    for i in range(m):
        out[i] += b[i]
        if relu and out[i] < 0.0:
            out[i] = 0.0


def masked_softmax(const double[::1] logits, legal):
    cdef const unsigned char[::1] lg = np.ascontiguousarray(legal, dtype=np.uint8)
    cdef Py_ssize_t n = logits.shape[0], i
    probs = np.zeros(n)
    cdef double[::1] pr = probs
    _softmax(logits, lg, pr)
    return probs


cdef void _softmax(const double[::1] logits, const unsigned char[::1] lg,
                   double[::1] pr) noexcept nogil:
    cdef Py_ssize_t n = logits.shape[0], i
    cdef double m = -INFINITY, s = 0.0
    for i in range(n):
        if lg[i] and logits[i] > m:
            m = logits[i]
    for i in range(n):
        if lg[i]:
            pr[i] = exp(logits[i] - m)
            s += pr[i]
        else:
            pr[i] = 0.0
    for i in range(n):
        pr[i] = pr[i] / s


def forward_single(const double[:, ::1] W1, const double[::1] b1,
                   const double[:, ::1] W2, const double[::1] b2,
                   const double[:, ::1] W3, const double[::1] b3,
                   const double[:, ::1] Wp, const double[::1] bp,
                   const double[:, ::1] Wv, const double[::1] bv,
                   const double[::1] x, legal):
    """Forward one state. Returns (probs, logits, value)."""
    cdef const unsigned char[::1] lg = np.ascontiguousarray(legal, dtype=np.uint8)
    cdef Py_ssize_t H = W1.shape[0], A = Wp.shape[0]
    h1_arr = np.empty(H)
    h2_arr = np.empty(H)
    logits_arr = np.empty(A)
    probs_arr = np.empty(A)
    v_arr = np.empty(1)
    cdef double[::1] h1 = h1_arr, h2 = h2_arr, lo = logits_arr, pr = probs_arr, v = v_arr
    with nogil:
        _affine(W1, b1, x, h1, True)
        _affine(W2, b2, h1, h2, True)
        _affine(W3, b3, h2, h1, True)
        _affine(Wp, bp, h1, lo, False)
        _affine(Wv, bv, h1, v, False)
        _softmax(lo, lg, pr)
    return probs_arr, logits_arr, v_arr[0]


def puct_select(const double[::1] Q, const cnp.int64_t[::1] N,
                const double[::1] P, legal, double c):
    cdef const unsigned char[::1] lg = np.ascontiguousarray(legal, dtype=np.uint8)
    cdef Py_ssize_t n = Q.shape[0], i, best = -1
    cdef long long total = 0
    cdef double score, best_score = -INFINITY, sqrt_total
    for i in range(n):
        if lg[i]:
            total += N[i]
    if total == 0:
        for i in range(n):
            if lg[i] and (best < 0 or P[i] > best_score):
                best = i
                best_score = P[i]
        return best
    sqrt_total = sqrt(<double>total)
    for i in range(n):
        if lg[i]:
            score = Q[i] + c * P[i] * sqrt_total / (N[i] + 1.0)
            if best < 0 or score > best_score:
                best = i
                best_score = score
    return best


def update_edge(double[::1] Q, cnp.int64_t[::1] N, Py_ssize_t a, double G):
    cdef cnp.int64_t n = N[a] + 1
    N[a] = n
    Q[a] = ((n - 1) * Q[a] + G) / n
