# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops; same signatures as ``_kernels_py``.

Matrices are C-contiguous complex128 and the inner loops work on raw
pointers with explicit real/imaginary arithmetic, which avoids the NaN-aware
complex multiply the C runtime would otherwise call per entry.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, expm1, sqrt
from libc.string cimport memset

cnp.import_array()

cdef double SERIES_THRESHOLD = 1e-8


cdef inline void _gamma(double x, double y, double* out) noexcept nogil:
    """gamma(x + iy) = (e^z - 1)/z written to out[0], out[1]."""
    cdef double s, er, ei, d
    if sqrt(x * x + y * y) < SERIES_THRESHOLD:
        # 1 + z/2 + z^2/6
        out[0] = 1.0 + 0.5 * x + (x * x - y * y) / 6.0
        out[1] = 0.5 * y + x * y / 3.0
        return
    s = sin(0.5 * y)
    er = expm1(x) * cos(y) - 2.0 * s * s
    ei = exp(x) * sin(y)
    d = x * x + y * y
    out[0] = (er * x + ei * y) / d
    out[1] = (ei * x - er * y) / d


cdef void _gamma_into(const double* lam, Py_ssize_t n, double* out) noexcept nogil:
    """out[r, s] = gamma(lam[s] - lam[r]) for one spectrum (interleaved complex)."""
    cdef Py_ssize_t r, s, o
    for r in range(n):
        for s in range(n):
            o = 2 * (r * n + s)
            if r == s:
                out[o] = 1.0
                out[o + 1] = 0.0
            else:
                _gamma(lam[2 * s] - lam[2 * r], lam[2 * s + 1] - lam[2 * r + 1], out + o)


cdef void _matmul(const double* a, const double* b, double* c, Py_ssize_t n) noexcept nogil:
    """c = a @ b for n x n interleaved complex matrices."""
    cdef Py_ssize_t i, j, l
    cdef double ar, ai, br, bi
    cdef double* crow
    cdef const double* brow
    memset(c, 0, 2 * n * n * sizeof(double))
    for i in range(n):
        crow = c + 2 * i * n
        for l in range(n):
            ar = a[2 * (i * n + l)]
            ai = a[2 * (i * n + l) + 1]
            brow = b + 2 * l * n
            for j in range(n):
                br = brow[2 * j]
                bi = brow[2 * j + 1]
                crow[2 * j] += ar * br - ai * bi
                crow[2 * j + 1] += ar * bi + ai * br


cdef void _adjoint_matmul(const double* a, const double* b, double* c, Py_ssize_t n) noexcept nogil:
    """c = a^H @ b for n x n interleaved complex matrices."""
    cdef Py_ssize_t i, j, l
    cdef double ar, ai, br, bi
    cdef double* crow
    cdef const double* brow
    memset(c, 0, 2 * n * n * sizeof(double))
    for l in range(n):
        brow = b + 2 * l * n
        for i in range(n):
            ar = a[2 * (l * n + i)]
            ai = -a[2 * (l * n + i) + 1]
            crow = c + 2 * i * n
            for j in range(n):
                br = brow[2 * j]
                bi = brow[2 * j + 1]
                crow[2 * j] += ar * br - ai * bi
                crow[2 * j + 1] += ar * bi + ai * br


cdef inline double* _ptr(cnp.ndarray arr):
    return <double*> cnp.PyArray_DATA(arr)


def gamma_batch(lam_in):
    cdef cnp.ndarray lam = np.ascontiguousarray(lam_in, dtype=np.complex128)
    cdef Py_ssize_t k = lam.shape[0], n = lam.shape[1], i
    cdef cnp.ndarray out = np.empty((k, n, n), dtype=np.complex128)
    cdef double* pl = _ptr(lam)
    cdef double* po = _ptr(out)
    with nogil:
        for i in range(k):
            _gamma_into(pl + 2 * i * n, n, po + 2 * i * n * n)
    return out


def cumulative_products(steps_in):
    cdef cnp.ndarray steps = np.ascontiguousarray(steps_in, dtype=np.complex128)
    cdef Py_ssize_t s = steps.shape[0], n = steps.shape[1], i
    cdef cnp.ndarray out = np.empty((s + 1, n, n), dtype=np.complex128)
    out[0] = np.eye(n)
    cdef double* ps = _ptr(steps)
    cdef double* po = _ptr(out)
    cdef Py_ssize_t nn = 2 * n * n
    with nogil:
        for i in range(s):
            _matmul(ps + i * nn, po + i * nn, po + (i + 1) * nn, n)
    return out


def sandwich(x_in, m_in):
    cdef cnp.ndarray x = np.ascontiguousarray(x_in, dtype=np.complex128)
    cdef cnp.ndarray m = np.ascontiguousarray(m_in, dtype=np.complex128)
    cdef Py_ssize_t k = x.shape[0], n = x.shape[1], i
    cdef cnp.ndarray out = np.empty((k, n, n), dtype=np.complex128)
    cdef cnp.ndarray tmp = np.empty((n, n), dtype=np.complex128)
    cdef double* px = _ptr(x)
    cdef double* pm = _ptr(m)
    cdef double* po = _ptr(out)
    cdef double* pt = _ptr(tmp)
    cdef Py_ssize_t nn = 2 * n * n
    with nogil:
        for i in range(k):
            _matmul(pm + i * nn, px + i * nn, pt, n)
            _adjoint_matmul(px + i * nn, pt, po + i * nn, n)
    return out


def pwc_generators(q_in, energies_in, controls_in, x_in, double h):
    cdef cnp.ndarray q = np.ascontiguousarray(q_in, dtype=np.complex128)
    cdef cnp.ndarray energies = np.ascontiguousarray(energies_in, dtype=np.float64)
    cdef cnp.ndarray controls = np.ascontiguousarray(controls_in, dtype=np.complex128)
    cdef cnp.ndarray x = np.ascontiguousarray(x_in, dtype=np.complex128)
    cdef Py_ssize_t nr = controls.shape[0], k = q.shape[0], n = q.shape[1]
    cdef Py_ssize_t r, i, a, nn = 2 * n * n
    cdef cnp.ndarray out = np.empty((nr, k, n, n), dtype=np.complex128)
    cdef cnp.ndarray work = np.empty(4 * nn + 2 * n, dtype=np.float64)
    cdef double* pq = _ptr(q)
    cdef double* pe = <double*> cnp.PyArray_DATA(energies)
    cdef double* pc = _ptr(controls)
    cdef double* px = _ptr(x)
    cdef double* po = _ptr(out)
    cdef double* g = <double*> cnp.PyArray_DATA(work)
    cdef double* t1 = g + nn
    cdef double* t2 = t1 + nn
    cdef double* lam = t2 + nn
    cdef double gr, gi, tr, ti
    with nogil:
        for i in range(k):
            for a in range(n):
                lam[2 * a] = 0.0
                lam[2 * a + 1] = -h * pe[i * n + a]
            _gamma_into(lam, n, g)
            for r in range(nr):
                _matmul(pc + r * nn, pq + i * nn, t1, n)
                _adjoint_matmul(pq + i * nn, t1, t2, n)
                # t2 = (-i h) Gamma * t2
                for a in range(n * n):
                    gr = g[2 * a]
                    gi = g[2 * a + 1]
                    tr = t2[2 * a] * gr - t2[2 * a + 1] * gi
                    ti = t2[2 * a] * gi + t2[2 * a + 1] * gr
                    t2[2 * a] = h * ti
                    t2[2 * a + 1] = -h * tr
                _matmul(t2, px + i * nn, t1, n)
                _adjoint_matmul(px + i * nn, t1, po + (r * k + i) * nn, n)
    return out
