# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled dense-layer kernels.

Matrix products go through BLAS dgemm (row-major buffers handled with the
usual transpose bookkeeping); activations and the Adam update are fused
single-pass loops. Semantics match ``fsgan._kernels.pure`` exactly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, pow, sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "native"

cdef double LOGISTIC_LO = 1e-12
cdef double LOGISTIC_HI = 1.0 - 1e-12


cdef inline void _gemm(char ta, char tb, int m, int n, int k,
                       double* a, int lda, double* b, int ldb,
                       double beta, double* c, int ldc) noexcept nogil:
    cdef double alpha = 1.0
    dgemm(&ta, &tb, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc)


def affine(double[:, ::1] x, double[:, ::1] w, double[::1] b):
    """y = x @ w.T + b with x:(B,in), w:(out,in)."""
    cdef Py_ssize_t rows = x.shape[0], din = x.shape[1], dout = w.shape[0]
    out = np.empty((rows, dout), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t i, j
    with nogil:
        # Row-major y = x @ w.T  <=>  col-major y^T = w^T^T @ x^T.
        _gemm(b'T', b'N', <int>dout, <int>rows, <int>din,
              &w[0, 0], <int>din, &x[0, 0], <int>din, 0.0, &y[0, 0], <int>dout)
        for i in range(rows):
            for j in range(dout):
                y[i, j] += b[j]
    return out


def affine_backward(double[:, ::1] x, double[:, ::1] w, double[:, ::1] gy):
    cdef Py_ssize_t rows = x.shape[0], din = x.shape[1], dout = w.shape[0]
    gx_arr = np.empty((rows, din), dtype=np.float64)
    gw_arr = np.empty((dout, din), dtype=np.float64)
    gb_arr = np.zeros(dout, dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t i, j
    with nogil:
        # gx = gy @ w
        _gemm(b'N', b'N', <int>din, <int>rows, <int>dout,
              &w[0, 0], <int>din, &gy[0, 0], <int>dout, 0.0, &gx[0, 0], <int>din)
        # gw = gy.T @ x
        _gemm(b'N', b'T', <int>din, <int>dout, <int>rows,
              &x[0, 0], <int>din, &gy[0, 0], <int>dout, 0.0, &gw[0, 0], <int>din)
        for i in range(rows):
            for j in range(dout):
                gb[j] += gy[i, j]
    return gx_arr, gw_arr, gb_arr


def leaky_relu(double[:, ::1] z, double alpha):
    cdef Py_ssize_t rows = z.shape[0], cols = z.shape[1]
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] a = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(rows):
            for j in range(cols):
                a[i, j] = z[i, j] if z[i, j] >= 0.0 else alpha * z[i, j]
    return out


def leaky_relu_backward(double[:, ::1] z, double[:, ::1] ga, double alpha):
    cdef Py_ssize_t rows = z.shape[0], cols = z.shape[1]
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] gz = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(rows):
            for j in range(cols):
                gz[i, j] = ga[i, j] if z[i, j] >= 0.0 else alpha * ga[i, j]
    return out


def logistic(double[:, ::1] z):
    cdef Py_ssize_t rows = z.shape[0], cols = z.shape[1]
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] a = out
    cdef Py_ssize_t i, j
    cdef double v, e
    with nogil:
        for i in range(rows):
            for j in range(cols):
                v = z[i, j]
                if v >= 0.0:
                    v = 1.0 / (1.0 + exp(-v))
                else:
                    e = exp(v)
                    v = e / (1.0 + e)
                if v < LOGISTIC_LO:
                    v = LOGISTIC_LO
                elif v > LOGISTIC_HI:
                    v = LOGISTIC_HI
                a[i, j] = v
    return out


def logistic_backward(double[:, ::1] a, double[:, ::1] ga):
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1]
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] gz = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(rows):
            for j in range(cols):
                gz[i, j] = ga[i, j] * a[i, j] * (1.0 - a[i, j])
    return out


def softmax(double[:, ::1] z):
    cdef Py_ssize_t rows = z.shape[0], cols = z.shape[1]
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] p = out
    cdef Py_ssize_t i, j
    cdef double mx, s
    with nogil:
        for i in range(rows):
            mx = z[i, 0]
            for j in range(1, cols):
                if z[i, j] > mx:
                    mx = z[i, j]
            s = 0.0
            for j in range(cols):
                p[i, j] = exp(z[i, j] - mx)
                s += p[i, j]
            for j in range(cols):
                p[i, j] /= s
    return out


def softmax_backward(double[:, ::1] p, double[:, ::1] gp):
    cdef Py_ssize_t rows = p.shape[0], cols = p.shape[1]
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] gz = out
    cdef Py_ssize_t i, j
    cdef double dot
    with nogil:
        for i in range(rows):
            dot = 0.0
            for j in range(cols):
                dot += gp[i, j] * p[i, j]
            for j in range(cols):
                gz[i, j] = p[i, j] * (gp[i, j] - dot)
    return out


def adam_update(double[::1] param, double[::1] grad, double[::1] m,
                double[::1] v, long long t, double lr, double beta1,
                double beta2, double eps):
    cdef Py_ssize_t n = param.shape[0]
    cdef double c1 = 1.0 - pow(beta1, <double>t)
    cdef double c2 = 1.0 - pow(beta2, <double>t)
    cdef double mhat, vhat
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
            mhat = m[i] / c1
            vhat = v[i] / c2
            param[i] -= lr * mhat / (sqrt(vhat) + eps)
