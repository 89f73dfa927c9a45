# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the two-layer ReLU Q-network.

Same signatures and parameter layout as ``ril._kernels_py``. Inner helpers
take raw pointers (no memoryview refcounting per call); the public functions
validate shapes once and hand pointers down.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite, NAN
from libc.string cimport memset

cnp.import_array()

BACKEND = "cython"

ctypedef cnp.int64_t i64


cdef struct Net:
    const double* W1
    const double* b1
    const double* W2
    const double* b2
    Py_ssize_t d, H, A


cdef struct Grad:
    double* W1
    double* b1
    double* W2
    double* b2


cdef inline void _hidden(const Net* n, const double* x, double* h) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double s
    cdef const double* w
    for i in range(n.H):
        s = n.b1[i]
        w = n.W1 + i * n.d
        for k in range(n.d):
            s += w[k] * x[k]
        h[i] = s if s > 0.0 else 0.0


cdef inline double _out(const Net* n, const double* h, Py_ssize_t a) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = n.b2[a]
    cdef const double* w = n.W2 + a * n.H
    for i in range(n.H):
        s += w[i] * h[i]
    return s


cdef inline double _max_out(const Net* n, const double* h, Py_ssize_t* arg) noexcept nogil:
    cdef Py_ssize_t a
    cdef double best = _out(n, h, 0), v
    arg[0] = 0
    for a in range(1, n.A):
        v = _out(n, h, a)
        if v > best:
            best = v
            arg[0] = a
    return best


cdef Net _net(const double[:, ::1] W1, const double[::1] b1,
              const double[:, ::1] W2, const double[::1] b2) except *:
    cdef Net n
    if b1.shape[0] != W1.shape[0] or W2.shape[1] != W1.shape[0] or b2.shape[0] != W2.shape[0]:
        raise ValueError("inconsistent parameter shapes")
    n.W1 = &W1[0, 0]
    n.b1 = &b1[0]
    n.W2 = &W2[0, 0]
    n.b2 = &b2[0]
    n.d = W1.shape[1]
    n.H = W1.shape[0]
    n.A = W2.shape[0]
    return n


cdef double _accumulate(const Net* n, const double* X, const i64* actions,
                        const double* targets, const i64* idx, Py_ssize_t count,
                        Grad* g, double* h) noexcept nogil:
    """Adds the batch-mean squared-error gradient into ``g``; returns the loss."""
    cdef Py_ssize_t j, i, k, row, a
    cdef double err, gj, dz, loss = 0.0
    cdef const double* x
    cdef const double* w2
    cdef double* gw1
    cdef double* gw2
    for j in range(count):
        row = idx[j] if idx != NULL else j
        a = actions[row]
        x = X + row * n.d
        _hidden(n, x, h)
        err = _out(n, h, a) - targets[j]
        loss += err * err
        gj = 2.0 * err / count
        g.b2[a] += gj
        w2 = n.W2 + a * n.H
        gw2 = g.W2 + a * n.H
        for i in range(n.H):
            if h[i] > 0.0:
                gw2[i] += gj * h[i]
                dz = gj * w2[i]
                g.b1[i] += dz
                gw1 = g.W1 + i * n.d
                for k in range(n.d):
                    gw1[k] += dz * x[k]
    return loss / count


cdef double _apply(double* W1, double* b1, double* W2, double* b2, const Grad* g,
                   Py_ssize_t d, Py_ssize_t H, Py_ssize_t A, double loss, double lr) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    if not isfinite(loss):
        return loss
    for i in range(H * d):
        s += g.W1[i]
    for i in range(H):
        s += g.b1[i]
    for i in range(A * H):
        s += g.W2[i]
    for i in range(A):
        s += g.b2[i]
    if not isfinite(s):
        return NAN
    for i in range(H * d):
        W1[i] -= lr * g.W1[i]
    for i in range(H):
        b1[i] -= lr * g.b1[i]
    for i in range(A * H):
        W2[i] -= lr * g.W2[i]
    for i in range(A):
        b2[i] -= lr * g.b2[i]
    return loss


cdef class _Scratch:
    """Reusable gradient and activation buffers for one network shape."""
    cdef double[::1] buf
    cdef Py_ssize_t d, H, A

    def __init__(self, Py_ssize_t d, Py_ssize_t H, Py_ssize_t A):
        self.d, self.H, self.A = d, H, A
        self.buf = np.zeros(H * d + H + A * H + A + H + 1)

    cdef Grad grad(self) noexcept:
        cdef Grad g
        cdef double* p = &self.buf[0]
        memset(p, 0, (self.H * self.d + self.H + self.A * self.H + self.A) * sizeof(double))
        g.W1 = p
        g.b1 = p + self.H * self.d
        g.W2 = g.b1 + self.H
        g.b2 = g.W2 + self.A * self.H
        return g

    cdef double* hidden(self) noexcept:
        return &self.buf[0] + self.H * self.d + self.H + self.A * self.H + self.A


cdef dict _scratch_cache = {}


cdef _Scratch _scratch(Py_ssize_t d, Py_ssize_t H, Py_ssize_t A):
    key = (d, H, A)
    s = _scratch_cache.get(key)
    if s is None:
        s = _scratch_cache[key] = _Scratch(d, H, A)
    return <_Scratch> s


def q_forward(const double[:, ::1] W1, const double[::1] b1,
              const double[:, ::1] W2, const double[::1] b2, x):
    cdef Net n = _net(W1, b1, W2, b2)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    if xv.shape[0] != n.d:
        raise ValueError("state dimension mismatch")
    cdef _Scratch s = _scratch(n.d, n.H, n.A)
    out = np.empty(n.A)
    cdef double[::1] o = out
    cdef Py_ssize_t a
    _hidden(&n, &xv[0], s.hidden())
    for a in range(n.A):
        o[a] = _out(&n, s.hidden(), a)
    return out


def q_forward_batch(const double[:, ::1] W1, const double[::1] b1,
                    const double[:, ::1] W2, const double[::1] b2,
                    const double[:, ::1] X):
    cdef Net n = _net(W1, b1, W2, b2)
    if X.shape[1] != n.d:
        raise ValueError("state dimension mismatch")
    cdef _Scratch s = _scratch(n.d, n.H, n.A)
    cdef double* h = s.hidden()
    cdef Py_ssize_t j, a
    out = np.empty((X.shape[0], n.A))
    cdef double[:, ::1] o = out
    for j in range(X.shape[0]):
        _hidden(&n, &X[j, 0], h)
        for a in range(n.A):
            o[j, a] = _out(&n, h, a)
    return out


def greedy(const double[:, ::1] W1, const double[::1] b1,
           const double[:, ::1] W2, const double[::1] b2, const double[::1] x):
    cdef Net n = _net(W1, b1, W2, b2)
    if x.shape[0] != n.d:
        raise ValueError("state dimension mismatch")
    cdef _Scratch s = _scratch(n.d, n.H, n.A)
    cdef Py_ssize_t arg
    _hidden(&n, &x[0], s.hidden())
    cdef double best = _max_out(&n, s.hidden(), &arg)
    return int(arg), best


def loss_and_grad(const double[:, ::1] W1, const double[::1] b1,
                  const double[:, ::1] W2, const double[::1] b2,
                  const double[:, ::1] X, const i64[::1] actions, const double[::1] targets):
    cdef Net n = _net(W1, b1, W2, b2)
    if X.shape[0] != targets.shape[0] or actions.shape[0] != targets.shape[0]:
        raise ValueError("batch arrays differ in length")
    cdef _Scratch s = _scratch(n.d, n.H, n.A)
    cdef Grad g = s.grad()
    loss = _accumulate(&n, &X[0, 0], &actions[0], &targets[0], NULL, targets.shape[0], &g, s.hidden())
    gW1 = np.asarray(<double[:n.H * n.d]> g.W1).reshape(n.H, n.d).copy()
    gb1 = np.asarray(<double[:n.H]> g.b1).copy()
    gW2 = np.asarray(<double[:n.A * n.H]> g.W2).reshape(n.A, n.H).copy()
    gb2 = np.asarray(<double[:n.A]> g.b2).copy()
    return loss, gW1, gb1, gW2, gb2


def sgd_step(double[:, ::1] W1, double[::1] b1, double[:, ::1] W2, double[::1] b2,
             const double[:, ::1] X, const i64[::1] actions, const double[::1] targets,
             double lr):
    cdef Net n = _net(W1, b1, W2, b2)
    if X.shape[0] != targets.shape[0] or actions.shape[0] != targets.shape[0]:
        raise ValueError("batch arrays differ in length")
    cdef _Scratch s = _scratch(n.d, n.H, n.A)
    cdef Grad g = s.grad()
    cdef double loss = _accumulate(&n, &X[0, 0], &actions[0], &targets[0], NULL,
                                   targets.shape[0], &g, s.hidden())
    return _apply(&W1[0, 0], &b1[0], &W2[0, 0], &b2[0], &g, n.d, n.H, n.A, loss, lr)


def bellman_targets(const double[:, ::1] tW1, const double[::1] tb1,
                    const double[:, ::1] tW2, const double[::1] tb2,
                    const double[::1] R, const double[:, ::1] S2,
                    const unsigned char[::1] D, double discount):
    cdef Net t = _net(tW1, tb1, tW2, tb2)
    cdef _Scratch s = _scratch(t.d, t.H, t.A)
    cdef double* h = s.hidden()
    cdef Py_ssize_t j, arg
    out = np.empty(R.shape[0])
    cdef double[::1] y = out
    for j in range(R.shape[0]):
        if D[j]:
            y[j] = R[j]
        else:
            _hidden(&t, &S2[j, 0], h)
            y[j] = R[j] + discount * _max_out(&t, h, &arg)
    return out


def dqn_update(double[:, ::1] W1, double[::1] b1, double[:, ::1] W2, double[::1] b2,
               const double[:, ::1] tW1, const double[::1] tb1,
               const double[:, ::1] tW2, const double[::1] tb2,
               const double[:, ::1] S, const i64[::1] A, const double[::1] R,
               const double[:, ::1] S2, const unsigned char[::1] D,
               const i64[::1] idx, double discount, double lr):
    cdef Net n = _net(W1, b1, W2, b2)
    cdef Net t = _net(tW1, tb1, tW2, tb2)
    cdef Py_ssize_t count = idx.shape[0], j, row, arg
    cdef _Scratch s = _scratch(n.d, n.H, n.A)
    cdef double* h = s.hidden()
    cdef Grad g = s.grad()
    cdef double[::1] y = np.empty(count)
    cdef double loss
    with nogil:
        for j in range(count):
            row = idx[j]
            if D[row]:
                y[j] = R[row]
            else:
                _hidden(&t, &S2[row, 0], h)
                y[j] = R[row] + discount * _max_out(&t, h, &arg)
        loss = _accumulate(&n, &S[0, 0], &A[0], &y[0], &idx[0], count, &g, h)
        loss = _apply(&W1[0, 0], &b1[0], &W2[0, 0], &b2[0], &g, n.d, n.H, n.A, loss, lr)
    return loss
