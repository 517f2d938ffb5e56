# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inference kernels.

Same contract as ``_ref``: batched layer arrays ``(B, n_l)``, float64,
C-contiguous, updated in place.  Matrix products go through BLAS dgemm;
everything else is plain C loops, so a whole T-step relaxation runs
without touching the interpreter.
"""

import numpy as np

from libc.math cimport tanh as c_tanh
from libc.stdlib cimport free, malloc
from scipy.linalg.cython_blas cimport dgemm

NAME = "cython"


cdef inline double act_f(int act, double v) nogil:
    if act == 0:
        return v
    elif act == 1:
        return v if v > 0.0 else 0.0
    return c_tanh(v)


cdef inline double act_fprime(int act, double v) nogil:
    cdef double t
    if act == 0:
        return 1.0
    elif act == 1:
        return 1.0 if v > 0.0 else 0.0
    t = c_tanh(v)
    return 1.0 - t * t


cdef void rm_gemm(bint ta, bint tb, int m, int n, int k, double alpha,
                  double* a, int lda, double* b, int ldb, double beta,
                  double* c, int ldc) nogil:
    # Row-major C[m,n] = alpha*op(A)@op(B) + beta*C, via column-major BLAS:
    # the column-major view of row-major C is C^T = op(B)^T @ op(A)^T, so
    # swap the operands and the m/n extents while keeping the trans flags.
    cdef char cta = b'T' if ta else b'N'
    cdef char ctb = b'T' if tb else b'N'
    dgemm(&ctb, &cta, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef struct Net:
    int L
    int B
    int* dims          # layer widths, length L+1
    double** th        # weight matrices, th[l] is (dims[l], dims[l+1])
    double* b          # memory vector, length dims[L]
    double** xs        # values
    double** mus       # predictions
    double** eps       # errors
    double** fx        # f(values), layers 1..L used


cdef void net_refresh(Net* net, int act) nogil:
    cdef int l, i, n, B = net.B, L = net.L
    cdef double* src
    cdef double* dst
    for l in range(1, L + 1):
        n = net.dims[l] * B
        src = net.xs[l]
        dst = net.fx[l]
        for i in range(n):
            dst[i] = act_f(act, src[i])
    for i in range(B):
        for l in range(net.dims[L]):
            net.mus[L][i * net.dims[L] + l] = net.b[l]
    for l in range(L - 1, -1, -1):
        # mus[l] = fx[l+1] @ th[l]^T
        rm_gemm(0, 1, B, net.dims[l], net.dims[l + 1], 1.0,
                net.fx[l + 1], net.dims[l + 1],
                net.th[l], net.dims[l + 1],
                0.0, net.mus[l], net.dims[l])
    for l in range(L + 1):
        n = net.dims[l] * B
        for i in range(n):
            net.eps[l][i] = net.xs[l][i] - net.mus[l][i]


cdef void net_relax(Net* net, int act, double* free_mask, double gamma,
                    int T, double* scratch) nogil:
    """T inference steps; scratch holds max(dims[1:]) * B doubles."""
    cdef int t, l, i, n, B = net.B, L = net.L
    cdef double* x
    cdef double* e
    for t in range(T):
        net_refresh(net, act)
        for l in range(1, L + 1):
            # scratch = eps[l-1] @ th[l-1]
            rm_gemm(0, 0, B, net.dims[l], net.dims[l - 1], 1.0,
                    net.eps[l - 1], net.dims[l - 1],
                    net.th[l - 1], net.dims[l],
                    0.0, scratch, net.dims[l])
            n = net.dims[l] * B
            x = net.xs[l]
            e = net.eps[l]
            for i in range(n):
                x[i] += gamma * (act_fprime(act, x[i]) * scratch[i] - e[i])
        n = net.dims[0] * B
        x = net.xs[0]
        e = net.eps[0]
        for i in range(n):
            x[i] -= gamma * free_mask[i] * e[i]
    net_refresh(net, act)


cdef void net_feed_backward(Net* net, int act) nogil:
    """xs[L] = b rows; xs[l] = th[l] f(xs[l+1]) downwards (sensory included)."""
    cdef int l, i, n, B = net.B, L = net.L
    for i in range(B):
        for l in range(net.dims[L]):
            net.xs[L][i * net.dims[L] + l] = net.b[l]
    for l in range(L - 1, -1, -1):
        n = net.dims[l + 1] * B
        for i in range(n):
            net.fx[l + 1][i] = act_f(act, net.xs[l + 1][i])
        rm_gemm(0, 1, B, net.dims[l], net.dims[l + 1], 1.0,
                net.fx[l + 1], net.dims[l + 1],
                net.th[l], net.dims[l + 1],
                0.0, net.xs[l], net.dims[l])


cdef void net_apply_updates(Net* net, int act, double alpha, double scale,
                            bint fx_fresh) nogil:
    """th[l] += (alpha/scale) eps[l]^T fx[l+1]; b += (alpha/scale) sum eps[L]."""
    cdef int l, i, j, n, B = net.B, L = net.L
    cdef double coeff = alpha / scale
    if not fx_fresh:
        for l in range(1, L + 1):
            n = net.dims[l] * B
            for i in range(n):
                net.fx[l][i] = act_f(act, net.xs[l][i])
    for l in range(L):
        rm_gemm(1, 0, net.dims[l], net.dims[l + 1], B, coeff,
                net.eps[l], net.dims[l],
                net.fx[l + 1], net.dims[l + 1],
                1.0, net.th[l], net.dims[l + 1])
    for i in range(B):
        for j in range(net.dims[L]):
            net.b[j] += coeff * net.eps[L][i * net.dims[L] + j]


cdef class _Workspace:
    """Owns the Net struct plus numpy buffers for one kernel invocation."""

    cdef Net net
    cdef list keep  # numpy arrays backing the raw pointers

    def __cinit__(self):
        self.net.dims = NULL
        self.net.th = NULL
        self.keep = []

    def __dealloc__(self):
        free(self.net.dims)
        free(self.net.th)  # th/xs/mus/eps/fx allocated in one block

    cdef setup(self, list thetas, double[::1] b, int B,
               list xs, list mus, list eps):
        cdef int L = len(thetas)
        cdef int l
        self.net.L = L
        self.net.B = B
        self.net.b = &b[0]
        self.net.dims = <int*> malloc((L + 1) * sizeof(int))
        self.net.th = <double**> malloc(5 * (L + 1) * sizeof(double*))
        self.net.xs = self.net.th + (L + 1)
        self.net.mus = self.net.xs + (L + 1)
        self.net.eps = self.net.mus + (L + 1)
        self.net.fx = self.net.eps + (L + 1)
        cdef double[:, ::1] mv
        cdef double[:, ::1] wv
        for l in range(L):
            wv = thetas[l]
            self.net.th[l] = &wv[0, 0]
        for l in range(L + 1):
            mv = xs[l]
            self.net.xs[l] = &mv[0, 0]
            self.net.dims[l] = mv.shape[1]
            mv = mus[l]
            self.net.mus[l] = &mv[0, 0]
            mv = eps[l]
            self.net.eps[l] = &mv[0, 0]
            fbuf = np.empty((B, self.net.dims[l]))
            self.keep.append(fbuf)
            mv = fbuf
            self.net.fx[l] = &mv[0, 0]


def _alloc_like(xs):
    return [np.empty_like(x) for x in xs]


def refresh(thetas, b, act, xs, mus, eps):
    """Recompute predictions and errors in place from the current values."""
    cdef _Workspace ws = _Workspace()
    ws.setup(thetas, b, xs[0].shape[0], xs, mus, eps)
    cdef int cact = act
    with nogil:
        net_refresh(&ws.net, cact)


def relax(thetas, b, act, xs, free_mask, gamma, T):
    """Run T inference steps in place on xs; returns fresh (mus, eps)."""
    mus = _alloc_like(xs)
    eps = _alloc_like(xs)
    cdef _Workspace ws = _Workspace()
    cdef int B = xs[0].shape[0]
    ws.setup(thetas, b, B, xs, mus, eps)
    free_mask = np.ascontiguousarray(
        np.broadcast_to(free_mask, (B, xs[0].shape[1])), dtype=np.float64
    )
    if not free_mask.flags.writeable:
        free_mask = free_mask.copy()
    cdef double[:, ::1] fm = free_mask
    cdef int widest = max(x.shape[1] for x in xs[1:])
    scratch_arr = np.empty(widest * B)
    cdef double[::1] scratch = scratch_arr
    cdef int cact = act, cT = T
    cdef double cgamma = gamma
    with nogil:
        net_relax(&ws.net, cact, &fm[0, 0], cgamma, cT, &scratch[0])
    return mus, eps


def energies(eps):
    """Per-sample energy: half the squared error summed over every layer."""
    total = np.zeros(eps[0].shape[0])
    for e in eps:
        total += np.einsum("ij,ij->i", e, e)
    return 0.5 * total


def feed_backward(thetas, b, act, batch_size):
    """Initial values for all layers from the model's own generation."""
    L = len(thetas)
    widths = [thetas[0].shape[0]] + [w.shape[1] for w in thetas]
    xs = [np.empty((batch_size, n)) for n in widths]
    mus = _alloc_like(xs)
    eps = _alloc_like(xs)
    cdef _Workspace ws = _Workspace()
    ws.setup(thetas, b, batch_size, xs, mus, eps)
    cdef int cact = act
    with nogil:
        net_feed_backward(&ws.net, cact)
    return xs


def apply_updates(thetas, b, act, xs, eps, alpha, scale=1.0):
    """Increment weights and memory from a relaxed state, in place."""
    mus = _alloc_like(xs)
    cdef _Workspace ws = _Workspace()
    ws.setup(thetas, b, xs[0].shape[0], xs, mus, eps)
    cdef int cact = act
    cdef double calpha = alpha, cscale = scale
    with nogil:
        net_apply_updates(&ws.net, cact, calpha, cscale, 0)


def train_epoch(thetas, b, act, data, T, gamma, alpha):
    """One sequential pass: relax then update, item by item.

    Returns the per-item energy at each item's relaxed state.
    """
    cdef int n_items = data.shape[0]
    cdef int d = data.shape[1]
    cdef int L = len(thetas)
    widths = [thetas[0].shape[0]] + [w.shape[1] for w in thetas]
    xs = [np.empty((1, n)) for n in widths]
    mus = _alloc_like(xs)
    eps = _alloc_like(xs)
    cdef _Workspace ws = _Workspace()
    ws.setup(thetas, b, 1, xs, mus, eps)
    free_arr = np.zeros(d)
    out_arr = np.empty(n_items)
    scratch_arr = np.empty(max(widths[1:]))
    cdef double[::1] free_mask = free_arr
    cdef double[::1] out = out_arr
    cdef double[::1] scratch = scratch_arr
    cdef double[:, ::1] dat = data
    cdef int cact = act, cT = T, i, l, j, n
    cdef double cgamma = gamma, calpha = alpha, acc
    with nogil:
        for i in range(n_items):
            net_feed_backward(&ws.net, cact)
            for j in range(d):
                ws.net.xs[0][j] = dat[i, j]
            net_relax(&ws.net, cact, &free_mask[0], cgamma, cT, &scratch[0])
            acc = 0.0
            for l in range(L + 1):
                n = ws.net.dims[l]
                for j in range(n):
                    acc += ws.net.eps[l][j] * ws.net.eps[l][j]
            out[i] = 0.5 * acc
            net_apply_updates(&ws.net, cact, calpha, 1.0, 1)
    return out_arr
