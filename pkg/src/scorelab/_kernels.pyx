# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled MLP kernels: BLAS matmuls with fused bias/ReLU/truncation loops.

Contract-identical to ``_kernels_py`` (see that module for shapes); the
matmuls go through dgemm, the elementwise stages are fused single passes, so
the hot training/sampling path avoids numpy's intermediate temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef void _linear(double[:, ::1] h, double[:, ::1] a, double[::1] b,
                  double[:, ::1] out) noexcept:
    # out (N, o) = h (N, i) @ a.T (i, o) + b
    cdef int n = h.shape[0], i = h.shape[1], o = a.shape[0]
    cdef double one = 1.0, zero = 0.0
    cdef char tA = b'T', tB = b'N'
    if n == 0:
        return
    dgemm(&tA, &tB, &o, &n, &i, &one, &a[0, 0], &i, &h[0, 0], &i, &zero,
          &out[0, 0], &o)
    cdef Py_ssize_t r, c
    for r in range(n):
        for c in range(o):
            out[r, c] += b[c]


cdef void _relu_inplace(double[:, ::1] z) noexcept:
    cdef Py_ssize_t r, c
    for r in range(z.shape[0]):
        for c in range(z.shape[1]):
            if z[r, c] < 0.0:
                z[r, c] = 0.0


def forward(list As, list bs, double[:, ::1] xt, double[::1] rho):
    cdef int n_layers = len(As)
    cdef int batch = xt.shape[0]
    h_arr = np.asarray(xt)
    cdef int k
    for k in range(n_layers - 1):
        z_arr = np.empty((batch, (<object>As[k]).shape[0]))
        _linear(h_arr, As[k], bs[k], z_arr)
        _relu_inplace(z_arr)
        h_arr = z_arr
    out_arr = np.empty((batch, (<object>As[n_layers - 1]).shape[0]))
    _linear(h_arr, As[n_layers - 1], bs[n_layers - 1], out_arr)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, c
    cdef double lim
    for r in range(batch):
        lim = rho[r]
        for c in range(out.shape[1]):
            if out[r, c] > lim:
                out[r, c] = lim
            elif out[r, c] < -lim:
                out[r, c] = -lim
    return out_arr


def loss_grad(list As, list bs, double[:, ::1] xt, double[::1] rho,
              double[:, ::1] target, double[::1] weights):
    cdef int n_layers = len(As)
    cdef int batch = xt.shape[0]
    cdef int k
    cdef Py_ssize_t r, c
    cdef double one = 1.0, zero = 0.0
    cdef char tN = b'N', tT = b'T'

    hs = [np.asarray(xt)]
    zs = []
    h_arr = np.asarray(xt)
    for k in range(n_layers - 1):
        z_arr = np.empty((batch, (<object>As[k]).shape[0]))
        _linear(h_arr, As[k], bs[k], z_arr)
        zs.append(z_arr.copy())
        _relu_inplace(z_arr)
        hs.append(z_arr)
        h_arr = z_arr
    raw_arr = np.empty((batch, (<object>As[n_layers - 1]).shape[0]))
    _linear(h_arr, As[n_layers - 1], bs[n_layers - 1], raw_arr)

    # fused: residual of the truncated output, loss, and masked dOut
    cdef double[:, ::1] raw = raw_arr
    d_arr = np.empty_like(raw_arr)
    cdef double[:, ::1] dmv = d_arr
    cdef double lim, w, val, res, loss = 0.0
    cdef double scale = 2.0 / batch
    # boundary |raw| == rho counts as outside the clip (zero gradient),
    # matching the numpy path's strict-inside mask
    for r in range(batch):
        lim = rho[r]
        w = weights[r]
        for c in range(raw.shape[1]):
            val = raw[r, c]
            if val >= lim:
                res = lim - target[r, c]
                dmv[r, c] = 0.0
            elif val <= -lim:
                res = -lim - target[r, c]
                dmv[r, c] = 0.0
            else:
                res = val - target[r, c]
                dmv[r, c] = scale * w * res
            loss += w * res * res
    loss /= batch

    gA = [None] * n_layers
    gb = [None] * n_layers
    cdef double[:, ::1] d = d_arr
    cdef double[:, ::1] hk, amv, ga
    cdef double[:, ::1] dh
    cdef int n_in, n_out
    for k in range(n_layers - 1, -1, -1):
        hk = hs[k]
        n_in = hk.shape[1]
        n_out = d.shape[1]
        ga_arr = np.empty(((<object>As[k]).shape[0], n_in))
        ga = ga_arr
        # gA (o, i) = d.T (o, N) @ h (N, i): gA_f (i,o) = h_f 'N' x d_f 'T'
        dgemm(&tN, &tT, &n_in, &n_out, &batch, &one, &hk[0, 0], &n_in,
              &d[0, 0], &n_out, &zero, &ga[0, 0], &n_in)
        gA[k] = ga_arr
        gb[k] = np.asarray(d).sum(axis=0)
        if k > 0:
            amv = As[k]
            dh_arr = np.empty((batch, n_in))
            dh = dh_arr
            # dh (N, i) = d (N, o) @ A (o, i): dh_f (i,N) = A_f 'N' x d_f 'N'
            dgemm(&tN, &tN, &n_in, &batch, &n_out, &one, &amv[0, 0], &n_in,
                  &d[0, 0], &n_out, &zero, &dh[0, 0], &n_in)
            zk = zs[k - 1]
            _mask_relu(dh, zk)
            d = dh
    return loss, gA, gb


cdef void _mask_relu(double[:, ::1] dh, double[:, ::1] z) noexcept:
    cdef Py_ssize_t r, c
    for r in range(dh.shape[0]):
        for c in range(dh.shape[1]):
            if z[r, c] <= 0.0:
                dh[r, c] = 0.0
