"""Conv1d / MaxPool1d inner loops.

Each kernel exists twice: a numba version written as explicit loops and a
pure-numpy version built on strided windows and BLAS. ``osrf._accel.BACKEND``
picks which one the public names bind to. Both accept batched float arrays
shaped ``(batch, channels, length)``.

Reductions inside the numba kernels always run in a fixed loop order and every
output element is owned by exactly one ``prange`` iteration, so results are
bit-reproducible for a given thread count.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .._accel import BACKEND, njit, prange

# ---------------------------------------------------------------- numpy path


def conv1d_forward_np(x, w, b):
    k = w.shape[2]
    win = sliding_window_view(x, k, axis=2)  # (B, C, L-k+1, k)
    out = np.einsum("bclk,ock->bol", win, w, optimize=True)
    out += b[None, :, None]
    return out


def conv1d_backward_np(gout, x, w):
    k = w.shape[2]
    win = sliding_window_view(x, k, axis=2)
    gw = np.einsum("bol,bclk->ock", gout, win, optimize=True)
    gb = gout.sum(axis=(0, 2))
    # full correlation of gout with the flipped kernel
    pad = np.pad(gout, ((0, 0), (0, 0), (k - 1, k - 1)))
    gwin = sliding_window_view(pad, k, axis=2)  # (B, O, L, k)
    gx = np.einsum("bolk,ock->bcl", gwin, w[:, :, ::-1], optimize=True)
    return gx, gw, gb


def maxpool1d_forward_np(x, pool, stride):
    n_out = (x.shape[2] - pool) // stride + 1
    win = sliding_window_view(x, pool, axis=2)[:, :, ::stride][:, :, :n_out]
    arg = win.argmax(axis=3)  # first occurrence wins ties
    idx = (np.arange(n_out) * stride)[None, None, :] + arg
    out = np.take_along_axis(x, idx, axis=2)
    return out, idx.astype(np.int64)


def maxpool1d_backward_np(gout, idx, in_len):
    bsz, ch, _ = gout.shape
    gx = np.zeros((bsz, ch, in_len), dtype=gout.dtype)
    if idx.shape[2] == 0:
        return gx
    # overlapping windows can route several outputs to the same input
    bi = np.arange(bsz)[:, None, None]
    ci = np.arange(ch)[None, :, None]
    np.add.at(gx, (bi, ci, idx), gout)
    return gx


# ---------------------------------------------------------------- numba path


@njit(cache=True, parallel=True)
def conv1d_forward_nb(x, w, b):
    bsz, cin, n = x.shape
    cout, _, k = w.shape
    m = n - k + 1
    out = np.empty((bsz, cout, m), dtype=x.dtype)
    for bo in prange(bsz * cout):
        bi = bo // cout
        o = bo % cout
        row = out[bi, o]
        row[:] = b[o]
        for c in range(cin):
            xr = x[bi, c]
            for j in range(k):
                wv = w[o, c, j]
                for i in range(m):
                    row[i] += wv * xr[i + j]
    return out


# reassociation lets LLVM vectorize the dot products; the order is still fixed
# per build, so repeated runs stay bit-identical
@njit(cache=True, parallel=True, fastmath={"reassoc", "contract"})
def _conv1d_grad_w_nb(gout, x, k):
    bsz, cout, m = gout.shape
    cin = x.shape[1]
    gw = np.zeros((cout, cin, k), dtype=x.dtype)
    for oc in prange(cout * cin):
        o = oc // cin
        c = oc % cin
        for bi in range(bsz):
            g = gout[bi, o]
            xr = x[bi, c]
            for j in range(k):
                acc = 0.0
                for i in range(m):
                    acc += g[i] * xr[i + j]
                gw[o, c, j] += acc
    return gw


@njit(cache=True, parallel=True)
def _conv1d_grad_x_nb(gout, w, n):
    bsz, cout, m = gout.shape
    cin, k = w.shape[1], w.shape[2]
    gx = np.zeros((bsz, cin, n), dtype=gout.dtype)
    for bc in prange(bsz * cin):
        bi = bc // cin
        c = bc % cin
        row = gx[bi, c]
        for o in range(cout):
            g = gout[bi, o]
            for j in range(k):
                wv = w[o, c, j]
                for i in range(m):
                    row[i + j] += wv * g[i]
    return gx


def conv1d_backward_nb(gout, x, w):
    gw = _conv1d_grad_w_nb(gout, x, w.shape[2])
    gx = _conv1d_grad_x_nb(gout, w, x.shape[2])
    gb = gout.sum(axis=(0, 2))
    return gx, gw, gb


@njit(cache=True, parallel=True)
def maxpool1d_forward_nb(x, pool, stride):
    bsz, ch, n = x.shape
    n_out = (n - pool) // stride + 1
    out = np.empty((bsz, ch, n_out), dtype=x.dtype)
    idx = np.empty((bsz, ch, n_out), dtype=np.int64)
    for bc in prange(bsz * ch):
        bi = bc // ch
        c = bc % ch
        xr = x[bi, c]
        for t in range(n_out):
            s = t * stride
            best = xr[s]
            arg = s
            for j in range(s + 1, s + pool):
                if xr[j] > best:
                    best = xr[j]
                    arg = j
            out[bi, c, t] = best
            idx[bi, c, t] = arg
    return out, idx


@njit(cache=True, parallel=True)
def _maxpool1d_backward_nb(gout, idx, in_len):
    bsz, ch, n_out = gout.shape
    gx = np.zeros((bsz, ch, in_len), dtype=gout.dtype)
    for bc in prange(bsz * ch):
        bi = bc // ch
        c = bc % ch
        for t in range(n_out):
            gx[bi, c, idx[bi, c, t]] += gout[bi, c, t]
    return gx


def maxpool1d_backward_nb(gout, idx, in_len):
    return _maxpool1d_backward_nb(gout, idx, int(in_len))


if BACKEND == "numba":
    conv1d_forward = conv1d_forward_nb
    conv1d_backward = conv1d_backward_nb
    maxpool1d_forward = maxpool1d_forward_nb
    maxpool1d_backward = maxpool1d_backward_nb
else:
    conv1d_forward = conv1d_forward_np
    conv1d_backward = conv1d_backward_np
    maxpool1d_forward = maxpool1d_forward_np
    maxpool1d_backward = maxpool1d_backward_np
