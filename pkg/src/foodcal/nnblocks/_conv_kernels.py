"""Hot kernels for 2D cross-correlation: forward, weight grad, input grad.

All kernels take the pre-padded input; padding and bias handling live in
the ops layer. Loop variants compile with numba; the NumPy fallbacks use
strided windows and einsum.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

from foodcal import backend


def _fwd_loops(xp, wt, stride, out):
    # weight-stationary accumulation: the inner loop runs over contiguous
    # output columns (unit stride when stride == 1), so it vectorizes;
    # ``out`` must arrive zero-filled
    n, c_out, oh, ow = out.shape
    c_in, kh, kw = wt.shape[1], wt.shape[2], wt.shape[3]
    for b in range(n):
        for o in range(c_out):
            for i in range(c_in):
                for ky in range(kh):
                    for kx in range(kw):
                        wv = wt[o, i, ky, kx]
                        if stride == 1:
                            for oy in range(oh):
                                orow = out[b, o, oy]
                                xrow = xp[b, i, oy + ky]
                                for ox in range(ow):
                                    orow[ox] += wv * xrow[ox + kx]
                        else:
                            for oy in range(oh):
                                orow = out[b, o, oy]
                                xrow = xp[b, i, oy * stride + ky]
                                for ox in range(ow):
                                    orow[ox] += wv * xrow[ox * stride + kx]


def _grad_w_loops(xp, gy, stride, gw):
    n, c_out, oh, ow = gy.shape
    c_in, kh, kw = gw.shape[1], gw.shape[2], gw.shape[3]
    for o in range(c_out):
        for i in range(c_in):
            for ky in range(kh):
                for kx in range(kw):
                    acc = 0.0
                    for b in range(n):
                        for oy in range(oh):
                            for ox in range(ow):
                                acc += gy[b, o, oy, ox] * xp[b, i, oy * stride + ky, ox * stride + kx]
                    gw[o, i, ky, kx] = acc


def _grad_x_loops(gy, wt, stride, gxp):
    n, c_out, oh, ow = gy.shape
    c_in, kh, kw = wt.shape[1], wt.shape[2], wt.shape[3]
    for b in range(n):
        for o in range(c_out):
            for i in range(c_in):
                for ky in range(kh):
                    for kx in range(kw):
                        wv = wt[o, i, ky, kx]
                        for oy in range(oh):
                            for ox in range(ow):
                                gxp[b, i, oy * stride + ky, ox * stride + kx] += wv * gy[b, o, oy, ox]


_fwd_numba = backend.compile_kernel(_fwd_loops)
_grad_w_numba = backend.compile_kernel(_grad_w_loops)
_grad_x_numba = backend.compile_kernel(_grad_x_loops)


def _windows(xp, oh, ow, kh, kw, stride):
    n, c, _, _ = xp.shape
    sn, sc, sy, sx = xp.strides
    return as_strided(
        xp, (n, c, oh, ow, kh, kw), (sn, sc, sy * stride, sx * stride, sy, sx), writeable=False
    )


def fwd_numpy(xp, wt, stride, out):
    _, _, oh, ow = out.shape
    kh, kw = wt.shape[2], wt.shape[3]
    win = _windows(xp, oh, ow, kh, kw, stride)
    np.einsum("nihwyx,oiyx->nohw", win, wt, out=out, optimize=True)


def grad_w_numpy(xp, gy, stride, gw):
    _, _, oh, ow = gy.shape
    kh, kw = gw.shape[2], gw.shape[3]
    win = _windows(xp, oh, ow, kh, kw, stride)
    np.einsum("nihwyx,nohw->oiyx", win, gy, out=gw, optimize=True)


def grad_x_numpy(gy, wt, stride, gxp):
    _, _, oh, ow = gy.shape
    kh, kw = wt.shape[2], wt.shape[3]
    for ky in range(kh):
        for kx in range(kw):
            patch = np.einsum("nohw,oi->nihw", gy, wt[:, :, ky, kx])
            gxp[:, :, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride] += patch


conv_fwd = backend.pick(_fwd_numba, fwd_numpy)
conv_grad_w = backend.pick(_grad_w_numba, grad_w_numpy)
conv_grad_x = backend.pick(_grad_x_numba, grad_x_numpy)


def fwd_numba(xp, wt, stride, out):
    _fwd_numba(xp, wt, stride, out)


def grad_w_numba(xp, gy, stride, gw):
    _grad_w_numba(xp, gy, stride, gw)


def grad_x_numba(gy, wt, stride, gxp):
    _grad_x_numba(gy, wt, stride, gxp)
