"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and in-place semantics; used when the extension is not
built or when ``PRIVPCA_PURE_PYTHON`` is set.
"""
import math

import numpy as np


def oja_rank1(x, etas, w):
    for t in range(x.shape[0]):
        xt = x[t]
        w += etas[t] * (xt * float(xt @ w))
        nrm = math.sqrt(float(w @ w))
        if nrm == 0.0:
            return t
        w /= nrm
    return -1


def oja_dense(a, etas, w, work):
    for t in range(a.shape[0]):
        np.dot(a[t], w, out=work)
        w += etas[t] * work
        nrm = math.sqrt(float(w @ w))
        if nrm == 0.0:
            return t
        w /= nrm
    return -1


def private_oja_rank1(x, etas, w, beta, noise_coef, z):
    clipped = 0
    for t in range(x.shape[0]):
        xt = x[t]
        g = xt * float(xt @ w)
        gnorm = math.sqrt(float(g @ g))
        if gnorm > beta:
            g *= beta / gnorm
            clipped += 1
        w += etas[t] * g + etas[t] * noise_coef * z[t]
        nrm = math.sqrt(float(w @ w))
        if nrm == 0.0:
            return t, clipped
        w /= nrm
    return -1, clipped


def private_oja_dense(a, etas, w, beta, noise_coef, z, work):
    clipped = 0
    for t in range(a.shape[0]):
        g = np.dot(a[t], w, out=work)
        gnorm = math.sqrt(float(g @ g))
        if gnorm > beta:
            g *= beta / gnorm
            clipped += 1
        w += etas[t] * g + etas[t] * noise_coef * z[t]
        nrm = math.sqrt(float(w @ w))
        if nrm == 0.0:
            return t, clipped
        w /= nrm
    return -1, clipped
