"""Compiled inner loops.

At the problem sizes of interest (B ~ 32, U ~ 16, D ~ 84) a numpy
implementation spends most of its time in per-call overhead, which hides the
linear dependence of the cost on U, D and B.  These kernels run one detector
call without returning to the interpreter.
"""

from __future__ import annotations

import numpy as np
from numba import njit

SQRT_HALF = np.sqrt(0.5)
RANK_TOL = 1e-12
# reassociation lets LLVM vectorize the reductions; NaN/inf semantics are
# kept so the finiteness safeguards stay meaningful
_FAST = {"reassoc", "contract", "nsz"}


@njit(cache=True, fastmath=_FAST)
def _orthogonalize(basis, count, v):
    """Two-pass Gram-Schmidt of ``v`` against ``basis[:, :count]``; returns ||v||."""
    B = v.shape[0]
    for _ in range(2):
        for j in range(count):
            c = 0j
            for b in range(B):
                c += np.conj(basis[b, j]) * v[b]
            for b in range(B):
                v[b] -= c * basis[b, j]
    nrm = 0.0
    for b in range(B):
        nrm += v[b].real ** 2 + v[b].imag ** 2
    return np.sqrt(nrm)


@njit(cache=True, fastmath=_FAST)
def power_deflate(W, starts, fallback, iterations):
    """Sequential-deflation power method; ``W`` is overwritten."""
    B, N = W.shape
    count = starts.shape[1]
    basis = np.zeros((B, count), dtype=np.complex128)
    v = np.empty(B, dtype=np.complex128)
    z = np.empty(N, dtype=np.complex128)
    for i in range(count):
        v[:] = starts[:, i]
        for _ in range(iterations):
            # v <- W (W^H v)
            z[:] = 0j
            for b in range(B):
                vb = v[b]
                for n in range(N):
                    z[n] += np.conj(W[b, n]) * vb
            for b in range(B):
                c = 0j
                for n in range(N):
                    c += W[b, n] * z[n]
                v[b] = c
        nrm = _orthogonalize(basis, i, v)
        if not (np.isfinite(nrm) and nrm > RANK_TOL):
            # W exhausted: any direction orthogonal to the basis will do
            v[:] = fallback[:, i]
            nrm = _orthogonalize(basis, i, v)
            k = 0
            while not (np.isfinite(nrm) and nrm > RANK_TOL):
                v[:] = 0j
                v[k % B] = 1.0
                nrm = _orthogonalize(basis, i, v)
                k += 1
        for b in range(B):
            basis[b, i] = v[b] / nrm
        # W <- (I - u u^H) W
        z[:] = 0j
        for b in range(B):
            ub = np.conj(basis[b, i])
            for n in range(N):
                z[n] += ub * W[b, n]
        for b in range(B):
            ub = basis[b, i]
            for n in range(N):
                W[b, n] -= ub * z[n]
    return basis


@njit(cache=True, fastmath=_FAST)
def residual(Y, H, S, out):
    """``out <- Y - H S``."""
    B, U = H.shape
    D = S.shape[1]
    for b in range(B):
        for d in range(D):
            out[b, d] = Y[b, d]
        for u in range(U):
            h = H[b, u]
            for d in range(D):
                out[b, d] -= h * S[u, d]


@njit(cache=True, fastmath=_FAST)
def project_out(basis, R, out):
    """``out <- (I - basis basis^H) R``."""
    B, D = R.shape
    I = basis.shape[1]
    out[:, :] = R
    c = np.empty(D, dtype=np.complex128)
    for i in range(I):
        c[:] = 0j
        for b in range(B):
            q = np.conj(basis[b, i])
            for d in range(D):
                c[d] += q * R[b, d]
        for b in range(B):
            q = basis[b, i]
            for d in range(D):
                out[b, d] -= q * c[d]


@njit(cache=True, fastmath=_FAST)
def gradient(H, PR, out):
    """``out <- -2 H^H PR``."""
    B, U = H.shape
    D = PR.shape[1]
    out[:, :] = 0j
    for b in range(B):
        for u in range(U):
            h = -2.0 * np.conj(H[b, u])
            for d in range(D):
                out[u, d] += h * PR[b, d]


@njit(cache=True, fastmath=_FAST)
def bb1_step(S, S_prev, G, G_prev, tau, tau0):
    """Safeguarded BB1 stepsize ``||dS||^2 / Re<dS, dG>``."""
    ss = 0.0
    sy = 0.0
    for u in range(S.shape[0]):
        for d in range(S.shape[1]):
            ds = S[u, d] - S_prev[u, d]
            dg = G[u, d] - G_prev[u, d]
            ss += ds.real ** 2 + ds.imag ** 2
            sy += ds.real * dg.real + ds.imag * dg.imag
    if not sy > 0:
        return tau
    step = ss / sy
    if not (np.isfinite(step) and step > 0):
        return tau
    return min(max(step, 1e-3 * tau0), 1e3 * tau0)


@njit(cache=True, fastmath=_FAST)
def _sign_half(x):
    return SQRT_HALF if x >= 0 else -SQRT_HALF


@njit(cache=True, fastmath=_FAST)
def _clip_half(x):
    return min(max(x, -SQRT_HALF), SQRT_HALF)


@njit(cache=True, fastmath=_FAST)
def prox_step(S, G, tau, alpha):
    """``prox_box(S - tau G)`` entrywise, into a new array."""
    out = np.empty_like(S)
    scale = 1.0 / (1.0 - tau * alpha) if alpha * tau < 1.0 else 0.0
    for u in range(S.shape[0]):
        for d in range(S.shape[1]):
            z = S[u, d] - tau * G[u, d]
            if alpha * tau < 1.0:
                out[u, d] = _clip_half(z.real * scale) + 1j * _clip_half(z.imag * scale)
            else:
                out[u, d] = _sign_half(z.real) + 1j * _sign_half(z.imag)
    return out


@njit(cache=True, fastmath=_FAST)
def fbs_loop(H, Y, R_T, basis, starts, fallback, adapt, warm, power_iterations,
             t_max, alpha, tau0):
    """FBS with the box prior on ``||P (Y - H S)||^2``, ``P = I - basis basis^H``.

    With ``adapt`` the basis is re-estimated at the start of every iteration
    from ``[R_T, Y - H S]``; ``starts[t]`` (or the previous basis when
    ``warm``) seeds the power method.
    """
    B, U = H.shape
    D = Y.shape[1]
    I = basis.shape[1]
    NT = R_T.shape[1]
    S = np.zeros((U, D), dtype=np.complex128)
    S_prev = np.zeros((U, D), dtype=np.complex128)
    G = np.zeros((U, D), dtype=np.complex128)
    G_prev = np.zeros((U, D), dtype=np.complex128)
    E = np.empty((B, NT + D), dtype=np.complex128)
    R = E[:, NT:]
    PR = np.empty((B, D), dtype=np.complex128)
    obj = np.empty(t_max)
    steps = np.empty(t_max)
    tau = tau0
    for t in range(t_max):
        residual(Y, H, S, R)
        if adapt and I > 0:
            E[:, :NT] = R_T
            if warm and t > 0:
                start = basis.copy()
            else:
                start = starts[t]
            # deflation leaves (I - basis basis^H) [R_T, R] in E
            basis = power_deflate(E, start, fallback, power_iterations)
            P_R = R
        else:
            project_out(basis, R, PR)
            P_R = PR
        G_prev, G = G, G_prev
        gradient(H, P_R, G)
        val = 0.0
        for b in range(B):
            for d in range(D):
                val += P_R[b, d].real ** 2 + P_R[b, d].imag ** 2
        reg = 0.0
        for u in range(U):
            for d in range(D):
                reg += S[u, d].real ** 2 + S[u, d].imag ** 2
        obj[t] = val - alpha * reg
        if t > 0:
            tau = bb1_step(S, S_prev, G, G_prev, tau, tau0)
        steps[t] = tau
        S_prev = S
        S = prox_step(S, G, tau, alpha)
    return S, basis, obj, steps
