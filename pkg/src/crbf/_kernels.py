"""Compiled per-sample SGD pass; mirrors ``training.backward_and_update`` step for step."""

import numpy as np
from numba import njit
from numba.typed import List

from .network import V_MAX


@njit(cache=True)
def sgd_pass(Ws, bs, Gs, ss, X, D, order, rates, sigma_floor, Y_out):
    """Train in place over ``X[order]``; returns ``(floor_hits, bad_sample)``.

    ``bad_sample`` is -1 unless a non-finite value appeared, in which case the
    pass stops at that sample index.
    """
    L = len(Ws)
    ys = List()
    phis = List()
    vs = List()
    psis = List()
    for l in range(L):
        O, I = Ws[l].shape
        ys.append(np.zeros(O, dtype=np.complex128))
        phis.append(np.zeros(I))
        vs.append(np.zeros(I))
        psis.append(np.zeros(O, dtype=np.complex128))
    hits = 0

    for idx in range(order.shape[0]):
        n = order[idx]
        # forward
        for l in range(L):
            W, b, G, s = Ws[l], bs[l], Gs[l], ss[l]
            yin = X[n] if l == 0 else ys[l - 1]
            O, I = W.shape
            K = G.shape[1]
            v, phi, y = vs[l], phis[l], ys[l]
            for m in range(I):
                acc = 0.0
                for k in range(K):
                    dr = yin[k].real - G[m, k].real
                    di = yin[k].imag - G[m, k].imag
                    acc += dr * dr + di * di
                vm = acc / s[m]
                if vm > V_MAX:
                    vm = V_MAX
                v[m] = vm
                phi[m] = np.exp(-vm)
            for r in range(O):
                acc_c = b[r]
                for m in range(I):
                    acc_c += W[r, m] * phi[m]
                y[r] = acc_c
        yL = ys[L - 1]
        for r in range(yL.shape[0]):
            Y_out[n, r] = yL[r]
            if not np.isfinite(yL[r].real) or not np.isfinite(yL[r].imag):
                return hits, n

        # backward: psi of the last layer is the output error
        psi = psis[L - 1]
        for r in range(yL.shape[0]):
            psi[r] = D[n, r] - yL[r]
        for l in range(L - 1, -1, -1):
            W, b, G, s = Ws[l], bs[l], Gs[l], ss[l]
            yin = X[n] if l == 0 else ys[l - 1]
            O, I = W.shape
            K = G.shape[1]
            psi, phi, v = psis[l], phis[l], vs[l]
            delta = np.empty(I)
            for m in range(I):
                xi = 0.0
                for r in range(O):
                    xi += W[r, m].real * psi[r].real + W[r, m].imag * psi[r].imag
                delta[m] = -xi * phi[m] / s[m]
            # psi of the layer below needs this layer's pre-update centers
            if l > 0:
                psi_prev = psis[l - 1]
                for k in range(K):
                    acc_c = 0.0 + 0.0j
                    for m in range(I):
                        acc_c += delta[m] * (yin[k] - G[m, k])
                    psi_prev[k] = acc_c
            eta_w, eta_b, eta_g, eta_s = rates[l, 0], rates[l, 1], rates[l, 2], rates[l, 3]
            for r in range(O):
                for m in range(I):
                    W[r, m] += eta_w * psi[r] * phi[m]
                b[r] += eta_b * psi[r]
            for m in range(I):
                for k in range(K):
                    G[m, k] -= eta_g * delta[m] * (yin[k] - G[m, k])
                s[m] -= eta_s * delta[m] * v[m]
                if s[m] < sigma_floor:
                    s[m] = sigma_floor
                    hits += 1
                if not np.isfinite(s[m]):
                    return hits, n
    return hits, -1
