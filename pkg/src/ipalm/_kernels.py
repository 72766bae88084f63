"""Compiled inner loops for the randomized solvers.

Every row of the stacked operator is a scalar loss encoded as ``(kind, p1, p2)``
(see ``problem.ROW_*``) and every coordinate of ``g`` as ``(kind, w, s, r, c)``
(see ``prox.SCALAR_*``). Random indices are drawn in Python and passed in, so
results depend only on the caller's generator.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def row_derivative(kind, p1, p2, lam, beta, u):
    if kind == 0:
        return u - p1
    if kind == 1:
        v = lam + (u - p2) / beta
        if v > p1:
            return p1
        if v < -p1:
            return -p1
        return v
    if kind == 2:
        v = lam + (u - p2) / beta
        if v > 0.0:
            return 0.0
        if v < -p1:
            return -p1
        return v
    z = u + beta * lam
    if z < p1:
        z = p1
    elif z > p2:
        z = p2
    return lam + (u - z) / beta


@njit(cache=True)
def coord_prox(gk, gw, gs, gr, gc, anchor, beta, v, inv_t):
    """argmin_z g_i(z) + beta/2 (z - anchor)^2 + inv_t/2 (z - v)^2."""
    if gk == 0:
        q = gr + beta + inv_t
        m = (gr * gc + beta * anchor + inv_t * v) / q
        d = m - gs
        th = gw / q
        if d > th:
            return gs + d - th
        if d < -th:
            return gs + d + th
        return gs
    q = beta + inv_t
    m = (beta * anchor + inv_t * v) / q
    if m >= gs:
        return m
    if m <= gs - gw / q:
        return m + gw / q
    return gs


@njit(cache=True)
def _residual(indptr, indices, data, x, n_rows):
    """``A @ x`` from CSC arrays, accumulated column by column."""
    out = np.zeros(n_rows)
    for i in range(x.shape[0]):
        xi = x[i]
        if xi != 0.0:
            for q in range(indptr[i], indptr[i + 1]):
                out[indices[q]] += data[q] * xi
    return out


@njit(cache=True)
def approx_chunk(idx, epoch_len, n_rows,
                 c_ptr, c_idx, c_val,
                 rkind, rp1, rp2, lam, beta,
                 gk, gw, gs, gr, gc, anchor, v,
                 u, z, ru, rz, fstate, istate):
    """Run ``len(idx)`` serial APPROX iterations in place.

    ``fstate = [theta, theta_prev]``; ``istate = [k_in_epoch, since_refresh]``.
    The current output point is ``theta_prev**2 * u + z``.
    """
    n = u.shape[0]
    theta = fstate[0]
    theta_prev = fstate[1]
    k_ep = istate[0]
    since = istate[1]
    for k in range(idx.shape[0]):
        if k_ep == epoch_len:
            # restart from the current output point
            for j in range(n):
                z[j] = theta_prev * theta_prev * u[j] + z[j]
                u[j] = 0.0
            theta = 1.0 / n
            theta_prev = theta
            rz[:] = _residual(c_ptr, c_idx, c_val, z, n_rows)
            ru[:] = 0.0
            k_ep = 0
            since = 0
        i = idx[k]
        t2 = theta * theta
        grad = 0.0
        for q in range(c_ptr[i], c_ptr[i + 1]):
            r = c_idx[q]
            grad += c_val[q] * row_derivative(rkind[r], rp1[r], rp2[r], lam[r], beta,
                                              t2 * ru[r] + rz[r])
        inv_t = n * theta * v[i]
        zi = z[i]
        if inv_t > 0.0:
            target = zi - grad / inv_t
        else:
            target = zi
        znew = coord_prox(gk[i], gw[i], gs[i], gr[i], gc[i], anchor[i], beta, target, inv_t)
        dz = znew - zi
        if dz != 0.0:
            z[i] = znew
            du = -(1.0 - n * theta) / t2 * dz
            u[i] += du
            for q in range(c_ptr[i], c_ptr[i + 1]):
                r = c_idx[q]
                rz[r] += dz * c_val[q]
                ru[r] += du * c_val[q]
        theta_prev = theta
        theta = 0.5 * (np.sqrt(t2 * t2 + 4.0 * t2) - t2)
        k_ep += 1
        since += 1
        if since >= 10 * n:
            ru[:] = _residual(c_ptr, c_idx, c_val, u, n_rows)
            rz[:] = _residual(c_ptr, c_idx, c_val, z, n_rows)
            since = 0
    fstate[0] = theta
    fstate[1] = theta_prev
    istate[0] = k_ep
    istate[1] = since


@njit(cache=True)
def _refresh_snapshot(w, rw, gwt, r_ptr, r_idx, r_val, rkind, rp1, rp2, lam, beta):
    n_rows = rw.shape[0]
    gwt[:] = 0.0
    for r in range(n_rows):
        s = 0.0
        for q in range(r_ptr[r], r_ptr[r + 1]):
            s += r_val[q] * w[r_idx[q]]
        rw[r] = s
        d = row_derivative(rkind[r], rp1[r], rp2[r], lam[r], beta, s)
        if d != 0.0:
            for q in range(r_ptr[r], r_ptr[r + 1]):
                gwt[r_idx[q]] += r_val[q] * d


@njit(cache=True)
def katyusha_chunk(samples, coins, r_ptr, r_idx, r_val,
                   rkind, rp1, rp2, lam, beta, probs,
                   gk, gw, gs, gr, gc, anchor,
                   theta1, theta2, alpha, p_snap,
                   y, z, w, rw, gwt, x, g, stats):
    """Run ``samples.shape[0]`` loopless Katyusha iterations in place.

    ``stats[0]`` counts snapshot refreshes.
    """
    n = y.shape[0]
    tau = samples.shape[1]
    inv_alpha = 1.0 / alpha
    for k in range(samples.shape[0]):
        for i in range(n):
            x[i] = theta1 * z[i] + theta2 * w[i] + (1.0 - theta1 - theta2) * y[i]
            g[i] = gwt[i]
        for b in range(tau):
            r = samples[k, b]
            ux = 0.0
            for q in range(r_ptr[r], r_ptr[r + 1]):
                ux += r_val[q] * x[r_idx[q]]
            d = (row_derivative(rkind[r], rp1[r], rp2[r], lam[r], beta, ux)
                 - row_derivative(rkind[r], rp1[r], rp2[r], lam[r], beta, rw[r]))
            if d != 0.0:
                coef = d / (tau * probs[r])
                for q in range(r_ptr[r], r_ptr[r + 1]):
                    g[r_idx[q]] += coef * r_val[q]
        refresh = coins[k] < p_snap
        if refresh:
            for i in range(n):
                w[i] = y[i]
        for i in range(n):
            zi = z[i]
            znew = coord_prox(gk[i], gw[i], gs[i], gr[i], gc[i], anchor[i], beta,
                              zi - alpha * g[i], inv_alpha)
            y[i] = x[i] + theta1 * (znew - zi)
            z[i] = znew
        if refresh:
            _refresh_snapshot(w, rw, gwt, r_ptr, r_idx, r_val, rkind, rp1, rp2, lam, beta)
            stats[0] += 1
