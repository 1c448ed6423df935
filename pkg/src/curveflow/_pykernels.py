"""Pure-Python/numpy implementations of the hot kernels.

Every function here has a drop-in twin in the compiled ``_ckernels`` module
with the same signature and the same floating-point contract (results agree
to rounding). ``curveflow.kernels`` picks one at import time.
"""

import math

import numpy as np

EPS = 2.0 ** -52
MAX_QL_SWEEPS = 60

# phi vanishes to below double precision for r in (-PHI_CUTOFF, 0)
PHI_CUTOFF = 1e-3


def sym_eig(a):
    """Eigen-decomposition of a symmetric matrix.

    Householder reduction to tridiagonal form followed by implicit QL
    iterations. Returns ``(w, v, ok)`` with eigenvalues ``w`` ascending,
    eigenvectors in the columns of ``v`` and ``ok`` False if QL failed to
    converge.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    V = [list(map(float, row)) for row in a]
    d = [0.0] * n
    e = [0.0] * n
    if n == 1:
        return np.array([V[0][0]]), np.ones((1, 1)), True

    # tridiagonalize
    for j in range(n):
        d[j] = V[n - 1][j]
    for i in range(n - 1, 0, -1):
        scale = 0.0
        h = 0.0
        for k in range(i):
            scale += abs(d[k])
        if scale == 0.0:
            e[i] = d[i - 1]
            for j in range(i):
                d[j] = V[i - 1][j]
                V[i][j] = 0.0
                V[j][i] = 0.0
        else:
            for k in range(i):
                d[k] /= scale
                h += d[k] * d[k]
            f = d[i - 1]
            g = math.sqrt(h)
            if f > 0:
                g = -g
            e[i] = scale * g
            h -= f * g
            d[i - 1] = f - g
            for j in range(i):
                e[j] = 0.0
            for j in range(i):
                f = d[j]
                V[j][i] = f
                g = e[j] + V[j][j] * f
                for k in range(j + 1, i):
                    g += V[k][j] * d[k]
                    e[k] += V[k][j] * f
                e[j] = g
            f = 0.0
            for j in range(i):
                e[j] /= h
                f += e[j] * d[j]
            hh = f / (h + h)
            for j in range(i):
                e[j] -= hh * d[j]
            for j in range(i):
                f = d[j]
                g = e[j]
                for k in range(j, i):
                    V[k][j] -= f * e[k] + g * d[k]
                d[j] = V[i - 1][j]
                V[i][j] = 0.0
        d[i] = h

    for i in range(n - 1):
        V[n - 1][i] = V[i][i]
        V[i][i] = 1.0
        h = d[i + 1]
        if h != 0.0:
            for k in range(i + 1):
                d[k] = V[k][i + 1] / h
            for j in range(i + 1):
                g = 0.0
                for k in range(i + 1):
                    g += V[k][i + 1] * V[k][j]
                for k in range(i + 1):
                    V[k][j] -= g * d[k]
        for k in range(i + 1):
            V[k][i + 1] = 0.0
    for j in range(n):
        d[j] = V[n - 1][j]
        V[n - 1][j] = 0.0
    V[n - 1][n - 1] = 1.0
    e[0] = 0.0

    # implicit QL
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    f = 0.0
    tst1 = 0.0
    for l in range(n):
        tst1 = max(tst1, abs(d[l]) + abs(e[l]))
        m = l
        while m < n - 1:
            if abs(e[m]) <= EPS * tst1:
                break
            m += 1
        if m > l:
            sweeps = 0
            while True:
                sweeps += 1
                if sweeps > MAX_QL_SWEEPS:
                    return np.array(d), np.array(V), False
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = math.hypot(p, 1.0)
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h
                p = d[m]
                c = c2 = c3 = 1.0
                el1 = e[l + 1]
                s = s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = math.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    for k in range(n):
                        h = V[k][i + 1]
                        V[k][i + 1] = s * V[k][i] + c * h
                        V[k][i] = c * V[k][i] - s * h
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if not abs(e[l]) > EPS * tst1:
                    break
        d[l] += f
        e[l] = 0.0

    # selection sort, ascending
    for i in range(n - 1):
        k = i
        p = d[i]
        for j in range(i + 1, n):
            if d[j] < p:
                k = j
                p = d[j]
        if k != i:
            d[k] = d[i]
            d[i] = p
            for j in range(n):
                V[j][i], V[j][k] = V[j][k], V[j][i]
    return np.array(d), np.array(V), True


def phi_all(r):
    """Return (phi, phi', phi'') of the cutoff function at each entry of r."""
    r = np.asarray(r, dtype=np.float64)
    p0 = np.zeros_like(r)
    p1 = np.zeros_like(r)
    p2 = np.zeros_like(r)
    neg = r <= -PHI_CUTOFF
    if np.any(neg):
        rn = r[neg]
        r2 = rn * rn
        ex = np.exp(-1.0 / r2)
        p0[neg] = r2 * r2 * ex
        p1[neg] = (4.0 * r2 * rn + 2.0 * rn) * ex
        p2[neg] = (12.0 * r2 + 10.0 + 4.0 / r2) * ex
    return p0, p1, p2


def pinch_batch(z, fval, fgrad, fhess, subsets, inv_cm, order):
    """Preliminary pinching function and its derivatives for a batch.

    ``z`` is (N, n), ``subsets`` is (C, m+1) with 0-based indices. ``order``
    selects how much is computed: 0 value, 1 value+gradient, 2 all three.
    Arrays that are not requested come back zero-filled.
    """
    z = np.asarray(z, dtype=np.float64)
    N, n = z.shape
    subsets = np.asarray(subsets, dtype=np.intp)
    C = subsets.shape[0]
    inc = np.zeros((C, n))
    inc[np.arange(C)[:, None], subsets] = 1.0

    s = z @ inc.T  # (N, C) subset sums
    f = np.asarray(fval, dtype=np.float64)
    r = s / f[:, None] - inv_cm
    p0, p1, p2 = phi_all(r)
    g1 = f * p0.sum(axis=1)
    grad = np.zeros((N, n))
    hess = np.zeros((N, n, n))
    if order >= 1:
        coef = p0.sum(axis=1) - (p1 * s).sum(axis=1) / f
        grad = fgrad * coef[:, None] + p1 @ inc
        if order >= 2:
            w = inc[None, :, :] - (s / f[:, None])[:, :, None] * fgrad[:, None, :]
            hess = fhess * coef[:, None, None] + np.einsum(
                "nc,ncp,ncq->npq", p2 / f[:, None], w, w)
    return g1, grad, hess


def q_decomposed_batch(z, fgrad, fhess, ggrad, ghess, T):
    """Three-term gradient decomposition of Q for a batch of diagonal points.

    ``T`` is (N, n, n, n) totally symmetric. Returns an (N, 3) array holding
    the diagonal-block term, the pair term and the triple term; Q is their
    row sum. Entries of each z must be pairwise distinct.
    """
    z = np.asarray(z, dtype=np.float64)
    N, n = z.shape
    out = np.zeros((N, 3))
    # xi[N, k, p] = T_kpp
    xi = np.einsum("nkpp->nkp", T)
    mix = (ggrad[:, :, None, None] * fhess[:, None, :, :]
           - fgrad[:, :, None, None] * ghess[:, None, :, :])
    out[:, 0] = np.einsum("nkpq,nkp,nkq->n", mix, xi, xi)
    for p in range(n):
        for q in range(p):
            num = fgrad[:, p] * ggrad[:, q] - ggrad[:, p] * fgrad[:, q]
            t2 = T[:, p, q, q] ** 2 + T[:, q, p, p] ** 2
            out[:, 1] += 2.0 * num / (z[:, p] - z[:, q]) * t2
    for k in range(n):
        for p in range(k):
            for q in range(p):
                zk, zp, zq = z[:, k], z[:, p], z[:, q]
                zv0 = (zp - zq) / ((zk - zp) * (zk - zq))
                zv1 = (zk - zq) / ((zk - zp) * (zp - zq))
                zv2 = (zk - zp) / ((zp - zq) * (zk - zq))
                gk, gp, gq = ggrad[:, k], ggrad[:, p], ggrad[:, q]
                fk, fp, fq = fgrad[:, k], fgrad[:, p], fgrad[:, q]
                c0 = gp * fq - gq * fp
                c1 = gq * fk - gk * fq
                c2 = gk * fp - gp * fk
                out[:, 2] += 2.0 * (c0 * zv0 + c1 * zv1 + c2 * zv2) * T[:, k, p, q] ** 2
    return out


def profile_geometry(ue, h):
    """Centered-difference geometry of a radial profile.

    ``ue`` carries one ghost value on each side. Returns
    ``(u', u'', kappa_axis, kappa_sphere, sqrt(1+u'^2))`` on the interior.
    """
    ue = np.asarray(ue, dtype=np.float64)
    u = ue[1:-1]
    up = (ue[2:] - ue[:-2]) / (2.0 * h)
    upp = (ue[2:] - 2.0 * u + ue[:-2]) / (h * h)
    s = np.sqrt(1.0 + up * up)
    ka = -upp / (s * s * s)
    ks = 1.0 / (u * s)
    return up, upp, ka, ks, s
