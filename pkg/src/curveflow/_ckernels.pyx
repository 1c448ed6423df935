# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``.

Same signatures, same results up to rounding. Loops release the GIL so
batches can be split across threads.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, exp, hypot

cnp.import_array()

cdef double EPS = 2.0 ** -52
cdef int MAX_QL_SWEEPS = 60
cdef double PHI_CUTOFF = 1e-3


cdef int _tred2_tql2(double[:, ::1] V, double[::1] d, double[::1] e) noexcept nogil:
    cdef Py_ssize_t n = V.shape[0]
    cdef Py_ssize_t i, j, k, l, m
    cdef double scale, h, f, g, hh, tst1, p, r, dl1, c, c2, c3, el1, s, s2
    cdef int sweeps

    for j in range(n):
        d[j] = V[n - 1, j]
    for i in range(n - 1, 0, -1):
        scale = 0.0
        h = 0.0
        for k in range(i):
            scale += fabs(d[k])
        if scale == 0.0:
            e[i] = d[i - 1]
            for j in range(i):
                d[j] = V[i - 1, j]
                V[i, j] = 0.0
                V[j, i] = 0.0
        else:
            for k in range(i):
                d[k] /= scale
                h += d[k] * d[k]
            f = d[i - 1]
            g = sqrt(h)
            if f > 0:
                g = -g
            e[i] = scale * g
            h -= f * g
            d[i - 1] = f - g
            for j in range(i):
                e[j] = 0.0
            for j in range(i):
                f = d[j]
                V[j, i] = f
                g = e[j] + V[j, j] * f
                for k in range(j + 1, i):
                    g += V[k, j] * d[k]
                    e[k] += V[k, j] * f
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
                    V[k, j] -= f * e[k] + g * d[k]
                d[j] = V[i - 1, j]
                V[i, j] = 0.0
        d[i] = h

    for i in range(n - 1):
        V[n - 1, i] = V[i, i]
        V[i, i] = 1.0
        h = d[i + 1]
        if h != 0.0:
            for k in range(i + 1):
                d[k] = V[k, i + 1] / h
            for j in range(i + 1):
                g = 0.0
                for k in range(i + 1):
                    g += V[k, i + 1] * V[k, j]
                for k in range(i + 1):
                    V[k, j] -= g * d[k]
        for k in range(i + 1):
            V[k, i + 1] = 0.0
    for j in range(n):
        d[j] = V[n - 1, j]
        V[n - 1, j] = 0.0
    V[n - 1, n - 1] = 1.0
    e[0] = 0.0

    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    f = 0.0
    tst1 = 0.0
    for l in range(n):
        if fabs(d[l]) + fabs(e[l]) > tst1:
            tst1 = fabs(d[l]) + fabs(e[l])
        m = l
        while m < n - 1:
            if fabs(e[m]) <= EPS * tst1:
                break
            m += 1
        if m > l:
            sweeps = 0
            while True:
                sweeps += 1
                if sweeps > MAX_QL_SWEEPS:
                    return 0
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = hypot(p, 1.0)
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
                c = 1.0
                c2 = 1.0
                c3 = 1.0
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                i = m - 1
                while i >= l:
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    for k in range(n):
                        h = V[k, i + 1]
                        V[k, i + 1] = s * V[k, i] + c * h
                        V[k, i] = c * V[k, i] - s * h
                    i -= 1
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if not fabs(e[l]) > EPS * tst1:
                    break
        d[l] = d[l] + f
        e[l] = 0.0

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
                h = V[j, i]
                V[j, i] = V[j, k]
                V[j, k] = h
    return 1


def sym_eig(a):
    A = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A.shape[0]
    if n == 1:
        return A[0].copy(), np.ones((1, 1)), True
    d = np.zeros(n)
    e = np.zeros(n)
    cdef double[:, ::1] Vv = A
    cdef double[::1] dv = d
    cdef double[::1] ev = e
    cdef int ok
    with nogil:
        ok = _tred2_tql2(Vv, dv, ev)
    return d, A, bool(ok)


cdef inline void _phi3(double r, double* p0, double* p1, double* p2) noexcept nogil:
    cdef double r2, ex
    if r <= -PHI_CUTOFF:
        r2 = r * r
        ex = exp(-1.0 / r2)
        p0[0] = r2 * r2 * ex
        p1[0] = (4.0 * r2 * r + 2.0 * r) * ex
        p2[0] = (12.0 * r2 + 10.0 + 4.0 / r2) * ex
    else:
        p0[0] = 0.0
        p1[0] = 0.0
        p2[0] = 0.0


def phi_all(r):
    r = np.asarray(r, dtype=np.float64)
    flat = np.ascontiguousarray(r.ravel())
    cdef double[::1] rv = flat
    out = np.zeros((3, flat.shape[0]))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i
    for i in range(flat.shape[0]):
        _phi3(rv[i], &ov[0, i], &ov[1, i], &ov[2, i])
    return out[0].reshape(r.shape), out[1].reshape(r.shape), out[2].reshape(r.shape)


def pinch_batch(z, fval, fgrad, fhess, subsets, double inv_cm, int order):
    cdef double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[::1] fv = np.ascontiguousarray(fval, dtype=np.float64)
    cdef double[:, ::1] dfv = np.ascontiguousarray(fgrad, dtype=np.float64)
    cdef double[:, :, ::1] ddfv = np.ascontiguousarray(fhess, dtype=np.float64)
    cdef cnp.intp_t[:, ::1] sv = np.ascontiguousarray(subsets, dtype=np.intp)
    cdef Py_ssize_t N = zv.shape[0]
    cdef Py_ssize_t n = zv.shape[1]
    cdef Py_ssize_t C = sv.shape[0]
    cdef Py_ssize_t msz = sv.shape[1]
    g1 = np.zeros(N)
    grad = np.zeros((N, n))
    hess = np.zeros((N, n, n))
    cdef double[::1] g1v = g1
    cdef double[:, ::1] gv = grad
    cdef double[:, :, ::1] hv = hess
    w_buf = np.zeros(n)
    cdef double[::1] w = w_buf
    cdef Py_ssize_t a, c, i, p, q
    cdef double f, s, r, p0, p1, p2, sum0, sum1s, coef, sf
    with nogil:
        for a in range(N):
            f = fv[a]
            sum0 = 0.0
            sum1s = 0.0
            # first pass: value and coefficient of f-derivative terms
            for c in range(C):
                s = 0.0
                for i in range(msz):
                    s = s + zv[a, sv[c, i]]
                r = s / f - inv_cm
                _phi3(r, &p0, &p1, &p2)
                if p0 == 0.0 and p1 == 0.0 and p2 == 0.0:
                    continue
                sum0 = sum0 + p0
                sum1s = sum1s + p1 * s
                if order >= 1:
                    for i in range(msz):
                        gv[a, sv[c, i]] += p1
                if order >= 2:
                    sf = s / f
                    for p in range(n):
                        w[p] = -sf * dfv[a, p]
                    for i in range(msz):
                        w[sv[c, i]] += 1.0
                    for p in range(n):
                        for q in range(n):
                            hv[a, p, q] += p2 / f * w[p] * w[q]
            g1v[a] = f * sum0
            if order >= 1:
                coef = sum0 - sum1s / f
                for p in range(n):
                    gv[a, p] += dfv[a, p] * coef
                if order >= 2:
                    for p in range(n):
                        for q in range(n):
                            hv[a, p, q] += ddfv[a, p, q] * coef
    return g1, grad, hess


def q_decomposed_batch(z, fgrad, fhess, ggrad, ghess, T):
    cdef double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[:, ::1] fg = np.ascontiguousarray(fgrad, dtype=np.float64)
    cdef double[:, :, ::1] fh = np.ascontiguousarray(fhess, dtype=np.float64)
    cdef double[:, ::1] gg = np.ascontiguousarray(ggrad, dtype=np.float64)
    cdef double[:, :, ::1] gh = np.ascontiguousarray(ghess, dtype=np.float64)
    cdef double[:, :, :, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef Py_ssize_t N = zv.shape[0]
    cdef Py_ssize_t n = zv.shape[1]
    out = np.zeros((N, 3))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t a, k, p, q
    cdef double t0, t1, t2, num, zk, zp, zq, c0, c1, c2
    with nogil:
        for a in range(N):
            t0 = 0.0
            for k in range(n):
                for p in range(n):
                    for q in range(n):
                        t0 = t0 + (gg[a, k] * fh[a, p, q] - fg[a, k] * gh[a, p, q]) \
                            * Tv[a, k, p, p] * Tv[a, k, q, q]
            t1 = 0.0
            for p in range(n):
                for q in range(p):
                    num = fg[a, p] * gg[a, q] - gg[a, p] * fg[a, q]
                    t1 = t1 + 2.0 * num / (zv[a, p] - zv[a, q]) * (
                        Tv[a, p, q, q] * Tv[a, p, q, q] + Tv[a, q, p, p] * Tv[a, q, p, p])
            t2 = 0.0
            for k in range(n):
                for p in range(k):
                    for q in range(p):
                        zk = zv[a, k]
                        zp = zv[a, p]
                        zq = zv[a, q]
                        c0 = gg[a, p] * fg[a, q] - gg[a, q] * fg[a, p]
                        c1 = gg[a, q] * fg[a, k] - gg[a, k] * fg[a, q]
                        c2 = gg[a, k] * fg[a, p] - gg[a, p] * fg[a, k]
                        t2 = t2 + 2.0 * (
                            c0 * (zp - zq) / ((zk - zp) * (zk - zq))
                            + c1 * (zk - zq) / ((zk - zp) * (zp - zq))
                            + c2 * (zk - zp) / ((zp - zq) * (zk - zq))
                        ) * Tv[a, k, p, q] * Tv[a, k, p, q]
            ov[a, 0] = t0
            ov[a, 1] = t1
            ov[a, 2] = t2
    return out


def profile_geometry(ue, double h):
    cdef double[::1] uv = np.ascontiguousarray(ue, dtype=np.float64)
    cdef Py_ssize_t N = uv.shape[0] - 2
    up = np.empty(N)
    upp = np.empty(N)
    ka = np.empty(N)
    ks = np.empty(N)
    sq = np.empty(N)
    cdef double[::1] a0 = up, a1 = upp, a2 = ka, a3 = ks, a4 = sq
    cdef Py_ssize_t i
    cdef double d1, d2, s
    with nogil:
        for i in range(N):
            d1 = (uv[i + 2] - uv[i]) / (2.0 * h)
            d2 = (uv[i + 2] - 2.0 * uv[i + 1] + uv[i]) / (h * h)
            s = sqrt(1.0 + d1 * d1)
            a0[i] = d1
            a1[i] = d2
            a2[i] = -d2 / (s * s * s)
            a3[i] = 1.0 / (uv[i + 1] * s)
            a4[i] = s
    return up, upp, ka, ks, sq
