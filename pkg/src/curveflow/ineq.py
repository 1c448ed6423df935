"""Gradient-term decomposition and randomized sign-estimate verifiers.

Q(T, T) = (G'^{kl} F''^{pq,rs} - F'^{kl} G''^{pq,rs}) T_kpq T_lrs is evaluated
two independent ways:

* :func:`Q_decomposed` uses the three-term split into a diagonal block, a
  pair term and a triple term built from 3-d cross and dot products;
* :func:`Q_direct` contracts the matrix-function derivatives from
  :mod:`curveflow.symfun` (spectral gradient and polarized spectral Hessian).

The verifiers draw curvature vectors from a cone and random symmetric
tensors, evaluate Q or Z in batches, and return :class:`QReport` records.
Every failure carries enough data to be replayed deterministically.
"""

import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DegenerateEigenvaluesError, InfeasibleError, NonpositiveSpeedError
from .pinch import PinchingConfig, PinchingFunction, PreliminaryPinching, enumerate_Hm
from .sampling import random_sym_tensors, sample_unit_slice
from .symfun import SpectralDerivatives, SpeedFunction, gap_min

__all__ = [
    "SymTensor3",
    "QReport",
    "Q_decomposed",
    "Q_direct",
    "Q_extremes_unit",
    "pairing_sum",
    "pairing_bijection",
    "verify_Q_negativity",
    "verify_Q_uniform",
    "verify_pairing",
    "verify_decomposition",
    "Z_of",
    "Z_pairwise",
    "fit_gammas",
    "verify_Z_estimate",
    "replay_failure",
    "write_replays",
]

SIGN_TOL = 1e-9
DISTINCT_GAP = 1e-4
GAMMA_GRID = np.logspace(-6, 1, 60)


class SymTensor3:
    """Totally symmetric 3-tensor stored once per index multiset.

    ``values[i]`` belongs to ``triples[i]`` (sorted k <= p <= q); every
    permutation of the indices reads the same slot.
    """

    def __init__(self, n, values=None):
        self.n = n
        self.triples = tuple(itertools.combinations_with_replacement(range(n), 3))
        self._slot = {t: i for i, t in enumerate(self.triples)}
        if values is None:
            values = np.zeros(len(self.triples))
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(self.triples),):
            raise ValueError(f"expected {len(self.triples)} orbit values")
        self.values = values

    @classmethod
    def from_dense(cls, T):
        T = np.asarray(T, dtype=np.float64)
        n = T.shape[0]
        out = cls(n)
        out.values = np.array([T[t] for t in out.triples])
        return out

    @classmethod
    def from_orbits(cls, n, mapping):
        out = cls(n)
        for idx, v in mapping.items():
            out.values[out._slot[tuple(sorted(idx))]] = v
        return out

    @classmethod
    def random(cls, n, rng):
        return cls.from_dense(random_sym_tensors(n, 1, rng)[0])

    def __getitem__(self, idx):
        return self.values[self._slot[tuple(sorted(idx))]]

    def dense(self):
        T = np.zeros((self.n,) * 3)
        for t, v in zip(self.triples, self.values):
            for perm in set(itertools.permutations(t)):
                T[perm] = v
        return T

    def norm2(self):
        """Sum of squares over the full n^3 index range."""
        mult = np.array([len(set(itertools.permutations(t))) for t in self.triples])
        return float(np.sum(mult * self.values ** 2))


def _dense(T):
    return T.dense() if isinstance(T, SymTensor3) else np.asarray(T, dtype=np.float64)


def _derivs(g, Z):
    """(grad, hess) of a symmetric function for a batch; uses ``batch`` if present."""
    if hasattr(g, "batch"):
        _, gg, gh, *_ = g.batch(Z, order=2)
        return gg, gh
    return np.asarray(g.gradient(Z)), np.asarray(g.hessian(Z))


def _check_distinct(z):
    zs = np.sort(z)
    if np.any(np.diff(zs) < gap_min(np.diag(z))):
        raise DegenerateEigenvaluesError(f"curvatures not distinct: {z}")


def Q_decomposed(f, g, z, T, return_terms=False):
    """Q at B = diag(z) through the three-term decomposition.

    ``return_terms`` gives (diagonal-block, pair, triple) instead of the sum.
    """
    z = np.asarray(z, dtype=np.float64)
    _check_distinct(z)
    if f.value(z) <= 0:
        raise NonpositiveSpeedError("Q needs f(z) > 0")
    Z = z[None, :]
    fg, fh = f.gradient(Z), f.hessian(Z)
    gg, gh = _derivs(g, Z)
    terms = kernels.q_decomposed_batch(Z, fg, fh, gg, gh, _dense(T)[None])[0]
    return tuple(map(float, terms)) if return_terms else float(terms.sum())


def _q_extremes_batch(z, fg, fh, gg, gh):
    """Exact (min, max) of Q(T, T) / |T|^2 over symmetric T at B = diag(z), per row.

    In orbit coordinates Q splits into one block per single index k, acting on
    (T_kpp)_p, plus a diagonal part on the all-distinct orbits. |T|^2 weighs
    T_kkk by 1, T_kpp by 3 and T_kpq by 6.
    """
    N, n = z.shape
    eye = np.eye(n)
    weight = np.where(eye.astype(bool), 1.0, 3.0)
    lo = np.full(N, np.inf)
    hi = np.full(N, -np.inf)
    dz = z[:, :, None] - z[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (fg[:, :, None] * gg[:, None, :] - gg[:, :, None] * fg[:, None, :]) / dz
    c[:, np.arange(n), np.arange(n)] = 0.0
    for k in range(n):
        M = gg[:, k, None, None] * fh - fg[:, k, None, None] * gh
        M = M + 2.0 * c[:, k, :][:, :, None] * eye
        s = 1.0 / np.sqrt(weight[k])
        M = M * s[None, :, None] * s[None, None, :]
        w = np.linalg.eigvalsh(M)
        lo = np.minimum(lo, w[:, 0])
        hi = np.maximum(hi, w[:, -1])
    for k, p, q in itertools.combinations(range(n), 3):
        zk, zp, zq = z[:, k], z[:, p], z[:, q]
        zh = np.stack([(zp - zq) / ((zk - zp) * (zk - zq)),
                       (zk - zq) / ((zk - zp) * (zp - zq)),
                       (zk - zp) / ((zp - zq) * (zk - zq))], 1)
        G = np.stack([gg[:, k], gg[:, p], gg[:, q]], 1)
        F = np.stack([fg[:, k], fg[:, p], fg[:, q]], 1)
        v = np.einsum("ij,ij->i", np.cross(G, F), zh) / 3.0
        lo = np.minimum(lo, v)
        hi = np.maximum(hi, v)
    return lo, hi


def Q_extremes_unit(f, g, z):
    """(min, max) over |T| = 1 of Q(T, T) at B = diag(z); z must have distinct entries."""
    z = np.asarray(z, dtype=np.float64)
    _check_distinct(z)
    Z = z[None, :]
    gg, gh = _derivs(g, Z)
    lo, hi = _q_extremes_batch(Z, f.gradient(Z), f.hessian(Z), gg, gh)
    return float(lo[0]), float(hi[0])


def Q_direct(f, g, B, T):
    """Q by direct contraction of matrix-function derivatives at B."""
    B = np.asarray(B, dtype=np.float64)
    Td = _dense(T)
    n = B.shape[0]
    dF = SpectralDerivatives(f, B, strict=True)
    dG = SpectralDerivatives(g, B, strict=True)
    if dF.value <= 0:
        raise NonpositiveSpeedError("Q needs f > 0")
    Fd = dF.gradient_matrix()
    Gd = dG.gradient_matrix()
    total = 0.0
    for k in range(n):
        for l in range(n):
            if Gd[k, l] != 0.0:
                total += Gd[k, l] * dF.hessian_bilinear(Td[k], Td[l])
            if Fd[k, l] != 0.0:
                total -= Fd[k, l] * dG.hessian_bilinear(Td[k], Td[l])
    return total


def _r_values(z, cfg):
    fam = cfg.family.index_array
    fz = float(cfg.f.value(z))
    if fz <= 0:
        raise NonpositiveSpeedError("pairing needs f(z) > 0")
    return z[fam].sum(axis=1) / fz - 1.0 / cfg.c_m


def pairing_sum(z, p, q, cfg):
    """P_p - P_q with P_a the sum of phi'(r_S) over subsets S containing a."""
    z = np.asarray(z, dtype=np.float64)
    fam = cfg.family.index_array
    d1 = kernels.phi_all(_r_values(z, cfg))[1]
    Pp = d1[np.any(fam == p, axis=1)].sum()
    Pq = d1[np.any(fam == q, axis=1)].sum()
    return float(Pp - Pq)


def pairing_bijection(n, m, p, q):
    """Map each subset containing p but not q to the one with p swapped for q."""
    fam = enumerate_Hm(n, m)
    out = {}
    for S in fam.subsets:
        if p in S and q not in S:
            out[S] = tuple(sorted((set(S) - {p}) | {q}))
    return out


def Z_of(z, cfg, g=None):
    """F G'(B^2) - G F'(B^2) at B = diag(z)."""
    g = PinchingFunction(cfg) if g is None else g
    z = np.asarray(z, dtype=np.float64)
    fz = float(cfg.f.value(z))
    if fz <= 0:
        raise NonpositiveSpeedError("Z needs f(z) > 0")
    return float(fz * g.gradient(z) @ z ** 2 - g.value(z) * cfg.f.gradient(z) @ z ** 2)


def Z_pairwise(z, cfg, g=None):
    """Antisymmetrized form: sum_{p>q} (g'^p f'^q - g'^q f'^p) z_p z_q (z_p - z_q)."""
    g = PinchingFunction(cfg) if g is None else g
    z = np.asarray(z, dtype=np.float64)
    gd, fd = g.gradient(z), cfg.f.gradient(z)
    total = 0.0
    for p in range(z.size):
        for q in range(p):
            total += (gd[p] * fd[q] - gd[q] * fd[p]) * z[p] * z[q] * (z[p] - z[q])
    return total


def _z_batch(cfg, Z):
    g, gg, _, fv, fg, _ = PinchingFunction(cfg).batch(Z, order=1)
    Z2 = Z * Z
    return fv * np.sum(gg * Z2, axis=1) - g * np.sum(fg * Z2, axis=1), g, fv


def _merge_extra(a, b):
    # shared numeric entries are running extrema: max_* keys take the
    # maximum, everything else (c_random and friends) the minimum
    out = dict(a)
    for k, v in b.items():
        if k in out and isinstance(v, float) and isinstance(out[k], float):
            out[k] = max(out[k], v) if k.startswith("max_") else min(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class QReport:
    """Outcome of a randomized sign check.

    ``c_eps`` is the smallest observed -Q f / |T|^2 (Q suites) or the fitted
    gamma_eps (Z suite). ``failures`` is empty iff every sample satisfied the
    target inequality within tolerance.
    """

    label: str
    sample_count: int = 0
    q_min: float = math.inf
    q_max: float = -math.inf
    c_eps: float = math.inf
    failures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.failures

    def merge(self, other):
        return QReport(
            self.label,
            self.sample_count + other.sample_count,
            min(self.q_min, other.q_min),
            max(self.q_max, other.q_max),
            min(self.c_eps, other.c_eps),
            self.failures + other.failures,
            _merge_extra(self.extra, other.extra),
        )

    def to_record(self):
        def clean(x):
            return x if (not isinstance(x, float) or math.isfinite(x)) else None

        return {
            "label": self.label,
            "samples": self.sample_count,
            "q_min": clean(self.q_min),
            "q_max": clean(self.q_max),
            "c_eps": clean(self.c_eps),
            "failures": len(self.failures),
            "passed": self.passed,
            **{k: clean(v) for k, v in self.extra.items()},
        }

    def to_json(self):
        return json.dumps(self.to_record(), sort_keys=True, allow_nan=False)

    def summary(self):
        status = "PASS" if self.passed else f"FAIL ({len(self.failures)} failures)"
        parts = [f"{self.label}: {status}", f"samples={self.sample_count}"]
        if math.isfinite(self.q_max):
            parts.append(f"range [{self.q_min:.3e}, {self.q_max:.3e}]")
        if math.isfinite(self.c_eps):
            parts.append(f"c={self.c_eps:.4e}")
        for k, v in self.extra.items():
            parts.append(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}")
        return "  ".join(parts)


def _threads():
    value = int(os.environ.get("CURVEFLOW_THREADS", "0") or 0)
    return value if value > 0 else (os.cpu_count() or 1)


def _run_batches(label, fn, count, seed, batch_size):
    """Split ``count`` samples into batches with independent seed streams."""
    sizes = [batch_size] * (count // batch_size)
    if count % batch_size:
        sizes.append(count % batch_size)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(s), size, (seed, i)) for i, (s, size) in enumerate(zip(seeds, sizes))]
    workers = min(_threads(), max(1, len(jobs)))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(*job) for job in jobs]
    report = QReport(label)
    for part in parts:
        report = report.merge(part)
    return report


def _pinching(cfg, which):
    if which == "g1":
        return PreliminaryPinching(cfg)
    if which == "g":
        return PinchingFunction(cfg)
    raise ValueError(f"unknown pinching function {which!r}")


def _failure(cfg, z, T, tag, index, **values):
    return {
        "z": [float(x) for x in z],
        "T": [float(x) for x in SymTensor3.from_dense(T).values],
        "config": cfg.as_dict(),
        "seed": list(tag),
        "index": int(index),
        **{k: float(v) for k, v in values.items()},
    }


def _q_batch(cfg, which, Z, T):
    g = _pinching(cfg, which)
    gv, gg, gh, fv, fg, fh = g.batch(Z, order=2)
    terms = kernels.q_decomposed_batch(Z, fg, fh, gg, gh, T)
    Q = terms.sum(axis=1)
    Zs = np.sort(Z, axis=1)
    gap = np.diff(Zs, axis=1).min(axis=1)
    nrm = lambda a: np.sqrt(np.sum(a.reshape(len(a), -1) ** 2, axis=1))  # noqa: E731
    t2 = nrm(T) ** 2
    scale = t2 * (nrm(gg) * nrm(fh) + nrm(fg) * nrm(gh) + 2.0 * nrm(gg) * nrm(fg) / gap)
    return Q, gv, fv, t2, scale, terms


def verify_decomposition(cfg, count, seed=0, which="g", tol=1e-5):
    """Q_decomposed against Q_direct: |difference| <= tol (|Q_direct| + |T|^2).

    Curvature vectors are rotated by a random orthogonal matrix before the
    direct route, so its eigensolver and the tensor rotation are exercised.
    """
    g = _pinching(cfg, which)

    def batch(rng, size, tag):
        Z = sample_unit_slice(cfg.cone, cfg.f, cfg.n, size, rng, distinct=DISTINCT_GAP)
        T = random_sym_tensors(cfg.n, size, rng)
        worst = 0.0
        failures = []
        for i in range(size):
            Qd = Q_decomposed(cfg.f, g, Z[i], T[i])
            R, _ = np.linalg.qr(rng.standard_normal((cfg.n, cfg.n)))
            B = (R * Z[i]) @ R.T
            TR = np.einsum("ai,bj,ck,ijk->abc", R, R, R, T[i])
            Qx = Q_direct(cfg.f, g, B, TR)
            err = abs(Qd - Qx) / (abs(Qx) + float(np.sum(T[i] ** 2)))
            worst = max(worst, err)
            if err > tol:
                failures.append(_failure(cfg, Z[i], T[i], tag, i, Q=Qd, Q_direct=Qx))
        part = QReport("decomposition", size, failures=failures)
        part.extra["max_rel_err"] = worst
        return part

    rep = _run_batches("decomposition", batch, count, seed, min(count, 250) or 1)
    rep.label = f"decomposition[{which}]"
    rep.extra["max_rel_err"] = rep.extra.get("max_rel_err", 0.0)
    return rep


def verify_Q_negativity(cfg, count, seed=0, which="g1", batch_size=2000, tol=SIGN_TOL):
    """Sign check Q <= tol * scale on random cone samples and tensors.

    ``scale`` is the degree-matched size |T|^2 (|g'| |f''| + |f'| |g''| +
    2 |g'| |f'| / min gap) of the terms entering Q.
    """

    def batch(rng, size, tag):
        Z = sample_unit_slice(cfg.cone, cfg.f, cfg.n, size, rng, distinct=DISTINCT_GAP)
        T = random_sym_tensors(cfg.n, size, rng)
        Q, _, _, _, scale, _ = _q_batch(cfg, which, Z, T)
        bad = np.flatnonzero(Q > tol * scale)
        return QReport(
            "Q<=0", size, float(Q.min()), float(Q.max()),
            failures=[_failure(cfg, Z[i], T[i], tag, i, Q=Q[i], scale=scale[i]) for i in bad],
        )

    label = f"Q<=0[{which}]"
    rep = _run_batches(label, batch, count, seed, batch_size)
    rep.label = label
    return rep


def verify_Q_uniform(cfg, count, seed=0, eps=None, batch_size=2000):
    """Strict negativity of Q for the final pinching function where G >= eps F.

    Per sample the exact maximum of Q(T, T) f / |T|^2 over all symmetric T is
    computed, so ``c_eps`` (the smallest -max over samples) bounds Q for every
    tensor at every sample. A random tensor per sample is also checked for
    Q < 0; the smallest random-tensor ratio goes to ``extra["c_random"]``.
    """
    eps = cfg.eps if eps is None else eps
    gfun = PinchingFunction(cfg)

    def pred(Z):
        return gfun.value(Z) >= eps * cfg.f.value(Z)

    def batch(rng, size, tag):
        Z = sample_unit_slice(cfg.cone, cfg.f, cfg.n, size, rng,
                              predicate=pred, distinct=DISTINCT_GAP)
        T = random_sym_tensors(cfg.n, size, rng)
        gv, gg, gh, fv, fg, fh = gfun.batch(Z, order=2)
        Q = kernels.q_decomposed_batch(Z, fg, fh, gg, gh, T).sum(axis=1)
        exact = -_q_extremes_batch(Z, fg, fh, gg, gh)[1] * fv
        rand = -Q * fv / np.einsum("aijk,aijk->a", T, T)
        bad = np.flatnonzero(~(exact > 0) | ~(rand > 0))
        part = QReport(
            "Q-uniform", size, float(Q.min()), float(Q.max()), float(exact.min()),
            [_failure(cfg, Z[i], T[i], tag, i, Q=Q[i], ratio=exact[i]) for i in bad],
        )
        part.extra["c_random"] = float(rand.min())
        return part

    label = f"Q-uniform[eps={eps:g}]"
    rep = _run_batches(label, batch, count, seed, batch_size)
    rep.label = label
    rep.extra["eps"] = float(eps)
    return rep


def verify_pairing(cfg, count, seed=0, batch_size=2000, tol=1e-12):
    """(P_p - P_q) sign(z_p - z_q) >= -tol over all index pairs."""
    fam = cfg.family.index_array
    member = np.stack([np.any(fam == a, axis=1) for a in range(cfg.n)])  # (n, C)

    def batch(rng, size, tag):
        Z = sample_unit_slice(cfg.cone, cfg.f, cfg.n, size, rng, distinct=DISTINCT_GAP)
        # shuffle labels so the index order carries no information
        perm = np.argsort(rng.random(Z.shape), axis=1)
        Z = np.take_along_axis(Z, perm, axis=1)
        fv = cfg.f.value(Z)
        r = Z[:, fam].sum(axis=2) / fv[:, None] - 1.0 / cfg.c_m
        d1 = kernels.phi_all(r)[1]
        P = d1 @ member.T.astype(np.float64)  # (N, n)
        worst = math.inf
        failures = []
        for p in range(cfg.n):
            for q in range(cfg.n):
                if p == q:
                    continue
                val = (P[:, p] - P[:, q]) * np.sign(Z[:, p] - Z[:, q])
                worst = min(worst, float(val.min()))
                for i in np.flatnonzero(val < -tol):
                    failures.append({"z": Z[i].tolist(), "p": p, "q": q,
                                     "config": cfg.as_dict(), "seed": list(tag),
                                     "index": int(i), "value": float(val[i])})
        return QReport("pairing", size, worst, worst, math.inf, failures)

    rep = _run_batches("pairing", batch, count, seed, batch_size)
    return rep


def fit_gammas(Zv, A, Bq, scale_free, grid=GAMMA_GRID, tol=SIGN_TOL):
    """Fit (gamma_eps, gamma_delta) for Z >= gamma_eps * A - gamma_delta * Bq.

    ``scale_free`` marks samples whose whole ray lies in the sampling set
    (min z >= -delta F). Along such a ray Z and A grow like t^3 while Bq grows
    like t^2, so gamma_delta cannot absorb a violation there: gamma_eps is the
    largest grid value with gamma_eps * A <= Z on every scale-free sample.
    gamma_delta is then the largest remaining residual, floored at zero.
    Raises InfeasibleError (carrying the worst sample) when even the smallest
    grid value fails.
    """
    slack = tol * (np.abs(Zv) + np.abs(A))
    ok = [ge for ge in grid
          if not np.any(((ge * A - Zv) > slack)[scale_free])]
    if not ok:
        res = np.where(scale_free, grid[0] * A - Zv, -np.inf)
        raise InfeasibleError("no feasible (gamma_eps, gamma_delta) on the grid",
                              worst=int(np.argmax(res)))
    ge = float(max(ok))
    gd = max(0.0, float(np.max((ge * A - Zv - slack) / Bq)))
    return ge, gd


def verify_Z_estimate(cfg, count, seed=0, delta=None, eps=None, C_delta=0.0,
                      scale_range=(1.0, 100.0), batch_size=2000, grid=GAMMA_GRID):
    """Fit and check Z >= gamma_eps F^2 (G - delta F) - gamma_delta F^2.

    Samples are (m+1)-positive directions of the configured cone with
    G >= eps F, scaled by a log-uniform factor in ``scale_range`` and kept
    when min z >= -delta F - C_delta.
    """
    delta = cfg.delta if delta is None else delta
    eps = cfg.eps if eps is None else eps
    gfun = PinchingFunction(cfg)
    lo, hi = np.log(scale_range[0]), np.log(scale_range[1])

    def pred(Z):
        positive = Z[:, : cfg.m + 1].sum(axis=1) > 0
        return positive & (gfun.value(Z) >= eps * cfg.f.value(Z))

    collected = {}

    def batch(rng, size, tag):
        rows = []
        have = 0
        while have < size:
            Z = sample_unit_slice(cfg.cone, cfg.f, cfg.n, size, rng, predicate=pred)
            Z = Z * np.exp(rng.uniform(lo, hi, size))[:, None]
            fz = cfg.f.value(Z)
            Z = Z[Z[:, 0] >= -delta * fz - C_delta]
            rows.append(Z)
            have += len(Z)
        Z = np.concatenate(rows)[:size]
        Zv, gv, fv = _z_batch(cfg, Z)
        collected[tag[1]] = (Z, Zv, gv, fv)
        return QReport("Z", size, float(Zv.min()), float(Zv.max()))

    label = f"Z-estimate[delta={delta:g},eps={eps:g},C={C_delta:g}]"
    rep = _run_batches(label, batch, count, seed, batch_size)
    parts = [collected[i] for i in sorted(collected)]
    Z, Zv, gv, fv = (np.concatenate([p[j] for p in parts]) for j in range(4))
    A = fv ** 2 * (gv - delta * fv)
    Bq = fv ** 2
    scale_free = Z[:, 0] >= -delta * fv
    rep.label = label
    rep.extra.update({"delta": float(delta), "eps": float(eps), "C_delta": float(C_delta),
                      "scale_free": int(scale_free.sum())})
    try:
        ge, gd = fit_gammas(Zv, A, Bq, scale_free, grid)
    except InfeasibleError as exc:
        i = exc.worst
        rep.failures.append({"z": Z[i].tolist(), "config": cfg.as_dict(),
                             "reason": "infeasible", "Z": float(Zv[i])})
        rep.extra.update({"gamma_eps": math.nan, "gamma_delta": math.nan})
        return rep
    viol = Zv < ge * A - gd * Bq - SIGN_TOL * (np.abs(Zv) + np.abs(ge * A) + gd * Bq)
    for i in np.flatnonzero(viol):
        rep.failures.append({"z": Z[i].tolist(), "config": cfg.as_dict(),
                             "reason": "violation", "Z": float(Zv[i])})
    rep.c_eps = ge
    rep.extra.update({"gamma_eps": ge, "gamma_delta": gd})
    return rep


def replay_failure(record, which="g1"):
    """Recompute Q for a stored failure record."""
    c = record["config"]
    cfg = PinchingConfig(
        n=c["n"], m=c["m"], f=SpeedFunction.parse(c["f"]), eps=c["eps"],
        sigma=c["sigma"], delta=c["delta"], beta=c["beta"], eta=c["eta"], M=c["M"])
    z = np.asarray(record["z"])
    T = SymTensor3(cfg.n, record["T"])
    return Q_decomposed(cfg.f, _pinching(cfg, which), z, T)


def write_replays(report, directory):
    """One JSON file per failure; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    safe = "".join(ch if ch.isalnum() else "_" for ch in report.label)
    for i, rec in enumerate(report.failures):
        path = directory / f"{safe}_{i:04d}.json"
        path.write_text(json.dumps(rec, sort_keys=True))
        paths.append(path)
    return paths
