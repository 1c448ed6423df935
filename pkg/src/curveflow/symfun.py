"""Symmetric functions of principal curvatures and their matrix lifts.

A *symmetric function* here is any object with ``value``, ``gradient`` and
``hessian`` methods acting on curvature vectors (1-d) or batches of them
(2-d, one vector per row). :class:`SpeedFunction` is the basic example; the
pinching functions in :mod:`curveflow.pinch` follow the same protocol, so
everything in this module applies to them unchanged.

Matrix lifts G(A) = g(lambda(A)) are evaluated through the eigensolver in
:mod:`curveflow.kernels` (Householder tridiagonalization + implicit QL,
eigenvalues ascending).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateEigenvaluesError, DomainError, EigenDecompositionError

__all__ = [
    "ConeSpec",
    "SpeedFunction",
    "SpectralDerivatives",
    "eval",
    "gradient",
    "hessian_form",
    "spectral_value",
    "spectral_gradient",
    "spectral_hessian_form",
    "check_degree_zero_bounds",
    "parabolicity_constant",
    "gap_min",
    "random_spectrum_matrix",
    "fd_check",
]

CONE_KINDS = ("full-space", "positive-orthant", "parametric")


@dataclass(frozen=True)
class ConeSpec:
    """A cone of admissible curvature vectors.

    ``parametric`` is ``{f > 0, min z >= -eta f, z_1 + ... + z_{m+1} >= beta f}``
    with entries sorted ascending. Every cone is intersected with the domain
    of the speed function it is used with.
    """

    kind: str = "parametric"
    eta: float = 0.0
    beta: float = 0.0
    m: int = 0

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.kind == "parametric" and self.beta < 0:
            raise ValueError("beta must be >= 0")

    def contains(self, f, z):
        """Boolean mask (or bool for a single vector) of cone membership."""
        z = np.asarray(z, dtype=np.float64)
        single = z.ndim == 1
        Z = np.atleast_2d(z)
        ok = f.in_domain(Z)
        if self.kind == "positive-orthant":
            ok &= np.all(Z > 0, axis=1)
        elif self.kind == "parametric":
            with np.errstate(invalid="ignore"):
                fz = np.where(ok, f.value(Z, check=False), -1.0)
            zs = np.sort(Z, axis=1)
            ok &= fz > 0
            ok &= zs[:, 0] >= -self.eta * fz
            ok &= zs[:, : self.m + 1].sum(axis=1) >= self.beta * fz
        return bool(ok[0]) if single else ok


@dataclass(frozen=True)
class SpeedFunction:
    """Normalized speed: the mean ``sum(z)/n`` or a power mean of order p.

    Both are symmetric, degree-one homogeneous, monotone and convex, with
    ``f(1, ..., 1) = 1``. The mean lives on all of R^n, power means on the
    open positive orthant (they extend continuously to its closure, which
    :meth:`value` allows with ``closed=True``).
    """

    kind: str = "mean"
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("mean", "power"):
            raise ValueError(f"unknown speed function {self.kind!r}")
        if self.kind == "power" and self.p < 1:
            raise ValueError("power means need p >= 1 to be convex")

    @classmethod
    def parse(cls, text, p=None):
        """Build from a descriptor: ``mean``, ``pow2``, ``pow3`` (or ``pow`` with p)."""
        text = text.strip().lower()
        if text == "mean":
            return cls("mean")
        if text.startswith("pow"):
            order = text[3:]
            if order:
                return cls("power", float(order))
            if p is None:
                raise ValueError("descriptor 'pow' needs an explicit p")
            return cls("power", float(p))
        raise ValueError(f"unknown speed descriptor {text!r}")

    @property
    def name(self):
        if self.kind == "mean":
            return "mean"
        return f"pow{self.p:g}"

    def default_cone(self):
        if self.kind == "mean":
            return ConeSpec("full-space")
        return ConeSpec("positive-orthant")

    def in_domain(self, z):
        Z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        ok = np.all(np.isfinite(Z), axis=1)
        if self.kind == "power":
            ok &= np.all(Z > 0, axis=1)
        return ok

    def _check(self, Z, closed=False):
        ok = np.all(np.isfinite(Z), axis=-1)
        if self.kind == "power":
            ok &= np.all(Z >= 0 if closed else Z > 0, axis=-1)
        if not np.all(ok):
            raise DomainError(f"{self.name}: curvature vector outside the cone")

    def value(self, z, check=True, closed=False):
        Z = np.asarray(z, dtype=np.float64)
        if check:
            self._check(Z, closed)
        if self.kind == "mean":
            return Z.mean(axis=-1)
        return np.mean(Z ** self.p, axis=-1) ** (1.0 / self.p)

    def gradient(self, z, check=True):
        Z = np.asarray(z, dtype=np.float64)
        if check:
            self._check(Z)
        n = Z.shape[-1]
        if self.kind == "mean":
            return np.full(Z.shape, 1.0 / n)
        f = self.value(Z, check=False)[..., None]
        return (Z / f) ** (self.p - 1.0) / n

    def hessian(self, z, check=True):
        Z = np.asarray(z, dtype=np.float64)
        if check:
            self._check(Z)
        n = Z.shape[-1]
        if self.kind == "mean":
            return np.zeros(Z.shape + (n,))
        p = self.p
        f = self.value(Z, check=False)[..., None]
        fdot = (Z / f) ** (p - 1.0) / n
        diag = (Z / f) ** (p - 2.0) / n
        eye = np.eye(n)
        H = diag[..., :, None] * eye - fdot[..., :, None] * fdot[..., None, :]
        return (p - 1.0) / f[..., None] * H


def eval(f, z):  # noqa: A001 - mirrors the operation name
    return float(f.value(np.asarray(z, dtype=np.float64)))


def gradient(f, z):
    return f.gradient(np.asarray(z, dtype=np.float64))


def hessian_form(f, z, v):
    """v . Hess f(z) . v"""
    v = np.asarray(v, dtype=np.float64)
    return float(v @ f.hessian(np.asarray(z, dtype=np.float64)) @ v)


def gap_min(A):
    """Smallest eigenvalue gap treated as distinct: 1e-6 * max(1, |A|)."""
    return 1e-6 * max(1.0, float(np.linalg.norm(A)))


def _eig(A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(A)):
        raise EigenDecompositionError("non-finite matrix entries")
    # only the lower triangle is read; symmetrize so storage asymmetry is moot
    S = np.tril(A) + np.tril(A, -1).T
    w, V, ok = kernels.sym_eig(S)
    if not ok:
        raise EigenDecompositionError("implicit QL did not converge")
    return w, V


class SpectralDerivatives:
    """First and second derivatives of G(A) = g(lambda(A)) at a fixed A.

    The eigen-decomposition and the divided differences are computed once;
    :meth:`hessian_form` and :meth:`hessian_bilinear` then cost O(n^2) per
    direction. When two eigenvalues are closer than ``gap`` the divided
    difference (g'_p - g'_q)/(l_p - l_q) is replaced by its limit
    (g''_pp + g''_qq)/2 - g''_pq, unless ``strict`` is set.
    """

    def __init__(self, g, A, gap=None, strict=False):
        self.A = np.asarray(A, dtype=np.float64)
        self.w, self.V = _eig(self.A)
        self.gap = gap_min(self.A) if gap is None else gap
        self.value = float(g.value(self.w))
        self.grad = np.asarray(g.gradient(self.w))
        self.hess = np.asarray(g.hessian(self.w))
        n = self.w.size
        dl = self.w[:, None] - self.w[None, :]
        close = np.abs(dl) < self.gap
        np.fill_diagonal(close, False)
        if strict and np.any(close):
            raise DegenerateEigenvaluesError(
                f"eigenvalue gap below {self.gap:.3g}: {self.w}")
        dg = self.grad[:, None] - self.grad[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            D = dg / dl
        hd = np.diag(self.hess)
        limit = 0.5 * (hd[:, None] + hd[None, :]) - self.hess
        D = np.where(close, limit, D)
        D[np.arange(n), np.arange(n)] = 0.0
        self.divided = D

    def gradient_matrix(self):
        return (self.V * self.grad) @ self.V.T

    def to_eigenbasis(self, B):
        return self.V.T @ np.asarray(B, dtype=np.float64) @ self.V

    def hessian_form(self, B):
        Bt = self.to_eigenbasis(B)
        d = np.diag(Bt)
        return float(d @ self.hess @ d + np.sum(self.divided * Bt * Bt))

    def hessian_bilinear(self, X, Y):
        """Polarization of :meth:`hessian_form`."""
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        return 0.25 * (self.hessian_form(X + Y) - self.hessian_form(X - Y))


def spectral_value(g, A):
    w, _ = _eig(A)
    return float(g.value(w))


def spectral_gradient(g, A):
    return SpectralDerivatives(g, A).gradient_matrix()


def spectral_hessian_form(g, A, B, strict=False):
    """Second directional derivative d^2/ds^2 G(A + sB) at s = 0.

    For general symmetric A the direction is first rotated into the
    eigenbasis of A. ``strict`` raises on near-coincident eigenvalues
    instead of using the limiting divided difference.
    """
    return SpectralDerivatives(g, A, strict=strict).hessian_form(B)


def check_degree_zero_bounds(g, cone, f, n, samples, rng=None):
    """Empirical [min, max] of a degree-zero function on the unit slice of a cone.

    ``g`` maps a batch of curvature vectors (rows) to values. Infinite or NaN
    values are kept in the result rather than raised.
    """
    from .sampling import sample_unit_slice

    rng = np.random.default_rng(rng)
    Z = sample_unit_slice(cone, f, n, samples, rng)
    vals = np.asarray(g(Z), dtype=np.float64)
    if np.any(np.isnan(vals)):
        return (float("nan"), float("nan"))
    return (float(vals.min()), float(vals.max()))


def parabolicity_constant(f, cone, n, samples, rng=None):
    """min_k f'^k over unit-slice samples of the cone (uniform parabolicity)."""
    lo, _ = check_degree_zero_bounds(
        lambda Z: f.gradient(Z).min(axis=1), cone, f, n, samples, rng)
    return lo


def random_spectrum_matrix(f, n, rng, min_gap=0.1, span=(0.5, 3.0)):
    """Random symmetric matrix with eigenvalues in f's domain, gaps >= min_gap."""
    lo, hi = span if f.kind == "power" else (-max(map(abs, span)), max(map(abs, span)))
    while True:
        w = np.sort(rng.uniform(lo, hi, n))
        if np.all(np.diff(w) >= min_gap) and f.value(w, check=False) > 0:
            break
    Qm, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Qm * w) @ Qm.T


def fd_check(f, n, count, rng=None, min_gap=0.1, directions=2, h1=1e-5, h2=1e-4):
    """Largest relative deviation of spectral derivatives from finite differences.

    Values along A + sB come from ``numpy.linalg.eigvalsh`` (a route
    independent of the package eigensolver). Both derivatives use central
    differences with steps h1 * scale and h2 * scale, scale = max(1, |A|).
    Deviations are relative to max(|reference|, max(|G(A)|, |A|) / |A|)
    for unit directions B. Returns (grad_err, hess_err).
    """
    rng = np.random.default_rng(rng)

    def G(M):
        return float(f.value(np.linalg.eigvalsh(M)))

    worst_g = worst_h = 0.0
    for _ in range(count):
        A = random_spectrum_matrix(f, n, rng, min_gap)
        d = SpectralDerivatives(f, A)
        Gd = d.gradient_matrix()
        size = np.linalg.norm(A)
        s1, s2 = h1 * max(1.0, size), h2 * max(1.0, size)
        for _ in range(directions):
            B = rng.standard_normal((n, n))
            B = (B + B.T) / 2
            B /= np.linalg.norm(B)
            g0 = G(A)
            scale = max(abs(g0), size) / size
            first = (G(A + s1 * B) - G(A - s1 * B)) / (2 * s1)
            worst_g = max(worst_g, abs(np.sum(Gd * B) - first) / max(abs(first), scale))
            second = (G(A + s2 * B) - 2 * g0 + G(A - s2 * B)) / (s2 * s2)
            worst_h = max(worst_h, abs(d.hessian_form(B) - second) / max(abs(second), scale))
    return worst_g, worst_h
