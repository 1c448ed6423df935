"""Cylindrical pinching functions.

For a speed f and 0 <= m <= n-2 the preliminary pinching function is

    g1(z) = f(z) * sum_S phi((sum_{i in S} z_i - f(z)/c_m) / f(z)),

summed over all (m+1)-element index sets S, with c_m the speed of the unit
cylinder R^m x S^(n-m). The final pinching function is g = g1^2 / g2 with
g2(z) = M sum(z) - |z|. Both are degree-one homogeneous, non-negative, and
vanish exactly where every (m+1)-subset sum is at least f/c_m.
"""

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import (
    ConeUnboundedError,
    ConfigError,
    InvalidRangeError,
    NonpositiveG2Error,
    NonpositiveSpeedError,
)
from .symfun import ConeSpec, SpeedFunction

__all__ = [
    "MAX_PINCH_DIM",
    "SubsetFamily",
    "PinchingConfig",
    "enumerate_Hm",
    "cylinder_constant",
    "K_m",
    "phi",
    "phi_prime",
    "phi_double_prime",
    "PreliminaryPinching",
    "G2Function",
    "PinchingFunction",
    "eval_g1",
    "grad_g1",
    "eval_g2",
    "eval_g",
    "G_eps_sigma",
    "choose_M",
]

# |H_m| = C(n, m+1) grows quickly; desk-scale verification stays below this.
MAX_PINCH_DIM = 12


@dataclass(frozen=True)
class SubsetFamily:
    n: int
    m: int
    subsets: tuple

    @property
    def index_array(self):
        return np.array(self.subsets, dtype=np.intp).reshape(len(self.subsets), self.m + 1)

    def __len__(self):
        return len(self.subsets)

    def containing(self, a):
        """Subsets (the set O_a) that contain index a."""
        return tuple(S for S in self.subsets if a in S)


@lru_cache(maxsize=None)
def enumerate_Hm(n, m):
    """All (m+1)-element subsets of {0, ..., n-1}, each sorted ascending.

    These are exactly the distinct images sigma({0, ..., m}) over all
    permutations sigma, i.e. the quotient H_m.
    """
    if not (0 <= m <= n - 2):
        raise InvalidRangeError(f"m={m} outside [0, n-2] for n={n}")
    if n > MAX_PINCH_DIM:
        raise InvalidRangeError(f"n={n} exceeds the pinching cap {MAX_PINCH_DIM}")
    return SubsetFamily(n, m, tuple(itertools.combinations(range(n), m + 1)))


def cylinder_constant(f, n, m):
    """Speed of the unit cylinder R^m x S^(n-m): f(0,...,0,1,...,1) with m zeros."""
    if not (0 <= m <= n - 1):
        raise InvalidRangeError(f"m={m} outside [0, n-1] for n={n}")
    z = np.r_[np.zeros(m), np.ones(n - m)]
    c = float(f.value(z, closed=True))
    if c <= 0:
        raise NonpositiveSpeedError(f"cylinder speed {c} is not positive")
    return c


def K_m(z, f, m):
    """Sum of the smallest m+1 entries minus f(z)/c_m."""
    z = np.sort(np.asarray(z, dtype=np.float64))
    c = cylinder_constant(f, z.size, m)
    return float(z[: m + 1].sum() - f.value(z, closed=True) / c)


def phi(r):
    """r^4 exp(-1/r^2) for r < 0, zero otherwise."""
    out = kernels.phi_all(np.asarray(r, dtype=np.float64))[0]
    return float(out) if np.ndim(out) == 0 else out


def phi_prime(r):
    out = kernels.phi_all(np.asarray(r, dtype=np.float64))[1]
    return float(out) if np.ndim(out) == 0 else out


def phi_double_prime(r):
    out = kernels.phi_all(np.asarray(r, dtype=np.float64))[2]
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=256)
def choose_M(cone, f, n, samples=100_000, rng=0, limit=1e3):
    """Twice the sampled sup of |z| / sum(z) over the unit slice of the cone.

    Raises ConeUnboundedError if sum(z) <= 0 occurs or the ratio exceeds
    ``limit``: no finite M then keeps g2 positive.
    """
    from .sampling import SamplerExhausted, sample_unit_slice

    try:
        Z = sample_unit_slice(cone, f, n, samples, np.random.default_rng(rng))
    except SamplerExhausted as exc:
        raise ConfigError(f"cone {cone} looks empty: {exc}") from exc
    total = Z.sum(axis=1)
    if np.any(total <= 0):
        raise ConeUnboundedError(f"cone {cone} contains vectors with sum(z) <= 0")
    ratio = float((np.linalg.norm(Z, axis=1) / total).max())
    if not math.isfinite(ratio) or ratio > limit:
        raise ConeUnboundedError(f"sup |z|/sum(z) ~ {ratio:.3g} on cone {cone}")
    return 2.0 * ratio


@dataclass(frozen=True)
class PinchingConfig:
    """Parameters of the pinching construction.

    ``c_m`` is always computed from ``f``. ``M`` is chosen by sampling the
    cone when not given; a given M is checked for positivity of g2 on the
    cone at construction.
    """

    n: int
    m: int
    f: SpeedFunction = field(default_factory=SpeedFunction)
    eps: float = 0.05
    sigma: float = 0.5
    delta: float = 0.1
    beta: float = 0.1
    eta: float = 0.1
    M: float = None
    M_samples: int = 100_000

    def __post_init__(self):
        if not (0 <= self.m <= self.n - 2):
            raise InvalidRangeError(f"m={self.m} outside [0, n-2] for n={self.n}")
        if self.n > MAX_PINCH_DIM:
            raise InvalidRangeError(f"n={self.n} exceeds the pinching cap {MAX_PINCH_DIM}")
        if self.eps <= 0 or self.delta <= 0 or self.beta <= 0 or self.eta < 0:
            raise ConfigError("need eps > 0, delta > 0, beta > 0, eta >= 0")
        if not 0 < self.sigma < 1:
            raise ConfigError("sigma must lie in (0, 1)")
        if self.M is None:
            object.__setattr__(self, "M", choose_M(self.cone, self.f, self.n, self.M_samples))
        else:
            self._check_M()

    def _check_M(self):
        from .sampling import sample_unit_slice

        Z = sample_unit_slice(self.cone, self.f, self.n, 20_000, np.random.default_rng(1))
        g2 = self.M * Z.sum(axis=1) - np.linalg.norm(Z, axis=1)
        if np.any(g2 <= 0):
            raise NonpositiveG2Error(
                f"M={self.M} leaves g2 <= 0 on the cone (min {g2.min():.3g})")

    @property
    def cone(self):
        return ConeSpec("parametric", self.eta, self.beta, self.m)

    @property
    def c_m(self):
        return cylinder_constant(self.f, self.n, self.m)

    @property
    def family(self):
        return enumerate_Hm(self.n, self.m)

    def as_dict(self):
        return {
            "n": self.n, "m": self.m, "f": self.f.name, "eps": self.eps,
            "sigma": self.sigma, "delta": self.delta, "beta": self.beta,
            "eta": self.eta, "M": self.M, "c_m": self.c_m,
        }


def _as_batch(z):
    Z = np.asarray(z, dtype=np.float64)
    return Z.ndim == 1, np.atleast_2d(Z)


class PreliminaryPinching:
    """g1 as a symmetric function (value / gradient / hessian protocol)."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.f = cfg.f
        self.inv_cm = 1.0 / cfg.c_m
        self.subsets = cfg.family.index_array

    def batch(self, Z, order=2):
        """(g1, grad, hess, f, fgrad, fhess) for each row of Z."""
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        # the ratios r_S depend on direction only; evaluating on the unit
        # slice keeps g1(lambda z) = lambda g1(z) to rounding even where
        # exp(-1/r^2) magnifies tiny changes in r
        s = np.linalg.norm(Z, axis=1)
        s[s == 0] = 1.0
        U = Z / s[:, None]
        fv = self.f.value(U)
        if np.any(fv <= 0):
            raise NonpositiveSpeedError("pinching functions need f(z) > 0")
        fg = self.f.gradient(U)
        fh = self.f.hessian(U) if order >= 2 else np.zeros(Z.shape + Z.shape[-1:])
        g1, gg, gh = kernels.pinch_batch(U, fv, fg, fh, self.subsets, self.inv_cm, order)
        g1 = np.asarray(g1) * s
        gh = np.asarray(gh) / s[:, None, None]
        return g1, np.asarray(gg), gh, fv * s, fg, fh / s[:, None, None]

    def value(self, z, check=True):
        single, Z = _as_batch(z)
        v = self.batch(Z, order=0)[0]
        return float(v[0]) if single else v

    def gradient(self, z, check=True):
        single, Z = _as_batch(z)
        g = self.batch(Z, order=1)[1]
        return g[0] if single else g

    def hessian(self, z, check=True):
        single, Z = _as_batch(z)
        h = self.batch(Z, order=2)[2]
        return h[0] if single else h


class G2Function:
    """g2(z) = M sum(z) - |z| (Euclidean norm)."""

    def __init__(self, M):
        self.M = M

    def value(self, z, check=True):
        Z = np.asarray(z, dtype=np.float64)
        return self.M * Z.sum(axis=-1) - np.linalg.norm(Z, axis=-1)

    def gradient(self, z, check=True):
        Z = np.asarray(z, dtype=np.float64)
        nrm = np.linalg.norm(Z, axis=-1)[..., None]
        return self.M - Z / nrm

    def hessian(self, z, check=True):
        Z = np.asarray(z, dtype=np.float64)
        n = Z.shape[-1]
        nrm = np.linalg.norm(Z, axis=-1)[..., None, None]
        u = Z[..., :, None] * Z[..., None, :]
        return -(np.eye(n) - u / nrm ** 2) / nrm


class PinchingFunction:
    """g = g1^2 / g2 as a symmetric function."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.f = cfg.f
        self.g1 = PreliminaryPinching(cfg)
        self.g2 = G2Function(cfg.M)

    def batch(self, Z, order=2):
        """(g, grad, hess, f, fgrad, fhess) for each row of Z."""
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        a, da, dda, fv, fg, fh = self.g1.batch(Z, order)
        b = self.g2.value(Z)
        if np.any(b <= 0):
            raise NonpositiveG2Error(
                f"g2 <= 0 (min {b.min():.3g}); M={self.cfg.M} too small for these curvatures")
        g = a * a / b
        grad = np.zeros_like(Z)
        hess = np.zeros(Z.shape + Z.shape[-1:])
        if order >= 1:
            db = self.g2.gradient(Z)
            grad = (2.0 * a / b)[:, None] * da - (a * a / (b * b))[:, None] * db
            if order >= 2:
                ddb = self.g2.hessian(Z)
                outer = lambda x, y: x[:, :, None] * y[:, None, :]  # noqa: E731
                hess = (
                    (2.0 / b)[:, None, None] * outer(da, da)
                    + (2.0 * a / b)[:, None, None] * dda
                    - (2.0 * a / (b * b))[:, None, None] * (outer(da, db) + outer(db, da))
                    + (2.0 * a * a / b ** 3)[:, None, None] * outer(db, db)
                    - (a * a / (b * b))[:, None, None] * ddb
                )
        return g, grad, hess, fv, fg, fh

    def value(self, z, check=True):
        single, Z = _as_batch(z)
        v = self.batch(Z, order=0)[0]
        return float(v[0]) if single else v

    def gradient(self, z, check=True):
        single, Z = _as_batch(z)
        g = self.batch(Z, order=1)[1]
        return g[0] if single else g

    def hessian(self, z, check=True):
        single, Z = _as_batch(z)
        h = self.batch(Z, order=2)[2]
        return h[0] if single else h


def eval_g1(z, cfg):
    return PreliminaryPinching(cfg).value(z)


def grad_g1(z, cfg):
    return PreliminaryPinching(cfg).gradient(z)


def eval_g2(z, cfg):
    return float(G2Function(cfg.M).value(z))


def eval_g(z, cfg):
    return PinchingFunction(cfg).value(z)


def G_eps_sigma(z, cfg, g=None):
    """(g(z)/f(z) - eps) * f(z)^sigma."""
    g = PinchingFunction(cfg) if g is None else g
    z = np.asarray(z, dtype=np.float64)
    fz = cfg.f.value(z)
    if np.any(fz <= 0):
        raise NonpositiveSpeedError("G_eps_sigma needs f(z) > 0")
    out = (g.value(z) / fz - cfg.eps) * fz ** cfg.sigma
    return float(out) if np.ndim(out) == 0 else out
