"""Rotationally symmetric hypersurfaces moving by a curvature speed.

A profile u(x) > 0 over an interval of the axis describes the hypersurface
obtained by rotating the graph with S^{n-1} fibres. Its principal
curvatures are

    kappa_axis   = -u'' / (1 + u'^2)^{3/2}          (multiplicity 1)
    kappa_sphere =  1 / (u (1 + u'^2)^{1/2})          (multiplicity n-1)

and moving with normal speed F towards the axis gives the radial equation
u_t = -F (1 + u'^2)^{1/2}. The scheme is explicit Euler with centred
differences; :func:`run` adds monitoring of the pinching quantities.
"""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kernels
from .errors import CFLViolation, ConeExitError, DegenerateRadiusError, DomainError
from .pinch import PreliminaryPinching

__all__ = [
    "BOUNDARIES",
    "FlowProfile",
    "Geometry",
    "Schedule",
    "MonitorRecord",
    "RunResult",
    "Verdict",
    "Preset",
    "geometry",
    "curvatures",
    "principal_curvatures",
    "cfl_bound",
    "step",
    "run",
    "evolution_residual",
    "check_convexity_preservation",
    "sphere_preset",
    "cylinder_preset",
    "dumbbell_preset",
    "preset",
    "PRESETS",
]

BOUNDARIES = ("periodic", "reflecting", "dirichlet")
MIN_POINTS = 16


@dataclass
class FlowProfile:
    """Radius values on a uniform axis grid at time t.

    ``dirichlet`` profiles take their ghost values from ``exact(x, t)``,
    which is how exact solutions on a finite window are evolved.
    """

    x: np.ndarray
    u: np.ndarray
    n: int
    t: float = 0.0
    boundary: str = "reflecting"
    exact: object = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.u = np.asarray(self.u, dtype=np.float64)
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.x.shape != self.u.shape or self.x.ndim != 1:
            raise ValueError("x and u must be 1-d arrays of equal length")
        if self.x.size < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} grid points")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.boundary == "dirichlet" and self.exact is None:
            raise ValueError("dirichlet boundary needs an exact(x, t) callback")
        dx = np.diff(self.x)
        if np.any(np.abs(dx - dx[0]) > 1e-9 * abs(dx[0])) or dx[0] <= 0:
            raise ValueError("grid must be uniform and increasing")
        if np.any(~(self.u > 0)):
            raise DegenerateRadiusError("radius must be positive",
                                        index=int(np.argmin(self.u)), t=self.t)

    @classmethod
    def uniform(cls, L, N, radius, n, boundary="reflecting", x0=0.0, exact=None):
        """Sample ``radius(x)`` on N points over [x0, x0 + L]."""
        if boundary == "periodic":
            x = x0 + L * np.arange(N) / N
        else:
            x = np.linspace(x0, x0 + L, N)
        return cls(x, radius(x), n, 0.0, boundary, exact)

    @property
    def N(self):
        return self.x.size

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    def extended(self):
        """u with one ghost value at each end."""
        u = self.u
        if self.boundary == "periodic":
            lo, hi = u[-1], u[0]
        elif self.boundary == "reflecting":
            lo, hi = u[1], u[-2]
        else:
            h = self.h
            lo, hi = self.exact(np.array([self.x[0] - h, self.x[-1] + h]), self.t)
        return np.concatenate(([lo], u, [hi]))

    def evolved(self, u, t):
        return replace(self, u=np.asarray(u, dtype=np.float64), t=float(t))


@dataclass
class Geometry:
    up: np.ndarray
    upp: np.ndarray
    ka: np.ndarray
    ks: np.ndarray
    s: np.ndarray
    Z: np.ndarray  # (N, n) curvature vectors, axis entry first
    F: np.ndarray
    dF: np.ndarray  # (N, n) speed gradient


def geometry(profile, f):
    """Curvatures, speed and speed gradient at every grid point.

    Raises ConeExitError when a curvature vector leaves the domain of f.
    """
    up, upp, ka, ks, s = kernels.profile_geometry(profile.extended(), profile.h)
    up, upp, ka, ks, s = map(np.asarray, (up, upp, ka, ks, s))
    Z = np.empty((profile.N, profile.n))
    Z[:, 0] = ka
    Z[:, 1:] = ks[:, None]
    ok = f.in_domain(Z)
    if not np.all(ok):
        i = int(np.flatnonzero(~ok)[0])
        raise ConeExitError(f"curvature left the domain of {f.name} at x={profile.x[i]:.6g}",
                            index=i, t=profile.t)
    F = f.value(Z)
    return Geometry(up, upp, ka, ks, s, Z, F, f.gradient(Z))


def principal_curvatures(u, up, upp, n):
    """Curvatures (ascending) from radius and its exact first two derivatives."""
    u, up, upp = (np.asarray(a, dtype=np.float64) for a in (u, up, upp))
    s = np.sqrt(1.0 + up * up)
    z = np.empty(u.shape + (n,))
    z[..., 0] = -upp / s ** 3
    z[..., 1:] = (1.0 / (u * s))[..., None]
    return np.sort(z, axis=-1)


def curvatures(profile, i, u_floor=0.0):
    """Principal curvatures at grid point i, ascending."""
    if profile.u[i] <= u_floor:
        raise DegenerateRadiusError(f"radius {profile.u[i]:.3g} at or below floor",
                                    index=int(i), t=profile.t)
    ue = profile.extended()[i:i + 3]
    _, _, ka, ks, _ = kernels.profile_geometry(ue, profile.h)
    z = np.empty(profile.n)
    z[0] = ka[0]
    z[1:] = ks[0]
    return np.sort(z)


def cfl_bound(profile, geo, cfl=0.2):
    """cfl * h^2 / a_max with a = f'_axis / (1 + u'^2), the diffusion coefficient."""
    a = np.max(geo.dF[:, 0] / geo.s ** 2)
    return cfl * profile.h ** 2 / a if a > 0 else math.inf


def step(profile, f, dt, cone=None, u_floor=0.0, cfl=0.2, geo=None):
    """One explicit Euler step of u_t = -F sqrt(1 + u'^2)."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0:
        return profile.evolved(profile.u.copy(), profile.t)
    geo = geometry(profile, f) if geo is None else geo
    if cone is not None:
        inside = cone.contains(f, geo.Z)
        if not np.all(inside):
            i = int(np.flatnonzero(~inside)[0])
            raise ConeExitError(f"curvature left the cone at x={profile.x[i]:.6g}",
                                index=i, t=profile.t)
    bound = cfl_bound(profile, geo, cfl)
    if dt > bound * (1.0 + 1e-12):
        raise CFLViolation(f"dt={dt:.3g} exceeds the stability bound {bound:.3g}")
    u = profile.u - dt * geo.F * geo.s
    if np.any(u <= u_floor):
        i = int(np.argmin(u))
        raise DegenerateRadiusError(f"radius {u[i]:.3g} at or below floor {u_floor:.3g}",
                                    index=i, t=profile.t + dt)
    return profile.evolved(u, profile.t + dt)


def _interior(profile):
    if profile.boundary == "periodic":
        return slice(None)
    return slice(2, -2)


def _evolution_terms(profile, f):
    """(F, F_s, u', L F + F |W|^2_F) with L the rotationally symmetric operator."""
    geo = geometry(profile, f)
    ue = profile.extended()
    Fe = np.empty(profile.N + 2)
    Fe[1:-1] = geo.F
    if profile.boundary == "periodic":
        Fe[0], Fe[-1] = geo.F[-1], geo.F[0]
    else:
        # one-sided values are discarded with the boundary points
        Fe[0], Fe[-1] = geo.F[1], geo.F[-2]
    h = profile.h
    Fx = (Fe[2:] - Fe[:-2]) / (2 * h)
    Fxx = (Fe[2:] - 2 * geo.F + Fe[:-2]) / h ** 2
    s2 = geo.s ** 2
    Fs = Fx / geo.s
    Fss = Fxx / s2 - Fx * geo.up * geo.upp / s2 ** 2
    us = geo.up / geo.s
    u = ue[1:-1]
    spherical = geo.dF[:, 1:].sum(axis=1)
    LF = geo.dF[:, 0] * Fss + spherical * Fs * us / u
    W2 = np.sum(geo.dF * geo.Z ** 2, axis=1)
    return geo.F, Fs, geo.up, LF + geo.F * W2


def evolution_residual(prev, cur, f):
    """max |d_t F - L F - F |W|^2_F| over interior points.

    d_t F is the normal time derivative: the radial graph motion carries a
    tangential component, corrected by + F u' F_s. Spatial terms are the
    average over both time levels. The residual is O(dt + h^2).
    """
    dt = cur.t - prev.t
    if dt <= 0:
        raise ValueError("profiles must be in increasing time order")
    F0, Fs0, up0, R0 = _evolution_terms(prev, f)
    F1, Fs1, up1, R1 = _evolution_terms(cur, f)
    tangential = 0.5 * (F0 * up0 * Fs0 + F1 * up1 * Fs1)
    lhs = (F1 - F0) / dt + tangential
    r = np.abs(lhs - 0.5 * (R0 + R1))[_interior(cur)]
    return float(r.max())


@dataclass
class Schedule:
    """Time-step policy, stop conditions and record cadence.

    dt is the smallest of the CFL bound, ``reaction / F_max^2`` (keeps the
    explicit ODE part accurate as curvature blows up) and ``dt_max``.
    """

    cfl: float = 0.2
    reaction: float = 0.01
    dt_max: float = math.inf
    F_stop_factor: float = 50.0
    t_max: float = math.inf
    record_every: int = 200
    u_floor_factor: float = 1e-3
    max_steps: int = 10_000_000
    threshold_factor: float = 0.5

    def dt(self, profile, geo):
        Fm = float(np.max(geo.F))
        limit = self.reaction / Fm ** 2 if Fm > 0 else math.inf
        return min(cfl_bound(profile, geo, self.cfl), limit, self.dt_max)


@dataclass
class MonitorRecord:
    """Pinching diagnostics of one time level.

    Ratios restricted to high curvature use the set F >= threshold_factor *
    F_max of this record.
    """

    step: int
    t: float
    dt: float
    F_max: float
    u_min: float
    subset_ratio: float
    kmin_ratio: float
    G1_ratio_max: float
    G_ratio_max: float
    G_eps_sigma_max: float
    residual: float
    x_at_Fmax: float
    z_at_Fmax: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    COLUMNS = ("step", "t", "dt", "F_max", "u_min", "subset_ratio", "kmin_ratio",
               "G1_ratio_max", "G_ratio_max", "G_eps_sigma_max", "residual", "x_at_Fmax")

    def row(self):
        return [getattr(self, c) for c in self.COLUMNS]

    def to_dict(self):
        return asdict(self)


@dataclass
class RunResult:
    records: list
    final: FlowProfile
    status: str  # "singular", "t_max", "max_steps", "cone-exit", "degenerate-radius"
    message: str = ""
    steps: int = 0
    F0: float = math.nan
    dt_max: float = 0.0  # largest step actually taken


def _record(k, profile, f, cfg, geo, dt, prev, sched, extras_fn):
    F = geo.F
    Zs = np.sort(geo.Z, axis=1)
    Fm = float(F.max())
    i = int(np.argmax(F))
    subset = float(np.min(Zs[:, : cfg.m + 1].sum(axis=1) / F))
    kmin = float(np.min(Zs[:, 0] / F))
    high = F >= sched.threshold_factor * Fm
    g1 = PreliminaryPinching(cfg).batch(geo.Z[high], order=0)[0]
    G1r = float(np.max(g1 / F[high]))
    g2 = cfg.M * geo.Z.sum(axis=1) - np.linalg.norm(geo.Z, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        g1_all = PreliminaryPinching(cfg).batch(geo.Z, order=0)[0]
        G = np.where(g2 > 0, g1_all ** 2 / g2, np.nan)
    Gr = float(np.nanmax(G[high] / F[high])) if np.any(~np.isnan(G[high])) else math.nan
    Ges = float(np.nanmax((G / F - cfg.eps) * F ** cfg.sigma))
    res = evolution_residual(prev, profile, f) if prev is not None else math.nan
    extras = extras_fn(profile, geo) if extras_fn else {}
    return MonitorRecord(k, profile.t, dt, Fm, float(profile.u.min()), subset, kmin,
                         G1r, Gr, Ges, res, float(profile.x[i]),
                         [float(v) for v in Zs[i] / F[i]], extras)


def run(initial, f, cfg, schedule=None, cone=None, extras=None):
    """Evolve until F_max >= F_stop, t >= t_max, cone exit or degenerate radius.

    A record is taken at step 0, every ``record_every`` steps and at the
    final time level. ``extras(profile, geometry)`` may add entries to each
    record. Cone exit and degenerate radius end the run with the matching
    status instead of raising.
    """
    sched = schedule or Schedule()
    profile = initial
    geo = geometry(profile, f)
    F0 = float(geo.F.max())
    F_stop = sched.F_stop_factor * F0
    u_floor = sched.u_floor_factor * float(initial.u.min())
    records = []
    prev = None
    status, message = "max_steps", ""
    dt = 0.0
    dt_max = 0.0
    k = 0
    while True:
        done = geo.F.max() >= F_stop or profile.t >= sched.t_max * (1 - 1e-12)
        if k % sched.record_every == 0 or done:
            records.append(_record(k, profile, f, cfg, geo, dt, prev, sched, extras))
        if done:
            status = "singular" if geo.F.max() >= F_stop else "t_max"
            break
        if k >= sched.max_steps:
            break
        dt = sched.dt(profile, geo)
        if profile.t + dt > sched.t_max:
            dt = sched.t_max - profile.t
        try:
            nxt = step(profile, f, dt, cone=cone, u_floor=u_floor, cfl=sched.cfl, geo=geo)
            geo = geometry(nxt, f)
            if cone is not None and not np.all(cone.contains(f, geo.Z)):
                raise ConeExitError("curvature left the cone", t=nxt.t)
        except ConeExitError as exc:
            status, message = "cone-exit", str(exc)
            break
        except DegenerateRadiusError as exc:
            status, message = "degenerate-radius", str(exc)
            break
        prev, profile = profile, nxt
        dt_max = max(dt_max, dt)
        k += 1
    if records and records[-1].step != k and status in ("cone-exit", "degenerate-radius"):
        try:
            records.append(_record(k, profile, f, cfg, geometry(profile, f), dt, prev,
                                   sched, extras))
        except (ConeExitError, DomainError):
            pass
    return RunResult(records, profile, status, message, k, F0, dt_max)


@dataclass
class Verdict:
    status: str  # "pass", "fail", "not-applicable"
    min_ratio: float
    beta: float
    tol: float

    def __bool__(self):
        return self.status != "fail"


def check_convexity_preservation(records, beta, h, dt):
    """Preserved (m+1)-convexity up to the discrete slack 5 h^2 + 5 dt."""
    tol = 5 * h ** 2 + 5 * dt
    if not records:
        return Verdict("not-applicable", math.nan, beta, tol)
    if records[0].subset_ratio < beta:
        return Verdict("not-applicable", records[0].subset_ratio, beta, tol)
    lo = min(r.subset_ratio for r in records)
    return Verdict("pass" if lo >= beta - tol else "fail", lo, beta, tol)


@dataclass
class Preset:
    name: str
    profile: FlowProfile
    schedule: Schedule
    exact_radius: object = None  # t -> reference radius (where meaningful)
    reference: object = None  # (x, t) -> reference profile

    def error(self, profile):
        """max |u - reference| at the profile's time level."""
        if self.reference is None:
            return math.nan
        return float(np.max(np.abs(profile.u - self.reference(profile.x, profile.t))))


def sphere_preset(n=4, N=256, R=1.0, t_max=0.2, window=0.5):
    """Middle band |x| <= window*R of a round sphere; exact ghosts on both ends.

    With the mean speed F = H/n the radius follows r^2 = R^2 - 2t.
    """
    def radius(t):
        return math.sqrt(R * R - 2.0 * t)

    def exact(x, t):
        return np.sqrt(radius(t) ** 2 - x ** 2)

    prof = FlowProfile.uniform(2 * window * R, N, lambda x: exact(x, 0.0), n,
                               "dirichlet", x0=-window * R, exact=exact)
    sched = Schedule(t_max=t_max, record_every=1000, F_stop_factor=math.inf, reaction=math.inf)
    return Preset("sphere", prof, sched, radius, exact)


def cylinder_preset(n=4, N=256, r0=1.0, L=1.0, t_max=None):
    """Round cylinder; the mean speed gives r^2 = r0^2 - 2(n-1)t/n.

    By default the run stops when the radius has halved.
    """
    rate = 2.0 * (n - 1) / n

    def radius(t):
        return math.sqrt(r0 * r0 - rate * t)

    if t_max is None:
        t_max = 0.75 * r0 * r0 / rate
    prof = FlowProfile.uniform(L, N, lambda x: np.full_like(x, r0), n, "periodic")
    sched = Schedule(t_max=t_max, record_every=1000, F_stop_factor=math.inf, reaction=math.inf)
    return Preset("cylinder", prof, sched, radius,
                  lambda x, t: np.full_like(x, radius(t)))


def dumbbell_preset(n=4, N=512, width=2.0, L=8.0, amp=0.8):
    """u = 1 - amp exp(-x^2/width^2) on [0, L] with reflecting ends.

    The neck sits at the left end (mirror symmetry), the bulb at the right.
    """
    prof = FlowProfile.uniform(L, N, lambda x: 1.0 - amp * np.exp(-x ** 2 / width ** 2), n,
                               "reflecting")
    return Preset("dumbbell", prof, Schedule(record_every=200))


PRESETS = {"sphere": sphere_preset, "cylinder": cylinder_preset, "dumbbell": dumbbell_preset}


def preset(name, **kwargs):
    try:
        return PRESETS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
