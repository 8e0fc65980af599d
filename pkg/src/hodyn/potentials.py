"""Gravitational potential models and central-force orbits.

Three radial potentials are supported, all written as positive quantities
(attraction corresponds to a potential that grows toward the source):

* ``newtonian``    phi = G M / r
* ``exponential``  phi = (G M / k) exp(k / r)          (variant ``raw``)
                   phi = (G M / k) (exp(k / r) - 1)    (variant ``shifted``)
* ``series``       phi = G M sum_i c_i (k / r)^i,  i = 1, 2, ...

The shifted exponential expands into the series with ``c_i = 1 / (k i!)``, so
``c_1 = 1/k`` gives the Newtonian limit ``G M / r`` for ``r >> k``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import expr as ex
from .integrate import IntegrationError, IntegratorSpec, SolveResult, solve
from .jet import Trajectory

__all__ = [
    "G_SI",
    "PLANCK_LENGTH",
    "PotentialModel",
    "SourceModel",
    "SeriesRecord",
    "SeriesDiagnostics",
    "ComparisonRow",
    "OrbitStats",
    "OrbitResult",
    "gravitational_radius",
    "potential_value",
    "potential_force",
    "newtonian_comparison",
    "exponential_series_coefficients",
    "taylor_series_coefficients",
    "series_divergence_scan",
    "radial_laplacian",
    "laplacian_residual",
    "orbit_simulate",
]

G_SI = 6.67430e-11
C_SI = 299_792_458.0
PLANCK_LENGTH = 1.616255e-35

KINDS = ("newtonian", "exponential", "series")
VARIANTS = ("raw", "shifted")


def gravitational_radius(M: float, G: float = G_SI) -> float:
    """``r_g = 2 G M / c^2``."""
    return 2.0 * G * M / C_SI**2


@dataclass(frozen=True)
class PotentialModel:
    kind: str = "newtonian"
    G: float = 1.0
    M: float = 1.0
    k: float = 1.0
    variant: str = "shifted"
    coefficients: tuple[float, ...] = ()
    phi0: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not (self.G > 0 and self.M > 0 and self.k > 0):
            raise ValueError("G, M and k must be positive")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.kind == "series" and not self.coefficients:
            raise ValueError("series potential needs at least one coefficient")

    @property
    def GM(self) -> float:
        return self.G * self.M

    @property
    def scale(self) -> float:
        """Prefactor of exp(k/r): ``phi0`` when given, else ``G M / k``."""
        return self.GM / self.k if self.phi0 is None else self.phi0

    def describe(self) -> str:
        if self.kind == "exponential":
            return f"exponential[{self.variant}]"
        return self.kind


@dataclass(frozen=True)
class SourceModel:
    """Point mass or uniform ball; ``kappa`` is carried for unit bookkeeping only."""

    mass: float
    radius: float = 0.0
    kappa: float = 4 * math.pi * G_SI

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError("source mass must be positive and finite")
        if self.radius < 0:
            raise ValueError("source radius must be non-negative")

    def density(self, r: float) -> float:
        if self.radius == 0.0:
            return math.inf if r == 0 else 0.0
        return self.mass / (4 / 3 * math.pi * self.radius**3) if r <= self.radius else 0.0


def _check_r(r: float) -> None:
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r!r}")


def potential_value(p: PotentialModel, r: float) -> float:
    _check_r(r)
    if p.kind == "newtonian":
        return p.GM / r
    if p.kind == "exponential":
        x = p.k / r
        if p.variant == "raw":
            return p.scale * math.exp(x)
        return p.scale * math.expm1(x)
    x = p.k / r
    return p.GM * math.fsum(c * x ** (i + 1) for i, c in enumerate(p.coefficients))


def potential_force(p: PotentialModel, r: float) -> float:
    """Magnitude of the attractive radial force per unit test mass, ``-dphi/dr``."""
    _check_r(r)
    if p.kind == "newtonian":
        return p.GM / r**2
    if p.kind == "exponential":
        return p.scale * p.k / r**2 * math.exp(p.k / r)
    x = p.k / r
    return p.GM / r * math.fsum((i + 1) * c * x ** (i + 1) for i, c in enumerate(p.coefficients))


NEWTON_LIMIT = 1e-6
STRONG = 10.0


@dataclass(frozen=True)
class ComparisonRow:
    r: float
    phi_model: float
    phi_newton: float
    force_model: float
    force_newton: float
    ratio: float
    regime: str

    @property
    def phi_difference(self) -> float:
        return self.phi_model - self.phi_newton


def _regime(ratio: float) -> str:
    if abs(ratio - 1.0) < NEWTON_LIMIT:
        return "newtonian-limit"
    if ratio > STRONG:
        return "strong"
    return "intermediate"


def newtonian_comparison(p: PotentialModel, radii: Sequence[float]) -> list[ComparisonRow]:
    newton = PotentialModel("newtonian", p.G, p.M, p.k)
    rows = []
    for r in radii:
        fm, fn = potential_force(p, r), potential_force(newton, r)
        ratio = fm / fn
        rows.append(
            ComparisonRow(r, potential_value(p, r), potential_value(newton, r), fm, fn, ratio, _regime(ratio))
        )
    return rows


def exponential_series_coefficients(k: float, terms: int) -> tuple[float, ...]:
    """``c_i = 1 / (k i!)``: the shifted exponential written as ``sum c_i (k/r)^i``."""
    return tuple(1.0 / (k * math.factorial(i)) for i in range(1, terms + 1))


def taylor_series_coefficients(phi: ex.Expression | str, k: float, terms: int,
                               var: str = "u", params: dict | None = None) -> tuple[float, ...]:
    """Series coefficients of ``phi(u)`` in powers of ``k u`` from repeated
    symbolic differentiation at ``u = 0``: ``c_i = phi^(i)(0) / (i! k^i)``.

    ``phi`` is expressed in the inverse radius ``u = 1/r`` and excludes the
    ``G M`` factor.
    """
    e = ex.parse(phi) if isinstance(phi, str) else phi
    bindings = {var: 0.0, "k": k, **(params or {})}
    out = []
    for i in range(1, terms + 1):
        e = ex.partial_derivative(e, var)
        out.append(ex.evaluate(e, bindings) / (math.factorial(i) * k**i))
    return tuple(out)


@dataclass(frozen=True)
class SeriesRecord:
    r: float
    terms: tuple[float, ...]  # |c_i (k/r)^i|
    partial_sums: tuple[float, ...]  # G M sum_{j<=i} c_j (k/r)^j
    monotone_decreasing: bool
    divergent: bool


@dataclass(frozen=True)
class SeriesDiagnostics:
    records: tuple[SeriesRecord, ...]
    threshold_radius: float  # below this radius the tail terms grow


def series_divergence_scan(p: PotentialModel, radii: Sequence[float], terms: int | None = None) -> SeriesDiagnostics:
    """Term-magnitude profile of the series potential at each radius.

    A radius is flagged divergent when the tail does not decay, i.e. the last
    nonzero term is at least as large as the one before it.  The threshold
    radius is where that tail ratio equals one, ``k |c_n / c_(n-1)|`` for the
    last two nonzero coefficients.
    """
    if p.kind != "series":
        raise ValueError("divergence scan needs a series potential")
    terms = len(p.coefficients) if terms is None else terms
    if terms < 2:
        raise ValueError("need at least two terms")
    if terms > len(p.coefficients):
        raise ValueError(f"model has {len(p.coefficients)} coefficients, {terms} terms requested")
    coeffs = p.coefficients[:terms]
    nz = [i for i, c in enumerate(coeffs) if c != 0.0]
    threshold = p.k * abs(coeffs[nz[-1]] / coeffs[nz[-2]]) if len(nz) >= 2 else 0.0
    records = []
    for r in radii:
        _check_r(r)
        x = p.k / r
        signed = [c * x ** (i + 1) for i, c in enumerate(coeffs)]
        mags = tuple(abs(s) for s in signed)
        partial = tuple(p.GM * s for s in np.cumsum(signed))
        tail = [mags[i] for i in nz]
        monotone = all(b < a for a, b in zip(tail, tail[1:]))
        divergent = len(tail) >= 2 and tail[-1] >= tail[-2]
        records.append(SeriesRecord(float(r), mags, partial, monotone, divergent))
    return SeriesDiagnostics(tuple(records), threshold)


def radial_laplacian(phi: ex.Expression | str, var: str = "r") -> ex.Expression:
    """``phi'' + (2/r) phi'``, the Laplacian of a spherically symmetric field."""
    e = ex.parse(phi) if isinstance(phi, str) else phi
    r = ex.variable(var)
    d1 = ex.partial_derivative(e, r)
    d2 = ex.partial_derivative(d1, r)
    return ex.add(d2, ex.mul(ex.div(ex.Const(2.0), r), d1))


def laplacian_residual(phi: ex.Expression | str, k: float, r: float, var: str = "r",
                       params: dict | None = None) -> float:
    """Value of the radial Laplacian of ``phi`` at ``r`` (zero for vacuum solutions)."""
    _check_r(r)
    return ex.evaluate(radial_laplacian(phi, var), {var: r, "k": k, **(params or {})})


# ------------------------------------------------------------------- orbits


@dataclass(frozen=True)
class OrbitStats:
    periapsis: float
    apoapsis: float
    radial_period: float | None
    advance_per_orbit: float
    energy_drift: float
    angular_momentum_drift: float
    orbits: int
    collided: bool = False

    def as_dict(self) -> dict:
        return {
            "periapsis": self.periapsis,
            "apoapsis": self.apoapsis,
            "radialPeriod": self.radial_period,
            "advancePerOrbit": self.advance_per_orbit,
            "energyDrift": self.energy_drift,
            "angularMomentumDrift": self.angular_momentum_drift,
            "orbits": self.orbits,
            "collided": self.collided,
        }


@dataclass(frozen=True)
class OrbitResult:
    trajectory: Trajectory
    stats: OrbitStats
    periapsis_times: np.ndarray = field(repr=False)


CIRCULAR_ECC = 1e-7
COLLISION = 1e-12
PLUNGE = 1e-6


def _quintic_hermite(t0, t1, a, b):
    """Position and velocity interpolants on [t0, t1] from (x, v, acc) at both ends."""
    h = t1 - t0

    def at(t):
        s = (t - t0) / h
        s2, s3, s4, s5 = s * s, s**3, s**4, s**5
        h00 = 1 - 10 * s3 + 15 * s4 - 6 * s5
        h10 = s - 6 * s3 + 8 * s4 - 3 * s5
        h20 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5
        h01 = 10 * s3 - 15 * s4 + 6 * s5
        h11 = -4 * s3 + 7 * s4 - 3 * s5
        h21 = 0.5 * s3 - s4 + 0.5 * s5
        d00 = (-30 * s2 + 60 * s3 - 30 * s4) / h
        d10 = (1 - 18 * s2 + 32 * s3 - 15 * s4) / h
        d20 = (s - 4.5 * s2 + 6 * s3 - 2.5 * s4) / h
        d01 = (30 * s2 - 60 * s3 + 30 * s4) / h
        d11 = (-12 * s2 + 28 * s3 - 15 * s4) / h
        d21 = (1.5 * s2 - 4 * s3 + 2.5 * s4) / h
        x = h00 * a[0] + h * h10 * a[1] + h * h * h20 * a[2] + h01 * b[0] + h * h11 * b[1] + h * h * h21 * b[2]
        v = d00 * a[0] + h * d10 * a[1] + h * h * d20 * a[2] + d01 * b[0] + h * d11 * b[1] + h * h * d21 * b[2]
        return x, v

    return at


def _periapses(times: np.ndarray, jets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Times and unwrapped polar angles of radial minima (r.v crossing - to +)."""
    x, v = jets[:, 0], jets[:, 1]
    s = np.einsum("ij,ij->i", x, v)
    theta = np.unwrap(np.arctan2(x[:, 1], x[:, 0]))
    idx = np.nonzero((s[:-1] < 0) & (s[1:] >= 0))[0]
    ts, angles = [], []
    for i in idx:
        interp = _quintic_hermite(times[i], times[i + 1], jets[i], jets[i + 1])

        def radial(t):
            xx, vv = interp(t)
            return float(xx @ vv)

        lo, hi = times[i], times[i + 1]
        if radial(lo) * radial(hi) > 0:
            tp = lo if abs(radial(lo)) < abs(radial(hi)) else hi
        else:
            tp = brentq(radial, lo, hi, xtol=1e-15 * max(1.0, abs(hi)), rtol=4 * np.finfo(float).eps)
        xp, _ = interp(tp)
        a = math.atan2(xp[1], xp[0])
        ts.append(tp)
        angles.append(theta[i] + (a - theta[i] + math.pi) % (2 * math.pi) - math.pi)
    return np.array(ts), np.array(angles)


def orbit_simulate(p: PotentialModel, init: Sequence[float], t1: float,
                   spec: IntegratorSpec | None = None) -> OrbitResult:
    """Planar test-particle orbit in the static field of ``p``.

    ``init`` is ``(x, y, vx, vy)``.  Returns the trajectory (orders 0..2) and
    periapsis statistics; the advance is averaged over complete radial periods
    and is zero for orbits that are circular to 1e-7.  Integration stops early,
    with partial results and a warning, if the radius drops below 1e-12 of its
    initial value, or if the adaptive step underflows once it is below 1e-6.
    """
    spec = spec or IntegratorSpec()
    y0 = np.asarray(init, dtype=float)
    r0 = float(np.hypot(y0[0], y0[1]))
    if r0 == 0.0:
        raise ValueError("initial position must be off-center")

    def rhs(t, y):
        r = math.hypot(y[0], y[1])
        a = -potential_force(p, r) / r
        return np.array([y[2], y[3], a * y[0], a * y[1]])

    def guard(t, y):
        return math.hypot(y[0], y[1]) < COLLISION * r0

    try:
        res = solve(rhs, 0.0, y0, t1, spec, guard)
    except IntegrationError as exc:
        # an adaptive step collapses before r reaches the guard on a plunge
        part = exc.partial
        if part is None or len(part.t) < 2 or math.hypot(*part.y[-1, :2]) >= PLUNGE * r0:
            raise
        res = SolveResult(part.t, part.y, part.steps, part.rejects, part.nfev, aborted=True)
    if res.aborted:
        warnings.warn(f"collision at t={res.t[-1]}; returning partial orbit", RuntimeWarning, stacklevel=2)
    K = len(res.t)
    jets = np.zeros((K, 3, 2))
    jets[:, 0] = res.y[:, :2]
    jets[:, 1] = res.y[:, 2:]
    acc = np.array([rhs(t, y)[2:] for t, y in zip(res.t, res.y)])
    jets[:, 2] = acc
    traj = Trajectory(res.t, jets, {"method": spec.method, "steps": res.steps, "rejects": res.rejects})

    radius = np.hypot(res.y[:, 0], res.y[:, 1])
    speed2 = res.y[:, 2] ** 2 + res.y[:, 3] ** 2
    energy = 0.5 * speed2 - np.array([potential_value(p, r) for r in radius])
    ang = res.y[:, 0] * res.y[:, 3] - res.y[:, 1] * res.y[:, 2]
    peri, apo = float(radius.min()), float(radius.max())
    tp, angles = _periapses(res.t, jets)
    circular = (apo - peri) / (apo + peri) < CIRCULAR_ECC
    if circular or len(tp) < 2:
        period, advance, orbits = None, 0.0, 0
    else:
        orbits = len(tp) - 1
        period = float((tp[-1] - tp[0]) / orbits)
        direction = 1.0 if ang[0] >= 0 else -1.0
        advance = float((angles[-1] - angles[0]) / orbits - direction * 2 * math.pi)
    stats = OrbitStats(
        periapsis=peri,
        apoapsis=apo,
        radial_period=period,
        advance_per_orbit=advance,
        energy_drift=float(np.max(np.abs(energy - energy[0]))),
        angular_momentum_drift=float(np.max(np.abs(ang - ang[0]))),
        orbits=orbits,
        collided=res.aborted,
    )
    return OrbitResult(traj, stats, tp)
