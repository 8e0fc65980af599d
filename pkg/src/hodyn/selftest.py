"""Quick invariant checks behind ``hodyn selftest``.

Each check takes a seed, is deterministic for that seed, and returns a dict
with at least ``passed`` and ``detail``.  ``run_check`` is a module-level
function so it can be shipped to worker processes.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import expr as ex
from .action import PerturbationSpec, stationarity_test
from .euler_lagrange import derive_eom
from .integrate import IntegratorSpec, compare_taylor, conservation_report, integrate_eom
from .jet import JetPoint
from .lagrangian import QuadraticLagrangian, harmonic
from .potentials import (
    PotentialModel,
    newtonian_comparison,
    orbit_simulate,
    series_divergence_scan,
)

TIGHT = IntegratorSpec("dopri45", rel_tol=1e-12, abs_tol=1e-14)


def quadratic_from_roots(omegas, scale: float = 1.0) -> tuple[float, ...]:
    """Coefficients of ``sum c_n r_n^2`` whose characteristic roots are ``+-i omega_j``.

    The characteristic polynomial ``sum (-1)^n c_n x^n`` (with ``x = lambda^2``)
    is ``scale * prod (x + omega_j^2)``.
    """
    poly = np.polynomial.polynomial.polyfromroots([-(w * w) for w in omegas]) * scale
    return tuple(float((-1) ** n * c) for n, c in enumerate(poly))


def characteristic_solution(coeffs, jet0, t: np.ndarray) -> np.ndarray:
    """Position ``r(t)`` of the linear EOM from its characteristic roots.

    Roots of ``sum (-1)^n c_n lambda^(2n)`` must be distinct; amplitudes come
    from a Vandermonde solve against the initial derivatives.
    """
    N = len(coeffs) - 1
    char = np.zeros(2 * N + 1)
    for n, c in enumerate(coeffs):
        char[2 * n] = (-1) ** n * c
    lam = np.polynomial.polynomial.polyroots(char)
    V = np.vander(lam, 2 * N, increasing=True).T  # V[k, j] = lam_j^k
    amp = np.linalg.solve(V, np.asarray(jet0, dtype=complex))
    return np.real(np.exp(np.outer(t, lam)) @ amp)


# ----------------------------------------------------------------- checks


def check_expr_derivatives(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    e = ex.parse("a*r2^2*exp(-r0^2/4) + sin(r1)*r0 - b*r1^4 + cos(r0*r2)")
    params = {"a": 0.7, "b": 0.2}
    worst = 0.0
    for _ in range(20):
        point = dict(zip(("r0", "r1", "r2"), rng.uniform(-1.5, 1.5, 3)))
        point.update(params)
        for name in ("r0", "r1", "r2"):
            d = ex.evaluate(ex.partial_derivative(e, ex.variable(name)), point)
            h = 1e-5 * max(1.0, abs(point[name]))
            up, dn = dict(point), dict(point)
            up[name] += h
            dn[name] -= h
            fd = (ex.evaluate(e, up) - ex.evaluate(e, dn)) / (2 * h)
            worst = max(worst, abs(d - fd) / max(1e-3, abs(d), abs(fd)))
    return {"passed": worst < 1e-6, "detail": f"max relative FD mismatch {worst:.2e}", "value": worst}


def check_taylor_order(seed: int) -> dict:
    traj = integrate_eom(derive_eom(harmonic()), JetPoint.scalar([1.0, 0.0]), 8.0,
                         IntegratorSpec("rk4", step=2.0**-8), jet_order=4)
    slopes = {o: compare_taylor(traj, o).slope for o in (2, 4)}
    ok = all(abs(s - (o + 1)) <= 0.2 for o, s in slopes.items())
    return {"passed": ok, "detail": ", ".join(f"order {o}: slope {s:.3f}" for o, s in slopes.items()),
            "value": list(slopes.values())}


def check_harmonic_conservation(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    omega = float(rng.uniform(0.5, 2.0))
    L = harmonic(omega)
    traj = integrate_eom(derive_eom(L), JetPoint.scalar(rng.normal(size=2)), 2 * math.pi / omega, TIGHT)
    drift = conservation_report(traj, L).max_drift
    return {"passed": drift < 1e-8, "detail": f"omega={omega:.4f}, H drift per period {drift:.2e}", "value": drift}


def check_quadratic_oracle(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for N in (1, 2, 3):
        omegas = np.sort(rng.uniform(0.5, 2.0, N))
        coeffs = quadratic_from_roots(omegas, float(rng.uniform(0.5, 2.0)))
        jet0 = rng.normal(size=2 * N)
        traj = integrate_eom(derive_eom(QuadraticLagrangian(coeffs)), JetPoint.scalar(jet0),
                             2 * math.pi / omegas[0], TIGHT)
        ref = characteristic_solution(coeffs, jet0, traj.times)
        err = np.max(np.abs(traj.derivs[:, 0, 0] - ref)) / np.max(np.abs(ref))
        worst = max(worst, float(err))
    return {"passed": worst < 1e-6, "detail": f"max relative deviation {worst:.2e} for N=1,2,3", "value": worst}


def check_stationarity(seed: int) -> dict:
    L = harmonic()
    traj = integrate_eom(derive_eom(L), JetPoint.scalar([1.0, 0.0]), 2 * math.pi,
                         IntegratorSpec("rk4", step=2 * math.pi / 2000))
    rep = stationarity_test(L, traj, PerturbationSpec(m=2))
    ok = rep.valid and 1.8 <= rep.slope <= 2.2
    return {"passed": ok, "detail": f"slope {rep.slope:.4f}, valid={rep.valid}", "value": rep.slope}


def check_potential_ratio(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    k = float(rng.uniform(0.1, 1.0))
    radii = rng.uniform(0.1, 5.0, 16)
    rows = newtonian_comparison(PotentialModel("exponential", k=k), radii)
    worst = max(abs(row.ratio - math.exp(k / row.r)) / math.exp(k / row.r) for row in rows)
    return {"passed": worst < 1e-12, "detail": f"k={k:.4f}, max relative error {worst:.2e}", "value": worst}


def check_series_flags(seed: int) -> dict:
    k = 1.0
    diag = series_divergence_scan(PotentialModel("series", k=k, coefficients=(1.0,) * 8), [2 * k, k, k / 2])
    flags = [rec.divergent for rec in diag.records]
    return {"passed": flags == [False, True, True], "detail": f"divergent at r=2k,k,k/2: {flags}", "value": flags}


def check_circular_orbit(seed: int) -> dict:
    p = PotentialModel("newtonian")
    r0 = 1.0
    res = orbit_simulate(p, (r0, 0.0, 0.0, 1.0), 2 * math.pi, IntegratorSpec(rel_tol=1e-10, abs_tol=1e-12))
    radius = np.linalg.norm(res.trajectory.derivs[:, 0, :], axis=1)
    dev = float(np.max(np.abs(radius - r0)) / r0)
    return {"passed": dev < 1e-6, "detail": f"max radius deviation {dev:.2e}", "value": dev}


CHECKS: dict[str, Callable[[int], dict]] = {
    "expr-derivatives": check_expr_derivatives,
    "taylor-order": check_taylor_order,
    "harmonic-conservation": check_harmonic_conservation,
    "quadratic-oracle": check_quadratic_oracle,
    "stationarity": check_stationarity,
    "potential-ratio": check_potential_ratio,
    "series-flags": check_series_flags,
    "circular-orbit": check_circular_orbit,
}


def run_check(name: str, seed: int) -> dict:
    try:
        out = CHECKS[name](seed)
    except Exception as exc:  # a crashing check is a failing check
        out = {"passed": False, "detail": f"{type(exc).__name__}: {exc}"}
    return {"name": name, **out}
