"""Explicit Runge-Kutta integration of equations of motion, plus conservation
and Taylor-propagation diagnostics on the resulting trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as ex
from .euler_lagrange import EOMSystem, derivations
from .jet import JetPoint, Trajectory, _propagate_many, trajectory_bindings
from .lagrangian import InsufficientOrderError, LagrangianModel

__all__ = [
    "IntegrationError",
    "IntegratorSpec",
    "SolveResult",
    "ConservationReport",
    "TaylorComparison",
    "rk4_solve",
    "dopri_solve",
    "solve",
    "integrate_eom",
    "conservation_report",
    "compare_taylor",
    "loglog_slope",
]

METHODS = ("rk4", "dopri45")


class IntegrationError(RuntimeError):
    """Integration failure; ``partial`` holds the accepted steps, if any."""

    def __init__(self, message: str, partial: "SolveResult | None" = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class IntegratorSpec:
    """``rk4`` uses the fixed ``step``; ``dopri45`` the tolerances."""

    method: str = "dopri45"
    step: float | None = None
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "rk4" and (self.step is None or not self.step > 0):
            raise ValueError("rk4 needs a positive step")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass
class SolveResult:
    t: np.ndarray
    y: np.ndarray
    steps: int = 0
    rejects: int = 0
    nfev: int = 0
    aborted: bool = False


RHS = Callable[[float, np.ndarray], np.ndarray]
Guard = Callable[[float, np.ndarray], bool]


def rk4_solve(f: RHS, t0: float, y0, t1: float, h: float, guard: Guard | None = None,
              max_steps: int = 1_000_000) -> SolveResult:
    """Classical RK4 on a uniform grid; the step is shrunk slightly so that the
    grid lands exactly on ``t1``."""
    n = max(1, math.ceil((t1 - t0) / h - 1e-9))
    if n > max_steps:
        raise IntegrationError(f"{n} steps needed, max_steps is {max_steps}")
    h = (t1 - t0) / n
    ts = t0 + h * np.arange(n + 1)
    ts[-1] = t1
    ys = np.empty((n + 1, len(y0)))
    y = np.array(y0, dtype=float)
    ys[0] = y
    for i in range(n):
        t = ts[i]
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i + 1] = y
        if guard is not None and guard(ts[i + 1], y):
            return SolveResult(ts[: i + 2], ys[: i + 2], i + 1, 0, 4 * (i + 1), aborted=True)
    return SolveResult(ts, ys, n, 0, 4 * n)


# Dormand-Prince 5(4)
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


def _initial_step(f, t0, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    d2 = np.sqrt(np.mean(((f(t0 + h0, y1) - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def dopri_solve(f: RHS, t0: float, y0, t1: float, rtol: float = 1e-10, atol: float = 1e-12,
                max_steps: int = 1_000_000, guard: Guard | None = None) -> SolveResult:
    """Adaptive Dormand-Prince 5(4) with proportional step control.

    Every accepted step is recorded; the final step is clipped to ``t1``.
    """
    span = t1 - t0
    if not span > 0:
        raise IntegrationError("t1 must be greater than t0")
    y = np.array(y0, dtype=float)
    t = float(t0)
    k = np.empty((7, y.size))
    k[0] = f(t, y)
    nfev = 1
    h = _initial_step(f, t, y, k[0], rtol, atol, span)
    nfev += 1
    ts, ys = [t], [y.copy()]
    steps = rejects = 0
    rejected_last = False
    while t < t1:
        if steps + rejects >= max_steps:
            raise IntegrationError(f"max_steps={max_steps} exceeded at t={t}",
                                   SolveResult(np.array(ts), np.array(ys), steps, rejects, nfev))
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t} (h={h})",
                                   SolveResult(np.array(ts), np.array(ys), steps, rejects, nfev))
        last = t + h >= t1
        if last:
            h = t1 - t
        for s in range(1, 7):
            k[s] = f(t + _C[s] * h, y + h * (np.dot(_A[s], k[:s])))
        nfev += 6
        y_new = y + h * (_B @ k)
        err_vec = h * (_E @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if not math.isfinite(err):
            rejects += 1
            h *= MIN_FACTOR
            rejected_last = True
            continue
        if err <= 1.0:
            t = t1 if last else t + h
            y = y_new
            k[0] = k[6]  # FSAL
            steps += 1
            ts.append(t)
            ys.append(y.copy())
            if guard is not None and guard(t, y):
                return SolveResult(np.array(ts), np.array(ys), steps, rejects, nfev, aborted=True)
            factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
            if rejected_last:
                factor = min(factor, 1.0)
            h *= factor
            rejected_last = False
        else:
            rejects += 1
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            rejected_last = True
    return SolveResult(np.array(ts), np.array(ys), steps, rejects, nfev)


def solve(f: RHS, t0: float, y0, t1: float, spec: IntegratorSpec, guard: Guard | None = None) -> SolveResult:
    if spec.method == "rk4":
        return rk4_solve(f, t0, y0, t1, spec.step, guard, spec.max_steps)
    return dopri_solve(f, t0, y0, t1, spec.rel_tol, spec.abs_tol, spec.max_steps, guard)


def _jets_from_states(sys: EOMSystem, ts: np.ndarray, ys: np.ndarray, max_order: int) -> np.ndarray:
    k = 2 * sys.order
    K = len(ts)
    derivs = np.zeros((K, max_order + 1, sys.dim))
    derivs[:, :k, :] = ys.reshape(K, sys.dim, k).transpose(0, 2, 1)
    if sys.matrix is not None:
        # y^(j) = A^j y; its last slot per component block is r^(2N-1+j)
        Y = ys
        for m in range(k, max_order + 1):
            Y = Y @ sys.matrix.T
            derivs[:, m, :] = Y.reshape(K, sys.dim, k)[:, :, -1]
        return derivs
    for i in range(K):
        derivs[i] = sys.jet_from_state(ts[i], ys[i], max_order).derivs
    return derivs


def integrate_eom(sys: EOMSystem, init: JetPoint, t1: float, spec: IntegratorSpec,
                  jet_order: int | None = None) -> Trajectory:
    """Integrate from ``init`` to ``t1``.

    Samples carry orders ``0..max(2N, jet_order)``: the state supplies orders
    below 2N and the rest follow from the equation of motion.
    """
    if not t1 > init.t:
        raise IntegrationError("t1 must be greater than the initial time")
    y0 = sys.state_from_jet(init)
    res = solve(sys.rhs, init.t, y0, t1, spec)
    M = max(2 * sys.order, jet_order or 0)
    derivs = _jets_from_states(sys, res.t, res.y, M)
    meta = {"method": spec.method, "steps": res.steps, "rejects": res.rejects, "nfev": res.nfev}
    return Trajectory(res.t, derivs, meta)


@dataclass(frozen=True)
class ConservationReport:
    quantity: str
    initial: float
    max_drift: float
    drift_rate: float
    samples: int
    conserved: bool
    values: np.ndarray = field(repr=False, compare=False, default=None)


def conservation_report(traj: Trajectory, L: LagrangianModel, convention: str = "standard",
                        tol: float = 1e-6) -> ConservationReport:
    """Generalized Hamiltonian along ``traj``; ``conserved`` iff max drift <= tol."""
    if len(traj) < 2:
        raise ValueError("too few samples for a conservation report")
    need = max(2 * L.order - 1, L.order)
    if traj.M < need:
        raise InsufficientOrderError(f"trajectory carries orders 0..{traj.M}, need {need}")
    d = derivations(L)
    H = d.hamiltonian(convention)
    values = np.broadcast_to(
        ex.compile_expr(H, "numpy")(trajectory_bindings(traj, L.parameters)), (len(traj),)
    ).astype(float)
    drift = float(np.max(np.abs(values - values[0])))
    span = float(traj.times[-1] - traj.times[0])
    return ConservationReport(
        quantity=f"hamiltonian[{convention}]",
        initial=float(values[0]),
        max_drift=drift,
        drift_rate=drift / span,
        samples=len(traj),
        conserved=drift <= tol,
        values=values,
    )


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of log|y| against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float)))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


@dataclass(frozen=True)
class TaylorComparison:
    order: int
    horizons: np.ndarray
    errors: np.ndarray
    slope: float


def compare_taylor(traj: Trajectory, order: int, horizons=None) -> TaylorComparison:
    """Max position error of order-``order`` Taylor propagation from every
    sample against the sample nearest ``t_i + dt``, over dyadic ``dt``.

    Errors at roundoff level are left out of the slope fit; if fewer than two
    points remain the slope is NaN.
    """
    if traj.M < order:
        raise InsufficientOrderError(f"trajectory carries orders 0..{traj.M}, need {order}")
    t = traj.times
    span = t[-1] - t[0]
    if horizons is None:
        h = float(np.median(np.diff(t)))
        horizons = [h * 2.0**j for j in range(1, 12) if h * 2.0**j <= span / 4]
    horizons = np.asarray(horizons, dtype=float)
    pos = traj.derivs[:, 0, :]
    errors = np.zeros(len(horizons))
    for n, H in enumerate(horizons):
        starts = np.nonzero(t + H <= t[-1] + 1e-12 * span)[0]
        target = t[starts] + H
        j = np.clip(np.searchsorted(t, target), 1, len(t) - 1)
        j = np.where(np.abs(t[j - 1] - target) <= np.abs(t[j] - target), j - 1, j)
        pred = _propagate_many(traj.derivs[starts], t[j] - t[starts], order)
        errors[n] = float(np.max(np.linalg.norm(pos[j] - pred, axis=1))) if len(starts) else np.nan
    floor = 1e-13 * max(1.0, float(np.max(np.abs(pos))))
    ok = np.isfinite(errors) & (errors > floor)
    slope = loglog_slope(horizons[ok], errors[ok])[0] if ok.sum() >= 2 else float("nan")
    return TaylorComparison(order, horizons, errors, slope)
