"""Action integrals along trajectories and a numerical first-variation test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from . import expr as ex
from .euler_lagrange import derivations, generalized_hamiltonian
from .integrate import loglog_slope
from .jet import JetPoint, Trajectory, trajectory_bindings
from .lagrangian import InsufficientOrderError, LagrangianModel

__all__ = [
    "PerturbationSpec",
    "StationarityReport",
    "simpson_weights",
    "action_integral",
    "stationarity_test",
    "paper_action",
    "default_eps_sweep",
]

MACHINE_EPS = np.finfo(float).eps


def default_eps_sweep() -> np.ndarray:
    return 10.0 ** -np.arange(2.0, 5.01, 0.5)


@dataclass(frozen=True)
class PerturbationSpec:
    """Bump ``eta(t) = 4^m ((t-t0)(t1-t)/(t1-t0)^2)^m`` on [t0, t1], zero outside.

    Peak value is 1 (times ``amplitude``).  ``m=None`` means N + 1 for the
    Lagrangian under test; ``t0``/``t1`` default to the trajectory's span.
    """

    m: int | None = None
    amplitude: float = 1.0
    component: int = 0
    t0: float | None = None
    t1: float | None = None

    def resolve(self, N: int, traj: Trajectory) -> "PerturbationSpec":
        m = N + 1 if self.m is None else self.m
        t0 = traj.times[0] if self.t0 is None else self.t0
        t1 = traj.times[-1] if self.t1 is None else self.t1
        if not t1 > t0:
            raise ValueError("perturbation support must have t1 > t0")
        return PerturbationSpec(m, self.amplitude, self.component, float(t0), float(t1))

    def derivatives(self, t: np.ndarray, max_order: int) -> np.ndarray:
        """``eta^(k)(t)`` for k = 0..max_order, shape (max_order+1, len(t))."""
        T = self.t1 - self.t0
        s = (np.asarray(t, dtype=float) - self.t0) / T
        p = Polynomial([0.0, 1.0, -1.0]) ** self.m * (4.0**self.m) * self.amplitude
        inside = (s >= 0) & (s <= 1)
        out = np.zeros((max_order + 1, s.size))
        for k in range(max_order + 1):
            out[k] = np.where(inside, p(s), 0.0) / T**k
            p = p.deriv()
        return out


@dataclass(frozen=True)
class StationarityReport:
    S: float
    eps: np.ndarray
    delta_s: np.ndarray
    slope: float
    intercept: float
    valid: bool
    noise_floor_hit: bool
    max_residual: float

    def as_dict(self) -> dict:
        return {
            "S": self.S,
            "slope": self.slope,
            "intercept": self.intercept,
            "valid": self.valid,
            "noiseFloorHit": self.noise_floor_hit,
        }


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights on ``n`` uniform samples.  With an odd number
    of intervals the last cell is integrated by the trapezoid rule."""
    if n < 3:
        raise ValueError("need at least 3 samples for Simpson quadrature")
    w = np.zeros(n)
    m = n if (n - 1) % 2 == 0 else n - 1
    w[:m:2] = 2.0
    w[1:m:2] = 4.0
    w[0] = w[m - 1] = 1.0
    w *= h / 3.0
    if m < n:
        w[-2] += h / 2
        w[-1] += h / 2
    return w


def _uniform(traj: Trajectory) -> Trajectory:
    if len(traj) < 3:
        raise ValueError("need at least 3 samples for the action integral")
    return traj if traj.is_uniform() else traj.resample_uniform()


def _integrand(L: LagrangianModel, times: np.ndarray, derivs: np.ndarray) -> np.ndarray:
    fn = L.__dict__.get("_np_expr")
    if fn is None:
        fn = L.__dict__["_np_expr"] = ex.compile_expr(L.expr, "numpy")
    traj = Trajectory(times, derivs)
    return np.broadcast_to(fn(trajectory_bindings(traj, L.parameters)), times.shape)


def action_integral(L: LagrangianModel, traj: Trajectory) -> float:
    """``S = int L dt`` by composite Simpson over the (uniform) samples."""
    traj = _uniform(traj)
    if traj.M < L.order:
        raise InsufficientOrderError(f"trajectory carries orders 0..{traj.M}, need {L.order}")
    w = simpson_weights(len(traj), traj.times[1] - traj.times[0])
    return float(w @ _integrand(L, traj.times, traj.derivs))


def _max_residual(L: LagrangianModel, traj: Trajectory) -> float:
    if traj.M < 2 * L.order:
        return math.inf
    d = derivations(L)
    b = trajectory_bindings(traj, L.parameters)
    vals = [np.broadcast_to(ex.compile_expr(e, "numpy")(b), traj.times.shape) for e in d.residual]
    return float(np.max(np.abs(vals)))


def stationarity_test(L: LagrangianModel, traj: Trajectory, pert: PerturbationSpec | None = None,
                      eps_sweep=None, residual_threshold: float = 1e-6) -> StationarityReport:
    """Fit ``log|S[r + eps*eta] - S[r]|`` against ``log eps``.

    A slope near 2 means the first variation vanishes; near 1 it does not.
    The report is flagged invalid when the trajectory's Euler-Lagrange residual
    exceeds ``residual_threshold``.  Points with ``|dS| < 1e3 * eps_mach * |S|``
    are excluded from the fit.
    """
    N = L.order
    traj = _uniform(traj)
    if traj.M < N:
        raise InsufficientOrderError(f"trajectory carries orders 0..{traj.M}, need {N}")
    pert = (pert or PerturbationSpec()).resolve(N, traj)
    if pert.m < N:
        raise ValueError(f"bump exponent m={pert.m} < order {N} violates the endpoint conditions")
    if not 0 <= pert.component < traj.dim:
        raise ValueError(f"component {pert.component} out of range")
    ends = pert.derivatives(np.array([traj.times[0], traj.times[-1]]), max(N - 1, 0))
    if N > 0 and np.max(np.abs(ends)) > 1e-12:
        raise ValueError("perturbation does not vanish with its first N-1 derivatives at the endpoints")
    eps_sweep = default_eps_sweep() if eps_sweep is None else np.asarray(eps_sweep, dtype=float)

    w = simpson_weights(len(traj), traj.times[1] - traj.times[0])
    base = _integrand(L, traj.times, traj.derivs)
    S = float(w @ base)
    eta = pert.derivatives(traj.times, traj.M).T  # (K, M+1)
    deltas = []
    for eps in eps_sweep:
        d = np.array(traj.derivs, copy=True)
        d[:, :, pert.component] += eps * eta
        deltas.append(float(w @ (_integrand(L, traj.times, d) - base)))
    deltas = np.array(deltas)

    floor = 1e3 * MACHINE_EPS * abs(S)
    keep = np.abs(deltas) >= floor
    if keep.sum() >= 2:
        slope, intercept = loglog_slope(eps_sweep[keep], deltas[keep])
    else:
        slope = intercept = math.nan
    resid = _max_residual(L, traj)
    return StationarityReport(
        S=S,
        eps=eps_sweep,
        delta_s=deltas,
        slope=slope,
        intercept=intercept,
        valid=bool(resid <= residual_threshold),
        noise_floor_hit=bool(not keep.all()),
        max_residual=resid,
    )


def paper_action(L: LagrangianModel, jet: JetPoint) -> float:
    """``sum_a p_a r^(a)`` with the standard momenta; the same contraction as
    the ``"paper"`` Hamilton function.  Unrelated in general to
    :func:`action_integral`."""
    return generalized_hamiltonian(L, jet, "paper")
