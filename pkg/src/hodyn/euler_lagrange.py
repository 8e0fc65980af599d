"""Euler-Lagrange machinery for Lagrangians depending on r, r', ..., r^(N).

The residual convention is ``sum_n (-1)^n d^n/dt^n (dL/dr^(n)) = 0``.  Two
momentum conventions are available:

* ``"standard"`` (Ostrogradsky): ``p_a = sum_{n=a+1}^{N} (-d/dt)^(n-a-1) dL/dr^(n)``,
  whose energy ``H = sum_a p_a r^(a+1) - L`` is conserved for time independent L.
* ``"paper"``: ``p_a = sum_{n=a}^{N} (-1)^(n-a) d^(n-a)/dt^(n-a) dL/dr^(n)``, and the
  contraction ``H = sum_a p_a r^(a)``.  The ``p_0`` of this family is the
  Euler-Lagrange expression itself and vanishes on solutions.

The ``"paper"`` Hamilton function contracts the *standard* momenta with
``r^(a)``; using the literal momenta instead would make it vanish identically on
solutions of the harmonic oscillator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from . import expr as ex
from .expr import Expression
from .jet import Bindings, JetPoint
from .lagrangian import (
    InsufficientOrderError,
    LagrangianModel,
    QuadraticLagrangian,
    _check_jet,
    partial_wrt_order,
)

__all__ = [
    "DegeneracyError",
    "RootSolveError",
    "EOMSystem",
    "MomentaVector",
    "ForceLadder",
    "derivations",
    "el_residual",
    "derive_eom",
    "ostrogradsky_momenta",
    "generalized_hamiltonian",
    "force_ladder",
    "newton_balance_residual",
    "eom_document",
]

CONVENTIONS = ("standard", "paper")


class DegeneracyError(ValueError):
    """The top-order derivative cannot be solved for."""


class RootSolveError(ArithmeticError):
    pass


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


class Derivations:
    """Symbolic quantities derived from one Lagrangian, built lazily and cached.

    Indexing is ``[component][order]`` throughout.
    """

    def __init__(self, L: LagrangianModel):
        self.L = L
        self.N = L.order
        self.dim = L.dim
        self._dt_cache: dict[tuple[Expression, int], Expression] = {}
        self._compiled: dict[Expression, Callable] = {}

    def dt(self, e: Expression, k: int) -> Expression:
        """k-fold total time derivative, memoized."""
        if k == 0:
            return e
        key = (e, k)
        if key not in self._dt_cache:
            self._dt_cache[key] = ex.total_time_derivative(self.dt(e, k - 1))
        return self._dt_cache[key]

    def compiled(self, e: Expression) -> Callable:
        if e not in self._compiled:
            self._compiled[e] = ex.compile_expr(e)
        return self._compiled[e]

    def evaluate(self, e: Expression, bindings) -> float:
        return float(self.compiled(e)(bindings))

    @cached_property
    def partials(self) -> list[list[Expression]]:
        return [
            [partial_wrt_order(self.L, n, c) for n in range(self.N + 1)] for c in range(self.dim)
        ]

    @cached_property
    def residual(self) -> list[Expression]:
        out = []
        for c in range(self.dim):
            acc: Expression = ex.ZERO
            for n, p in enumerate(self.partials[c]):
                term = self.dt(p, n)
                acc = ex.add(acc, term) if n % 2 == 0 else ex.sub(acc, term)
            out.append(acc)
        return out

    def _momenta(self, c: int, start: int) -> list[Expression]:
        out = []
        for a in range(self.N):
            acc: Expression = ex.ZERO
            for n in range(a + start, self.N + 1):
                k = n - a - start
                term = self.dt(self.partials[c][n], k)
                acc = ex.add(acc, term) if k % 2 == 0 else ex.sub(acc, term)
            out.append(acc)
        return out

    @cached_property
    def momenta_standard(self) -> list[list[Expression]]:
        return [self._momenta(c, 1) for c in range(self.dim)]

    @cached_property
    def momenta_paper(self) -> list[list[Expression]]:
        return [self._momenta(c, 0) for c in range(self.dim)]

    def momenta(self, convention: str) -> list[list[Expression]]:
        return self.momenta_standard if convention == "standard" else self.momenta_paper

    @cached_property
    def hamiltonian_standard(self) -> Expression:
        acc: Expression = ex.neg(self.L.expr)
        for c in range(self.dim):
            for a, p in enumerate(self.momenta_standard[c]):
                acc = ex.add(acc, ex.mul(p, self.L.var(a + 1, c)))
        return acc

    @cached_property
    def hamiltonian_paper(self) -> Expression:
        acc: Expression = ex.ZERO
        for c in range(self.dim):
            for a, p in enumerate(self.momenta_standard[c]):
                acc = ex.add(acc, ex.mul(p, self.L.var(a, c)))
        return acc

    def hamiltonian(self, convention: str) -> Expression:
        return self.hamiltonian_standard if convention == "standard" else self.hamiltonian_paper

    @property
    def ladder_length(self) -> int:
        return math.ceil((self.N + 1) / 2)

    def ladder_partial(self, c: int, n: int) -> Expression:
        if n <= self.N:
            return self.partials[c][n]
        return partial_wrt_order(self.L, n, c)

    @cached_property
    def newton_balance(self) -> list[Expression]:
        out = []
        for c in range(self.dim):
            acc: Expression = ex.ZERO
            for a in range(self.ladder_length):
                acc = ex.add(acc, self.ladder_partial(c, 2 * a))
                acc = ex.sub(acc, self.dt(self.ladder_partial(c, 2 * a + 1), a + 1))
            out.append(acc)
        return out

    @cached_property
    def top_jacobian(self) -> list[list[Expression]]:
        """d residual_c / d r^(2N)_c'."""
        top = 2 * self.N
        return [
            [ex.partial_derivative(self.residual[c], self.L.var(top, k)) for k in range(self.dim)]
            for c in range(self.dim)
        ]

    def residual_derivative(self, c: int, k: int) -> Expression:
        return self.dt(self.residual[c], k)


def derivations(L: LagrangianModel) -> Derivations:
    d = L.__dict__.get("_derivations")
    if d is None:
        d = Derivations(L)
        L.__dict__["_derivations"] = d
    return d


def _eval_vector(d: Derivations, exprs: list[Expression], jet: JetPoint) -> np.ndarray:
    b = Bindings(jet, d.L.parameters)
    return np.array([d.evaluate(e, b) for e in exprs])


def el_residual(L: LagrangianModel, jet: JetPoint) -> np.ndarray:
    """``sum_n (-1)^n d^n/dt^n dL/dr^(n)`` per component; zero on solutions."""
    _check_jet(L, jet, 2 * L.order)
    d = derivations(L)
    return _eval_vector(d, d.residual, jet)


@dataclass(frozen=True)
class MomentaVector:
    values: np.ndarray  # (N, dim)
    convention: str


@dataclass(frozen=True)
class ForceLadder:
    forces: np.ndarray  # (ceil((N+1)/2), dim)
    momenta: np.ndarray


def ostrogradsky_momenta(
    L: LagrangianModel, jet: JetPoint, convention: str = "standard"
) -> MomentaVector:
    _check_convention(convention)
    N = L.order
    _check_jet(L, jet, 2 * N - 1 if convention == "standard" else 2 * N)
    d = derivations(L)
    b = Bindings(jet, L.parameters)
    moms = d.momenta(convention)
    vals = np.array([[d.evaluate(moms[c][a], b) for c in range(L.dim)] for a in range(N)])
    return MomentaVector(vals.reshape(N, L.dim), convention)


def generalized_hamiltonian(L: LagrangianModel, jet: JetPoint, convention: str = "standard") -> float:
    _check_convention(convention)
    _check_jet(L, jet, max(2 * L.order - 1, L.order))
    d = derivations(L)
    return d.evaluate(d.hamiltonian(convention), Bindings(jet, L.parameters))


def force_ladder(L: LagrangianModel, jet: JetPoint) -> ForceLadder:
    """``F^(a) = dL/dr^(2a)`` and ``p^(a) = dL/dr^(2a+1)`` for a < ceil((N+1)/2)."""
    _check_jet(L, jet, L.order)
    d = derivations(L)
    b = Bindings(jet, L.parameters)
    A = d.ladder_length
    F = [[d.evaluate(d.ladder_partial(c, 2 * a), b) for c in range(L.dim)] for a in range(A)]
    P = [[d.evaluate(d.ladder_partial(c, 2 * a + 1), b) for c in range(L.dim)] for a in range(A)]
    return ForceLadder(np.array(F), np.array(P))


def newton_balance_residual(L: LagrangianModel, jet: JetPoint) -> np.ndarray:
    """``sum_a F^(a) - sum_a d^(a+1)/dt^(a+1) p^(a)`` per component.

    For N = 1 this coincides with the Euler-Lagrange residual; for higher
    orders it generally does not.
    """
    d = derivations(L)
    need = max([L.order] + [ex.max_jet_order(e) for e in d.newton_balance])
    _check_jet(L, jet, need)
    return _eval_vector(d, d.newton_balance, jet)


# ------------------------------------------------------------------ EOM


@dataclass(frozen=True, eq=False)
class EOMSystem:
    """First-order reduction of the order-2N Euler-Lagrange equation.

    State layout is component-major: ``[r0_x, ..., r(2N-1)_x, r0_y, ...]``.
    """

    order: int
    dim: int
    lagrangian: LagrangianModel
    matrix: np.ndarray | None = None  # set for quadratic Lagrangians (rhs = matrix @ y)

    @property
    def state_dim(self) -> int:
        return 2 * self.order * self.dim

    def state_from_jet(self, jet: JetPoint) -> np.ndarray:
        k = 2 * self.order
        if jet.M < k - 1:
            raise InsufficientOrderError(f"initial jet needs orders 0..{k - 1}, has 0..{jet.M}")
        if jet.dim != self.dim:
            raise ValueError(f"jet dim {jet.dim} does not match system dim {self.dim}")
        return np.array(jet.derivs[:k].T.reshape(-1), dtype=float)

    def top(self, t: float, y: np.ndarray) -> np.ndarray:
        """``r^(2N)`` for the state ``y``."""
        k = 2 * self.order
        if self.matrix is not None:
            yd = self.matrix @ y
            return yd.reshape(self.dim, k)[:, -1].copy()
        return self._solve_top(t, y.reshape(self.dim, k).T)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ y
        k = 2 * self.order
        s = y.reshape(self.dim, k)
        out = np.empty_like(s)
        out[:, :-1] = s[:, 1:]
        out[:, -1] = self._solve_top(t, s.T)
        return out.reshape(-1)

    def _bindings(self, t: float, derivs: np.ndarray) -> Bindings:
        return Bindings(JetPoint(t, derivs), self.lagrangian.parameters)

    def _solve_top(self, t: float, lower: np.ndarray) -> np.ndarray:
        """Damped Newton on the residual in r^(2N), seeded at zero."""
        d = derivations(self.lagrangian)
        k = 2 * self.order
        derivs = np.zeros((k + 1, self.dim))
        derivs[:k] = lower
        x = np.zeros(self.dim)

        def resid(x):
            derivs[k] = x
            b = self._bindings(t, derivs)
            return np.array([d.evaluate(e, b) for e in d.residual]), b

        r, b = resid(x)
        for _ in range(50):
            J = np.array([[d.evaluate(e, b) for e in row] for row in d.top_jacobian])
            try:
                step = np.linalg.solve(J, r)
            except np.linalg.LinAlgError:
                raise DegeneracyError(f"singular top-order Jacobian at t={t}") from None
            lam = 1.0
            norm0 = np.linalg.norm(r)
            while True:
                x_new = x - lam * step
                r_new, b_new = resid(x_new)
                if np.linalg.norm(r_new) <= norm0 or lam < 1e-4:
                    break
                lam *= 0.5
            x, r, b = x_new, r_new, b_new
            if np.linalg.norm(lam * step) <= 1e-12 * max(1.0, np.linalg.norm(x)):
                return x
        raise RootSolveError(f"top-order solve did not converge at t={t}")

    def jet_from_state(self, t: float, y: np.ndarray, max_order: int | None = None) -> JetPoint:
        """Jet with orders 0..max_order (default 2N); orders above 2N-1 are
        obtained by differentiating the equation of motion."""
        k = 2 * self.order
        max_order = k if max_order is None else max(max_order, k - 1)
        s = np.asarray(y, dtype=float).reshape(self.dim, k).T
        derivs = np.zeros((max_order + 1, self.dim))
        derivs[:k] = s
        if max_order >= k:
            derivs[k] = self.top(t, np.asarray(y, dtype=float))
        if max_order > k:
            derivs = self._extend(t, derivs, k + 1)
        return JetPoint(t, derivs)

    def extend(self, jet: JetPoint, max_order: int) -> JetPoint:
        """Fill derivative orders up to ``max_order`` consistent with the EOM."""
        k = 2 * self.order
        if max_order < k:
            raise ValueError(f"max_order must be at least {k}")
        base = self.jet_from_state(jet.t, self.state_from_jet(jet), k)
        derivs = np.zeros((max_order + 1, self.dim))
        derivs[: k + 1] = base.derivs
        return JetPoint(jet.t, self._extend(jet.t, derivs, k + 1))

    def _extend(self, t: float, derivs: np.ndarray, start: int) -> np.ndarray:
        # d^j/dt^j of the residual is affine in r^(2N+j) with the top Jacobian
        d = derivations(self.lagrangian)
        k = 2 * self.order
        for m in range(start, derivs.shape[0]):
            j = m - k
            derivs[m] = 0.0
            b = self._bindings(t, derivs)
            r = np.array([d.evaluate(d.residual_derivative(c, j), b) for c in range(self.dim)])
            J = np.array([[d.evaluate(e, b) for e in row] for row in d.top_jacobian])
            derivs[m] = -np.linalg.solve(J, r)
        return derivs


def _quadratic_matrix(L: QuadraticLagrangian) -> np.ndarray:
    N = L.order
    c = L.coeffs
    k = 2 * N
    A1 = np.zeros((k, k))
    A1[np.arange(k - 1), np.arange(1, k)] = 1.0
    # sum_n (-1)^n c_n r^(2n) = 0 solved for r^(2N)
    for n in range(N):
        A1[k - 1, 2 * n] = -((-1) ** (n + N)) * c[n] / c[N]
    return np.kron(np.eye(L.dim), A1)


def derive_eom(L: LagrangianModel) -> EOMSystem:
    """Equation of motion for ``L`` as a first-order system in r^(0..2N-1)."""
    N = L.order
    if N == 0:
        raise DegeneracyError("Lagrangian has no derivative dependence; nothing to integrate")
    if isinstance(L, QuadraticLagrangian):
        if L.coeffs[-1] == 0.0:
            raise DegeneracyError("top-order coefficient is zero")
        return EOMSystem(N, L.dim, L, _quadratic_matrix(L))
    d = derivations(L)
    if all(isinstance(e, ex.Const) and e.value == 0.0 for row in d.top_jacobian for e in row):
        raise DegeneracyError(f"residual does not depend on r^({2 * N})")
    return EOMSystem(N, L.dim, L)


def eom_document(L: LagrangianModel) -> dict:
    """Canonical DSL text for the EOM, standard momenta and Hamiltonian.

    Raises :class:`DegeneracyError` when the EOM cannot be solved for its top
    derivative.
    """
    derive_eom(L)
    d = derivations(L)
    render = ex.render
    if L.dim == 1:
        eom = render(d.residual[0])
        momenta = [render(p) for p in d.momenta_standard[0]]
    else:
        eom = [render(e) for e in d.residual]
        momenta = [[render(p) for p in row] for row in d.momenta_standard]
    return {
        "order": L.order,
        "eom": eom,
        "momenta": momenta,
        "hamiltonian": render(d.hamiltonian_standard),
    }
