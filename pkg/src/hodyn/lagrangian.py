"""Lagrangian models: quadratic forms in derivative orders and DSL expressions."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Union

import numpy as np

from . import expr as ex
from .expr import COMPONENTS, Expression, JetVar
from .jet import Bindings, JetPoint

__all__ = [
    "QuadraticLagrangian",
    "ExpressionLagrangian",
    "LagrangianModel",
    "EnergyRanks",
    "InsufficientOrderError",
    "harmonic",
    "pais_uhlenbeck",
    "free_particle",
    "eval_lagrangian",
    "partial_wrt_order",
    "energy_ranks",
]


class InsufficientOrderError(ValueError):
    """The jet does not carry enough derivative orders for the requested quantity."""


class _Base:
    order: int
    dim: int

    @property
    def components(self) -> tuple[str | None, ...]:
        """Component labels used by the jet variables of ``expr``."""
        if self.dim == 1 and not self._labelled:
            return (None,)
        return COMPONENTS[: self.dim]

    def var(self, n: int, comp: int = 0) -> JetVar:
        return JetVar(n, self.components[comp])

    def bindings(self, jet: JetPoint) -> Bindings:
        return Bindings(jet, self.parameters)

    @cached_property
    def compiled(self):
        return ex.compile_expr(self.expr)


@dataclass(frozen=True, eq=False)
class QuadraticLagrangian(_Base):
    """``L = sum_n c_n |r^(n)|^2`` summed over components.

    Trailing zero coefficients are dropped (with a warning) so that the top
    order is nondegenerate.
    """

    coeffs: tuple[float, ...]
    dim: int = 1
    _labelled: bool = field(default=False, repr=False)

    def __post_init__(self):
        c = [float(v) for v in self.coeffs]
        if not c:
            raise ValueError("quadratic Lagrangian needs at least one coefficient")
        if not all(math.isfinite(v) for v in c):
            raise ValueError("coefficients must be finite")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(c) > 1 and c[-1] == 0.0:
            while len(c) > 1 and c[-1] == 0.0:
                c.pop()
            warnings.warn(
                f"top-order coefficient is zero; reducing order to {len(c) - 1}",
                RuntimeWarning,
                stacklevel=3,
            )
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def parameters(self) -> dict[str, float]:
        return {}

    @cached_property
    def expr(self) -> Expression:
        out: Expression = ex.ZERO
        for n, c in enumerate(self.coeffs):
            if c == 0.0:
                continue
            sq: Expression = ex.ZERO
            for k in range(self.dim):
                sq = ex.add(sq, ex.power(self.var(n, k), ex.Const(2.0)))
            out = ex.add(out, ex.mul(ex.Const(c), sq))
        return out

    def value(self, jet: JetPoint) -> float:
        d = jet.derivs
        return float(sum(c * np.dot(d[n], d[n]) for n, c in enumerate(self.coeffs)))


@dataclass(frozen=True, eq=False)
class ExpressionLagrangian(_Base):
    """A Lagrangian given as DSL text or an expression tree over ``t`` and jet
    variables, with named constant parameters."""

    expr: Expression
    params: Mapping[str, float] = field(default_factory=dict)
    dim: int | None = None  # type: ignore[assignment]

    def __post_init__(self):
        e = ex.parse(self.expr) if isinstance(self.expr, str) else self.expr
        object.__setattr__(self, "expr", e)
        object.__setattr__(self, "params", {k: float(v) for k, v in dict(self.params).items()})
        jv = ex.jet_variables(e)
        comps = {v.comp for v in jv}
        if None in comps and len(comps) > 1:
            raise ValueError("cannot mix plain r<n> and component r<n>_<c> variables")
        labelled = bool(comps) and None not in comps
        inferred = max((COMPONENTS.index(c) + 1 for c in comps if c), default=1)
        dim = inferred if self.dim is None else int(self.dim)
        if dim < inferred or dim not in (1, 2, 3):
            raise ValueError(f"dim {dim} incompatible with components {sorted(c for c in comps if c)}")
        if not labelled and dim != 1:
            raise ValueError("plain r<n> variables are only valid in one dimension")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "_labelled", labelled)
        unbound = {
            n for n in ex.free_names(e) if isinstance(ex.variable(n), ex.Param)
        } - set(self.params)
        if unbound:
            raise ValueError(f"unbound parameters in Lagrangian: {sorted(unbound)}")

    @property
    def order(self) -> int:
        return max(ex.max_jet_order(self.expr), 0)

    @property
    def parameters(self) -> dict[str, float]:
        return dict(self.params)

    def value(self, jet: JetPoint) -> float:
        return float(self.compiled(self.bindings(jet)))


LagrangianModel = Union[QuadraticLagrangian, ExpressionLagrangian]


def harmonic(omega: float = 1.0, dim: int = 1) -> QuadraticLagrangian:
    """``L = 1/2 |r'|^2 - 1/2 omega^2 |r|^2``."""
    return QuadraticLagrangian((-0.5 * omega**2, 0.5), dim)


def pais_uhlenbeck(omega1: float = 1.0, omega2: float = 2.0, dim: int = 1) -> QuadraticLagrangian:
    """``L = 1/2 r''^2 - 1/2 (w1^2 + w2^2) r'^2 + 1/2 w1^2 w2^2 r^2``.

    Its equation of motion is ``(D^2 + w1^2)(D^2 + w2^2) r = 0``.
    """
    w1, w2 = omega1**2, omega2**2
    return QuadraticLagrangian((0.5 * w1 * w2, -0.5 * (w1 + w2), 0.5), dim)


def free_particle(mass: float = 1.0, dim: int = 1) -> QuadraticLagrangian:
    return QuadraticLagrangian((0.0, 0.5 * mass), dim)


def _check_jet(L: LagrangianModel, jet: JetPoint, need: int) -> None:
    if jet.dim != L.dim:
        raise ValueError(f"jet dim {jet.dim} does not match Lagrangian dim {L.dim}")
    if jet.M < need:
        raise InsufficientOrderError(f"jet carries orders 0..{jet.M}, need {need}")


def eval_lagrangian(L: LagrangianModel, jet: JetPoint) -> float:
    _check_jet(L, jet, L.order)
    return L.value(jet)


def partial_wrt_order(L: LagrangianModel, n: int, comp: int = 0) -> Expression:
    """``dL/dr^(n)`` for one component, as an expression."""
    if n < 0:
        raise ValueError("derivative order must be non-negative")
    if not 0 <= comp < L.dim:
        raise ValueError(f"component {comp} out of range for dim {L.dim}")
    return ex.partial_derivative(L.expr, L.var(n, comp))


@dataclass(frozen=True)
class EnergyRanks:
    ranks: tuple[float, ...]
    total: float
    paired: bool = True


def energy_ranks(L: QuadraticLagrangian, jet: JetPoint, paired: bool = True) -> EnergyRanks:
    """Group ``sum_n c_n |r^(n)|^2`` into ranks of successive order pairs.

    Rank ``j`` (1-based) collects orders ``2j-2`` and ``2j-1``; with
    ``paired=False`` every order is its own entry.
    """
    if not isinstance(L, QuadraticLagrangian):
        raise TypeError("energy ranks are defined for quadratic Lagrangians")
    _check_jet(L, jet, L.order)
    terms = [c * float(np.dot(jet.derivs[n], jet.derivs[n])) for n, c in enumerate(L.coeffs)]
    if paired:
        if len(terms) % 2:
            terms.append(0.0)
        ranks = tuple(terms[i] + terms[i + 1] for i in range(0, len(terms), 2))
    else:
        ranks = tuple(terms)
    return EnergyRanks(ranks, math.fsum(terms), paired)
