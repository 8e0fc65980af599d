import numpy as np
import pytest

from hodyn import expr as ex
from hodyn.jet import Bindings, JetPoint
from hodyn.lagrangian import (
    ExpressionLagrangian,
    InsufficientOrderError,
    QuadraticLagrangian,
    energy_ranks,
    eval_lagrangian,
    harmonic,
    pais_uhlenbeck,
    partial_wrt_order,
)


class TestEval:
    def test_free_particle(self):
        assert eval_lagrangian(QuadraticLagrangian((0, 0.5)), JetPoint.scalar([5, 2])) == 2.0

    def test_harmonic(self):
        assert eval_lagrangian(QuadraticLagrangian((-0.5, 0.5)), JetPoint.scalar([1, 0])) == -0.5

    def test_expression(self):
        L = ExpressionLagrangian("b*r1^2 - a*r0^2", {"a": 1, "b": 1})
        assert eval_lagrangian(L, JetPoint.scalar([1, 2])) == 3.0

    def test_insufficient_order(self):
        with pytest.raises(InsufficientOrderError):
            eval_lagrangian(pais_uhlenbeck(), JetPoint.scalar([1, 2]))

    def test_vector_quadratic(self):
        L = harmonic(2.0, dim=2)
        jet = JetPoint(0.0, np.array([[1.0, 2.0], [3.0, 0.5]]))
        assert eval_lagrangian(L, jet) == pytest.approx(0.5 * 9.25 - 2.0 * 5.0)


class TestPartial:
    def test_free_particle_momentum(self):
        assert partial_wrt_order(QuadraticLagrangian((0, 0.5)), 1) == ex.parse("r1")

    def test_cr2_squared(self):
        a, b, c = 0.3, -1.1, 2.5
        L = QuadraticLagrangian((a, b, c))
        assert partial_wrt_order(L, 2) == ex.mul(ex.Const(2 * c), ex.JetVar(2))
        assert partial_wrt_order(L, 4) == ex.Const(0.0)

    def test_expression_matches_finite_difference(self, rng):
        L = ExpressionLagrangian("a*r2^2*exp(-r0^2) + sin(r1)*r0 - b*r1^4", {"a": 0.7, "b": 0.2})
        for _ in range(20):
            jet = JetPoint.scalar(rng.uniform(-1.5, 1.5, 3))
            for n in range(3):
                d = ex.evaluate(partial_wrt_order(L, n), Bindings(jet, L.parameters))
                h = 1e-6 * max(1.0, abs(jet[n][0]))
                up = L.value(jet.with_order(n, jet[n] + h))
                dn = L.value(jet.with_order(n, jet[n] - h))
                fd = (up - dn) / (2 * h)
                assert abs(d - fd) <= 1e-6 * max(abs(d), abs(fd)) + 1e-9


def test_quadratic_and_expression_agree(rng):
    c = (0.7, -1.3, 0.45, 2.0)
    Q = QuadraticLagrangian(c)
    E = ExpressionLagrangian(" + ".join(f"c{n}*r{n}^2" for n in range(4)), {f"c{n}": v for n, v in enumerate(c)})
    for _ in range(50):
        jet = JetPoint.scalar(rng.normal(size=4) * 3)
        q, e = eval_lagrangian(Q, jet), eval_lagrangian(E, jet)
        assert abs(q - e) <= 1e-12 * max(1.0, abs(q))
        for n in range(4):
            pq = ex.evaluate(partial_wrt_order(Q, n), Bindings(jet))
            pe = ex.evaluate(partial_wrt_order(E, n), Bindings(jet, E.parameters))
            assert abs(pq - pe) <= 1e-12 * max(1.0, abs(pq))


class TestEnergyRanks:
    def test_first_rank(self):
        er = energy_ranks(QuadraticLagrangian((1, 1)), JetPoint.scalar([2, 3]))
        assert er.ranks == (13.0,) and er.total == 13.0

    def test_pairs(self):
        er = energy_ranks(QuadraticLagrangian((1, 1, 1, 1)), JetPoint.scalar([1, 1, 1, 1]))
        assert er.ranks == (2.0, 2.0) and er.total == 4.0

    def test_zero_jet(self):
        er = energy_ranks(QuadraticLagrangian((1, 2, 3)), JetPoint.scalar([0, 0, 0]))
        assert er.ranks == (0.0, 0.0) and er.total == 0.0

    def test_unpaired(self):
        er = energy_ranks(QuadraticLagrangian((1, 2, 3)), JetPoint.scalar([1, 1, 1]), paired=False)
        assert er.ranks == (1.0, 2.0, 3.0)

    def test_total_matches_direct_evaluation(self, rng):
        for _ in range(20):
            c = tuple(rng.normal(size=6))
            L = QuadraticLagrangian(c)
            jet = JetPoint.scalar(rng.normal(size=6))
            er = energy_ranks(L, jet)
            assert abs(er.total - sum(er.ranks)) <= 1e-12 * max(1.0, abs(er.total))
            assert abs(er.total - eval_lagrangian(L, jet)) <= 1e-12 * max(1.0, abs(er.total))


def test_zero_top_coefficient_reduces_order():
    with pytest.warns(RuntimeWarning):
        L = QuadraticLagrangian((1.0, 0.5, 0.0))
    assert L.order == 1


def test_expression_dimension_inference():
    L = ExpressionLagrangian("0.5*(r1_x^2 + r1_y^2)")
    assert L.dim == 2 and L.components == ("x", "y")
    with pytest.raises(ValueError):
        ExpressionLagrangian("r1_x^2 + r0^2")
    with pytest.raises(ValueError):
        ExpressionLagrangian("a*r1^2")


def test_presets():
    assert harmonic(2.0).coeffs == (-2.0, 0.5)
    assert pais_uhlenbeck(1.0, 2.0).coeffs == (2.0, -2.5, 0.5)
