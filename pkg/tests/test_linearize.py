import logging

import pytest

from fluidtcp.equilibrium import EquilibriumResult, Variant, solve_equilibrium
from fluidtcp.errors import DomainError
from fluidtcp.linearize import (
    ScalarCoefficients,
    compound_ab,
    hstcp_ab,
    hstcp_bracket,
    reno_ab,
    scalar_coefficients,
)
from fluidtcp.loss_models import DropTailSmallBuffer, loss_prob
from fluidtcp.protocols import LogLinearTable, ProtocolSpec

VARIANTS = [Variant.PLAIN, Variant.ACK_WEIGHTED]


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("B, C", [(15, 139.0), (30, 400.0), (8, 80.0)])
def test_compound_closed_form(variant, B, C, compound):
    loss = DropTailSmallBuffer(C, B, 0.1)
    eq = solve_equilibrium(compound, loss, variant)
    generic = scalar_coefficients(compound, loss, eq)
    closed = compound_ab(0.125, 0.75, B, eq.w_star, 0.1, eq.p_star, variant)
    assert generic.a == pytest.approx(closed.a, rel=1e-9)
    assert generic.b == pytest.approx(closed.b, rel=1e-9)


@pytest.mark.parametrize("variant", VARIANTS)
def test_reno_closed_form(variant):
    loss = DropTailSmallBuffer(1000.0, 20, 0.1)
    spec = ProtocolSpec.reno()
    eq = solve_equilibrium(spec, loss, variant)
    generic = scalar_coefficients(spec, loss, eq)
    closed = reno_ab(20, eq.w_star, 0.1, eq.p_star, variant)
    assert generic.a == pytest.approx(closed.a, rel=1e-9)
    assert generic.b == pytest.approx(closed.b, rel=1e-9)


@pytest.mark.parametrize("variant", VARIANTS)
def test_hstcp_closed_form(variant, hstcp):
    loss = DropTailSmallBuffer(1000.0, 20, 0.1)
    eq = solve_equilibrium(hstcp, loss, variant)
    generic = scalar_coefficients(hstcp, loss, eq)
    closed = hstcp_ab(hstcp.f1, hstcp.f2, eq.p_star, eq.w_star, 0.1, 20, variant)
    assert generic.a == pytest.approx(closed.a, rel=1e-9)
    assert generic.b == pytest.approx(closed.b, rel=1e-9)


def test_hstcp_quadratic_bracket_differs_from_cubic(hstcp):
    cubic = hstcp_bracket(hstcp.f1, hstcp.f2, 1e-3, 60.0, "cubic")
    quadratic = hstcp_bracket(hstcp.f1, hstcp.f2, 1e-3, 60.0, "quadratic")
    assert cubic != pytest.approx(quadratic, rel=1e-6)
    with pytest.raises(DomainError):
        hstcp_bracket(hstcp.f1, hstcp.f2, 1e-3, 60.0, "other")


def test_negative_a_is_logged(caplog):
    spec = ProtocolSpec.hstcp(LogLinearTable.from_pairs([[1, 1], [1000, 1e9]]), LogLinearTable.constant(0.5))
    loss = DropTailSmallBuffer(1000.0, 20, 0.1)
    eq = EquilibriumResult(50.0, loss_prob(loss, 50.0).value, 0.0, Variant.PLAIN, 0.1)
    with caplog.at_level(logging.WARNING, logger="fluidtcp.linearize"):
        c = scalar_coefficients(spec, loss, eq)
    assert c.a < 0
    assert "a = " in caplog.text


def test_scaling_keeps_products():
    c = ScalarCoefficients(0.8, 10.0, 0.1)
    s = c.scaled(4.0)
    assert s.a * s.tau == pytest.approx(c.a * c.tau)
    assert s.b * s.tau == pytest.approx(c.b * c.tau)
    assert c.with_tau(0.3).tau == 0.3


def test_delay_must_be_positive():
    with pytest.raises(DomainError):
        ScalarCoefficients(1.0, 2.0, 0.0)
