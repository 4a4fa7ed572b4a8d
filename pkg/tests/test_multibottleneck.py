import cmath
import math
from dataclasses import replace

import numpy as np
import pytest

from fluidtcp import multibottleneck as mb
from fluidtcp.errors import DomainError, ScenarioError
from fluidtcp.protocols import COMPOUND_DEFAULTS


@pytest.fixture
def symmetric_top():
    return mb.MultiTopology(15, 15, 15, 139.0, 139.0, 139.0, 0.1, 0.1, COMPOUND_DEFAULTS)


@pytest.fixture
def asymmetric_top():
    return mb.MultiTopology(15, 20, 15, 139.0, 200.0, 300.0, 0.1, 0.15, COMPOUND_DEFAULTS)


def _case1(top):
    w1, w2 = mb.multi_equilibrium(top)
    mc = mb.multi_coefficients(top, w1, w2)
    return w1, mc, mb.case1_reduce(mc, top.tau1)


def _random_case1(rng):
    a = rng.uniform(0.01, 5.0)
    c = rng.uniform(0.0, 5.0)
    b = c + a + rng.uniform(0.01, 5.0)
    return a, b, c


def _random_condition1(rng):
    d = rng.uniform(0.1, 3.0)
    return mb.QuadCoefficients(
        rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0), d + rng.uniform(0.1, 3.0), d, tau1=1.0
    )


# --- equilibrium -------------------------------------------------------------------------


def test_symmetric_equilibrium_has_equal_windows(symmetric_top):
    w1, w2 = mb.multi_equilibrium(symmetric_top)
    assert w1 == w2
    assert 0 < w1 < 139.0 * 0.1
    assert max(abs(r) for r in mb.multi_residuals(symmetric_top, w1, w2)) <= mb.RESIDUAL_TOL


def test_asymmetric_equilibrium_meets_residual(asymmetric_top):
    w1, w2 = mb.multi_equilibrium(asymmetric_top)
    assert w1 != pytest.approx(w2)
    assert max(abs(r) for r in mb.multi_residuals(asymmetric_top, w1, w2)) <= mb.RESIDUAL_TOL


def test_symmetric_losses_match_when_buffers_match(symmetric_top):
    w, _ = mb.multi_equilibrium(symmetric_top)
    p1, p2, q, S = mb.losses_at(symmetric_top, w, w)
    assert p1 == p2
    assert q == pytest.approx(p1, rel=1e-12)
    assert S == pytest.approx(2 * w / 0.1)


def test_coefficients_are_positive(asymmetric_top):
    mc = mb.multi_coefficients(asymmetric_top, *mb.multi_equilibrium(asymmetric_top))
    assert all(v > 0 for v in mc.to_dict().values())
    # cross-coupling never dominates the direct terms
    assert mc.N1 * mc.N2 > mc.P1 * mc.P2


def test_pair_rhs_is_symmetric_and_vanishes_at_equilibrium(symmetric_top):
    rhs = mb.pair_rhs(symmetric_top)
    w, _ = mb.multi_equilibrium(symmetric_top)
    y = np.array([w, w])
    out = rhs(0.0, y, [y, y])
    assert out[0] == out[1]
    assert np.allclose(out, 0.0, atol=1e-9)

    off = np.array([1.2 * w, 1.2 * w])
    moved = rhs(0.0, off, [off, off])
    assert moved[0] == moved[1] and moved[0] < 0


def _numeric_jacobians(top, w1, w2):
    """d rhs / d (current, delay-tau1 state, delay-tau2 state) by central differences."""
    rhs = mb.pair_rhs(top)
    base = np.array([w1, w2])
    jac = np.zeros((3, 2, 2))
    for slot in range(3):
        for k in range(2):
            h = 1e-6 * base[k]
            cols = []
            for sign in (1.0, -1.0):
                states = [base.copy() for _ in range(3)]
                states[slot][k] += sign * h
                cols.append(rhs(0.0, states[0], states[1:]))
            jac[slot, :, k] = (cols[0] - cols[1]) / (2 * h)
    return jac


@pytest.mark.parametrize("variant", list(mb.CoeffVariant))
@pytest.mark.parametrize("which", ["symmetric", "asymmetric"])
def test_coefficients_match_numeric_linearization(variant, which, symmetric_top, asymmetric_top):
    top = replace(symmetric_top if which == "symmetric" else asymmetric_top, coeff_variant=variant)
    w1, w2 = mb.multi_equilibrium(top)
    mc = mb.multi_coefficients(top, w1, w2)
    now, lag1, lag2 = _numeric_jacobians(top, w1, w2)
    # flow 1 reads its own window at lag tau1 and flow 2's at lag tau2; flow 2 the reverse
    assert -now[0, 0] == pytest.approx(mc.M1, rel=1e-5)
    assert -now[1, 1] == pytest.approx(mc.M2, rel=1e-5)
    assert now[0, 1] == now[1, 0] == 0.0
    assert -lag1[0, 0] == pytest.approx(mc.N1, rel=1e-5)
    assert -lag2[1, 1] == pytest.approx(mc.N2, rel=1e-5)
    assert -lag2[0, 1] == pytest.approx(mc.P1, rel=1e-5)
    assert -lag1[1, 0] == pytest.approx(mc.P2, rel=1e-5)


def test_symmetric_appendix_closed_forms(symmetric_top):
    top = replace(symmetric_top, coeff_variant=mb.CoeffVariant.APPENDIX)
    alpha, beta, k, B, tau = 0.125, 0.5, 0.75, 15, 0.1
    w, mc, cc = _case1(top)
    p = (w / (tau * 139.0)) ** B
    assert alpha * w ** (k - 2) == pytest.approx(beta * (1 + 2**B) * p, rel=1e-9)

    M = beta * w * B * p / tau
    assert mc.M1 == pytest.approx(-(alpha / tau) * (k - 2) * w ** (k - 1), rel=1e-9)
    assert mc.M1 == pytest.approx(-M * (1 + 2**B) * (k - 2) / B, rel=1e-9)
    assert cc.b == pytest.approx(M * (1 + 2 ** (B - 1)), rel=1e-9)
    assert cc.c == pytest.approx(M * 2 ** (B - 1), rel=1e-9)


def test_symmetric_extended_closed_forms(symmetric_top):
    B, tau = 15, 0.1
    w, _, cc = _case1(symmetric_top)
    p = (w / (tau * 139.0)) ** B
    # core runs at 2C, so the shared queue drops at the edge rate
    M = (COMPOUND_DEFAULTS.alpha * w ** (0.75 - 1) + 0.5 * w) * B * p / tau
    assert cc.b == pytest.approx(1.5 * M, rel=1e-9)
    assert cc.c == pytest.approx(0.5 * M, rel=1e-9)


def test_appendix_variant_requires_compound(hstcp):
    with pytest.raises(DomainError):
        mb.MultiTopology(15, 15, 15, 139.0, 139.0, 139.0, 0.1, 0.1, hstcp, mb.CoeffVariant.APPENDIX)


# --- Case I ------------------------------------------------------------------------------


@pytest.mark.parametrize("variant", list(mb.CoeffVariant))
def test_compound_closed_form_matches_case1_margin(symmetric_top, variant):
    top = replace(symmetric_top, coeff_variant=variant)
    w, mc, cc = _case1(top)
    p = mb.losses_at(top, w, w)[0]
    an = mb.case1_analyze(cc)
    closed = mb.case1_compound_condition(COMPOUND_DEFAULTS.alpha, COMPOUND_DEFAULTS.k, 15, w, p, variant)
    assert closed == pytest.approx(an.margin, rel=1e-9)


def test_compound_defaults_case1_critical_delay(symmetric_top):
    _, _, cc = _case1(symmetric_top)
    an = mb.case1_analyze(cc)
    assert an.tau_c == pytest.approx(0.157, abs=5e-3)
    assert an.stable and an.stable_at(0.1) and not an.stable_at(0.2)


def test_case1_reduce_rejects_asymmetric_coefficients(asymmetric_top):
    mc = mb.multi_coefficients(asymmetric_top, *mb.multi_equilibrium(asymmetric_top))
    with pytest.raises(DomainError, match="symmetric"):
        mb.case1_reduce(mc, 0.1)


def test_case1_crossing_ordering_on_random_coefficients(rng):
    for _ in range(1000):
        a, b, c = _random_case1(rng)
        an = mb.case1_analyze(mb.CaseICoefficients(a, b, c, 1.0))
        assert an.omega1 > an.omega2
        assert an.tau1c <= an.tau2c
        assert an.tau_c == an.tau1c


def test_case1_factorization_identity(rng):
    for _ in range(50):
        a, b, c = _random_case1(rng)
        tau = rng.uniform(0.05, 2.0)
        z = complex(rng.normal(), rng.normal())
        E = cmath.exp(-z * tau)
        full = (z + a + b * E) ** 2 - (c * E) ** 2
        f1, _ = mb.case1_kappa_char(a, b, c, tau)(1.0)
        f2, _ = mb.case1_kappa_char(a, b, -c, tau)(1.0)
        assert f1(z) * f2(z) == pytest.approx(full, rel=1e-10, abs=1e-10)


def test_case1_root_on_axis_at_critical_delay(rng):
    for _ in range(20):
        a, b, c = _random_case1(rng)
        an = mb.case1_analyze(mb.CaseICoefficients(a, b, c, 1.0))
        root = mb.quasi_poly_rightmost(mb.CaseICoefficients(a, b, c, an.tau_c))
        assert abs(root.lam.real) < 1e-6
        assert root.lam.imag == pytest.approx(an.omega1, rel=1e-6)

        below = mb.quasi_poly_rightmost(mb.CaseICoefficients(a, b, c, 0.8 * an.tau_c))
        above = mb.quasi_poly_rightmost(mb.CaseICoefficients(a, b, c, 1.2 * an.tau_c))
        assert below.lam.real < 0 < above.lam.real


def test_case1_delay_independent_branch():
    an = mb.case1_analyze(mb.CaseICoefficients(3.0, 1.0, 0.5, 0.2))
    assert an.delay_independent
    assert an.tau_c == math.inf
    assert an.margin == pytest.approx(0.2 * (3.0 - 1.5))
    assert an.stable_at(1e6)
    root = mb.quasi_poly_rightmost(mb.CaseICoefficients(3.0, 1.0, 0.5, 50.0))
    assert root.lam.real < 0


@pytest.mark.parametrize("a,b,c", [(0.0, 1.0, 0.5), (1.0, 0.0, 0.5), (1.0, 1.0, -0.1), (0.5, 1.0, 2.0)])
def test_case1_rejects_out_of_domain(a, b, c):
    with pytest.raises(DomainError):
        mb.case1_analyze(mb.CaseICoefficients(a, b, c, 1.0))


def test_case1_transversality_matches_root_continuation(rng):
    for _ in range(100):
        a, b, c = _random_case1(rng)
        tau0 = rng.uniform(0.05, 2.0)
        an = mb.case1_analyze(mb.CaseICoefficients(a, b, c, 1.0))
        kappa_c = an.tau_c / tau0
        closed = mb.transversality_case1(a, b, c, tau0, kappa_c)
        assert closed > 0
        omega = kappa_c * math.sqrt((b + c) ** 2 - a * a)
        slope = mb.continue_root(mb.case1_kappa_char(a, b, c, tau0), 1j * omega, kappa_c)
        assert slope.real == pytest.approx(closed, rel=1e-4)


# --- Case II -----------------------------------------------------------------------------


def test_case2_expansion_identity(asymmetric_top, rng):
    mc = mb.multi_coefficients(asymmetric_top, *mb.multi_equilibrium(asymmetric_top))
    qc = mb.case2_reduce(mc, 0.1)
    f, _ = mb.case2_kappa_char(qc)(1.0)
    for _ in range(20):
        z = complex(rng.normal(), rng.normal()) * 10
        E = cmath.exp(-z * 0.1)
        product = (z + mc.M1 + mc.N1 * E) * (z + mc.M2 + mc.N2) - mc.P1 * mc.P2 * E
        assert f(z) == pytest.approx(product, rel=1e-9, abs=1e-6)


def test_case2_as_printed_uses_published_coefficients(asymmetric_top):
    mc = mb.multi_coefficients(asymmetric_top, *mb.multi_equilibrium(asymmetric_top))
    exp = mb.case2_reduce(mc, 0.1)
    printed = mb.case2_reduce(mc, 0.1, "as_printed")
    assert (exp.b, printed.b) == (mc.N1, mc.N2)
    assert (printed.a, printed.c, printed.d) == (exp.a, exp.d, exp.c)
    assert printed.c == mc.M1 * (mc.M2 + mc.N2)
    assert printed.d == mc.N1 * (mc.M2 + mc.N2) - mc.P1 * mc.P2
    assert printed.labeling == "as_printed"
    with pytest.raises(DomainError):
        mb.case2_reduce(mc, 0.1, "sideways")


@pytest.mark.parametrize("a,b,c,d", [(1.0, -2.0, 1.0, 1.0), (1.0, 1.0, -2.0, 1.0), (-1.0, 1.0, 1.0, 1.0)])
def test_case2_zero_delay_routh_hurwitz(a, b, c, d):
    qc = mb.QuadCoefficients(a, b, c, d, tau1=0.5)
    if a + b > 0 and c + d > 0:
        mb.case2_analyze(qc)
    else:
        with pytest.raises(DomainError, match="zero delay"):
            mb.case2_analyze(qc)


def test_case2_condition1_crossing_is_a_root(rng):
    for _ in range(200):
        qc = _random_condition1(rng)
        an = mb.case2_analyze(qc)
        assert an.classification is mb.Case2Class.CONDITION1
        omega, tau1c = an.omegas[0], an.tau1c
        f, _ = mb.case2_kappa_char(qc, tau1c)(1.0)
        assert abs(f(1j * omega)) < 1e-10 * max(1.0, qc.c)
        assert 0 < tau1c <= 2 * math.pi / omega
        assert an.tau1c_arccos <= math.pi / omega


def test_case2_classification_follows_inequalities(rng):
    seen = set()
    for _ in range(2000):
        a, b, c, d = rng.uniform(0.05, 4.0, 4)
        qc = mb.QuadCoefficients(a, b, c, d, tau1=1.0)
        A, G = 2 * d - a * a + b * b, d * d - c * c
        an = mb.case2_analyze(qc)
        if G < 0:
            expected = mb.Case2Class.CONDITION1
        elif A > 0 and A * A > 4 * G:
            expected = mb.Case2Class.CONDITION2
        else:
            expected = mb.Case2Class.STABLE_ALL_TAU
        assert an.classification is expected, (a, b, c, d)
        seen.add(expected)
        if expected is mb.Case2Class.STABLE_ALL_TAU:
            assert an.stable is True and an.tau1c is None
    assert mb.Case2Class.CONDITION1 in seen and mb.Case2Class.STABLE_ALL_TAU in seen


def test_case2_condition2_is_stable_only_below_first_crossing(caplog):
    # b large against a pushes A positive; d > c keeps G positive
    qc = mb.QuadCoefficients(0.2, 3.0, 0.5, 1.0, tau1=0.01)
    an = mb.case2_analyze(qc)
    assert an.classification is mb.Case2Class.CONDITION2
    assert an.switches_possible
    assert an.stable is True
    later = mb.case2_analyze(replace(qc, tau1=10 * an.tau1c))
    assert later.stable is None
    assert "switches" in caplog.text


def test_case2_rightmost_root_changes_sign_at_crossing(rng):
    for _ in range(10):
        qc = _random_condition1(rng)
        tau1c = mb.case2_analyze(qc).tau1c
        below = mb.quasi_poly_rightmost(replace(qc, tau1=0.8 * tau1c))
        above = mb.quasi_poly_rightmost(replace(qc, tau1=1.2 * tau1c))
        assert below.lam.real < 0 < above.lam.real


@pytest.mark.parametrize("s", [30.0, 300.0])
def test_case2_rightmost_root_under_time_rescaling(s, rng):
    for _ in range(5):
        qc = _random_condition1(rng)
        qc = replace(qc, tau1=0.8 * mb.case2_analyze(qc).tau1c)
        fast = mb.QuadCoefficients(s * qc.a, s * qc.b, s * s * qc.c, s * s * qc.d, qc.tau1 / s)
        base, root = mb.quasi_poly_rightmost(qc), mb.quasi_poly_rightmost(fast)
        assert root.lam.real == pytest.approx(s * base.lam.real, rel=1e-6)
        # residual is reported unnormalized
        f, _ = mb.case2_kappa_char(fast)(1.0)
        raw = abs(f(np.array([root.lam]))[0])
        assert root.residual == pytest.approx(raw, rel=1e-6, abs=1e-14 * s * s)


def test_case2_transversality_matches_inverse_and_continuation(rng):
    for _ in range(50):
        qc = _random_condition1(rng)
        an = mb.case2_analyze(qc)
        omega, tau1c = an.omegas[0], an.tau1c
        tr = mb.transversality_case2(qc, omega, 1.0, tau1c)
        assert tr.total_real == pytest.approx(tr.exact_inverse_real, rel=1e-9, abs=1e-12)
        assert not tr.precondition_violated

        slope = mb.continue_root(mb.case2_kappa_char(qc, tau1c), 1j * omega, 1.0)
        assert (1.0 / slope).real == pytest.approx(tr.total_real, rel=1e-4, abs=1e-8)


def test_case2_transversality_reports_printed_decomposition(asymmetric_top):
    t2 = mb.case2_topology(asymmetric_top, 1e-3)
    mc = mb.multi_coefficients(t2, *mb.multi_equilibrium(t2))
    qc = mb.case2_reduce(mc, t2.tau1)
    tr = mb.transversality_case2(qc, 1.0, mc=mc)
    assert tr.printed_decomposition is not None
    assert tr.sign_abc_c2_b2d in (-1, 0, 1)
    assert mb.transversality_case2(qc, 1.0).printed_decomposition is None


def test_epsilon_sensitivity_rows(asymmetric_top):
    rows = mb.epsilon_sensitivity(asymmetric_top)
    assert [r["eps_ratio"] for r in rows] == [1e-2, 1e-3, 1e-4]
    labels = {c.value for c in mb.Case2Class}
    assert all(r["classification"] in labels for r in rows)


# --- scenario parsing ----------------------------------------------------------------------


def _raw_topology():
    return {
        "B1": 15, "B2": 15, "B": 15, "C1": 139, "C2": 139, "C": 139,
        "tau1": 0.1, "tau2": 0.1, "protocol": {"kind": "compound"},
    }


def test_topology_from_dict_round_trip(symmetric_top):
    assert mb.topology_from_dict(_raw_topology()) == symmetric_top


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"B1": None}, "topology.B1"),
        ({"C": True}, "topology.C"),
        ({"tau2": -0.1}, "topology"),
        ({"coeff_variant": "printed"}, "topology"),
    ],
)
def test_topology_from_dict_reports_field(patch, field):
    raw = _raw_topology()
    for k, v in patch.items():
        if v is None:
            raw.pop(k)
        else:
            raw[k] = v
    with pytest.raises(ScenarioError) as err:
        mb.topology_from_dict(raw)
    assert err.value.field == field
