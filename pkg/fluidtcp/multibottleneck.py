"""
Two edge routers feeding one core router.

  w_j' = (w_j(t - tau_j) / tau_j) * ( i(w_j)(1 - [ext](p_j + q)) - d(w_j)(p_j + q) )
  p_j  = (w_j(t - tau_j) / (C_j tau_j)) ** B_j
  q    = ((w_1(t - tau_1)/tau_1 + w_2(t - tau_2)/tau_2) / C~) ** B

extended : ack-weighted increase, C~ = 2C
appendix : plain increase, C~ = C (Compound only)

Linearisation:  u_j' = -M_j u_j(t) - N_j u_j(t - tau_j) - P_j u_other(t - tau_other).
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Union

import numpy as np
from scipy.optimize import brentq, root

from . import roots
from .errors import DomainError, NumericError, ScenarioError
from .linearize import ScalarCoefficients
from .protocols import (
    ProtocolKind,
    ProtocolSpec,
    decrease_gain,
    decrease_gain_deriv,
    increase_gain,
    increase_gain_deriv,
    protocol_from_dict,
)
from .scalar_stability import rightmost_root, RightmostRoot

logger = logging.getLogger(__name__)

MAX_ITER = 200
RESIDUAL_TOL = 1e-10
W_LO = 1e-6


class CoeffVariant(str, Enum):
    EXTENDED = "extended"
    APPENDIX = "appendix"


@dataclass(frozen=True)
class MultiTopology:
    B1: int
    B2: int
    B: int
    C1: float
    C2: float
    C: float
    tau1: float
    tau2: float
    spec: ProtocolSpec
    coeff_variant: CoeffVariant = CoeffVariant.EXTENDED

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeff_variant", CoeffVariant(self.coeff_variant))
        for name in ("B1", "B2", "B", "C1", "C2", "C", "tau1", "tau2"):
            if not getattr(self, name) > 0:
                raise DomainError(f"topology field {name} must be positive, got {getattr(self, name)}")
        if self.coeff_variant is CoeffVariant.APPENDIX and self.spec.kind is not ProtocolKind.COMPOUND:
            raise DomainError("the appendix coefficient variant is defined for Compound only")

    @property
    def core_capacity(self) -> float:
        return 2.0 * self.C if self.coeff_variant is CoeffVariant.EXTENDED else self.C

    @property
    def symmetric(self) -> bool:
        return self.B1 == self.B2 and self.C1 == self.C2 and self.tau1 == self.tau2

    def to_dict(self) -> dict[str, Any]:
        return {
            "B1": self.B1, "B2": self.B2, "B": self.B,
            "C1": self.C1, "C2": self.C2, "C": self.C,
            "tau1": self.tau1, "tau2": self.tau2,
            "protocol": self.spec.to_dict(),
            "coeff_variant": self.coeff_variant.value,
        }


@dataclass(frozen=True)
class MultiCoefficients:
    M1: float
    M2: float
    N1: float
    N2: float
    P1: float
    P2: float

    def to_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("M1", "M2", "N1", "N2", "P1", "P2")}


@dataclass(frozen=True)
class CaseICoefficients:
    a: float
    b: float
    c: float
    tau: float


@dataclass(frozen=True)
class QuadCoefficients:
    """lambda^2 + a lambda + b lambda e^{-lambda tau1} + c e^{-lambda tau1} + d = 0."""

    a: float
    b: float
    c: float
    d: float
    tau1: float
    labeling: str = "expansion"


def topology_from_dict(raw: dict[str, Any], where: str = "topology") -> MultiTopology:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where} must be an object", field=where)
    fields = ("B1", "B2", "B", "C1", "C2", "C", "tau1", "tau2")
    for key in fields + ("protocol",):
        if key not in raw:
            raise ScenarioError(f"Missing '{key}' in {where}", field=f"{where}.{key}")
    for key in fields:
        if isinstance(raw[key], bool) or not isinstance(raw[key], (int, float)):
            raise ScenarioError(f"'{key}' in {where} must be a number, got {raw[key]!r}", field=f"{where}.{key}")
    try:
        return MultiTopology(
            int(raw["B1"]), int(raw["B2"]), int(raw["B"]),
            float(raw["C1"]), float(raw["C2"]), float(raw["C"]),
            float(raw["tau1"]), float(raw["tau2"]),
            protocol_from_dict(raw["protocol"], f"{where}.protocol"),
            CoeffVariant(raw.get("coeff_variant", "extended")),
        )
    except ScenarioError:
        raise
    except (DomainError, ValueError) as e:
        raise ScenarioError(f"Invalid {where}: {e}", field=where) from e


# --- equilibrium ------------------------------------------------------------------------


def losses_at(top: MultiTopology, w1: float, w2: float) -> tuple[float, float, float, float]:
    p1 = (w1 / (top.C1 * top.tau1)) ** top.B1
    p2 = (w2 / (top.C2 * top.tau2)) ** top.B2
    S = w1 / top.tau1 + w2 / top.tau2
    q = (S / top.core_capacity) ** top.B
    return p1, p2, q, S


def _residual(top: MultiTopology, w: float, P: float) -> tuple[float, float]:
    """(residual, scale) for one flow class at total loss P."""
    i, d = increase_gain(top.spec, w), decrease_gain(top.spec, w)
    gain = i * (1.0 - P) if top.coeff_variant is CoeffVariant.EXTENDED else i
    return gain - d * P, max(i, d * P)


def multi_residuals(top: MultiTopology, w1: float, w2: float) -> tuple[float, float]:
    """Scaled residuals of both equilibrium equations."""
    p1, p2, q, _ = losses_at(top, w1, w2)
    r1, s1 = _residual(top, w1, p1 + q)
    r2, s2 = _residual(top, w2, p2 + q)
    return r1 / s1, r2 / s2


def _solve_coordinate(top: MultiTopology, j: int, w_other: float) -> float:
    hi = (top.C1 * top.tau1) if j == 0 else (top.C2 * top.tau2)

    def r(w: float) -> float:
        pair = (w, w_other) if j == 0 else (w_other, w)
        return multi_residuals(top, *pair)[j]

    r_lo, r_hi = r(W_LO), r(hi)
    if (r_lo > 0) == (r_hi > 0):
        raise DomainError(
            f"no equilibrium in operating range for flow {j + 1} (core loss saturates)", w_other=w_other
        )
    return brentq(r, W_LO, hi, xtol=1e-300, rtol=1e-14, maxiter=500)


def multi_equilibrium(top: MultiTopology) -> tuple[float, float]:
    if top.symmetric:
        hi = top.C1 * top.tau1

        def r_sym(w: float) -> float:
            return multi_residuals(top, w, w)[0]

        if (r_sym(W_LO) > 0) == (r_sym(hi) > 0):
            raise DomainError("no symmetric equilibrium in operating range")
        w = brentq(r_sym, W_LO, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
        return w, w

    # initial point: each class solved against the other at half its edge capacity
    w1 = _solve_coordinate(top, 0, 0.5 * top.C2 * top.tau2)
    w2 = _solve_coordinate(top, 1, w1)

    def F(x: np.ndarray) -> np.ndarray:
        return np.array(multi_residuals(top, math.exp(x[0]), math.exp(x[1])))

    sol = root(F, np.log([w1, w2]), method="hybr", options={"xtol": 1e-14, "maxfev": MAX_ITER * 5})
    if sol.success and np.all(np.isfinite(sol.x)):
        c1, c2 = (math.exp(v) for v in sol.x)
        if max(abs(v) for v in multi_residuals(top, c1, c2)) <= RESIDUAL_TOL:
            return c1, c2
    logger.debug("hybrid Newton did not meet tolerance (%s); Gauss-Seidel bisection fallback", sol.message)

    for _ in range(MAX_ITER):
        w1_new = _solve_coordinate(top, 0, w2)
        w2_new = _solve_coordinate(top, 1, w1_new)
        done = abs(w1_new - w1) <= 1e-14 * w1 and abs(w2_new - w2) <= 1e-14 * w2
        w1, w2 = w1_new, w2_new
        if done or max(abs(v) for v in multi_residuals(top, w1, w2)) <= RESIDUAL_TOL * 1e-2:
            break
    res = max(abs(v) for v in multi_residuals(top, w1, w2))
    if res > RESIDUAL_TOL:
        raise NumericError(f"two-class equilibrium did not converge in {MAX_ITER} iterations", residual=res)
    return w1, w2


# --- coefficients -----------------------------------------------------------------------


def multi_coefficients(top: MultiTopology, w1: float, w2: float) -> MultiCoefficients:
    p1, p2, q, S = losses_at(top, w1, w2)
    Ct = top.core_capacity
    ext = top.coeff_variant is CoeffVariant.EXTENDED
    out: dict[str, float] = {}
    for j, (w, p, Bj, tau_j, tau_o) in enumerate(
        ((w1, p1, top.B1, top.tau1, top.tau2), (w2, p2, top.B2, top.tau2, top.tau1)), start=1
    ):
        P = p + q
        i, d = increase_gain(top.spec, w), decrease_gain(top.spec, w)
        di, dd = increase_gain_deriv(top.spec, w), decrease_gain_deriv(top.spec, w)
        g = i + d if ext else d
        inc = di * (1.0 - P) if ext else di
        dq = top.B * S ** (top.B - 1) / Ct**top.B
        out[f"M{j}"] = -(w / tau_j) * (inc - dd * P)
        out[f"N{j}"] = (w / tau_j) * g * (Bj * p / w + dq / tau_j)
        out[f"P{j}"] = (w / tau_j) * g * dq / tau_o
    mc = MultiCoefficients(**out)
    bad = [k for k, v in mc.to_dict().items() if not v > 0]
    if bad:
        logger.warning("non-positive coefficients %s at (%.6g, %.6g)", bad, w1, w2)
    return mc


def pair_rhs(top: MultiTopology) -> Callable[[float, np.ndarray, list[np.ndarray]], np.ndarray]:
    """Right-hand side of the two-class model for the DDE integrator (delays tau1, tau2 in that order)."""
    spec, Ct = top.spec, top.core_capacity
    ext = top.coeff_variant is CoeffVariant.EXTENDED
    bdp1, bdp2 = top.C1 * top.tau1, top.C2 * top.tau2

    def flow(w: float, w_del: float, p: float, q: float, tau: float) -> float:
        P = p + q
        i = increase_gain(spec, w)
        gain = i * (1.0 - P) if ext else i
        return (w_del / tau) * (gain - decrease_gain(spec, w) * P)

    def rhs(t: float, y: np.ndarray, yd: list[np.ndarray]) -> np.ndarray:
        w1d, w2d = float(yd[0][0]), float(yd[1][1])
        p1 = min(1.0, (w1d / bdp1) ** top.B1)
        p2 = min(1.0, (w2d / bdp2) ** top.B2)
        q = min(1.0, ((w1d / top.tau1 + w2d / top.tau2) / Ct) ** top.B)
        return np.array(
            [flow(float(y[0]), w1d, p1, q, top.tau1), flow(float(y[1]), w2d, p2, q, top.tau2)]
        )

    return rhs


# --- Case I: symmetric topology ---------------------------------------------------------


def case1_reduce(mc: MultiCoefficients, tau: float, rtol: float = 1e-9) -> CaseICoefficients:
    for x, y, name in ((mc.M1, mc.M2, "M"), (mc.N1, mc.N2, "N"), (mc.P1, mc.P2, "P")):
        if not math.isclose(x, y, rel_tol=rtol):
            raise DomainError(f"Case I needs symmetric coefficients, {name}1={x} != {name}2={y}")
    return CaseICoefficients(mc.M1, mc.N1, mc.P1, tau)


@dataclass(frozen=True)
class Case1Analysis:
    omega1: float | None
    omega2: float | None
    tau1c: float | None
    tau2c: float | None
    tau_c: float
    tau: float
    margin: float
    delay_independent: bool

    @property
    def stable(self) -> bool:
        return self.margin > 0

    def stable_at(self, tau: float) -> bool:
        return self.delay_independent or tau < self.tau_c

    def to_dict(self) -> dict[str, Any]:
        return {
            "omega1": self.omega1, "omega2": self.omega2,
            "tau1c": self.tau1c, "tau2c": self.tau2c, "tau_c": self.tau_c,
            "tau": self.tau, "margin": self.margin, "stable": self.stable,
            "delay_independent": self.delay_independent,
        }


def case1_analyze(cc: CaseICoefficients) -> Case1Analysis:
    """Crossings of g1 = lambda + a + (b+c) E and g2 = lambda + a + (b-c) E."""
    a, b, c, tau = cc.a, cc.b, cc.c, cc.tau
    if not (a > 0 and b > 0 and c >= 0):
        raise DomainError(f"Case I needs a, b > 0 and c >= 0; got a={a}, b={b}, c={c}")
    s1, s2 = b + c, b - c
    if s2 < -a:
        raise DomainError(f"unstable at zero delay: a + b - c = {a + s2:.6g} < 0")
    if s1 <= a:
        return Case1Analysis(None, None, None, None, math.inf, tau, tau * (a - s1), True)

    omega1 = math.sqrt(s1 * s1 - a * a)
    tau1c = math.acos(-a / s1) / omega1
    omega2 = tau2c = None
    if abs(s2) > a:
        omega2 = math.sqrt(s2 * s2 - a * a)
        tau2c = math.acos(-a / s2) / omega2
        if not (omega1 > omega2 and tau1c <= tau2c):
            raise NumericError("Case I crossing ordering violated", omega1=omega1, omega2=omega2)
    tau_c = min(t for t in (tau1c, tau2c) if t is not None)
    margin = math.acos(-a / s1) - tau * omega1
    return Case1Analysis(omega1, omega2, tau1c, tau2c, tau_c, tau, margin, False)


def case1_compound_condition(
    alpha: float, k: float, B: int, w_star: float, p_star: float, variant: CoeffVariant = CoeffVariant.EXTENDED
) -> float:
    """
    Phase margin arccos(x) - alpha w^(k-1) sqrt(B^2 - (B x)^2), x = (k-2) f / B,
    f = 1 - 2p (extended) or 1 (appendix). Delay-independent branch: tau (a - (b + c)).
    """
    f = 1.0 - 2.0 * p_star if CoeffVariant(variant) is CoeffVariant.EXTENDED else 1.0
    g = alpha * w_star ** (k - 1.0)
    kf = (k - 2.0) * f
    if B * B <= kf * kf:
        return g * ((2.0 - k) * f - B)
    return math.acos(kf / B) - g * math.sqrt(B * B - kf * kf)


# --- Case II: tau2 -> 0 -----------------------------------------------------------------


def case2_topology(top: MultiTopology, eps_ratio: float = 1e-3) -> MultiTopology:
    return replace(top, tau2=eps_ratio * top.tau1)


def case2_reduce(mc: MultiCoefficients, tau1: float, labeling: str = "expansion") -> QuadCoefficients:
    """
    (lambda + M1 + N1 E)(lambda + M2 + N2) - P1 P2 E = 0 expanded. "as_printed" takes the
    published set instead: b = N2 with the roles of c and d swapped.
    """
    a = mc.M1 + mc.M2 + mc.N2
    b = mc.N1
    e_coef = mc.N1 * (mc.M2 + mc.N2) - mc.P1 * mc.P2
    const = mc.M1 * (mc.M2 + mc.N2)
    if labeling == "expansion":
        return QuadCoefficients(a, b, e_coef, const, tau1, labeling)
    if labeling == "as_printed":
        return QuadCoefficients(a, mc.N2, const, e_coef, tau1, labeling)
    raise DomainError(f"unknown Case II labeling {labeling!r}")


class Case2Class(str, Enum):
    CONDITION1 = "condition1"
    CONDITION2 = "condition2"
    STABLE_ALL_TAU = "stable_all_tau"


@dataclass(frozen=True)
class Case2Analysis:
    omega_sq: tuple[float, ...]
    omegas: tuple[float, ...]
    classification: Case2Class
    tau1c: float | None
    candidate_delays: tuple[float, ...]
    tau1c_arccos: float | None
    tau1: float
    condition2_as_printed: bool
    stable: bool | None = None
    switches_possible: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "omega_sq": list(self.omega_sq), "omegas": list(self.omegas),
            "classification": self.classification.value, "tau1c": self.tau1c,
            "tau1c_arccos": self.tau1c_arccos, "candidate_delays": list(self.candidate_delays),
            "tau1": self.tau1, "stable": self.stable, "switches_possible": self.switches_possible,
            "condition2_as_printed": self.condition2_as_printed,
        }


def case2_crossing_delay(qc: QuadCoefficients, omega: float) -> tuple[float, float]:
    """(first crossing delay in (0, 2 pi / omega], arccos-only value)."""
    a, b, c, d = qc.a, qc.b, qc.c, qc.d
    den = b * b * omega * omega + c * c
    cos_v = (omega * omega * (c - a * b) - c * d) / den
    sin_v = (b * omega * (omega * omega - d) + a * c * omega) / den
    theta = math.atan2(sin_v, cos_v) % (2.0 * math.pi)
    if theta == 0.0:
        theta = 2.0 * math.pi
    return theta / omega, math.acos(max(-1.0, min(1.0, cos_v))) / omega


def case2_analyze(qc: QuadCoefficients) -> Case2Analysis:
    a, b, c, d = qc.a, qc.b, qc.c, qc.d
    if not (a + b > 0 and c + d > 0):
        raise DomainError(f"unstable at zero delay: a+b={a + b:.6g}, c+d={c + d:.6g}")

    A = 2.0 * d - a * a + b * b
    G = d * d - c * c
    disc = A * A - 4.0 * G
    cands: list[float] = []
    if disc >= 0:
        sq = math.sqrt(disc)
        cands = [0.5 * (A + sq), 0.5 * (A - sq)]
    positive = sorted({x for x in cands if x > 0}, reverse=True)
    double_root = A > 0 and math.isclose(A * A, 4.0 * G, rel_tol=1e-12, abs_tol=0.0)
    printed_c2 = A > 0 and A > 4.0 * G and G > 0

    if double_root:
        cls = Case2Class.CONDITION1
        positive = [0.5 * A]
    elif G < 0 or (G == 0 and len(positive) == 1):
        cls = Case2Class.CONDITION1
        positive = positive[:1]
    elif len(positive) == 2:
        cls = Case2Class.CONDITION2
    else:
        cls = Case2Class.STABLE_ALL_TAU
        positive = []

    omegas = tuple(math.sqrt(x) for x in positive)
    delays = [case2_crossing_delay(qc, om) for om in omegas]
    tau1c = min((dl[0] for dl in delays), default=None)
    tau1c_arccos = delays[0][1] if delays else None

    if cls is Case2Class.STABLE_ALL_TAU:
        stable: bool | None = True
    elif cls is Case2Class.CONDITION1:
        stable = qc.tau1 < tau1c
    else:
        logger.warning("Case II condition 2: stability switches possible beyond tau1=%.6g", tau1c)
        stable = True if qc.tau1 < tau1c else None
    return Case2Analysis(
        tuple(cands), omegas, cls, tau1c, tuple(dl[0] for dl in delays), tau1c_arccos,
        qc.tau1, printed_c2, stable, cls is Case2Class.CONDITION2,
    )


def epsilon_sensitivity(top: MultiTopology, ratios=(1e-2, 1e-3, 1e-4), labeling: str = "expansion") -> list[dict[str, Any]]:
    """Case II classification and critical delay as tau2 = eps * tau1 shrinks."""
    rows = []
    for eps in ratios:
        t2 = case2_topology(top, eps)
        w1, w2 = multi_equilibrium(t2)
        qc = case2_reduce(multi_coefficients(t2, w1, w2), t2.tau1, labeling)
        res = case2_analyze(qc)
        rows.append({"eps_ratio": eps, "classification": res.classification.value, "tau1c": res.tau1c})
    return rows


# --- transversality ---------------------------------------------------------------------


def transversality_case1(a: float, b: float, c: float, tau0: float, kappa_c: float) -> float:
    """Re(d lambda / d kappa) at lambda = i omega1 for (lambda + k a + k (b+c) E)."""
    if not (b + c > a and kappa_c > 0 and tau0 > 0):
        raise DomainError(f"crossing frequency undefined for a={a}, b+c={b + c}, kappa={kappa_c}")
    omega = kappa_c * math.sqrt((b + c) ** 2 - a * a)
    return omega**2 * tau0 / (kappa_c * ((1.0 + kappa_c * a * tau0) ** 2 + (omega * tau0) ** 2))


@dataclass(frozen=True)
class Transversality2:
    term3_real: float
    term3_real_as_printed: float
    exact_inverse_real: float
    total_real: float
    total_positive: bool
    sign_abc_c2_b2d: int
    sign_abc_c2_bd2: int
    precondition_violated: bool
    printed_decomposition: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _case2_kappa_parts(qc: QuadCoefficients, lam: complex, kappa: float, tau1: float) -> tuple[complex, complex]:
    """(F_lambda, F_kappa) of lambda^2 + k a lambda + k b lambda E + k^2 c E + k^2 d."""
    E = cmath.exp(-lam * tau1)
    F_lam = 2 * lam + kappa * qc.a + kappa * qc.b * E - tau1 * (kappa * qc.b * lam + kappa**2 * qc.c) * E
    F_kap = qc.a * lam + qc.b * lam * E + 2 * kappa * qc.c * E + 2 * kappa * qc.d
    return F_lam, F_kap


def transversality_case2(
    qc: QuadCoefficients,
    omega: float,
    kappa: float = 1.0,
    tau1: float | None = None,
    mc: MultiCoefficients | None = None,
) -> Transversality2:
    a, b, c, d = qc.a, qc.b, qc.c, qc.d
    tau1 = qc.tau1 if tau1 is None else tau1
    w2, k2 = omega * omega, kappa * kappa
    inner = k2 * omega * a * c - omega**3 * b - k2 * omega * b * d
    common = 2.0 * w2 * kappa**3 * tau1 * (w2 + k2 * d)
    s_true = a * b * c - c * c - b * b * d
    s_printed = a * b * c - c * c - b * d * d
    term3 = common * s_true / (4.0 * w2 * w2 * k2 * c * c + inner * inner)
    printed_den = 4.0 * w2 * w2 * k2 * c + inner * inner
    term3_printed = common * s_printed / printed_den if printed_den != 0 else math.nan

    F_lam, F_kap = _case2_kappa_parts(qc, 1j * omega, kappa, tau1)
    exact = (-F_lam / F_kap).real

    violated = not d > 0
    if violated:
        logger.warning("transversality: d = %.6g is not positive", d)
    decomposition = None
    if mc is not None:
        decomposition = mc.P1 * mc.P2 * (mc.N1 * mc.N2 - mc.P1 * mc.P2) + mc.N1 * mc.P1 * mc.P2 * (mc.N2 - mc.M1)
    total = kappa * tau1 + term3
    return Transversality2(
        term3, term3_printed, exact, total, term3 > 0,
        int(np.sign(s_true)), int(np.sign(s_printed)), violated, decomposition,
    )


def continue_root(
    char: Callable[[float], tuple[Callable, Callable]], lam0: complex, kappa: float, h: float = 1e-6
) -> complex:
    """Centered-difference d lambda / d kappa by Newton-tracking the root at kappa +- h."""
    pts = []
    for k in (kappa + h, kappa - h):
        f, df = char(k)
        lam, res = roots.polish(f, df, lam0, maxiter=100)
        if res > 1e-9:
            raise NumericError(f"root continuation lost the root at kappa={k}", residual=res)
        pts.append(lam)
    return (pts[0] - pts[1]) / (2.0 * h)


def case1_kappa_char(a: float, b: float, c: float, tau: float):
    def char(kappa: float):
        def f(z):
            return z + kappa * a + kappa * (b + c) * np.exp(-z * tau)

        def df(z):
            return 1.0 - tau * kappa * (b + c) * np.exp(-z * tau)

        return f, df

    return char


def case2_kappa_char(qc: QuadCoefficients, tau1: float | None = None):
    tau = qc.tau1 if tau1 is None else tau1

    def char(kappa: float):
        def f(z):
            E = np.exp(-z * tau)
            return z * z + kappa * qc.a * z + kappa * qc.b * z * E + kappa**2 * qc.c * E + kappa**2 * qc.d

        def df(z):
            E = np.exp(-z * tau)
            return 2 * z + kappa * qc.a + kappa * qc.b * E - tau * (kappa * qc.b * z + kappa**2 * qc.c) * E

        return f, df

    return char


# --- rightmost root oracle --------------------------------------------------------------


def _multi_scale_seeds(scales: list[float]) -> np.ndarray:
    scales = sorted({s for s in scales if s > 0 and math.isfinite(s)})
    return np.concatenate([roots.seed_grid(s, 24, 60) for s in scales]) if scales else roots.seed_grid(1.0)


def quasi_poly_rightmost(coeffs: Union[CaseICoefficients, QuadCoefficients]) -> RightmostRoot:
    if isinstance(coeffs, CaseICoefficients):
        a, b, c, tau = coeffs.a, coeffs.b, coeffs.c, coeffs.tau
        scale = max(abs(a), abs(b), abs(c))
        best: RightmostRoot | None = None
        for s in (b + c, b - c):
            char = case1_kappa_char(a, s, 0.0, tau)
            f, df = char(1.0)
            seeds = _multi_scale_seeds([scale, abs(s), abs(a), 1.0 / tau])
            if s != 0:
                seeds = np.append(seeds, rightmost_root(ScalarCoefficients(a, s, tau)).lam)
            found, res = roots.newton(f, df, seeds)
            found, res = roots.unique_roots(found, res, 1e-9 * max(1.0, scale), 1e-7 * max(1.0, scale))
            if found.size == 0:
                continue
            lam, r = roots.polish(f, df, found[0])
            cand = RightmostRoot(complex(lam.real, abs(lam.imag)), r)
            if best is None or cand.lam.real > best.lam.real:
                best = cand
        if best is None:
            raise NumericError("no seed converged for the Case I characteristic equation", a=a, b=b, c=c)
        if best.residual > 1e-10 * max(1.0, scale):
            raise NumericError(f"Case I root residual {best.residual:.3e} above contract")
        return best

    qc = coeffs
    scale = max(abs(qc.a), abs(qc.b), math.sqrt(abs(qc.c)), math.sqrt(abs(qc.d)))
    f, df = case2_kappa_char(qc)(1.0)
    seeds = _multi_scale_seeds([scale, abs(qc.a), abs(qc.b), math.sqrt(abs(qc.c)), math.sqrt(abs(qc.d)), 1.0 / qc.tau1])
    try:
        extra = [1j * om for om in case2_analyze(qc).omegas]
    except DomainError:
        extra = []
    seeds = np.append(seeds, extra)
    found, res = roots.newton(f, df, seeds)
    found, res = roots.unique_roots(found, res, 1e-8 * max(1.0, scale) ** 2, 1e-7 * max(1.0, scale))
    if found.size == 0:
        raise NumericError("no seed converged for the Case II characteristic equation")
    lam, r = roots.polish(f, df, found[0])
    # lambda^2 leads, so the residual contract scales with scale^2
    if r > 1e-10 * max(1.0, scale) ** 2:
        raise NumericError(f"Case II root residual {r:.3e} above contract")
    return RightmostRoot(complex(lam.real, abs(lam.imag)), r)
