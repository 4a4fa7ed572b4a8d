"""
Linearisation about w*: u'(t) = -a u(t) - b u(t - tau).

plain        : a = -(w/tau)(i' - d' p)            b = (w/tau) p' d
ack_weighted : a = -(w/tau)(i' (1-p) - d' p)      b = (w/tau) p' (i + d)

The protocol closed forms below reproduce the particularised conditions and are used as
oracles against the generic path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .equilibrium import EquilibriumResult, Variant
from .errors import DomainError
from .loss_models import LossModel, loss_prob_deriv
from .protocols import (
    LogLinearTable,
    ProtocolSpec,
    decrease_gain,
    decrease_gain_deriv,
    increase_gain,
    increase_gain_deriv,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalarCoefficients:
    a: float
    b: float
    tau: float

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise DomainError(f"delay must be > 0, got {self.tau}")

    def scaled(self, s: float) -> "ScalarCoefficients":
        return ScalarCoefficients(self.a / s, self.b / s, self.tau * s)

    def with_tau(self, tau: float) -> "ScalarCoefficients":
        return ScalarCoefficients(self.a, self.b, tau)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "tau": self.tau, "a_tau": self.a * self.tau, "b_tau": self.b * self.tau}


def scalar_coefficients(spec: ProtocolSpec, loss: LossModel, eq: EquilibriumResult) -> ScalarCoefficients:
    w, p, tau = eq.w_star, eq.p_star, loss.tau
    di, dd = increase_gain_deriv(spec, w), decrease_gain_deriv(spec, w)
    dp = loss_prob_deriv(loss, w).value
    if eq.variant is Variant.ACK_WEIGHTED:
        a = -(w / tau) * (di * (1.0 - p) - dd * p)
        b = (w / tau) * dp * (increase_gain(spec, w) + decrease_gain(spec, w))
    else:
        a = -(w / tau) * (di - dd * p)
        b = (w / tau) * dp * decrease_gain(spec, w)
    if a < 0:
        logger.warning("a = %.6g < 0 at w*=%.6g: outside the stability theorem's precondition", a, w)
    return ScalarCoefficients(a, b, tau)


def _ack_factor(p: float, variant: Variant) -> float:
    return 1.0 - p if Variant(variant) is Variant.ACK_WEIGHTED else 1.0


def compound_ab(
    alpha: float, k: float, B: int, w_star: float, tau: float, p: float = 0.0, variant: Variant = Variant.PLAIN
) -> ScalarCoefficients:
    g = alpha * w_star ** (k - 1.0)
    return ScalarCoefficients((2.0 - k) * g * _ack_factor(p, variant) / tau, B * g / tau, tau)


def reno_ab(B: int, w_star: float, tau: float, p: float = 0.0, variant: Variant = Variant.PLAIN) -> ScalarCoefficients:
    return ScalarCoefficients(2.0 * _ack_factor(p, variant) / (w_star * tau), B / (w_star * tau), tau)


def hstcp_bracket(
    f1: LogLinearTable, f2: LogLinearTable, p: float, w_star: float, form: str = "cubic"
) -> float:
    """
    w f1'/f1 - 2 - f2' w^n p / f1, with n = 3 ("cubic") or n = 2 ("quadratic", as printed).
    Only the cubic exponent agrees with the generic linearisation.
    """
    if form not in ("cubic", "quadratic"):
        raise DomainError(f"unknown bracket form {form!r}")
    n = 3 if form == "cubic" else 2
    v1 = f1.value(w_star)
    return w_star * f1.deriv(w_star) / v1 - 2.0 - f2.deriv(w_star) * w_star**n * p / v1


def hstcp_ab(
    f1: LogLinearTable,
    f2: LogLinearTable,
    p: float,
    w_star: float,
    tau: float,
    B: int,
    variant: Variant = Variant.PLAIN,
) -> ScalarCoefficients:
    v1 = f1.value(w_star)
    rate = v1 / (w_star * tau)
    if Variant(variant) is Variant.ACK_WEIGHTED:
        inner = (1.0 - p) * (w_star * f1.deriv(w_star) / v1 - 2.0) - f2.deriv(w_star) * w_star**3 * p / v1
    else:
        inner = hstcp_bracket(f1, f2, p, w_star, "cubic")
    return ScalarCoefficients(-rate * inner, B * rate, tau)
