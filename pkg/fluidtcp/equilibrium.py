"""
Nontrivial equilibrium w* of the window dynamics.

plain        : i(w) = d(w) p(w)
ack_weighted : i(w) (1 - p(w)) = d(w) p(w)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

from scipy.optimize import brentq

from .errors import DomainError, NumericError
from .loss_models import DropTailSmallBuffer, LossModel, bdp, loss_prob, loss_prob_deriv
from .protocols import (
    ProtocolSpec,
    decrease_gain,
    decrease_gain_deriv,
    increase_gain,
    increase_gain_deriv,
)

logger = logging.getLogger(__name__)

BRACKET_LO = 1e-6
REL_WIDTH = 1e-12
RESIDUAL_TOL = 1e-10


class Variant(str, Enum):
    PLAIN = "plain"
    ACK_WEIGHTED = "ack_weighted"


@dataclass(frozen=True)
class EquilibriumResult:
    w_star: float
    p_star: float
    residual: float
    variant: Variant
    tau: float
    overload: bool = False

    @property
    def x_star(self) -> float:
        """Sending rate w*/tau in packets/second."""
        return self.w_star / self.tau

    def to_dict(self) -> dict:
        return {
            "w_star": self.w_star,
            "p_star": self.p_star,
            "x_star": self.x_star,
            "residual": self.residual,
            "variant": self.variant.value,
        }


def residual(spec: ProtocolSpec, loss: LossModel, w: float, variant: Variant = Variant.PLAIN) -> float:
    p = loss_prob(loss, w).value
    ack = 1.0 if variant is Variant.ACK_WEIGHTED else 0.0
    return increase_gain(spec, w) * (1.0 - ack * p) - decrease_gain(spec, w) * p


def residual_deriv(spec: ProtocolSpec, loss: LossModel, w: float, variant: Variant = Variant.PLAIN) -> float:
    p = loss_prob(loss, w).value
    dp = loss_prob_deriv(loss, w).value
    ack = 1.0 if variant is Variant.ACK_WEIGHTED else 0.0
    i, di = increase_gain(spec, w), increase_gain_deriv(spec, w)
    d, dd = decrease_gain(spec, w), decrease_gain_deriv(spec, w)
    return di * (1.0 - ack * p) - ack * i * dp - dd * p - d * dp


def _bracket(spec: ProtocolSpec, loss: LossModel) -> tuple[float, float]:
    lo, hi = BRACKET_LO, bdp(loss)
    if not isinstance(loss, DropTailSmallBuffer):
        hi = loss.w_max * (1.0 - 1e-12)
    p_lo, p_hi = spec.domain
    lo, hi = max(lo, p_lo), min(hi, p_hi)
    if not lo < hi:
        raise DomainError(
            f"no equilibrium in operating range: empty bracket [{lo}, {hi}]", lo=lo, hi=hi
        )
    return lo, hi


def solve_equilibrium(
    spec: ProtocolSpec, loss: LossModel, variant: Variant = Variant.PLAIN
) -> EquilibriumResult:
    variant = Variant(variant)
    lo, hi = _bracket(spec, loss)

    def r(w: float) -> float:
        return residual(spec, loss, w, variant)

    r_lo, r_hi = r(lo), r(hi)
    if r_lo == 0.0:
        w = lo
    elif r_hi == 0.0:
        w = hi
    elif (r_lo > 0) == (r_hi > 0):
        raise DomainError(
            f"no equilibrium in operating range [{lo:.3g}, {hi:.3g}]: residual does not change sign",
            r_lo=r_lo,
            r_hi=r_hi,
        )
    else:
        w = brentq(r, lo, hi, xtol=1e-300, rtol=REL_WIDTH, maxiter=500)

    # Newton polish, kept only when it improves the residual inside the bracket
    for _ in range(3):
        slope = residual_deriv(spec, loss, w, variant)
        if slope == 0.0 or not math.isfinite(slope):
            break
        w_new = w - r(w) / slope
        if not lo <= w_new <= hi or abs(r(w_new)) >= abs(r(w)):
            break
        w = w_new

    pe = loss_prob(loss, w)
    res = r(w)
    scale = max(increase_gain(spec, w), decrease_gain(spec, w) * pe.value)
    if abs(res) > RESIDUAL_TOL * scale:
        raise NumericError(
            f"equilibrium residual {res:.3e} exceeds tolerance at w={w:.6g}", w=w, residual=res
        )
    if pe.overload:
        logger.warning("equilibrium w*=%.6g sits in the overload regime", w)
    logger.debug("w*=%.12g p*=%.6g (%s)", w, pe.value, variant.value)
    return EquilibriumResult(w, pe.value, res, variant, loss.tau, pe.overload)


def compound_droptail_wstar(alpha: float, beta: float, k: float, C: float, tau: float, B: int) -> float:
    """Closed form of alpha w^(k-2) = beta (w / C tau)^B."""
    return math.exp((math.log(alpha / beta) + B * math.log(C * tau)) / (B - k + 2.0))


def reno_droptail_wstar(C: float, tau: float, B: int) -> float:
    """Closed form of 1/w = (w/2) (w / C tau)^B."""
    return math.exp((math.log(2.0) + B * math.log(C * tau)) / (B + 2.0))
