"""
Verdicts for the scalar characteristic equation  lambda + a + b exp(-lambda tau) = 0.

Generic conditions (a >= 0, b > 0, tau > 0):
- sufficient            : b tau < pi/2
- necessary+sufficient  : tau sqrt(b^2 - a^2) < arccos(-a/b)   (b > a; otherwise delay-independent)
- Hopf delay            : tau_c = arccos(-a/b) / sqrt(b^2 - a^2)
- non-oscillatory       : ln(b tau) + a tau + 1 < 0

Boundary ties count as "not satisfied". The rightmost root comes from the principal
Lambert-W branch of  (lambda + a) tau exp((lambda + a) tau) = -b tau exp(a tau).
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy.special import lambertw

from . import roots
from .equilibrium import EquilibriumResult
from .errors import DomainError, NumericError
from .linearize import ScalarCoefficients, scalar_coefficients
from .loss_models import GaussianMixedTraffic
from .protocols import LogLinearTable, ProtocolKind, ProtocolSpec

logger = logging.getLogger(__name__)

CLOSED_FORM_RTOL = 1e-9


class Condition(str, Enum):
    SUFFICIENT = "sufficient"
    NECESSARY_SUFFICIENT = "necessary_sufficient"
    NON_OSCILLATORY = "non_oscillatory"
    DELAY_INDEPENDENT = "delay_independent"


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    margin: float
    condition: Condition
    details: dict[str, Any] = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {"stable": self.stable, "margin": self.margin, "condition": self.condition.value, **self.details}


@dataclass(frozen=True)
class RightmostRoot:
    lam: complex
    residual: float

    def to_dict(self) -> dict[str, Any]:
        return {"lambda": {"re": self.lam.real, "im": self.lam.imag}, "residual": self.residual}


def _check(c: ScalarCoefficients) -> None:
    if not (c.a >= 0 and c.b > 0 and c.tau > 0):
        raise DomainError(f"need a >= 0, b > 0, tau > 0; got a={c.a}, b={c.b}, tau={c.tau}")


def sufficient_stable(c: ScalarCoefficients) -> StabilityVerdict:
    _check(c)
    margin = math.pi / 2 - c.b * c.tau
    return StabilityVerdict(margin > 0, margin, Condition.SUFFICIENT)


def necsuf_stable(c: ScalarCoefficients) -> StabilityVerdict:
    _check(c)
    if c.b <= c.a:
        return StabilityVerdict(True, c.a - c.b, Condition.DELAY_INDEPENDENT)
    margin = math.acos(-c.a / c.b) - c.tau * math.sqrt(c.b * c.b - c.a * c.a)
    return StabilityVerdict(margin > 0, margin, Condition.NECESSARY_SUFFICIENT)


def hopf_delay(a: float, b: float) -> float:
    if not b > a >= 0:
        raise DomainError(f"no finite Hopf delay for a={a}, b={b} (needs b > a >= 0)")
    return math.acos(-a / b) / math.sqrt(b * b - a * a)


def non_oscillatory(c: ScalarCoefficients) -> StabilityVerdict:
    _check(c)
    margin = -(math.log(c.b * c.tau) + c.a * c.tau + 1.0)
    sigma = math.log(c.b * c.tau) / c.tau
    return StabilityVerdict(margin > 0, margin, Condition.NON_OSCILLATORY, {"sigma": sigma})


def _char(c: ScalarCoefficients):
    def f(z: np.ndarray) -> np.ndarray:
        return z + c.a + c.b * np.exp(-z * c.tau)

    def df(z: np.ndarray) -> np.ndarray:
        return 1.0 - c.b * c.tau * np.exp(-z * c.tau)

    return f, df


def rightmost_root(c: ScalarCoefficients) -> RightmostRoot:
    if c.b == 0 or not c.tau > 0:
        raise DomainError(f"need b != 0 and tau > 0; got b={c.b}, tau={c.tau}")
    try:
        z = -c.b * c.tau * math.exp(c.a * c.tau)
    except OverflowError as e:
        raise NumericError(f"Lambert-W argument overflows for a*tau={c.a * c.tau}", a=c.a, tau=c.tau) from e
    w0 = complex(lambertw(z, 0))
    if not cmath.isfinite(w0):
        # series about the branch point z = -1/e
        w0 = -1.0 + cmath.sqrt(2.0 * (1.0 + math.e * z))
    if not cmath.isfinite(w0):
        raise NumericError(f"Lambert-W did not converge for z={z!r}", z=z, a=c.a, b=c.b, tau=c.tau)

    f, df = _char(c)
    lam, res = roots.polish(f, df, -c.a + w0 / c.tau, maxiter=100)
    if res > 1e-10 * max(1.0, abs(c.b)):
        raise NumericError(
            f"rightmost root residual {res:.3e} above contract", lam=lam, residual=res, a=c.a, b=c.b, tau=c.tau
        )
    # report the upper member of a conjugate pair
    if lam.imag < 0:
        lam = lam.conjugate()
    return RightmostRoot(lam, res)


def grid_rightmost(c: ScalarCoefficients, n_re: int = 40, n_im: int = 120) -> RightmostRoot:
    """Independent cross-check: Newton from a rectangular grid of seeds."""
    scale = max(abs(c.a), abs(c.b))
    f, df = _char(c)
    found, res = roots.newton(f, df, roots.seed_grid(scale, n_re, n_im))
    found, res = roots.unique_roots(found, res, 1e-9 * max(1.0, scale), 1e-6 * max(1.0, scale))
    if found.size == 0:
        raise NumericError("no seed converged to a characteristic root", a=c.a, b=c.b, tau=c.tau)
    lam, r = roots.polish(f, df, found[0])
    return RightmostRoot(complex(lam.real, abs(lam.imag)), r)


# --- particularised closed forms -------------------------------------------------------


def _phase_margin(x: float, root_term: float) -> float:
    if not -1.0 < x < 1.0:
        raise DomainError(f"closed form undefined: -a/b = {x} (delay-independent regime)")
    return math.acos(x) - root_term


def compound_stability_margin(alpha: float, k: float, B: int, w_star: float, p: float = 0.0, ack: bool = False) -> float:
    """arccos((k-2)f/B) - alpha w^(k-1) sqrt(B^2 - (k-2)^2 f^2),  f = 1-p when ack-weighted."""
    f = 1.0 - p if ack else 1.0
    g = alpha * w_star ** (k - 1.0)
    x = (k - 2.0) * f / B
    return _phase_margin(x, g * math.sqrt(max(B * B - ((k - 2.0) * f) ** 2, 0.0)))


def reno_stability_margin(B: int, w_star: float, p: float = 0.0, ack: bool = False) -> float:
    f = 1.0 - p if ack else 1.0
    return _phase_margin(-2.0 * f / B, math.sqrt(max(B * B - 4.0 * f * f, 0.0)) / w_star)


def hstcp_stability_margin(
    f1: LogLinearTable, f2: LogLinearTable, p: float, w_star: float, B: int, ack: bool = False
) -> float:
    inner = _hstcp_inner(f1, f2, p, w_star, ack)
    g = f1.value(w_star) / w_star
    return _phase_margin(inner / B, g * math.sqrt(max(B * B - inner * inner, 0.0)))


def _hstcp_inner(f1: LogLinearTable, f2: LogLinearTable, p: float, w: float, ack: bool) -> float:
    v1 = f1.value(w)
    head = w * f1.deriv(w) / v1 - 2.0
    if ack:
        head *= 1.0 - p
    return head - f2.deriv(w) * w**3 * p / v1


def compound_hopf_delay(alpha: float, k: float, B: int, w_star: float, tau: float) -> float:
    """Delay at which alpha w^(k-1) sqrt(B^2-(k-2)^2) (tau_c/tau) = arccos((k-2)/B)."""
    g = alpha * w_star ** (k - 1.0)
    return tau * math.acos((k - 2.0) / B) / (g * math.sqrt(B * B - (k - 2.0) ** 2))


def osccompound_ratio(alpha: float, k: float, B: int, w_star: float, p: float = 0.0, ack: bool = False) -> float:
    """b tau / exp(-a tau - 1); non-oscillatory iff < 1."""
    f = 1.0 - p if ack else 1.0
    g = alpha * w_star ** (k - 1.0)
    return B * g / math.exp(g * (k - 2.0) * f - 1.0)


def oscreno_ratio(B: int, w_star: float, p: float = 0.0, ack: bool = False) -> float:
    f = 1.0 - p if ack else 1.0
    return B / (w_star * math.exp(-2.0 * f / w_star - 1.0))


def oschstcp_ratio(f1: LogLinearTable, f2: LogLinearTable, p: float, w_star: float, B: int, ack: bool = False) -> float:
    g = f1.value(w_star) / w_star
    return B * g / math.exp(g * _hstcp_inner(f1, f2, p, w_star, ack) - 1.0)


def osccompound_as_printed(alpha: float, k: float, B: int, w_star: float) -> float:
    """Exponent carries (w*)^(k-2) as printed; disagrees with the generic condition."""
    return alpha * B * w_star ** (k - 1.0) / math.exp(alpha * (k - 2.0) * w_star ** (k - 2.0) - 1.0)


def oscreno_as_printed(B: int, w_star: float) -> float:
    """exp(+2/w* - 1) as printed; the generic substitution gives exp(-2/w* - 1)."""
    return B / (w_star * math.exp(2.0 / w_star - 1.0))


# --- mixed long/short traffic -----------------------------------------------------------


def mixed_traffic_closed_form(spec: ProtocolSpec, g: GaussianMixedTraffic, w_star: float) -> float:
    """b tau = 2 B X tau (v s2 + (C - v) s1) / (w s1 + v s2 tau)^2 with X = w i(w)."""
    if spec.kind is ProtocolKind.COMPOUND:
        x = spec.alpha * w_star**spec.k
    elif spec.kind is ProtocolKind.RENO:
        x = 1.0
    else:
        x = spec.f1.value(w_star)
    den = w_star * g.sigma1_sq + g.v * g.sigma2_sq * g.tau
    return 2.0 * g.B * x * g.tau * (g.v * g.sigma2_sq + (g.C - g.v) * g.sigma1_sq) / (den * den)


def mixed_traffic_sufficient(spec: ProtocolSpec, g: GaussianMixedTraffic, eq: EquilibriumResult) -> StabilityVerdict:
    c = scalar_coefficients(spec, g, eq)
    b_tau = c.b * c.tau
    closed = mixed_traffic_closed_form(spec, g, eq.w_star)
    if not math.isclose(b_tau, closed, rel_tol=CLOSED_FORM_RTOL):
        raise NumericError(
            f"mixed-traffic closed form {closed:.15g} disagrees with generic b*tau {b_tau:.15g}",
            closed=closed,
            generic=b_tau,
        )
    margin = math.pi / 2 - b_tau
    return StabilityVerdict(margin > 0, margin, Condition.SUFFICIENT, {"b_tau": b_tau, "closed_form": closed})


def all_verdicts(c: ScalarCoefficients) -> dict[str, Any]:
    """Every scalar verdict plus Hopf delay and rightmost root, as one report."""
    report: dict[str, Any] = {
        "coefficients": c.to_dict(),
        "sufficient": sufficient_stable(c).to_dict(),
        "necsuf": necsuf_stable(c).to_dict(),
        "non_oscillatory": non_oscillatory(c).to_dict(),
        "rightmost_root": rightmost_root(c).to_dict(),
    }
    try:
        tau_c = hopf_delay(c.a, c.b)
        report["hopf"] = {"tau_c": tau_c, "omega": math.sqrt(c.b * c.b - c.a * c.a)}
    except DomainError:
        report["hopf"] = None
    return report
