"""
Equilibrium loss probability p(w) at a bottleneck queue.

Two abstractions:
- DropTailSmallBuffer : p = (w / (C tau)) ** B, the utilisation-power form of M/M/1 blocking
- GaussianMixedTraffic: p = exp(-2B (C tau - w - v tau) / (w s1 + v s2 tau))

Both saturate at 1 with an `overload` flag instead of clipping silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, NamedTuple, Union

from .errors import DomainError, ScenarioError


class LossEvaluation(NamedTuple):
    value: float
    overload: bool = False


@dataclass(frozen=True)
class DropTailSmallBuffer:
    C: float  # packets/second per flow
    B: int  # packets
    tau: float  # seconds

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise DomainError(f"capacity per flow must be > 0, got {self.C}")
        if int(self.B) != self.B or self.B < 1:
            raise DomainError(f"buffer must be a positive integer, got {self.B}")
        if not self.tau > 0:
            raise DomainError(f"round-trip time must be > 0, got {self.tau}")


@dataclass(frozen=True)
class GaussianMixedTraffic:
    C: float
    B: int
    tau: float
    v: float  # mean short-flow load, packets/second
    sigma1_sq: float
    sigma2_sq: float

    def __post_init__(self) -> None:
        DropTailSmallBuffer(self.C, self.B, self.tau)
        if not 0 <= self.v < self.C:
            raise DomainError(f"short-flow load v must lie in [0, C), got {self.v}")
        if not (self.sigma1_sq > 0 and self.sigma2_sq > 0):
            raise DomainError("variance coefficients must be positive")

    @property
    def w_max(self) -> float:
        """Upper end of the open interval where p < 1."""
        return (self.C - self.v) * self.tau


LossModel = Union[DropTailSmallBuffer, GaussianMixedTraffic]


def bdp(model: LossModel) -> float:
    """Bandwidth-delay product C*tau in packets."""
    return model.C * model.tau


def scaled(model: LossModel, s: float) -> LossModel:
    """The (tau, C) -> (s tau, C / s) co-scaling; Gaussian v scales with C."""
    if isinstance(model, GaussianMixedTraffic):
        return replace(model, C=model.C / s, tau=model.tau * s, v=model.v / s)
    return replace(model, C=model.C / s, tau=model.tau * s)


def _check(w: float) -> None:
    if not w > 0:
        raise DomainError(f"window must be positive, got {w!r}", w=w)


def _gaussian_exponent(g: GaussianMixedTraffic, w: float) -> float:
    num = g.C * g.tau - w - g.v * g.tau
    den = w * g.sigma1_sq + g.v * g.sigma2_sq * g.tau
    return -2.0 * g.B * num / den


def loss_prob(model: LossModel, w: float) -> LossEvaluation:
    _check(w)
    if isinstance(model, DropTailSmallBuffer):
        ratio = w / (model.C * model.tau)
        if ratio > 1.0:
            return LossEvaluation(1.0, True)
        return LossEvaluation(ratio**model.B)
    x = _gaussian_exponent(model, w)
    if x > 0.0:
        return LossEvaluation(1.0, True)
    return LossEvaluation(math.exp(x))


def loss_prob_deriv(model: LossModel, w: float) -> LossEvaluation:
    p = loss_prob(model, w)
    if p.overload:
        return LossEvaluation(0.0, True)
    if isinstance(model, DropTailSmallBuffer):
        return LossEvaluation(model.B / w * p.value)
    g = model
    den = w * g.sigma1_sq + g.v * g.sigma2_sq * g.tau
    num = 2.0 * g.B * g.tau * (g.v * g.sigma2_sq + (g.C - g.v) * g.sigma1_sq)
    return LossEvaluation(p.value * num / (den * den))


def saturated_loss(model: LossModel, w: float) -> float:
    """p(w) capped at 1, for use inside the simulators."""
    if isinstance(model, DropTailSmallBuffer):
        return min(1.0, (w / (model.C * model.tau)) ** model.B)
    return math.exp(min(0.0, _gaussian_exponent(model, w)))


_DROPTAIL_FIELDS = ("capacity_per_flow", "buffer_pkts", "rtt_s")
_GAUSSIAN_FIELDS = _DROPTAIL_FIELDS + ("v", "sigma1_sq", "sigma2_sq")


def loss_from_dict(raw: dict[str, Any], where: str = "loss") -> LossModel:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where} must be an object", field=where)
    kind = str(raw.get("kind", "")).lower()
    if kind not in ("droptail", "gaussian"):
        raise ScenarioError(f"Unknown loss kind {raw.get('kind')!r} in {where}", field=f"{where}.kind")
    needed = _DROPTAIL_FIELDS if kind == "droptail" else _GAUSSIAN_FIELDS
    for key in needed:
        if key not in raw:
            raise ScenarioError(f"Missing '{key}' in {where}", field=f"{where}.{key}")
        if isinstance(raw[key], bool) or not isinstance(raw[key], (int, float)):
            raise ScenarioError(f"'{key}' in {where} must be a number, got {raw[key]!r}", field=f"{where}.{key}")
    B = raw["buffer_pkts"]
    if int(B) != B:
        raise ScenarioError(f"'buffer_pkts' in {where} must be an integer, got {B!r}", field=f"{where}.buffer_pkts")
    try:
        if kind == "droptail":
            return DropTailSmallBuffer(float(raw["capacity_per_flow"]), int(B), float(raw["rtt_s"]))
        return GaussianMixedTraffic(
            float(raw["capacity_per_flow"]),
            int(B),
            float(raw["rtt_s"]),
            float(raw["v"]),
            float(raw["sigma1_sq"]),
            float(raw["sigma2_sq"]),
        )
    except DomainError as e:
        raise ScenarioError(f"Invalid {where}: {e}", field=where) from e


def loss_to_dict(model: LossModel) -> dict[str, Any]:
    out: dict[str, Any] = {
        "kind": "droptail" if isinstance(model, DropTailSmallBuffer) else "gaussian",
        "capacity_per_flow": model.C,
        "buffer_pkts": model.B,
        "rtt_s": model.tau,
    }
    if isinstance(model, GaussianMixedTraffic):
        out.update(v=model.v, sigma1_sq=model.sigma1_sq, sigma2_sq=model.sigma2_sq)
    return out
