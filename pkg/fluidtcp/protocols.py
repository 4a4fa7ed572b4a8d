"""
Window-increase / window-decrease gains of the congestion-avoidance fluid model.

For each acknowledgement the window grows by i(w); for each loss it shrinks by d(w).

  Compound : i = alpha * w**k / w      d = beta * w
  Reno     : i = 1 / w                 d = w / 2
  HSTCP    : i = f1(w) / w             d = f2(w) * w

HSTCP's f1, f2 are user-supplied piecewise log-linear tables (no extrapolation).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from .errors import DomainError, ScenarioError


class ProtocolKind(str, Enum):
    COMPOUND = "compound"
    RENO = "reno"
    HSTCP = "hstcp"


@dataclass(frozen=True)
class LogLinearTable:
    """Piecewise linear in (log w, log f). Breakpoints must be strictly increasing."""

    windows: tuple[float, ...]
    values: tuple[float, ...]
    _log_w: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _slopes: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.windows) != len(self.values):
            raise DomainError("table abscissae and values differ in length")
        if len(self.windows) < 2:
            raise DomainError(f"table needs at least 2 breakpoints, got {len(self.windows)}")
        if any(w <= 0 for w in self.windows) or any(f <= 0 for f in self.values):
            raise DomainError("table windows and values must be positive")
        if any(b <= a for a, b in zip(self.windows, self.windows[1:])):
            raise DomainError(f"table abscissae must be strictly increasing: {self.windows}")

        log_w = tuple(math.log(w) for w in self.windows)
        log_f = [math.log(f) for f in self.values]
        slopes = tuple(
            (log_f[j + 1] - log_f[j]) / (log_w[j + 1] - log_w[j]) for j in range(len(log_w) - 1)
        )
        object.__setattr__(self, "_log_w", log_w)
        object.__setattr__(self, "_slopes", slopes)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "LogLinearTable":
        pairs = [tuple(float(x) for x in p) for p in pairs]
        if any(len(p) != 2 for p in pairs):
            raise DomainError("table rows must be [window, value] pairs")
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @classmethod
    def constant(cls, value: float, lo: float = 1e-3, hi: float = 1e7) -> "LogLinearTable":
        return cls((lo, hi), (value, value))

    @property
    def domain(self) -> tuple[float, float]:
        return self.windows[0], self.windows[-1]

    def _segment(self, w: float) -> int:
        lo, hi = self.domain
        if not (lo <= w <= hi):
            raise DomainError(f"window {w!r} outside HSTCP table domain [{lo}, {hi}]", w=w)
        # right-hand segment at a breakpoint; the last breakpoint uses the final segment
        j = bisect.bisect_right(self.windows, w) - 1
        return min(j, len(self.windows) - 2)

    def value(self, w: float) -> float:
        j = self._segment(w)
        return self.values[j] * math.exp(self._slopes[j] * (math.log(w) - self._log_w[j]))

    def deriv(self, w: float) -> float:
        j = self._segment(w)
        return self._slopes[j] * self.value(w) / w

    def to_pairs(self) -> list[list[float]]:
        return [[w, f] for w, f in zip(self.windows, self.values)]


@dataclass(frozen=True)
class ProtocolSpec:
    kind: ProtocolKind
    alpha: float = 0.0
    beta: float = 0.0
    k: float = 0.0
    f1: LogLinearTable | None = None
    f2: LogLinearTable | None = None

    def __post_init__(self) -> None:
        if self.kind is ProtocolKind.COMPOUND:
            if not self.alpha > 0:
                raise DomainError(f"Compound alpha must be > 0, got {self.alpha}")
            if not 0 < self.beta < 1:
                raise DomainError(f"Compound beta must lie in (0,1), got {self.beta}")
            if not 0 < self.k < 2:
                raise DomainError(f"Compound k must lie in (0,2), got {self.k}")
        elif self.kind is ProtocolKind.HSTCP:
            if self.f1 is None or self.f2 is None:
                raise DomainError("HSTCP needs both f1 and f2 tables")
            if any(not 0 < f < 1 for f in self.f2.values):
                raise DomainError(f"HSTCP f2 must lie in (0,1), got {self.f2.values}")

    @classmethod
    def compound(cls, alpha: float = 0.125, beta: float = 0.5, k: float = 0.75) -> "ProtocolSpec":
        return cls(ProtocolKind.COMPOUND, alpha=alpha, beta=beta, k=k)

    @classmethod
    def reno(cls) -> "ProtocolSpec":
        return cls(ProtocolKind.RENO)

    @classmethod
    def hstcp(cls, f1: LogLinearTable, f2: LogLinearTable) -> "ProtocolSpec":
        return cls(ProtocolKind.HSTCP, f1=f1, f2=f2)

    @property
    def domain(self) -> tuple[float, float]:
        if self.kind is ProtocolKind.HSTCP:
            lo = max(self.f1.domain[0], self.f2.domain[0])
            hi = min(self.f1.domain[1], self.f2.domain[1])
            return lo, hi
        return 0.0, math.inf

    def to_dict(self) -> dict[str, Any]:
        if self.kind is ProtocolKind.COMPOUND:
            return {"kind": "compound", "alpha": self.alpha, "beta": self.beta, "k": self.k}
        if self.kind is ProtocolKind.RENO:
            return {"kind": "reno"}
        return {"kind": "hstcp", "f1": self.f1.to_pairs(), "f2": self.f2.to_pairs()}


COMPOUND_DEFAULTS = ProtocolSpec.compound(alpha=0.125, beta=0.5, k=0.75)


def _check_window(spec: ProtocolSpec, w: float) -> None:
    if not w > 0:
        raise DomainError(f"window must be positive, got {w!r}", w=w)


def increase_gain(spec: ProtocolSpec, w: float) -> float:
    _check_window(spec, w)
    if spec.kind is ProtocolKind.COMPOUND:
        return spec.alpha * w ** (spec.k - 1.0)
    if spec.kind is ProtocolKind.RENO:
        return 1.0 / w
    return spec.f1.value(w) / w


def decrease_gain(spec: ProtocolSpec, w: float) -> float:
    _check_window(spec, w)
    if spec.kind is ProtocolKind.COMPOUND:
        return spec.beta * w
    if spec.kind is ProtocolKind.RENO:
        return 0.5 * w
    return spec.f2.value(w) * w


def increase_gain_deriv(spec: ProtocolSpec, w: float) -> float:
    _check_window(spec, w)
    if spec.kind is ProtocolKind.COMPOUND:
        return spec.alpha * (spec.k - 1.0) * w ** (spec.k - 2.0)
    if spec.kind is ProtocolKind.RENO:
        return -1.0 / (w * w)
    return spec.f1.deriv(w) / w - spec.f1.value(w) / (w * w)


def decrease_gain_deriv(spec: ProtocolSpec, w: float) -> float:
    _check_window(spec, w)
    if spec.kind is ProtocolKind.COMPOUND:
        return spec.beta
    if spec.kind is ProtocolKind.RENO:
        return 0.5
    return spec.f2.deriv(w) * w + spec.f2.value(w)


def protocol_from_dict(raw: dict[str, Any], where: str = "protocol") -> ProtocolSpec:
    """Build a ProtocolSpec from the JSON preset format."""
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where} must be an object", field=where)
    kind = str(raw.get("kind", "")).lower()
    try:
        if kind == "compound":
            return ProtocolSpec.compound(
                alpha=float(raw.get("alpha", COMPOUND_DEFAULTS.alpha)),
                beta=float(raw.get("beta", COMPOUND_DEFAULTS.beta)),
                k=float(raw.get("k", COMPOUND_DEFAULTS.k)),
            )
        if kind == "reno":
            return ProtocolSpec.reno()
        if kind == "hstcp":
            for key in ("f1", "f2"):
                if key not in raw:
                    raise ScenarioError(f"Missing '{key}' in {where}", field=f"{where}.{key}")
            return ProtocolSpec.hstcp(
                LogLinearTable.from_pairs(raw["f1"]), LogLinearTable.from_pairs(raw["f2"])
            )
    except ScenarioError:
        raise
    except (DomainError, TypeError, ValueError) as e:
        raise ScenarioError(f"Invalid {where}: {e}", field=where) from e
    raise ScenarioError(f"Unknown protocol kind {raw.get('kind')!r} in {where}", field=f"{where}.kind")
