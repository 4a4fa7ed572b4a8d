"""
JSON scenario files.

A scenario names a protocol and either a scalar loss model (`loss`) or a two-class
topology (`topology`), plus optional `sim`, `sweep`, `chart`, `queue` and
`buffer_rule` sections. Every field problem surfaces as a ScenarioError carrying the
dotted field path.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

from .dde_sim import DEFAULT_HISTORY_FRACTION, DEFAULT_HORIZON_DELAYS, DEFAULT_STEPS_PER_DELAY
from .equilibrium import Variant
from .errors import ScenarioError
from .loss_models import LossModel, loss_from_dict
from .multibottleneck import MultiTopology, topology_from_dict
from .protocols import COMPOUND_DEFAULTS, ProtocolSpec, protocol_from_dict

DEFAULT_VARIANT = Variant.PLAIN
MODELS = ("fluid", "hopf_normal_form")


@dataclass(frozen=True)
class SimSpec:
    horizon_s: float | None = None
    dt: float | None = None
    horizon_delays: float = DEFAULT_HORIZON_DELAYS
    steps_per_delay: int = DEFAULT_STEPS_PER_DELAY
    history_fraction: float = DEFAULT_HISTORY_FRACTION
    transient_fraction: float = 0.5
    rel_tol: float = 1e-3


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    steps: int


@dataclass(frozen=True)
class ChartSpec:
    alpha: tuple[float, float, int] = (0.05, 0.5, 10)
    B: tuple[int, int, int] = (5, 50, 10)


@dataclass(frozen=True)
class QueueSpec:
    model: str = "md1b"
    rho: float = 0.9
    B: int = 15


@dataclass(frozen=True)
class BufferRuleSpec:
    capacity_pps: float
    rtt_s: float
    flows: int


@dataclass(frozen=True)
class Scenario:
    name: str = "unnamed"
    model: str = "fluid"
    protocol: ProtocolSpec = COMPOUND_DEFAULTS
    loss: LossModel | None = None
    topology: MultiTopology | None = None
    variant: Variant = DEFAULT_VARIANT
    case: str = "I"
    eps_ratio: float = 1e-3
    labeling: str = "expansion"
    sim: SimSpec = field(default_factory=SimSpec)
    sweep: SweepSpec | None = None
    chart: ChartSpec = field(default_factory=ChartSpec)
    queue: QueueSpec | None = None
    buffer_rule: BufferRuleSpec | None = None
    hopf_alpha: float = 0.25


def _number(raw: dict, key: str, where: str, default: Any = None, integer: bool = False) -> Any:
    if key not in raw:
        if default is None:
            raise ScenarioError(f"Missing '{key}' in {where}", field=f"{where}.{key}")
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(f"'{key}' in {where} must be a number, got {v!r}", field=f"{where}.{key}")
    if integer:
        if int(v) != v:
            raise ScenarioError(f"'{key}' in {where} must be an integer, got {v!r}", field=f"{where}.{key}")
        return int(v)
    return float(v)


def _section(raw: dict, key: str) -> dict | None:
    sec = raw.get(key)
    if sec is not None and not isinstance(sec, dict):
        raise ScenarioError(f"'{key}' must be an object", field=key)
    return sec


def _triple(raw: Any, where: str, integer: bool = False) -> tuple:
    if not isinstance(raw, list) or len(raw) != 3:
        raise ScenarioError(f"{where} must be [start, stop, steps], got {raw!r}", field=where)
    lo, hi, n = raw
    if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw) or int(n) != n or n < 1:
        raise ScenarioError(f"{where} must hold two numbers and a positive integer, got {raw!r}", field=where)
    return (int(lo), int(hi), int(n)) if integer else (float(lo), float(hi), int(n))


def _sim(raw: dict | None) -> SimSpec:
    if raw is None:
        return SimSpec()
    w = "sim"
    spec = SimSpec(
        horizon_s=_number(raw, "horizon_s", w, default=math.nan),
        dt=_number(raw, "dt", w, default=math.nan),
        horizon_delays=_number(raw, "horizon_delays", w, default=DEFAULT_HORIZON_DELAYS),
        steps_per_delay=_number(raw, "steps_per_delay", w, default=DEFAULT_STEPS_PER_DELAY, integer=True),
        history_fraction=_number(raw, "history_fraction", w, default=DEFAULT_HISTORY_FRACTION),
        transient_fraction=_number(raw, "transient_fraction", w, default=0.5),
        rel_tol=_number(raw, "rel_tol", w, default=1e-3),
    )
    # nan marks "not given"
    horizon = None if math.isnan(spec.horizon_s) else spec.horizon_s
    dt = None if math.isnan(spec.dt) else spec.dt
    if spec.steps_per_delay < 1:
        raise ScenarioError(f"'steps_per_delay' in sim must be >= 1, got {spec.steps_per_delay}", field="sim.steps_per_delay")
    if not 0.0 <= spec.transient_fraction < 1.0:
        raise ScenarioError("'transient_fraction' in sim must lie in [0, 1)", field="sim.transient_fraction")
    return SimSpec(horizon, dt, spec.horizon_delays, spec.steps_per_delay, spec.history_fraction,
                   spec.transient_fraction, spec.rel_tol)


def _buffer_rule(raw: dict) -> BufferRuleSpec:
    w = "buffer_rule"
    if "capacity_pps" in raw:
        capacity = _number(raw, "capacity_pps", w)
    else:
        mbps = _number(raw, "capacity_mbps", w)
        size = _number(raw, "packet_bytes", w)
        capacity = mbps * 1e6 / (8.0 * size)
    return BufferRuleSpec(capacity, _number(raw, "rtt_s", w), _number(raw, "flows", w, integer=True))


def scenario_from_dict(raw: Any, name: str = "unnamed") -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario root must be an object", field="<root>")

    model = raw.get("model", "fluid")
    if model not in MODELS:
        raise ScenarioError(f"Unknown model {model!r}; expected one of {MODELS}", field="model")
    try:
        variant = Variant(raw.get("variant", DEFAULT_VARIANT.value))
    except ValueError as e:
        raise ScenarioError(f"Unknown variant {raw.get('variant')!r}", field="variant") from e

    protocol = protocol_from_dict(raw["protocol"]) if "protocol" in raw else COMPOUND_DEFAULTS
    loss = loss_from_dict(raw["loss"]) if "loss" in raw else None
    topology = topology_from_dict(raw["topology"]) if "topology" in raw else None
    if loss is not None and topology is not None:
        raise ScenarioError("give either 'loss' or 'topology', not both", field="topology")

    case = str(raw.get("case", "I")).upper()
    if case not in ("I", "II"):
        raise ScenarioError(f"'case' must be I or II, got {raw.get('case')!r}", field="case")
    labeling = raw.get("labeling", "expansion")
    if labeling not in ("expansion", "as_printed"):
        raise ScenarioError(f"Unknown labeling {labeling!r}", field="labeling")

    sweep = None
    if (sw := _section(raw, "sweep")) is not None:
        param = sw.get("parameter")
        if param not in ("tau", "B", "alpha"):
            raise ScenarioError(f"sweep parameter must be tau, B or alpha, got {param!r}", field="sweep.parameter")
        lo, hi, n = _triple(sw.get("range"), "sweep.range")
        sweep = SweepSpec(param, lo, hi, n)

    chart = ChartSpec()
    if (ch := _section(raw, "chart")) is not None:
        chart = ChartSpec(
            _triple(ch.get("alpha", list(chart.alpha)), "chart.alpha"),
            _triple(ch.get("B", list(chart.B)), "chart.B", integer=True),
        )

    queue = None
    if (q := _section(raw, "queue")) is not None:
        kind = q.get("model", "md1b")
        if kind not in ("mm1b", "md1b"):
            raise ScenarioError(f"queue model must be mm1b or md1b, got {kind!r}", field="queue.model")
        queue = QueueSpec(kind, _number(q, "rho", "queue"), _number(q, "B", "queue", integer=True))

    rule = _buffer_rule(br) if (br := _section(raw, "buffer_rule")) is not None else None

    return Scenario(
        name=str(raw.get("name", name)),
        model=model,
        protocol=protocol,
        loss=loss,
        topology=topology,
        variant=variant,
        case=case,
        eps_ratio=_number(raw, "eps_ratio", "<root>", default=1e-3),
        labeling=labeling,
        sim=_sim(_section(raw, "sim")),
        sweep=sweep,
        chart=chart,
        queue=queue,
        buffer_rule=rule,
        hopf_alpha=_number(raw, "hopf_alpha", "<root>", default=0.25),
    )


def load_scenario(path: str) -> Scenario:
    if not os.path.exists(path):
        raise ScenarioError(f"Scenario file not found: {path}", field="<file>")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"Malformed JSON in {path}: {e.msg} (line {e.lineno}, column {e.colno})",
                                field="<file>") from e
    name = os.path.splitext(os.path.basename(path))[0]
    return scenario_from_dict(raw, name)
