"""
Command-line front end.

    python -m fluidtcp equilibrium --scenario Scenarios/compound-defaults.json
    python -m fluidtcp chart --scenario Scenarios/compound-defaults.json --jobs 4 --out chart.csv

Each cmd_* function returns plain data (dict, DataFrame or int); main() formats it and
maps errors to exit codes (0 ok, 2 input/domain, 3 numeric, 4 internal).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Any, Sequence

import numpy as np
import pandas as pd

from . import dde_sim, multibottleneck as mb, queue_stats
from .equilibrium import Variant, solve_equilibrium
from .errors import ConfigurationError, DomainError, FluidModelError
from .linearize import scalar_coefficients
from .loss_models import GaussianMixedTraffic, LossModel
from .protocols import ProtocolKind, ProtocolSpec
from .scalar_stability import all_verdicts, mixed_traffic_sufficient, necsuf_stable, non_oscillatory
from .scenario import BufferRuleSpec, Scenario, SweepSpec, load_scenario

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.12g"
BUFFER_RULE_RTOL = 1e-12


# --- commands ---------------------------------------------------------------------------


def _require_loss(scenario: Scenario) -> LossModel:
    if scenario.loss is None:
        raise DomainError(f"scenario {scenario.name!r} has no scalar 'loss' section")
    return scenario.loss


def _require_topology(scenario: Scenario) -> mb.MultiTopology:
    if scenario.topology is None:
        raise DomainError(f"scenario {scenario.name!r} has no 'topology' section")
    return scenario.topology


def cmd_equilibrium(scenario: Scenario) -> dict[str, Any]:
    if scenario.topology is not None:
        top = scenario.topology
        w1, w2 = mb.multi_equilibrium(top)
        p1, p2, q, _ = mb.losses_at(top, w1, w2)
        r1, r2 = mb.multi_residuals(top, w1, w2)
        return {
            "w_star": [w1, w2],
            "p_star": [p1, p2],
            "q_star": q,
            "residual": max(abs(r1), abs(r2)),
            "coeff_variant": top.coeff_variant.value,
        }
    return solve_equilibrium(scenario.protocol, _require_loss(scenario), scenario.variant).to_dict()


def cmd_stability(scenario: Scenario) -> dict[str, Any]:
    if scenario.topology is not None:
        return cmd_multibottleneck(scenario)
    loss = _require_loss(scenario)
    eq = solve_equilibrium(scenario.protocol, loss, scenario.variant)
    report = all_verdicts(scalar_coefficients(scenario.protocol, loss, eq))
    report["equilibrium"] = eq.to_dict()
    if isinstance(loss, GaussianMixedTraffic):
        report["mixed_traffic"] = mixed_traffic_sufficient(scenario.protocol, loss, eq).to_dict()
    return report


def _case1_report(top: mb.MultiTopology) -> dict[str, Any]:
    w1, w2 = mb.multi_equilibrium(top)
    mc = mb.multi_coefficients(top, w1, w2)
    cc = mb.case1_reduce(mc, top.tau1)
    an = mb.case1_analyze(cc)
    report: dict[str, Any] = {
        "case": "I",
        "equilibrium": {"w_star": [w1, w2]},
        "coefficients": mc.to_dict(),
        "analysis": an.to_dict(),
        "rightmost_root": mb.quasi_poly_rightmost(cc).to_dict(),
    }
    if top.spec.kind is ProtocolKind.COMPOUND and top.B1 == top.B2 == top.B:
        p = mb.losses_at(top, w1, w2)[0]
        report["closed_form_margin"] = mb.case1_compound_condition(
            top.spec.alpha, top.spec.k, top.B, w1, p, top.coeff_variant
        )
    if not an.delay_independent:
        report["transversality"] = mb.transversality_case1(cc.a, cc.b, cc.c, cc.tau, an.tau_c / cc.tau)
    return report


def _case2_report(top: mb.MultiTopology, eps_ratio: float, labeling: str) -> dict[str, Any]:
    t2 = mb.case2_topology(top, eps_ratio)
    w1, w2 = mb.multi_equilibrium(t2)
    mc = mb.multi_coefficients(t2, w1, w2)
    qc = mb.case2_reduce(mc, t2.tau1, labeling)
    an = mb.case2_analyze(qc)
    crossings = [
        {"omega": om, "tau1": d, **mb.transversality_case2(qc, om, 1.0, d, mc).to_dict()}
        for om, d in zip(an.omegas, an.candidate_delays)
    ]
    return {
        "case": "II",
        "eps_ratio": eps_ratio,
        "equilibrium": {"w_star": [w1, w2]},
        "coefficients": mc.to_dict(),
        "quadratic": {"a": qc.a, "b": qc.b, "c": qc.c, "d": qc.d, "labeling": qc.labeling},
        "analysis": an.to_dict(),
        "crossings": crossings,
        "rightmost_root": mb.quasi_poly_rightmost(qc).to_dict(),
        "eps_sensitivity": mb.epsilon_sensitivity(top, labeling=labeling),
    }


def cmd_multibottleneck(scenario: Scenario) -> dict[str, Any]:
    top = _require_topology(scenario)
    report = _case1_report(top) if scenario.case == "I" else _case2_report(top, scenario.eps_ratio, scenario.labeling)
    report["topology"] = top.to_dict()
    return report


def _chart_cell(spec: ProtocolSpec, loss: LossModel, variant: Variant, alpha: float, B: int) -> dict[str, Any]:
    row = {"alpha": alpha, "B": B, "label": "error", "margin_necsuf": math.nan, "margin_nonosc": math.nan}
    try:
        cell_spec = replace(spec, alpha=alpha)
        cell_loss = replace(loss, B=B)
        eq = solve_equilibrium(cell_spec, cell_loss, variant)
        c = scalar_coefficients(cell_spec, cell_loss, eq)
        ns, no = necsuf_stable(c), non_oscillatory(c)
    except FluidModelError as e:
        print(f"⚠️ cell ({alpha:g}, {B}) failed: {e}", file=sys.stderr)
        return row
    if no.stable:
        label = "non_oscillatory"
    elif ns.stable:
        label = "stable_oscillatory"
    else:
        label = "unstable"
    row.update(label=label, margin_necsuf=ns.margin, margin_nonosc=no.margin)
    return row


def cmd_chart(scenario: Scenario, x: str = "alpha", jobs: int = 1) -> pd.DataFrame:
    """Region label per (alpha, B) cell, in grid order with `x` as the outer axis."""
    loss = _require_loss(scenario)
    if scenario.protocol.kind is not ProtocolKind.COMPOUND:
        raise DomainError("the alpha-B chart needs a Compound protocol")
    if x not in ("alpha", "B"):
        raise ConfigurationError(f"chart x axis must be alpha or B, got {x!r}")
    a_lo, a_hi, a_n = scenario.chart.alpha
    b_lo, b_hi, b_n = scenario.chart.B
    alphas = [float(v) for v in np.linspace(a_lo, a_hi, a_n)]
    buffers = sorted({int(round(v)) for v in np.linspace(b_lo, b_hi, b_n)})
    cells = [(a, b) for a in alphas for b in buffers] if x == "alpha" else [(a, b) for b in buffers for a in alphas]

    n = len(cells)
    args = ([scenario.protocol] * n, [loss] * n, [scenario.variant] * n, [c[0] for c in cells], [c[1] for c in cells])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_chart_cell, *args))
    else:
        rows = list(map(_chart_cell, *args))
    return pd.DataFrame(rows, columns=["alpha", "B", "label", "margin_necsuf", "margin_nonosc"])


def cmd_simulate(scenario: Scenario) -> pd.DataFrame:
    sim = scenario.sim
    if scenario.model == "hopf_normal_form":
        traj, _ = dde_sim.demo_hopf_normal_form(scenario.hopf_alpha, T=sim.horizon_s or 300.0, dt=sim.dt or 1e-3)
        return dde_sim.trajectory_frame(traj)
    if scenario.topology is not None:
        top = scenario.topology
        w1, w2 = mb.multi_equilibrium(top)
        D = (top.tau1, top.tau2)
        traj = dde_sim.simulate_pair(
            top,
            histories=(sim.history_fraction * w1, sim.history_fraction * w2),
            T=sim.horizon_s or sim.horizon_delays * max(D),
            dt=sim.dt or min(D) / sim.steps_per_delay,
        )
    else:
        loss = _require_loss(scenario)
        eq = solve_equilibrium(scenario.protocol, loss, scenario.variant)
        traj = dde_sim.simulate_scalar(
            scenario.protocol,
            loss,
            scenario.variant,
            history=sim.history_fraction * eq.w_star,
            T=sim.horizon_s or sim.horizon_delays * loss.tau,
            dt=sim.dt or loss.tau / sim.steps_per_delay,
        )
    if traj.floor_hit:
        print("⚠️ window hit the positivity floor during the run", file=sys.stderr)
    return dde_sim.trajectory_frame(traj)


def cmd_bifurcation(scenario: Scenario, jobs: int = 1) -> pd.DataFrame:
    if scenario.sweep is None:
        raise ConfigurationError(f"scenario {scenario.name!r} has no 'sweep' section")
    sw = scenario.sweep
    points = dde_sim.sweep_bifurcation(scenario, sw.parameter, (sw.start, sw.stop), sw.steps, jobs=jobs)
    first = dde_sim.onset(points)
    if first is not None:
        logger.info("limit cycle onset at %s=%.6g", sw.parameter, first)
    return dde_sim.sweep_frame(points)


def cmd_hopf_demo(alpha: float, T: float = 300.0, dt: float = 1e-3) -> pd.DataFrame:
    _, verdict = dde_sim.demo_hopf_normal_form(alpha, T=T, dt=dt)
    expected = math.sqrt(alpha) if alpha > 0 else 0.0
    return pd.DataFrame([{"alpha": alpha, **verdict.to_dict(), "expected_radius": expected}])


def cmd_queue_dist(model: str, rho: float, B: int) -> pd.DataFrame:
    if model == "mm1b":
        return queue_stats.dist_frame(queue_stats.mm1b_dist(rho, B))
    if model == "md1b":
        return queue_stats.dist_frame(queue_stats.md1b_dist(rho, B))
    raise DomainError(f"queue model must be mm1b or md1b, got {model!r}")


def cmd_buffer_rule(capacity_pps: float, rtt_s: float, flows: int) -> int:
    """ceil(C * RTT / sqrt(N)) packets."""
    if not (capacity_pps > 0 and rtt_s > 0 and flows >= 1):
        raise DomainError(f"need C > 0, RTT > 0, N >= 1; got C={capacity_pps}, RTT={rtt_s}, N={flows}")
    raw = capacity_pps * rtt_s / math.sqrt(flows)
    return math.ceil(raw * (1.0 - BUFFER_RULE_RTOL))


# --- output -----------------------------------------------------------------------------


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _render(result: Any, fmt: str) -> str:
    if isinstance(result, pd.DataFrame):
        if fmt == "json":
            return json.dumps(_jsonable(result.to_dict(orient="records")), indent=2, sort_keys=True) + "\n"
        return result.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    if fmt == "csv":
        flat = pd.json_normalize(_jsonable(result))
        return flat.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n"


def _emit(result: Any, fmt: str, out: str | None) -> None:
    text = _render(result, fmt)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        rows = len(result) if isinstance(result, pd.DataFrame) else 1
        print(f"✅ Saved {rows} rows → {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


# --- argument parsing -------------------------------------------------------------------


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="Scenario JSON file")
    common.add_argument("--out", help="Write the result here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), help="Output format (default depends on command)")
    common.add_argument("--variant", choices=[v.value for v in Variant], help="Override the scenario variant")
    common.add_argument("--coeff-variant", choices=[v.value for v in mb.CoeffVariant],
                        help="Override the topology coefficient variant")
    common.add_argument("--jobs", type=int, default=1, help="Worker processes for chart and sweep grids")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")

    ap = argparse.ArgumentParser(prog="fluidtcp", description="Stability lab for delayed TCP fluid models")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("equilibrium", "Equilibrium window and loss"),
        ("stability", "All scalar verdicts, or the two-class analysis for topology scenarios"),
        ("multibottleneck", "Two-class Case I / Case II analysis"),
        ("simulate", "Integrate the delayed fluid model; trajectory CSV"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)

    p = sub.add_parser("chart", parents=[common], help="alpha-B stability region chart")
    p.add_argument("--alpha", nargs=3, type=float, metavar=("LO", "HI", "N"), help="alpha grid")
    p.add_argument("--B", dest="buffers", nargs=3, type=float, metavar=("LO", "HI", "N"), help="buffer grid")
    p.add_argument("--x", choices=("alpha", "B"), default="alpha", help="Outer axis of the grid order")

    p = sub.add_parser("bifurcation", parents=[common], help="Parameter sweep with limit-cycle classification")
    p.add_argument("--param", choices=("tau", "B", "alpha"))
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--steps", type=int)

    p = sub.add_parser("queue-dist", parents=[common], help="M/M/1/B or M/D/1/B occupancy distribution")
    p.add_argument("--model", choices=("mm1b", "md1b"))
    p.add_argument("--rho", type=float)
    p.add_argument("--B", dest="buffer", type=int)

    p = sub.add_parser("buffer-rule", parents=[common], help="ceil(C * RTT / sqrt(N)) buffer dimensioning")
    p.add_argument("--capacity-pps", type=float)
    p.add_argument("--capacity-mbps", type=float)
    p.add_argument("--packet-bytes", type=float, default=1500.0)
    p.add_argument("--rtt", type=float)
    p.add_argument("--flows", type=int)

    p = sub.add_parser("hopf-demo", parents=[common], help="Normal-form Hopf calibration run")
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--horizon", type=float, default=300.0)
    p.add_argument("--dt", type=float, default=1e-3)
    return ap.parse_args(argv)


def _scenario(args: argparse.Namespace, required: bool = True) -> Scenario | None:
    if not args.scenario:
        if required:
            raise ConfigurationError(f"'{args.command}' needs --scenario")
        return None
    sc = load_scenario(args.scenario)
    if args.variant:
        sc = replace(sc, variant=Variant(args.variant))
    if args.coeff_variant and sc.topology is not None:
        sc = replace(sc, topology=replace(sc.topology, coeff_variant=mb.CoeffVariant(args.coeff_variant)))
    return sc


def _buffer_rule_inputs(args: argparse.Namespace, sc: Scenario | None) -> BufferRuleSpec:
    rule = sc.buffer_rule if sc is not None else None
    capacity = args.capacity_pps
    if capacity is None and args.capacity_mbps is not None:
        capacity = args.capacity_mbps * 1e6 / (8.0 * args.packet_bytes)
    capacity = capacity if capacity is not None else (rule.capacity_pps if rule else None)
    rtt = args.rtt if args.rtt is not None else (rule.rtt_s if rule else None)
    flows = args.flows if args.flows is not None else (rule.flows if rule else None)
    missing = [n for n, v in (("capacity", capacity), ("rtt", rtt), ("flows", flows)) if v is None]
    if missing:
        raise ConfigurationError(f"buffer-rule is missing inputs: {missing}")
    return BufferRuleSpec(capacity, rtt, flows)


def run(args: argparse.Namespace) -> tuple[Any, str]:
    """Dispatch one parsed command; returns (result, default format)."""
    cmd = args.command
    if cmd == "equilibrium":
        return cmd_equilibrium(_scenario(args)), "json"
    if cmd == "stability":
        return cmd_stability(_scenario(args)), "json"
    if cmd == "multibottleneck":
        return cmd_multibottleneck(_scenario(args)), "json"
    if cmd == "simulate":
        return cmd_simulate(_scenario(args)), "csv"
    if cmd == "chart":
        sc = _scenario(args)
        chart = sc.chart
        if args.alpha:
            chart = replace(chart, alpha=(args.alpha[0], args.alpha[1], int(args.alpha[2])))
        if args.buffers:
            chart = replace(chart, B=tuple(int(v) for v in args.buffers))
        return cmd_chart(replace(sc, chart=chart), x=args.x, jobs=args.jobs), "csv"
    if cmd == "bifurcation":
        sc = _scenario(args)
        if args.param or args.range or args.steps:
            base = sc.sweep
            param = args.param or (base.parameter if base else None)
            lo, hi = args.range or ((base.start, base.stop) if base else (None, None))
            steps = args.steps or (base.steps if base else None)
            if param is None or lo is None or steps is None:
                raise ConfigurationError("bifurcation needs --param, --range and --steps or a 'sweep' section")
            sc = replace(sc, sweep=SweepSpec(param, lo, hi, steps))
        return cmd_bifurcation(sc, jobs=args.jobs), "csv"
    if cmd == "queue-dist":
        sc = _scenario(args, required=False)
        q = sc.queue if sc is not None else None
        model = args.model or (q.model if q else "md1b")
        rho = args.rho if args.rho is not None else (q.rho if q else None)
        B = args.buffer if args.buffer is not None else (q.B if q else None)
        if rho is None or B is None:
            raise ConfigurationError("queue-dist needs --rho and --B or a 'queue' section")
        return cmd_queue_dist(model, rho, B), "csv"
    if cmd == "buffer-rule":
        rule = _buffer_rule_inputs(args, _scenario(args, required=False))
        pkts = cmd_buffer_rule(rule.capacity_pps, rule.rtt_s, rule.flows)
        return {"capacity_pps": rule.capacity_pps, "rtt_s": rule.rtt_s, "flows": rule.flows, "buffer_pkts": pkts}, "json"
    if cmd == "hopf-demo":
        return cmd_hopf_demo(args.alpha, T=args.horizon, dt=args.dt), "csv"
    raise ConfigurationError(f"unknown command {cmd!r}")


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        # argparse usage errors are input errors
        return 0 if e.code in (0, None) else 2
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.jobs < 1:
        print(f"❌ --jobs must be >= 1, got {args.jobs}", file=sys.stderr)
        return 2
    try:
        result, default_fmt = run(args)
        _emit(result, args.format or default_fmt, args.out)
    except FluidModelError as e:
        where = f" [{e.field}]" if getattr(e, "field", None) else ""
        print(f"❌ {type(e).__name__}{where}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:  # noqa: BLE001
        logger.exception("internal error in %s", args.command)
        print(f"❌ internal error: {e}", file=sys.stderr)
        return 4
    return 0
