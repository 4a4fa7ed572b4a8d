"""
Direct integration of the delayed window dynamics.

Fixed-step RK4 by the method of steps. Every delay is an integer number of steps, so
stage times t and t+dt read stored samples; the half-step stages read the cubic Hermite
midpoint of the stored interval. The derivative jump at t = 0 (history vs. dynamics)
is kept one-sided, which preserves fourth order on the linear test problem.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, Callable, Sequence, Union

import numpy as np
import pandas as pd
from scipy.signal import find_peaks

from .equilibrium import Variant, solve_equilibrium
from .errors import ConfigurationError, DomainError, FluidModelError
from .loss_models import LossModel, saturated_loss
from .multibottleneck import MultiTopology, multi_equilibrium, pair_rhs
from .protocols import ProtocolSpec, decrease_gain, increase_gain

if TYPE_CHECKING:
    from .scenario import Scenario

logger = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-9
DIVERGENCE_BOUND = 1e12
DEFAULT_STEPS_PER_DELAY = 200
DEFAULT_HORIZON_DELAYS = 50
DEFAULT_HISTORY_FRACTION = 0.9

History = Union[float, Sequence[float], Callable[[float], Sequence[float]]]
Rhs = Callable[[float, np.ndarray, list[np.ndarray]], np.ndarray]


class CycleKind(str, Enum):
    CONVERGED = "converged"
    LIMIT_CYCLE = "limit_cycle"
    DIVERGENT = "divergent"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    w: np.ndarray  # shape (samples, components)
    dt: float
    tau_grid: tuple[float, ...]
    diverged: bool = False
    floor_hit: bool = False


@dataclass(frozen=True)
class CycleVerdict:
    kind: CycleKind
    amplitude: float = 0.0
    period: float = 0.0
    mean: float = 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "amplitude": self.amplitude, "period": self.period, "mean": self.mean}


def _steps(delay: float, dt: float) -> int:
    m = int(round(delay / dt))
    if m < 1 or abs(m * dt - delay) > 1e-9 * delay:
        raise ConfigurationError(f"dt={dt!r} does not divide delay {delay!r}", dt=dt, delay=delay)
    return m


def _history_samples(history: History, times: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    if callable(history):
        y = np.array([np.atleast_1d(np.asarray(history(t), dtype=float)) for t in times])
        dy = np.gradient(y, times, axis=0) if len(times) > 1 else np.zeros_like(y)
        return y, dy
    y = np.broadcast_to(np.atleast_1d(np.asarray(history, dtype=float)), (len(times), dim)).copy()
    return y, np.zeros_like(y)


def integrate_dde(
    rhs: Rhs,
    history: History,
    delays: Sequence[float],
    horizon: float,
    dt: float,
    dim: int = 1,
    floor: float | None = POSITIVITY_FLOOR,
) -> Trajectory:
    """
    y'(t) = rhs(t, y(t), [y(t - D_k) for each delay]) with y = history on [-max D, 0].
    """
    if not (dt > 0 and horizon > 0):
        raise ConfigurationError(f"need dt > 0 and horizon > 0, got dt={dt}, horizon={horizon}")
    lags = [_steps(d, dt) for d in delays]
    H = max(lags)
    N = int(round(horizon / dt))

    Y = np.empty((H + N + 1, dim))
    Fr = np.empty_like(Y)  # derivative used at the left end of an interval
    Fl = np.empty_like(Y)  # derivative used at the right end
    Y[: H + 1], Fr[: H + 1] = _history_samples(history, (np.arange(H + 1) - H) * dt, dim)
    Fl[: H + 1] = Fr[: H + 1]

    half = 0.5 * dt
    diverged = floor_hit = False
    last = N
    for n in range(N):
        i = H + n
        t = n * dt
        y = Y[i]
        k1 = rhs(t, y, [Y[i - m] for m in lags])
        Fr[i] = k1
        if n > 0:
            Fl[i] = k1
        mid = [
            0.5 * (Y[i - m] + Y[i - m + 1]) + dt * (Fr[i - m] - Fl[i - m + 1]) / 8.0 for m in lags
        ]
        k2 = rhs(t + half, y + half * k1, mid)
        k3 = rhs(t + half, y + half * k2, mid)
        k4 = rhs(t + dt, y + dt * k3, [Y[i - m + 1] for m in lags])
        y_new = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if not np.all(np.isfinite(y_new)) or np.any(np.abs(y_new) > DIVERGENCE_BOUND):
            diverged = True
            last = n
            logger.info("integration diverged at t=%.6g", t + dt)
            break
        if floor is not None and np.any(y_new < floor):
            y_new = np.maximum(y_new, floor)
            if not floor_hit:
                logger.warning("positivity floor hit at t=%.6g", t + dt)
            floor_hit = True
        Y[i + 1] = y_new

    t_out = np.arange(last + 1) * dt
    return Trajectory(t_out, Y[H : H + last + 1].copy(), dt, tuple(float(d) for d in delays), diverged, floor_hit)


def simulate_linear(
    a: float, b: float, tau: float, history: History = 1.0, T: float | None = None, dt: float | None = None
) -> Trajectory:
    """u'(t) = -a u(t) - b u(t - tau)."""
    dt = dt or tau / DEFAULT_STEPS_PER_DELAY
    T = T or DEFAULT_HORIZON_DELAYS * tau

    def rhs(t: float, y: np.ndarray, yd: list[np.ndarray]) -> np.ndarray:
        return -a * y - b * yd[0]

    return integrate_dde(rhs, history, [tau], T, dt, floor=None)


def simulate_scalar(
    spec: ProtocolSpec,
    loss: LossModel,
    variant: Variant = Variant.PLAIN,
    tau: float | None = None,
    history: History | None = None,
    T: float | None = None,
    dt: float | None = None,
) -> Trajectory:
    """
    w'(t) = (i(w) (1 - [ack] p) - d(w) p) w(t - D) / tau_rtt,  p = p(w(t - D)).

    `tau` is the feedback delay D; the round-trip time in the rate scaling and in C*tau
    stays the loss model's, so a sweep over `tau` holds (a, b) fixed.
    """
    variant = Variant(variant)
    D = tau if tau is not None else loss.tau
    dt = dt or D / DEFAULT_STEPS_PER_DELAY
    T = T or DEFAULT_HORIZON_DELAYS * D
    if history is None:
        history = DEFAULT_HISTORY_FRACTION * solve_equilibrium(spec, loss, variant).w_star
    ack = variant is Variant.ACK_WEIGHTED
    rtt = loss.tau

    def rhs(t: float, y: np.ndarray, yd: list[np.ndarray]) -> np.ndarray:
        w = float(y[0])
        w_del = float(yd[0][0])
        p = saturated_loss(loss, w_del)
        gain = increase_gain(spec, w)
        if ack:
            gain *= 1.0 - p
        return np.array([(gain - decrease_gain(spec, w) * p) * w_del / rtt])

    return integrate_dde(rhs, history, [D], T, dt)


def simulate_pair(
    top: MultiTopology,
    histories: History | None = None,
    T: float | None = None,
    dt: float | None = None,
    delays: tuple[float, float] | None = None,
) -> Trajectory:
    """Two flow classes through a shared core router; `delays` overrides (tau1, tau2) as feedback delays."""
    D = delays or (top.tau1, top.tau2)
    dt = dt or min(D) / DEFAULT_STEPS_PER_DELAY
    T = T or DEFAULT_HORIZON_DELAYS * max(D)
    if histories is None:
        w1, w2 = multi_equilibrium(top)
        histories = (DEFAULT_HISTORY_FRACTION * w1, DEFAULT_HISTORY_FRACTION * w2)
    return integrate_dde(pair_rhs(top), histories, list(D), T, dt, dim=2)


def classify(
    traj: Trajectory,
    transient_fraction: float = 0.5,
    rel_tol: float = 1e-3,
    abs_tol: float = 0.0,
    component: int = 0,
) -> CycleVerdict:
    if traj.diverged:
        return CycleVerdict(CycleKind.DIVERGENT)
    start = int(len(traj.t) * transient_fraction)
    x = traj.w[start:, component]
    t = traj.t[start:]
    if x.size < 3 or not np.all(np.isfinite(x)):
        return CycleVerdict(CycleKind.UNDECIDED)
    mean = float(x.mean())
    spread = float(x.max() - x.min())
    if spread < rel_tol * abs(mean) or spread < abs_tol:
        return CycleVerdict(CycleKind.CONVERGED, mean=mean)

    peaks, _ = find_peaks(x, prominence=0.1 * spread)
    if len(peaks) >= 5:
        heights = x[peaks]
        cv = float(heights.std() / abs(heights.mean())) if heights.mean() != 0 else math.inf
        if cv < 0.01:
            period = float(np.diff(t[peaks]).mean())
            return CycleVerdict(CycleKind.LIMIT_CYCLE, spread / 2.0, period, mean)
    return CycleVerdict(CycleKind.UNDECIDED, mean=mean)


def demo_hopf_normal_form(
    alpha: float, T: float = 300.0, dt: float = 1e-3, x0: tuple[float, float] = (0.5, 0.0)
) -> tuple[Trajectory, CycleVerdict]:
    """x' = alpha x - y - x (x^2 + y^2),  y' = x + alpha y - y (x^2 + y^2)."""
    if abs(alpha) > 1:
        raise DomainError(f"|alpha| must be <= 1, got {alpha}")
    if dt > 1e-3:
        raise ConfigurationError(f"dt must be <= 1e-3, got {dt}")

    def f(x: float, y: float) -> tuple[float, float]:
        r2 = x * x + y * y
        return alpha * x - y - x * r2, x + alpha * y - y * r2

    n = int(round(T / dt))
    out = np.empty((n + 1, 2))
    x, y = x0
    out[0] = x, y
    h = dt
    for j in range(n):
        a1, b1 = f(x, y)
        a2, b2 = f(x + 0.5 * h * a1, y + 0.5 * h * b1)
        a3, b3 = f(x + 0.5 * h * a2, y + 0.5 * h * b2)
        a4, b4 = f(x + h * a3, y + h * b3)
        x += h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        y += h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        out[j + 1] = x, y
    traj = Trajectory(np.arange(n + 1) * dt, out, dt, ())
    return traj, classify(traj, abs_tol=1e-3)


# --- sweeps -------------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    param: float
    verdict: CycleVerdict | None
    error: str | None = None

    def row(self) -> dict:
        if self.verdict is None:
            return {"param": self.param, "kind": "error", "amplitude": math.nan, "period": math.nan, "mean": math.nan}
        return {"param": self.param, **self.verdict.to_dict()}


def _run_point(scenario: "Scenario", parameter: str, value: float) -> SweepPoint:
    sim = scenario.sim
    try:
        if scenario.model == "hopf_normal_form":
            if parameter != "alpha":
                raise ConfigurationError(f"the normal-form demo sweeps alpha only, not {parameter!r}")
            _, verdict = demo_hopf_normal_form(value, T=sim.horizon_s or 300.0, dt=min(sim.dt or 1e-3, 1e-3))
            return SweepPoint(value, verdict)

        if scenario.topology is not None:
            top = scenario.topology
            delays = None
            if parameter == "tau":
                delays = (value, value * top.tau2 / top.tau1)
            elif parameter == "B":
                top = replace(top, B=int(round(value)))
            elif parameter == "alpha":
                top = replace(top, spec=replace(top.spec, alpha=value))
            else:
                raise ConfigurationError(f"unknown sweep parameter {parameter!r}")
            D = delays or (top.tau1, top.tau2)
            w1, w2 = multi_equilibrium(top)
            traj = simulate_pair(
                top,
                histories=(sim.history_fraction * w1, sim.history_fraction * w2),
                T=sim.horizon_delays * max(D),
                dt=min(D) / sim.steps_per_delay,
                delays=delays,
            )
        else:
            spec, loss, tau = scenario.protocol, scenario.loss, None
            if parameter == "tau":
                tau = value
            elif parameter == "B":
                loss = replace(loss, B=int(round(value)))
            elif parameter == "alpha":
                spec = replace(spec, alpha=value)
            else:
                raise ConfigurationError(f"unknown sweep parameter {parameter!r}")
            D = tau if tau is not None else loss.tau
            w_star = solve_equilibrium(spec, loss, scenario.variant).w_star
            traj = simulate_scalar(
                spec,
                loss,
                scenario.variant,
                tau=tau,
                history=sim.history_fraction * w_star,
                T=sim.horizon_delays * D,
                dt=D / sim.steps_per_delay,
            )
        return SweepPoint(value, classify(traj, sim.transient_fraction, sim.rel_tol))
    except FluidModelError as e:
        logger.warning("sweep point %s=%g failed: %s", parameter, value, e)
        return SweepPoint(value, None, str(e))


def sweep_bifurcation(
    scenario: "Scenario",
    parameter: str,
    value_range: tuple[float, float],
    steps: int,
    jobs: int = 1,
) -> list[SweepPoint]:
    if parameter not in ("tau", "B", "alpha"):
        raise ConfigurationError(f"sweep parameter must be tau, B or alpha, got {parameter!r}")
    if steps < 1:
        raise ConfigurationError(f"steps must be >= 1, got {steps}")
    values = list(np.linspace(value_range[0], value_range[1], steps)) if steps > 1 else [value_range[0]]
    values = [float(v) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_point, [scenario] * len(values), [parameter] * len(values), values))
    return [_run_point(scenario, parameter, v) for v in values]


def onset(points: Sequence[SweepPoint]) -> float | None:
    """First swept value classified as a limit cycle."""
    for pt in points:
        if pt.verdict is not None and pt.verdict.kind is CycleKind.LIMIT_CYCLE:
            return pt.param
    return None


def sweep_frame(points: Sequence[SweepPoint]) -> pd.DataFrame:
    return pd.DataFrame([pt.row() for pt in points], columns=["param", "kind", "amplitude", "period", "mean"])


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    cols = {"t": traj.t}
    for j in range(traj.w.shape[1]):
        cols[f"w{j + 1}"] = traj.w[:, j]
    return pd.DataFrame(cols)
