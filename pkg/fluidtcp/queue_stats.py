"""
Finite-buffer queue occupancy distributions behind the small-buffer loss model.

B is the system capacity (occupancy 0..B, the packet in service included). All
distributions are time-stationary.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.stats import poisson

from .errors import DomainError, NumericError

logger = logging.getLogger(__name__)

POWER_TOL = 1e-13
POWER_MAXITER = 200_000


@dataclass(frozen=True)
class QueueDist:
    probs: np.ndarray
    rho: float
    B: int

    @property
    def ccdf(self) -> np.ndarray:
        """P(N > n) for n = 0..B."""
        tail = np.cumsum(self.probs[::-1])[::-1]
        return np.append(tail[1:], 0.0)

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.B + 1), self.probs))

    @property
    def blocking(self) -> float:
        return float(self.probs[-1])


def _check(rho: float, B: int) -> None:
    if not rho > 0:
        raise DomainError(f"offered load must be > 0, got {rho}")
    if int(B) != B or B < 1:
        raise DomainError(f"buffer must be a positive integer, got {B}")


def mm1b_dist(rho: float, B: int) -> QueueDist:
    _check(rho, B)
    n = np.arange(B + 1)
    if rho == 1.0:
        probs = np.full(B + 1, 1.0 / (B + 1))
    elif rho < 1.0:
        probs = rho**n
        probs = probs / probs.sum()
    else:
        # weights relative to the top state keep rho > 1 finite
        probs = (1.0 / rho) ** (B - n)
        probs = probs / probs.sum()
    return QueueDist(probs, rho, int(B))


def mm1b_blocking(rho: float, B: int) -> float:
    return mm1b_dist(rho, B).blocking


def power_loss_gap(rho: float, B: int) -> float:
    """rho^B (utilisation-power loss) minus exact M/M/1/B blocking."""
    return rho**B - mm1b_blocking(rho, B)


def _md1b_embedded(rho: float, B: int) -> np.ndarray:
    """Transition matrix on 0..B-1 left behind at departures."""
    a = poisson.pmf(np.arange(B), rho)
    P = np.zeros((B, B))
    for i in range(B):
        lo = max(i - 1, 0)
        for j in range(lo, B - 1):
            P[i, j] = a[j - lo]
        P[i, B - 1] = max(0.0, 1.0 - P[i, : B - 1].sum())
    return P


def md1b_dist(rho: float, B: int) -> QueueDist:
    _check(rho, B)
    P = _md1b_embedded(rho, int(B))
    pi = np.full(B, 1.0 / B)
    for it in range(POWER_MAXITER):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < POWER_TOL:
            pi = nxt
            break
        pi = nxt
    else:
        raise NumericError(
            f"M/D/1/{B} power iteration did not converge in {POWER_MAXITER} sweeps", rho=rho, B=B
        )
    logger.debug("md1b(rho=%g, B=%d) converged after %d sweeps", rho, B, it + 1)

    norm = pi[0] + rho
    probs = np.empty(B + 1)
    probs[:B] = pi / norm
    probs[B] = 1.0 - 1.0 / norm
    return QueueDist(probs, rho, int(B))


def simulate_md1b(
    rho: float, B: int, arrivals: int = 1_000_000, seed: int = 42, batches: int = 20
) -> tuple[np.ndarray, np.ndarray]:
    """
    Discrete-event M/D/1/B with unit service. Returns (time-average occupancy pmf,
    batch-means standard error per state).
    """
    _check(rho, B)
    rng = np.random.default_rng(seed)
    t_arr = np.cumsum(rng.exponential(1.0 / rho, arrivals))
    per_batch = arrivals // batches
    acc = np.zeros((batches, B + 1))

    queue: deque[float] = deque()
    last = 0.0
    for idx, t in enumerate(t_arr[: per_batch * batches]):
        row = acc[idx // per_batch]
        while queue and queue[0] <= t:
            d = queue[0]
            row[len(queue)] += d - last
            last = d
            queue.popleft()
        row[len(queue)] += t - last
        last = t
        if len(queue) < B:
            start = queue[-1] if queue else t
            queue.append(max(start, t) + 1.0)

    fractions = acc / acc.sum(axis=1, keepdims=True)
    return fractions.mean(axis=0), fractions.std(axis=0, ddof=1) / np.sqrt(batches)


def dist_frame(dist: QueueDist) -> pd.DataFrame:
    return pd.DataFrame({"n": np.arange(dist.B + 1), "pmf": dist.probs, "ccdf": dist.ccdf})
