"""Observation counts, confidence bounds and gap estimates.

All arrays carry a leading run axis: shape ``(R, K)`` for ``R`` independent
runs that are advanced together.  A single run is simply ``R == 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GapSnapshot:
    ucb: np.ndarray
    lcb: np.ndarray
    delta_hat: np.ndarray
    t: int


def confidence_width(obs_count: np.ndarray, t: int, num_arms: int, gamma: float) -> np.ndarray:
    """Half-width ``sqrt(gamma * ln(t K^(1/gamma)) / (2 O))`` of the interval."""
    log_term = math.log(t) + math.log(num_arms) / gamma
    return np.sqrt(gamma * log_term / (2.0 * obs_count))


def gap_snapshot(hat_L: np.ndarray, obs_count: np.ndarray, t: int, gamma: float) -> GapSnapshot:
    """Clipped UCB/LCB and ``max(0, LCB_i - min_j UCB_j)`` with ``j`` over all arms."""
    obs_count = np.asarray(obs_count)
    if (obs_count <= 0).any():
        raise ValueError("every arm must be observed at least once before gaps are estimated")
    K = obs_count.shape[-1]
    mean = hat_L / obs_count
    width = confidence_width(obs_count, t, K, gamma)
    ucb = np.minimum(1.0, mean + width)
    lcb = np.maximum(0.0, mean - width)
    delta = np.maximum(0.0, lcb - ucb.min(axis=-1, keepdims=True))
    return GapSnapshot(ucb=ucb, lcb=lcb, delta_hat=delta, t=t)


class GapEstimator:
    """Running sums of observed losses and observation counts per arm."""

    def __init__(self, num_arms: int, gamma: float = 4.0, n_runs: int = 1):
        if gamma < 3:
            raise ValueError(f"gamma must be >= 3, got {gamma}")
        self.num_arms = num_arms
        self.gamma = float(gamma)
        self.hat_L = np.zeros((n_runs, num_arms))
        self.obs_count = np.zeros((n_runs, num_arms), dtype=np.int64)

    def record(self, observed: np.ndarray, losses: np.ndarray, check: bool = True):
        """Add ``losses`` on the arms flagged in the boolean mask ``observed``.

        Entries of ``losses`` outside the mask are never read.
        """
        observed = np.asarray(observed, dtype=bool).reshape(self.hat_L.shape)
        losses = np.asarray(losses, dtype=float).reshape(self.hat_L.shape)
        if check:
            seen = losses[observed]
            if seen.size and (seen.min() < 0.0 or seen.max() > 1.0):
                raise ValueError("observed losses must lie in [0, 1]")
        self.hat_L += np.where(observed, losses, 0.0)
        self.obs_count += observed

    def record_pairs(self, pairs, run: int = 0):
        """Record an iterable of ``(arm, loss)`` observations for one run."""
        for arm, loss in pairs:
            if not 0.0 <= loss <= 1.0:
                raise ValueError(f"loss {loss} for arm {arm} outside [0, 1]")
            self.hat_L[run, arm] += loss
            self.obs_count[run, arm] += 1

    def snapshot(self, t: int) -> GapSnapshot:
        return gap_snapshot(self.hat_L, self.obs_count, t, self.gamma)
