"""Critical-learning-period detection and dynamic participant counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

STRATEGIES = ("SteadyStep", "RapidTaper", "ModestShift")

# (alpha, beta) per strategy
DEFAULT_RATES = {
    "SteadyStep": (0.01, 2.0),
    "RapidTaper": (2.0, 0.01),
    "ModestShift": (0.015, 0.015),
}


def round_half_up(x: float) -> int:
    # round(., 9) absorbs representation error such as 0.015 * 1000 = 15.000000000000002
    return int(math.floor(round(x, 9) + 0.5))


def smoothed_slope(curve, w: int) -> float | None:
    """Trailing mean of the last ``w`` absolute first differences, or None if too short."""
    a = np.asarray(curve, dtype=np.float64)
    if w < 1:
        raise ConfigError("window must be >= 1")
    if len(a) < w + 1:
        return None
    return float(np.mean(np.abs(np.diff(a[-(w + 1) :]))))


def clp_ended(curve, w: int, T: float) -> bool:
    """True once the smoothed accuracy slope at the latest round drops below ``T``."""
    if not T > 0:
        raise ConfigError("threshold must be > 0")
    mu = smoothed_slope(curve, w)
    return mu is not None and mu < T


@dataclass(frozen=True)
class ClpConfig:
    window: int = 5
    threshold: float = 0.005
    strategy: str = "SteadyStep"
    alpha: float | None = None
    beta: float | None = None
    initial_fraction: float = 0.10
    k_min: int | None = None
    k_max: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        a, b = DEFAULT_RATES[self.strategy]
        if self.alpha is None:
            object.__setattr__(self, "alpha", a)
        if self.beta is None:
            object.__setattr__(self, "beta", b)
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if not self.threshold > 0:
            raise ConfigError("threshold must be > 0")
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError("alpha and beta must be > 0")
        if not 0.0 < self.initial_fraction <= 1.0:
            raise ConfigError("initial_fraction must be in (0, 1]")

    def bounds(self, n_pool: int) -> tuple[int, int]:
        k_min = self.k_min if self.k_min is not None else max(1, round_half_up(0.10 * n_pool))
        k_max = self.k_max if self.k_max is not None else n_pool
        if k_min < 1 or k_max > n_pool or k_min > k_max:
            raise ConfigError(f"need 1 <= k_min <= k_max <= pool size, got {k_min}, {k_max}, {n_pool}")
        return k_min, k_max


def participant_count(
    strategy: str,
    config: ClpConfig,
    round_idx: int,
    clp_active: bool,
    prev_count: int | None,
    n_pool: int,
) -> int:
    """Number of participants for ``round_idx`` given the previous round's count.

    ``strategy`` picks the growth/decay rule; the rates come from ``config``.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}")
    k_min, k_max = config.bounds(n_pool)
    alpha, beta = config.alpha, config.beta

    if round_idx < 1:
        raise ConfigError("rounds are numbered from 1")
    if round_idx == 1:
        k = round_half_up(config.initial_fraction * n_pool)
    else:
        if prev_count is None or not k_min <= prev_count <= k_max:
            raise ConfigError(f"prev_count {prev_count} outside [{k_min}, {k_max}]")
        if clp_active:
            if strategy == "RapidTaper":
                k = round_half_up(alpha * prev_count)
            else:
                k = prev_count + round_half_up(alpha * n_pool)
        elif strategy == "SteadyStep":
            k = round_half_up(prev_count / beta)
        else:
            k = prev_count - round_half_up(beta * n_pool)
    return min(max(k, k_min), k_max)


class ClpController:
    """Latched CLP tracker: once the end of the CLP is detected it never re-enters."""

    def __init__(self, config: ClpConfig, n_pool: int):
        self.config = config
        self.n_pool = n_pool
        self.active = True
        self.end_round: int | None = None
        self.mu_at_end: float | None = None
        self.count: int | None = None
        config.bounds(n_pool)

    def next_count(self, round_idx: int) -> int:
        self.count = participant_count(
            self.config.strategy, self.config, round_idx, self.active, self.count, self.n_pool
        )
        return self.count

    def observe(self, curve, round_idx: int) -> bool:
        """Feed the accuracy curve after ``round_idx``; returns True on the detection round."""
        if not self.active:
            return False
        if clp_ended(curve, self.config.window, self.config.threshold):
            self.active = False
            self.end_round = round_idx
            self.mu_at_end = smoothed_slope(curve, self.config.window)
            return True
        return False

    def event(self) -> dict:
        return {
            "detection_round": self.end_round,
            "mu_at_detection": self.mu_at_end,
            "strategy": self.config.strategy,
            "alpha": self.config.alpha,
            "beta": self.config.beta,
            "window": self.config.window,
            "threshold": self.config.threshold,
        }


def k_trajectory(config: ClpConfig, clp_end_round: int | None, n_pool: int, rounds: int) -> list[int]:
    """K_1..K_rounds when the CLP end is detected after round ``clp_end_round``."""
    out, prev = [], None
    for r in range(1, rounds + 1):
        active = clp_end_round is None or r <= clp_end_round
        prev = participant_count(config.strategy, config, r, active, prev, n_pool)
        out.append(prev)
    return out
