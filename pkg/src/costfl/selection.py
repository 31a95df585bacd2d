"""Per-round client-selection policies.

All policies respect a per-client participation cap: a client that has already
been selected ``cap`` times is no longer eligible. Every ranking tie breaks by
ascending client id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SelectionError
from .seeding import rng as make_rng

POLICIES = ("random", "cost", "utility", "utility_cost", "clp_utility_cost")


@dataclass
class ClientStats:
    client_id: int
    cost: float
    num_samples: int = 0
    last_utility: float | None = None
    times_selected: int = 0

    @property
    def explored(self) -> bool:
        return self.last_utility is not None

    @property
    def score(self) -> float | None:
        if self.last_utility is None:
            return None
        return self.last_utility / self.cost


@dataclass(frozen=True)
class SelectionConfig:
    policy: str = "random"
    k_fraction: float = 0.10
    exploration_factor: float = 0.1
    cap_fraction: float | None = 0.10
    seed: int | None = None  # None: derived from the experiment seed

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if not 0.0 < self.k_fraction <= 1.0:
            raise ConfigError("k_fraction must be in (0, 1]")
        if not 0.0 <= self.exploration_factor < 1.0:
            raise ConfigError("exploration_factor must be in [0, 1)")
        if self.cap_fraction is not None and not 0.0 < self.cap_fraction <= 1.0:
            raise ConfigError("cap_fraction must be in (0, 1] or null")

    def cap(self, total_rounds: int) -> int | None:
        """Maximum selections per client over ``total_rounds`` rounds (None = unlimited)."""
        if self.cap_fraction is None:
            return None
        # round() guards against 0.1 * 300 == 30.000000000000004
        return max(1, math.ceil(round(self.cap_fraction * total_rounds, 9)))


def utility(per_sample_losses, num_samples: int) -> float:
    """Sample count times the root-mean-square of the per-sample training losses."""
    losses = np.asarray(per_sample_losses, dtype=np.float64)
    if losses.size == 0 or num_samples < 1:
        raise ValueError("utility is undefined for a client without samples")
    if losses.size != num_samples:
        raise ValueError(f"got {losses.size} losses for {num_samples} samples")
    if np.any(losses < 0) or not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite and non-negative")
    return float(num_samples * math.sqrt(np.sum(losses * losses) / num_samples))


def utility_per_cost(per_sample_losses, num_samples: int, cost: float) -> float:
    if not cost > 0:
        raise ValueError(f"cost must be > 0, got {cost}")
    return utility(per_sample_losses, num_samples) / cost


def _eligible(pool: list[ClientStats], cap: int | None) -> list[ClientStats]:
    out = [c for c in pool if cap is None or c.times_selected < cap]
    return sorted(out, key=lambda c: c.client_id)


def _require(eligible: list[ClientStats], K: int) -> None:
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if len(eligible) < K:
        raise SelectionError(
            f"need {K} eligible clients but only {len(eligible)} remain under the cap",
            shortfall=K - len(eligible),
        )


def _pick(gen: np.random.Generator, clients: list[ClientStats], n: int) -> list[ClientStats]:
    if n <= 0:
        return []
    idx = gen.choice(len(clients), size=n, replace=False)
    return [clients[i] for i in idx]


def select_random(pool, K: int, cap: int | None, seed: int, round_idx: int = 0) -> list[int]:
    """Uniform sample of ``K`` eligible clients without replacement."""
    eligible = _eligible(pool, cap)
    _require(eligible, K)
    gen = make_rng(seed, "select", round_idx)
    return sorted(c.client_id for c in _pick(gen, eligible, K))


def select_lowest_cost(pool, K: int, cap: int | None) -> list[int]:
    eligible = _eligible(pool, cap)
    _require(eligible, K)
    ranked = sorted(eligible, key=lambda c: (c.cost, c.client_id))
    return sorted(c.client_id for c in ranked[:K])


def exploration_slots(K: int, e: float) -> int:
    return int(math.floor(round(e * K, 9)))


def _explore_exploit(pool, K, e, cap, seed, round_idx, key) -> list[int]:
    eligible = _eligible(pool, cap)
    _require(eligible, K)
    gen = make_rng(seed, "select", round_idx)
    n_explore = exploration_slots(K, e)
    explored = sorted((c for c in eligible if c.explored), key=lambda c: (-key(c), c.client_id))
    unexplored = [c for c in eligible if not c.explored]

    exploit = explored[: K - n_explore]
    rest_explored = explored[len(exploit) :]
    # slots the exploit ranking could not fill become exploration slots
    n_explore = K - len(exploit)
    fresh = _pick(gen, unexplored, min(n_explore, len(unexplored)))
    fallback = _pick(gen, rest_explored, n_explore - len(fresh))
    return sorted(c.client_id for c in exploit + fresh + fallback)


def select_utility(pool, K: int, e: float, cap: int | None, seed: int, round_idx: int = 0) -> list[int]:
    """``floor(e*K)`` random unexplored clients, the rest top-ranked by last utility.

    Before any utility is known the whole round is a random draw.
    """
    if not any(c.explored for c in pool):
        return select_random(pool, K, cap, seed, round_idx)
    return _explore_exploit(pool, K, e, cap, seed, round_idx, key=lambda c: c.last_utility)


def select_utility_cost(pool, K: int, e: float, cap: int | None, seed: int, round_idx: int = 0) -> list[int]:
    """Like :func:`select_utility` but ranks by utility per unit cost.

    Before any utility is known the cheapest ``K`` clients are taken.
    """
    if not any(c.explored for c in pool):
        return select_lowest_cost(pool, K, cap)
    return _explore_exploit(pool, K, e, cap, seed, round_idx, key=lambda c: c.last_utility / c.cost)


def select(config: SelectionConfig, pool, K: int, cap: int | None, seed: int, round_idx: int) -> list[int]:
    p = config.policy
    if p == "random":
        return select_random(pool, K, cap, seed, round_idx)
    if p == "cost":
        return select_lowest_cost(pool, K, cap)
    if p == "utility":
        return select_utility(pool, K, config.exploration_factor, cap, seed, round_idx)
    return select_utility_cost(pool, K, config.exploration_factor, cap, seed, round_idx)
