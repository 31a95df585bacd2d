import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costfl.clp import (
    ClpConfig,
    ClpController,
    clp_ended,
    k_trajectory,
    participant_count,
    round_half_up,
    smoothed_slope,
)
from costfl.errors import ConfigError


def _curve(n):
    return [0.8 * (1 - math.exp(-r / 20)) for r in range(1, n + 1)]


def _reference_detection(curve, w, T):
    # written out longhand, independent of the library helpers
    for r in range(w + 1, len(curve) + 1):
        total = 0.0
        for i in range(r - w, r):
            total += abs(curve[i] - curve[i - 1])
        if total / w < T:
            return r
    return None


def test_constant_and_linear_examples():
    assert clp_ended([0.5] * 4, 2, 1e-9)
    assert not clp_ended([0.05 * r for r in range(10)], 3, 0.01)
    assert not clp_ended([0.1, 0.2], 5, 0.5)


def test_closed_form_detection_round():
    curve = _curve(200)
    r_star = _reference_detection(curve, 5, 0.005)
    first = next(r for r in range(1, 201) if clp_ended(curve[:r], 5, 0.005))
    assert first == r_star == 45


def test_smoothed_slope_value():
    assert smoothed_slope([0.0, 0.1, 0.1, 0.4], 3) == pytest.approx(0.4 / 3)
    assert smoothed_slope([0.0, 0.1], 3) is None


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.4999, 15.000000000000002, 2.5)] == [1, 2, 2, 15, 3]


def test_participant_count_examples():
    cfg = ClpConfig(strategy="SteadyStep")
    assert participant_count("SteadyStep", cfg, 5, True, 100, 1000) == 110
    assert participant_count("SteadyStep", cfg, 5, False, 128, 500) == 64
    ms = ClpConfig(strategy="ModestShift")
    assert participant_count("ModestShift", ms, 5, True, 200, 1000) == 215
    assert participant_count("ModestShift", ms, 5, False, 200, 1000) == 185
    rt = ClpConfig(strategy="RapidTaper")
    assert participant_count("RapidTaper", rt, 3, True, 150, 1000) == 300
    assert participant_count("RapidTaper", rt, 3, False, 150, 1000) == 140
    assert participant_count("SteadyStep", cfg, 1, True, None, 1000) == 100


def test_clamping():
    cfg = ClpConfig(strategy="RapidTaper")
    assert participant_count("RapidTaper", cfg, 9, True, 800, 1000) == 1000
    assert participant_count("SteadyStep", ClpConfig(), 9, False, 100, 1000) == 100


def test_bad_bounds():
    with pytest.raises(ConfigError):
        ClpConfig(k_min=50, k_max=10).bounds(100)
    with pytest.raises(ConfigError):
        ClpConfig(k_max=200).bounds(100)


def _expected(strategy, end, n, rounds):
    """Closed-form K sequence, written independently of participant_count."""
    alpha, beta = {"SteadyStep": (0.01, 2), "RapidTaper": (2, 0.01), "ModestShift": (0.015, 0.015)}[strategy]
    lo, hi = int(0.1 * n + 0.5), n
    ks = []
    k = min(max(int(0.1 * n + 0.5), lo), hi)
    for r in range(1, rounds + 1):
        if r > 1:
            if r <= end:
                k = 2 * k if strategy == "RapidTaper" else k + int(alpha * n + 0.5)
            elif strategy == "SteadyStep":
                k = int(k / 2 + 0.5)
            else:
                k = k - int(beta * n + 0.5)
            k = min(max(k, lo), hi)
        ks.append(k)
    return ks


@pytest.mark.parametrize("strategy", ["SteadyStep", "RapidTaper", "ModestShift"])
def test_trajectories_match_closed_form(strategy):
    end = _reference_detection(_curve(200), 5, 0.005)
    ks = k_trajectory(ClpConfig(strategy=strategy), end, 1000, 200)
    assert ks == _expected(strategy, end, 1000, 200)


def test_controller_latches():
    ctrl = ClpController(ClpConfig(window=2, threshold=0.01), 100)
    curve = []
    for r, a in enumerate([0.1, 0.3, 0.5, 0.5, 0.5, 0.9, 0.2], start=1):
        ctrl.next_count(r)
        curve.append(a)
        ctrl.observe(curve, r)
    assert ctrl.end_round == 5 and not ctrl.active
    assert ctrl.event()["detection_round"] == 5


@settings(max_examples=60, deadline=None)
@given(
    strategy=st.sampled_from(["SteadyStep", "RapidTaper", "ModestShift"]),
    n=st.integers(10, 500),
    end=st.one_of(st.none(), st.integers(1, 60)),
)
def test_trajectory_bounded_and_monotone(strategy, n, end):
    cfg = ClpConfig(strategy=strategy)
    lo, hi = cfg.bounds(n)
    ks = k_trajectory(cfg, end, n, 80)
    assert all(lo <= k <= hi for k in ks)
    cut = 80 if end is None else end
    assert all(a <= b for a, b in zip(ks[:cut], ks[1:cut]))
    assert all(a >= b for a, b in zip(ks[cut:], ks[cut + 1 :]))
    assert ks == k_trajectory(cfg, end, n, 80)
