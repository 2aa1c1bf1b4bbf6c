"""Loss-stream novelty detector.

A rolling-mean baseline over the last W losses, a ratio spike test
(L_t > tau * baseline), a K-consecutive-spike confirmation rule, a cooldown
after each firing, and an optional sustained-high-loss secondary signal
(baseline above an absolute threshold theta for S consecutive steps).

The current step's loss is appended to the window only after evaluation, so a
spike never dilutes its own baseline. Losses observed during cooldown are
still appended; with the default C=60 > W=50 the window fully refreshes
before the detector re-arms.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum


class Decision(Enum):
    NONE = "none"
    SPIKE = "spike"
    EXPAND = "expand"


@dataclass
class DetectorConfig:
    window: int = 50          # W
    spike_ratio: float = 2.5  # tau, must exceed 1
    confirm: int = 1          # K consecutive spikes required
    cooldown: int = 60        # C steps of silence after a firing
    warmup: int = 100
    sustained_threshold: float | None = None  # theta; None disables the signal
    sustained_steps: int | None = None        # S

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.spike_ratio <= 1.0:
            raise ValueError("spike_ratio must be > 1")
        if self.confirm < 1:
            raise ValueError("confirm must be >= 1")

    @property
    def sustained_enabled(self):
        return self.sustained_threshold is not None and self.sustained_steps is not None


@dataclass
class Observation:
    """One row of the decision trace."""
    step: int
    loss: float
    baseline: float  # nan while the window is empty
    decision: Decision
    signal: str | None  # "spike" or "sustained" when decision is EXPAND
    cooldown_remaining: int


class NoBaselineError(RuntimeError):
    """baseline() called before any loss was observed."""


class Detector:
    """Sequential spike/sustained detector over a single loss stream."""

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.loss_history = deque(maxlen=config.window)
        self.spike_streak = 0
        self.sustained_count = 0
        self.cooldown_remaining = 0
        self.step = 0

    def baseline(self):
        """Rolling mean of the last min(W, available) losses."""
        if not self.loss_history:
            raise NoBaselineError("no losses observed yet")
        return sum(self.loss_history) / len(self.loss_history)

    def observe(self, loss) -> Observation:
        """Process one loss; returns the trace row for this step.

        Rejects non-finite losses without touching state. Both the spike path
        and (when configured) the sustained path are evaluated; they share the
        cooldown.
        """
        if not math.isfinite(loss) or loss < 0:
            raise ValueError(f"loss must be finite and >= 0, got {loss}")
        cfg = self.config
        if self.cooldown_remaining > 0:
            self.cooldown_remaining -= 1

        base = self.baseline() if self.loss_history else math.nan
        armed = (self.step >= cfg.warmup
                 and self.cooldown_remaining == 0
                 and len(self.loss_history) >= cfg.window)

        decision = Decision.NONE
        signal = None
        if armed and loss > cfg.spike_ratio * base:
            self.spike_streak += 1
            decision = Decision.SPIKE
        else:
            self.spike_streak = 0
        if self.spike_streak >= cfg.confirm:
            decision = Decision.EXPAND
            signal = "spike"
            self.spike_streak = 0
            self.cooldown_remaining = cfg.cooldown

        if cfg.sustained_enabled:
            if armed and base > cfg.sustained_threshold:
                self.sustained_count += 1
            else:
                self.sustained_count = 0
            if (self.sustained_count >= cfg.sustained_steps
                    and decision is not Decision.EXPAND
                    and self.cooldown_remaining == 0):
                decision = Decision.EXPAND
                signal = "sustained"
                self.sustained_count = 0
                self.cooldown_remaining = cfg.cooldown

        obs = Observation(step=self.step, loss=float(loss), baseline=base,
                          decision=decision, signal=signal,
                          cooldown_remaining=self.cooldown_remaining)
        self.loss_history.append(float(loss))
        self.step += 1
        return obs


def replay(losses, config: DetectorConfig):
    """Run a fresh detector over a recorded loss stream; returns all rows."""
    det = Detector(config)
    return [det.observe(loss) for loss in losses]


def write_trace_csv(path, observations):
    """Decision trace as CSV: step, loss, baseline, decision, cooldown."""
    with open(path, "w") as f:
        f.write("step,loss,baseline,decision,cooldown_remaining\n")
        for o in observations:
            base = "" if math.isnan(o.baseline) else f"{o.baseline:.6g}"
            f.write(f"{o.step},{o.loss:.6g},{base},{o.decision.value},"
                    f"{o.cooldown_remaining}\n")
