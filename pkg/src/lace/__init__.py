"""Loss-adaptive capacity expansion for continual learning.

A small numpy implementation of a width-expandable classifier that watches
its own training loss for spikes and grows a masked projection layer when a
new data domain arrives, plus the synthetic domain corpus, detector,
training harness, activation clustering, and experiment CLI built around it.
"""

from .detector import Decision, Detector, DetectorConfig, Observation
from .model import AblationError, CapacityError, DynamicModel, ExpansionEvent
from .domains import DomainSchedule, DomainSpec, generate, make_schedule
from .trainer import RunReport, TrainConfig, run

__all__ = [
    "Decision", "Detector", "DetectorConfig", "Observation",
    "AblationError", "CapacityError", "DynamicModel", "ExpansionEvent",
    "DomainSchedule", "DomainSpec", "generate", "make_schedule",
    "RunReport", "TrainConfig", "run",
]

__version__ = "0.1.0"
