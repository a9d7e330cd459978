"""Self-adaptive tabular Q-learning under reward drift and action-space growth."""

from morphin.agents import AgentConfig, BaselineAgent, MorphinAgent, StepOutcome
from morphin.drift import Direction, PageHinkleyConfig, PageHinkleyDetector
from morphin.qcore import ContractViolation, QTable, Transition

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "BaselineAgent",
    "ContractViolation",
    "Direction",
    "MorphinAgent",
    "PageHinkleyConfig",
    "PageHinkleyDetector",
    "QTable",
    "StepOutcome",
    "Transition",
    "__version__",
]
