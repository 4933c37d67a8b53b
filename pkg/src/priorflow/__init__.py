"""Q-learning-guided construction of multi-agent workflows at run time."""

from .core import (
    END,
    START,
    Action,
    DecisionSpace,
    EngineConfig,
    EpisodeTrace,
    Outcome,
    RewardConfig,
    RoleSet,
    RoleSpec,
    State,
    TokenUsage,
    Via,
    WeightedEdge,
    validate_role_set,
)
from .orchestrator import Engine, run_episode
from .qlearn import QTable, load_qtable, save_qtable
from .reward import RoleStats

__version__ = "0.1.0"

__all__ = [
    "END",
    "START",
    "Action",
    "DecisionSpace",
    "Engine",
    "EngineConfig",
    "EpisodeTrace",
    "Outcome",
    "QTable",
    "RewardConfig",
    "RoleSet",
    "RoleSpec",
    "RoleStats",
    "State",
    "TokenUsage",
    "Via",
    "WeightedEdge",
    "load_qtable",
    "run_episode",
    "save_qtable",
    "validate_role_set",
]
