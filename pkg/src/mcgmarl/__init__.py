"""Meta coordination graphs for cooperative multi-agent reinforcement learning."""

from .config import build_env, load_config, net_factory, train_config
from .coordination import FactoredQ, QNetwork, build_factored_q, evaluate_q, greedy_action
from .errors import CheckpointError, ConfigError, DimensionError, NumericError, StateError
from .graphs import AdjacencyTensor, MetaPathConfig, SelectionWeights, make_topology
from .mcg import McgGenerator, McgOutput
from .metrics import MetricsRow, append_row, read_rows
from .training import EvalResult, ReplayBuffer, TrainConfig, Trainer, evaluate

__version__ = "0.1.0"

__all__ = [
    "AdjacencyTensor",
    "CheckpointError",
    "ConfigError",
    "DimensionError",
    "EvalResult",
    "FactoredQ",
    "McgGenerator",
    "McgOutput",
    "MetaPathConfig",
    "MetricsRow",
    "NumericError",
    "QNetwork",
    "ReplayBuffer",
    "SelectionWeights",
    "StateError",
    "TrainConfig",
    "Trainer",
    "append_row",
    "build_env",
    "build_factored_q",
    "evaluate",
    "evaluate_q",
    "greedy_action",
    "load_config",
    "make_topology",
    "net_factory",
    "read_rows",
    "train_config",
    "__version__",
]
