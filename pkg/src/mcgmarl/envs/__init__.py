"""Cooperative multi-agent environments behind one stepping interface."""

import inspect

from ..errors import ConfigError
from .base import EnvSpec, MultiAgentEnv, StepResult, METRIC_NAMES
from .climb import ClimbEnv
from .disperse import DisperseEnv
from .gather import GatherEnv
from .hallway import HallwayEnv
from .pursuit import PursuitEnv

_REGISTRY = {
    "gather": GatherEnv,
    "disperse": DisperseEnv,
    "pursuit": PursuitEnv,
    "hallway": HallwayEnv,
    "climb": ClimbEnv,
}

ENV_NAMES = tuple(sorted(_REGISTRY))


def make_env(name, seed=None, **params):
    """Instantiate a registered environment by name."""
    if name not in _REGISTRY:
        raise ConfigError(f"unknown env {name!r}, expected one of {ENV_NAMES}", key="env")
    try:
        return _REGISTRY[name](seed=seed, **params)
    except TypeError as exc:
        raise ConfigError(str(exc), key=f"env.{name}") from None


def env_param_defaults(name):
    """Constructor keyword defaults of a registered env, minus the seed."""
    if name not in _REGISTRY:
        raise ConfigError(f"unknown env {name!r}, expected one of {ENV_NAMES}", key="env")
    sig = inspect.signature(_REGISTRY[name].__init__)
    return {k: p.default for k, p in sig.parameters.items() if k not in ("self", "seed")}


__all__ = [
    "EnvSpec", "MultiAgentEnv", "StepResult", "METRIC_NAMES", "ENV_NAMES",
    "make_env", "env_param_defaults",
    "GatherEnv", "DisperseEnv", "PursuitEnv", "HallwayEnv", "ClimbEnv",
]
