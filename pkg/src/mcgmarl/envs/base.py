"""Shared multi-agent stepping interface.

All environments expose reset() -> per-agent observations and step(actions)
-> StepResult with one shared reward. Stepping a terminated episode raises;
reset always recovers. Each instance owns a seeded generator: reset(seed=k)
restarts the stream so identical seeds reproduce episodes bitwise.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import StateError

METRIC_NAMES = ("win_rate", "mean_return", "prey_caught")


@dataclass
class EnvSpec:
    n_agents: int
    n_actions: int
    obs_len: int
    episode_limit: int
    metric_name: str

    def __post_init__(self):
        if min(self.n_agents, self.n_actions, self.obs_len, self.episode_limit) < 1:
            raise ValueError(f"all counts must be positive: {self}")
        if self.metric_name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.metric_name!r}, expected one of {METRIC_NAMES}")


@dataclass
class StepResult:
    obs: list
    reward: float
    terminated: bool
    info: dict = field(default_factory=dict)


class MultiAgentEnv:
    spec: EnvSpec

    def __init__(self, seed=None):
        self.rng = np.random.default_rng(seed)
        self._needs_reset = True
        self._t = 0

    def reset(self, seed=None):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self._needs_reset = False
        self._t = 0
        return self._reset()

    def step(self, actions) -> StepResult:
        if self._needs_reset:
            raise StateError("episode is terminated; call reset() before stepping")
        actions = self._check_actions(actions)
        result = self._step(actions)
        self._t += 1
        if result.terminated:
            self._needs_reset = True
        return result

    def interaction_graphs(self):
        """Per-step typed adjacency layers, or None when the env supplies none."""
        return None

    def _check_actions(self, actions):
        acts = [int(a) for a in actions]
        if len(acts) != self.spec.n_agents:
            raise ValueError(f"got {len(acts)} actions for {self.spec.n_agents} agents")
        for a in acts:
            if not 0 <= a < self.spec.n_actions:
                raise ValueError(f"invalid action {a}, expected 0..{self.spec.n_actions - 1}")
        return acts

    def _reset(self):
        raise NotImplementedError

    def _step(self, actions) -> StepResult:
        raise NotImplementedError
