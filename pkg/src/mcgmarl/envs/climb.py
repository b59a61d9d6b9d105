"""Two-player climb matrix game, one joint action per episode.

The (0,0) joint action is the unique optimum at 11, but the -30
miscoordination penalties push per-agent learners toward the safe (2,2)
corner, which makes the game a compact relative-overgeneralization probe.
"""

import numpy as np

from .base import EnvSpec, MultiAgentEnv, StepResult

TABLE = np.array([
    [11.0, -30.0, 0.0],
    [-30.0, 7.0, 6.0],
    [0.0, 0.0, 5.0],
])


class ClimbEnv(MultiAgentEnv):
    def __init__(self, seed=None):
        super().__init__(seed)
        self.spec = EnvSpec(2, 3, 1, 1, "mean_return")

    def _reset(self):
        return self._obs()

    def _obs(self):
        return [np.ones(1), np.ones(1)]

    def _step(self, actions):
        reward = float(TABLE[actions[0], actions[1]])
        return StepResult(self._obs(), reward, True, {})
