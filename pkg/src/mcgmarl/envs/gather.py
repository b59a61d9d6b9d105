"""Grid world where all agents must meet on the episode's optimal goal.

Three goals sit on fixed corners; one is drawn optimal each episode. The
episode ends at the step limit or as soon as every agent stands on some goal.
Terminal reward: 10 if all agents stand on the optimal goal (the win), 5 if
all stand on the same non-optimal goal, -5 if only some stand on the optimal
goal, 0 otherwise. An agent observes the optimal goal's identity only within
Chebyshev distance `vision` of that goal.
"""

import numpy as np

from .base import EnvSpec, MultiAgentEnv, StepResult

MOVES = np.array([(0, -1), (0, 1), (-1, 0), (1, 0), (0, 0)])  # up, down, left, right, stay


class GatherEnv(MultiAgentEnv):
    def __init__(self, seed=None, n_agents=3, size=7, episode_limit=20, vision=2):
        super().__init__(seed)
        self.size = size
        self.vision = vision
        self.goals = np.array([(0, 0), (size - 1, 0), (0, size - 1)])
        self.spec = EnvSpec(n_agents, 5, 2 + 3 + 3, episode_limit, "win_rate")

    def _reset(self):
        self.pos = self.rng.integers(0, self.size, size=(self.spec.n_agents, 2))
        self.optimal = int(self.rng.integers(0, 3))
        return self._obs()

    def _obs(self):
        on_goal = (self.pos[:, None, :] == self.goals[None, :, :]).all(axis=2)  # (n, 3)
        occupancy = on_goal.any(axis=0).astype(float)
        out = []
        for i in range(self.spec.n_agents):
            o = np.zeros(self.spec.obs_len)
            o[0:2] = self.pos[i] / self.size
            o[2:5] = occupancy
            if np.abs(self.pos[i] - self.goals[self.optimal]).max() <= self.vision:
                o[5 + self.optimal] = 1.0
            out.append(o)
        return out

    def _step(self, actions):
        self.pos = np.clip(self.pos + MOVES[actions], 0, self.size - 1)
        on_goal = (self.pos[:, None, :] == self.goals[None, :, :]).all(axis=2)
        terminated = bool(on_goal.any(axis=1).all()) or self._t + 1 >= self.spec.episode_limit
        reward = 0.0
        info = {}
        if terminated:
            n_on_optimal = int(on_goal[:, self.optimal].sum())
            if n_on_optimal == self.spec.n_agents:
                reward = 10.0
            elif n_on_optimal > 0:
                reward = -5.0
            elif any(on_goal[:, g].all() for g in range(3) if g != self.optimal):
                reward = 5.0
            info["win"] = reward == 10.0
        return StepResult(self._obs(), reward, terminated, info)
