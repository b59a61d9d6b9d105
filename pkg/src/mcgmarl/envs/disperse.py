"""Hospital staffing game: keep the needy hospital covered.

Each step one hospital j and its demand x ~ Uniform{1..n_agents} are drawn
and shown to every agent; agents then pick a hospital, and the shared reward
is min(arrivals_at_j - x, 0), so only understaffing is penalized.
"""

import numpy as np

from .base import EnvSpec, MultiAgentEnv, StepResult


class DisperseEnv(MultiAgentEnv):
    def __init__(self, seed=None, n_agents=12, n_hospitals=4, episode_limit=10):
        super().__init__(seed)
        self.n_hospitals = n_hospitals
        obs_len = n_hospitals + 1 + n_hospitals  # needy one-hot | demand/n | last choice one-hot
        self.spec = EnvSpec(n_agents, n_hospitals, obs_len, episode_limit, "mean_return")

    def _reset(self):
        self.last_choice = np.full(self.spec.n_agents, -1)
        self._draw_need()
        return self._obs()

    def _draw_need(self):
        self.need_j = int(self.rng.integers(0, self.n_hospitals))
        self.need_x = int(self.rng.integers(1, self.spec.n_agents + 1))

    def _obs(self):
        h = self.n_hospitals
        out = []
        for i in range(self.spec.n_agents):
            o = np.zeros(self.spec.obs_len)
            o[self.need_j] = 1.0
            o[h] = self.need_x / self.spec.n_agents
            if self.last_choice[i] >= 0:
                o[h + 1 + self.last_choice[i]] = 1.0
            out.append(o)
        return out

    def _step(self, actions):
        arrivals = int(sum(a == self.need_j for a in actions))
        reward = float(min(arrivals - self.need_x, 0))
        self.last_choice = np.asarray(actions)
        terminated = self._t + 1 >= self.spec.episode_limit
        self._draw_need()
        return StepResult(self._obs(), reward, terminated, {})
