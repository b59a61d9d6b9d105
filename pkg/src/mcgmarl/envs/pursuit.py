"""Predator-prey on a toroidal grid with explicit catch actions.

Predators move or issue catch; a prey flanked by two or more adjacent
catchers is removed for +1, while a lone adjacent catcher pays -1.  Prey
then take uniform random moves.  The environment also exposes two dynamic
interaction layers (spatial proximity and shared visible prey) for
graph-conditioned coordination.
"""

import numpy as np

from .base import EnvSpec, MultiAgentEnv, StepResult
from ..graphs import AdjacencyTensor

MOVES = np.array([(0, -1), (0, 1), (-1, 0), (1, 0), (0, 0)])  # up, down, left, right, stay
CATCH = 5


class PursuitEnv(MultiAgentEnv):
    def __init__(self, seed=None, n_agents=10, n_prey=5, size=10, episode_limit=60,
                 vision=2):
        super().__init__(seed)
        self.n_prey = n_prey
        self.size = size
        self.vision = vision
        side = 2 * vision + 1
        obs_len = 2 * side * side  # predator layer | prey layer, egocentric
        self.spec = EnvSpec(n_agents, 6, obs_len, episode_limit, "prey_caught")

    def _reset(self):
        n = self.spec.n_agents
        cells = self.rng.choice(self.size * self.size, size=n + self.n_prey, replace=False)
        self.pos = np.stack([cells[:n] % self.size, cells[:n] // self.size], axis=1)
        self.prey = np.stack([cells[n:] % self.size, cells[n:] // self.size], axis=1)
        self.caught = 0
        return self._obs()

    def _wrapped_delta(self, a, b):
        # shortest signed offsets b - a on the torus, in (-size/2, size/2]
        d = (b[None, :, :] - a[:, None, :]) % self.size
        d = np.where(d > self.size // 2, d - self.size, d)
        return d

    def _obs(self):
        side = 2 * self.vision + 1
        out = []
        dp = self._wrapped_delta(self.pos, self.pos)
        dq = self._wrapped_delta(self.pos, self.prey)
        for i in range(self.spec.n_agents):
            patch = np.zeros((2, side, side))
            for layer, deltas in ((0, dp[i]), (1, dq[i])):
                near = np.abs(deltas).max(axis=1) <= self.vision
                for dx, dy in deltas[near]:
                    patch[layer, int(dy) + self.vision, int(dx) + self.vision] = 1.0
            out.append(patch.reshape(-1))
        return out

    def _step(self, actions):
        actions = np.asarray(actions)
        moving = actions != CATCH
        self.pos[moving] = (self.pos[moving] + MOVES[actions[moving]]) % self.size
        reward = 0.0
        if self.prey.shape[0] and np.any(~moving):
            catchers = self.pos[~moving]
            d = self._wrapped_delta(self.prey, catchers)
            adjacent = np.abs(d).sum(axis=2) == 1  # 4-neighborhood on the torus
            counts = adjacent.sum(axis=1)
            removed = counts >= 2
            reward = float(removed.sum()) - float((counts == 1).sum())
            self.caught += int(removed.sum())
            self.prey = self.prey[~removed]
        if self.prey.shape[0]:
            jumps = self.rng.integers(0, len(MOVES), size=self.prey.shape[0])
            self.prey = (self.prey + MOVES[jumps]) % self.size
        terminated = self.prey.shape[0] == 0 or self._t + 1 >= self.spec.episode_limit
        info = {"prey_caught": int(self.caught)} if terminated else {}
        return StepResult(self._obs(), reward, terminated, info)

    def interaction_graphs(self):
        n = self.spec.n_agents
        d = self._wrapped_delta(self.pos, self.pos)
        cheb = np.abs(d).max(axis=2)
        proximity = ((cheb <= 2) & ~np.eye(n, dtype=bool)).astype(float)
        shared = np.zeros((n, n))
        if self.prey.shape[0]:
            dq = self._wrapped_delta(self.pos, self.prey)
            sees = (np.abs(dq).max(axis=2) <= self.vision).astype(float)
            shared = ((sees @ sees.T > 0) & ~np.eye(n, dtype=bool)).astype(float)
        return AdjacencyTensor([proximity, shared])
