"""Grouped hallway game with a shared goal cell.

Each agent walks its own chain of length L toward a goal cell shared by all
chains.  A group earns +1 when every member steps onto the goal in the same
time step.  Members of n_g > 1 groups entering together cost -0.5 * n_g and
are sent back to the far ends of their chains.  The goal cell absorbs: an
agent that arrives alone waits there and never moves again, so a group that
trickles in piecemeal forfeits its reward.  The team wins when at least one
group has scored.  Agents observe only their own position and group id, so
entries can only be synchronized by counting steps since the reset.
"""

import numpy as np

from .base import EnvSpec, MultiAgentEnv, StepResult

LEFT, RIGHT, STAY = 0, 1, 2


class HallwayEnv(MultiAgentEnv):
    def __init__(self, seed=None, n_groups=2, group_size=2, length=6, episode_limit=30):
        super().__init__(seed)
        self.n_groups = n_groups
        self.group_size = group_size
        self.length = length
        n = n_groups * group_size
        self.group = np.repeat(np.arange(n_groups), group_size)
        obs_len = length + 1 + n_groups  # position one-hot (goal..L) | group one-hot
        self.spec = EnvSpec(n, 3, obs_len, episode_limit, "win_rate")

    def _reset(self):
        n = self.spec.n_agents
        self.pos = self.rng.integers(1, self.length + 1, size=n)
        self.scored = np.zeros(self.n_groups, dtype=bool)
        return self._obs()

    def _obs(self):
        out = []
        for i in range(self.spec.n_agents):
            o = np.zeros(self.spec.obs_len)
            o[self.pos[i]] = 1.0
            o[self.length + 1 + self.group[i]] = 1.0
            out.append(o)
        return out

    def _step(self, actions):
        new_pos = self.pos.copy()
        for i, a in enumerate(actions):
            if self.pos[i] == 0:
                continue  # the goal cell absorbs whoever stands on it
            if a == LEFT:
                new_pos[i] = self.pos[i] - 1
            elif a == RIGHT:
                new_pos[i] = min(self.pos[i] + 1, self.length)
        entering = (new_pos == 0) & (self.pos != 0)
        entering_groups = np.unique(self.group[entering])
        reward = 0.0
        if entering_groups.size > 1:
            reward = -0.5 * entering_groups.size
            new_pos[entering] = self.length  # colliders restart their chains
        elif entering_groups.size == 1:
            g = entering_groups[0]
            if np.array_equal(entering, self.group == g):
                reward = 1.0
                self.scored[g] = True
        self.pos = new_pos
        terminated = bool(self.scored.all()) or self._t + 1 >= self.spec.episode_limit
        info = {}
        if terminated:
            info["win"] = bool(self.scored.any())
        return StepResult(self._obs(), reward, terminated, info)
