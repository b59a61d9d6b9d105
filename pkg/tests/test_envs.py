import numpy as np
import pytest

from mcgmarl.envs import ENV_NAMES, make_env
from mcgmarl.envs.climb import TABLE, ClimbEnv
from mcgmarl.envs.hallway import LEFT, RIGHT, STAY, HallwayEnv
from mcgmarl.envs.pursuit import CATCH, PursuitEnv
from mcgmarl.errors import ConfigError, StateError
from mcgmarl.graphs import AdjacencyTensor


def allowed_reward(name, env, r):
    if name == "gather":
        return r in (10.0, 5.0, -5.0, 0.0)
    if name == "disperse":
        return -env.spec.n_agents <= r <= 0.0
    if name == "hallway":
        return r in {0.0, 1.0} | {-0.5 * k for k in range(2, env.n_groups + 1)}
    if name == "pursuit":
        return r == int(r) and -env.spec.n_agents <= r <= env.n_prey
    if name == "climb":
        return r in set(np.unique(TABLE))
    raise AssertionError(name)


def run_random_steps(name, n_steps, seed):
    env = make_env(name, seed=seed)
    rng = np.random.default_rng(seed + 1)
    obs = env.reset(seed=seed)
    steps = 0
    episode_t = 0
    while steps < n_steps:
        assert len(obs) == env.spec.n_agents
        for o in obs:
            assert o.shape == (env.spec.obs_len,)
            assert np.isfinite(o).all()
        actions = rng.integers(0, env.spec.n_actions, size=env.spec.n_agents)
        res = env.step(actions)
        steps += 1
        episode_t += 1
        assert np.isfinite(res.reward)
        assert allowed_reward(name, env, res.reward), (name, res.reward)
        assert episode_t <= env.spec.episode_limit
        if name == "pursuit":
            assert env.caught + env.prey.shape[0] == env.n_prey
        if res.terminated:
            with pytest.raises(StateError):
                env.step(actions)
            obs = env.reset()
            episode_t = 0
        else:
            obs = res.obs
    return env


class TestRegistry:
    def test_names(self):
        assert ENV_NAMES == ("climb", "disperse", "gather", "hallway", "pursuit")

    def test_unknown_env(self):
        with pytest.raises(ConfigError) as e:
            make_env("chess", seed=0)
        assert e.value.key == "env"

    def test_bad_param(self):
        with pytest.raises(ConfigError) as e:
            make_env("gather", seed=0, gravity=3)
        assert e.value.key == "env.gather"

    def test_overrides_reach_env(self):
        env = make_env("hallway", seed=0, length=9, n_groups=3)
        assert env.length == 9
        assert env.spec.n_agents == 6


class TestContracts:
    @pytest.mark.parametrize("name", ENV_NAMES)
    def test_random_step_fuzz(self, name):
        run_random_steps(name, 2000, seed=11)

    @pytest.mark.parametrize("name", ENV_NAMES)
    def test_seeded_reset_bitwise(self, name):
        a = make_env(name, seed=0)
        b = make_env(name, seed=99)
        obs_a = a.reset(seed=1234)
        obs_b = b.reset(seed=1234)
        for oa, ob in zip(obs_a, obs_b):
            assert oa.tobytes() == ob.tobytes()
        rng = np.random.default_rng(5)
        for _ in range(200):
            actions = rng.integers(0, a.spec.n_actions, size=a.spec.n_agents)
            ra = a.step(actions)
            rb = b.step(actions)
            assert ra.reward == rb.reward
            assert ra.terminated == rb.terminated
            assert ra.info == rb.info
            for oa, ob in zip(ra.obs, rb.obs):
                assert oa.tobytes() == ob.tobytes()
            if ra.terminated:
                a.reset(seed=77)
                b.reset(seed=77)

    @pytest.mark.parametrize("name", ENV_NAMES)
    def test_reset_recovers_after_terminal(self, name):
        env = make_env(name, seed=3)
        env.reset(seed=3)
        rng = np.random.default_rng(4)
        while True:
            res = env.step(rng.integers(0, env.spec.n_actions, size=env.spec.n_agents))
            if res.terminated:
                break
        obs = env.reset()
        assert len(obs) == env.spec.n_agents
        env.step(np.zeros(env.spec.n_agents, dtype=int))

    def test_step_before_reset(self):
        env = make_env("climb", seed=0)
        with pytest.raises(StateError):
            env.step([0, 0])

    def test_wrong_action_count(self):
        env = make_env("climb", seed=0)
        env.reset(seed=0)
        with pytest.raises(ValueError):
            env.step([0])

    def test_action_out_of_range(self):
        env = make_env("disperse", seed=0)
        env.reset(seed=0)
        with pytest.raises(ValueError):
            env.step([4] + [0] * 11)

    def test_graph_hook_default_none(self):
        for name in ("gather", "disperse", "hallway", "climb"):
            env = make_env(name, seed=0)
            env.reset(seed=0)
            assert env.interaction_graphs() is None


class TestGather:
    def setup_env(self, seed=0):
        env = make_env("gather", seed=seed)
        env.reset(seed=seed)
        return env

    def test_all_on_optimal_wins(self):
        env = self.setup_env()
        env.optimal = 0
        env.pos = np.array([[0, 0], [0, 0], [0, 0]])
        res = env.step([4, 4, 4])
        assert res.reward == 10.0
        assert res.terminated
        assert res.info["win"] is True

    def test_partial_on_optimal_penalized(self):
        env = self.setup_env()
        env.optimal = 0
        env.pos = np.array([[0, 0], [0, 0], [3, 3]])
        env._t = env.spec.episode_limit - 1
        res = env.step([4, 4, 4])
        assert res.reward == -5.0
        assert res.terminated
        assert res.info["win"] is False

    def test_all_on_non_optimal(self):
        env = self.setup_env()
        env.optimal = 0
        env.pos = np.array([[6, 0], [6, 0], [6, 0]])
        res = env.step([4, 4, 4])
        assert res.reward == 5.0
        assert res.terminated

    def test_timeout_no_case_zero(self):
        env = self.setup_env()
        env.pos = np.array([[3, 3], [2, 2], [4, 4]])
        env._t = env.spec.episode_limit - 1
        res = env.step([4, 4, 4])
        assert res.terminated
        assert res.reward == 0.0

    def test_mixed_goals_terminates(self):
        # standing on distinct goals ends the episode but matches no reward case
        env = self.setup_env()
        env.optimal = 0
        env.pos = np.array([[6, 0], [6, 0], [0, 6]])
        res = env.step([4, 4, 4])
        assert res.terminated
        assert res.reward == 0.0

    def test_optimal_id_gated_by_vision(self):
        env = self.setup_env()
        env.optimal = 0
        env.pos = np.array([[1, 2], [6, 6], [0, 0]])
        obs = env._obs()
        assert obs[0][5] == 1.0 and obs[0][6:8].sum() == 0.0
        assert obs[1][5:8].sum() == 0.0
        assert obs[2][5] == 1.0

    def test_occupancy_flags(self):
        env = self.setup_env()
        env.pos = np.array([[0, 0], [6, 0], [3, 3]])
        obs = env._obs()
        for o in obs:
            assert o[2] == 1.0 and o[3] == 1.0 and o[4] == 0.0

    def test_moves_clip_at_border(self):
        env = self.setup_env()
        env.pos = np.array([[0, 0], [6, 6], [3, 3]])
        env.optimal = 2
        res = env.step([2, 3, 4])  # left at left border, right at right border, stay
        assert (env.pos[0] == [0, 0]).all()
        assert (env.pos[1] == [6, 6]).all()
        assert (env.pos[2] == [3, 3]).all()
        assert not res.terminated


class TestDisperse:
    def force(self, j, x, seed=0):
        env = make_env("disperse", seed=seed)
        env.reset(seed=seed)
        env.need_j = j
        env.need_x = x
        return env

    def test_exact_staffing_zero(self):
        env = self.force(1, 6)
        res = env.step([1] * 6 + [0] * 6)
        assert res.reward == 0.0

    def test_understaffed(self):
        env = self.force(1, 6)
        res = env.step([1] * 4 + [0] * 8)
        assert res.reward == -2.0

    def test_overstaffed_clamps(self):
        env = self.force(2, 3)
        res = env.step([2] * 9 + [0] * 3)
        assert res.reward == 0.0

    def test_obs_layout(self):
        env = make_env("disperse", seed=5)
        obs = env.reset(seed=5)
        for o in obs:
            assert o[:4].sum() == 1.0
            assert o[int(env.need_j)] == 1.0
            assert o[4] == env.need_x / 12
            assert o[5:].sum() == 0.0  # no last choice before the first step
        res = env.step([3] * 12)
        for o in res.obs:
            assert o[5 + 3] == 1.0 and o[5:].sum() == 1.0

    def test_episode_length_fixed(self):
        env = make_env("disperse", seed=2)
        env.reset(seed=2)
        for t in range(10):
            res = env.step([0] * 12)
        assert res.terminated


class TestHallway:
    def fresh(self, positions, seed=0):
        env = make_env("hallway", seed=seed)
        env.reset(seed=seed)
        env.pos = np.array(positions)
        return env

    def test_group_enters_together(self):
        env = self.fresh([1, 1, 4, 5])
        res = env.step([LEFT, LEFT, STAY, STAY])
        assert res.reward == 1.0
        assert env.scored[0] and not env.scored[1]
        assert not res.terminated

    def test_lone_arrival_waits_at_goal(self):
        env = self.fresh([1, 2, 5, 5])
        res = env.step([LEFT, LEFT, STAY, STAY])
        assert res.reward == 0.0
        assert not res.terminated
        assert env.pos[0] == 0 and env.pos[1] == 1
        assert not env.scored.any()

    def test_goal_cell_absorbs(self):
        env = self.fresh([1, 3, 5, 5])
        env.step([LEFT, STAY, STAY, STAY])
        env.step([RIGHT, STAY, STAY, STAY])
        assert env.pos[0] == 0

    def test_piecemeal_group_forfeits(self):
        env = self.fresh([1, 2, 5, 5])
        env.step([LEFT, LEFT, STAY, STAY])
        res = env.step([STAY, LEFT, STAY, STAY])
        assert res.reward == 0.0
        assert (env.pos[:2] == 0).all()
        assert not env.scored.any()

    def test_two_group_collision_penalized_and_reset(self):
        env = self.fresh([1, 1, 1, 1])
        res = env.step([LEFT, LEFT, LEFT, LEFT])
        assert res.reward == -1.0
        assert not res.terminated
        assert (env.pos == env.length).all()
        assert not env.scored.any()

    def test_partial_plus_full_group_is_a_collision(self):
        env = self.fresh([1, 1, 1, 3])
        res = env.step([LEFT, LEFT, LEFT, STAY])
        assert res.reward == -1.0
        assert (env.pos[:3] == env.length).all() and env.pos[3] == 3
        assert not env.scored.any()

    def test_all_groups_scored_terminates(self):
        env = self.fresh([1, 1, 2, 2])
        env.step([LEFT, LEFT, LEFT, LEFT])
        res = env.step([STAY, STAY, LEFT, LEFT])
        assert res.reward == 1.0
        assert res.terminated
        assert res.info["win"] is True

    def test_scored_group_is_frozen(self):
        env = self.fresh([1, 1, 5, 5])
        env.step([LEFT, LEFT, STAY, STAY])
        res = env.step([RIGHT, RIGHT, STAY, STAY])
        assert env.pos[0] == 0 and env.pos[1] == 0
        assert not res.terminated

    def test_timeout_without_score_is_loss(self):
        env = self.fresh([5, 5, 5, 5])
        res = None
        for _ in range(env.spec.episode_limit):
            res = env.step([STAY, STAY, STAY, STAY])
        assert res.terminated
        assert res.info["win"] is False

    def test_one_scored_group_wins_at_timeout(self):
        env = self.fresh([1, 1, 5, 5])
        res = env.step([LEFT, LEFT, STAY, STAY])
        assert res.reward == 1.0 and not res.terminated
        for _ in range(env.spec.episode_limit - 1):
            res = env.step([STAY, STAY, STAY, STAY])
        assert res.terminated
        assert res.info["win"] is True

    def test_three_group_collision_costs_more(self):
        env = make_env("hallway", seed=0, n_groups=3)
        env.reset(seed=0)
        env.pos = np.array([1, 1, 1, 1, 1, 1])
        res = env.step([LEFT] * 6)
        assert res.reward == -1.5
        assert (env.pos == env.length).all()

    def test_second_group_scores_after_first(self):
        env = self.fresh([1, 1, 1, 1])
        res = env.step([LEFT, LEFT, STAY, STAY])
        assert res.reward == 1.0 and not res.terminated
        res = env.step([STAY, STAY, LEFT, LEFT])
        assert res.reward == 1.0
        assert res.terminated
        assert res.info["win"] is True

    def test_collision_then_recovery(self):
        env = self.fresh([1, 1, 1, 1], seed=3)
        env.step([LEFT, LEFT, LEFT, LEFT])
        for _ in range(env.length - 1):
            env.step([LEFT, LEFT, STAY, STAY])
        res = env.step([LEFT, LEFT, STAY, STAY])
        assert res.reward == 1.0
        assert env.scored[0] and not env.scored[1]

    def test_position_obs_one_hot(self):
        env = make_env("hallway", seed=8)
        obs = env.reset(seed=8)
        for i, o in enumerate(obs):
            assert o[: env.length + 1].sum() == 1.0
            assert o[env.length + 1 + env.group[i]] == 1.0


class TestPursuit:
    def staged(self, predators, prey, seed=0):
        env = make_env("pursuit", seed=seed)
        env.reset(seed=seed)
        env.pos[:] = np.array([[0, 0]] * env.spec.n_agents)
        env.pos[: len(predators)] = np.array(predators)
        # park the rest far from the prey
        env.pos[len(predators):] = np.array([(k, 9) for k in range(env.spec.n_agents - len(predators))])
        env.prey = np.array(prey).reshape(-1, 2)
        return env

    def test_pincer_catch(self):
        env = self.staged([(4, 5), (6, 5)], [(5, 5)])
        acts = [CATCH, CATCH] + [4] * 8
        res = env.step(acts)
        assert res.reward == 1.0
        assert env.caught == 1
        assert env.prey.shape[0] == 0
        assert res.terminated
        assert res.info["prey_caught"] == 1

    def test_lone_catcher_penalized(self):
        env = self.staged([(4, 5)], [(5, 5)])
        res = env.step([CATCH] + [4] * 9)
        assert res.reward == -1.0
        assert env.prey.shape[0] == 1
        assert not res.terminated

    def test_vacuous_catch_is_free(self):
        env = self.staged([(0, 0)], [(5, 5)])
        res = env.step([CATCH] + [4] * 9)
        assert res.reward == 0.0

    def test_catch_wraps_around_border(self):
        env = self.staged([(9, 5), (1, 5)], [(0, 5)])
        res = env.step([CATCH, CATCH] + [4] * 8)
        assert res.reward == 1.0

    def test_two_prey_one_shared_lone_catcher(self):
        # one catcher adjacent to two prey: each prey counts it separately
        env = self.staged([(5, 4)], [(5, 5), (5, 3)])
        res = env.step([CATCH] + [4] * 9)
        assert res.reward == -2.0

    def test_move_then_catch_ordering(self):
        # a moving predator arrives next to the prey this step but only
        # agents that issued catch participate in the resolution
        env = self.staged([(4, 5), (6, 5)], [(5, 5)])
        res = env.step([3, CATCH] + [4] * 8)  # predator 0 moves right onto (5,5)
        assert res.reward == -1.0

    def test_obs_shapes_and_self_marker(self):
        env = make_env("pursuit", seed=1)
        obs = env.reset(seed=1)
        side = 2 * env.vision + 1
        for i, o in enumerate(obs):
            patch = o.reshape(2, side, side)
            assert patch[0, env.vision, env.vision] == 1.0  # self in predator layer
            assert set(np.unique(patch)) <= {0.0, 1.0}


class TestPursuitGraphs:
    @staticmethod
    def wrapped_cheb(a, b, size):
        best = []
        for k in range(2):
            d = abs(int(a[k]) - int(b[k])) % size
            best.append(min(d, size - d))
        return max(best)

    def oracle_layers(self, env):
        n = env.spec.n_agents
        prox = np.zeros((n, n))
        shared = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if self.wrapped_cheb(env.pos[i], env.pos[j], env.size) <= 2:
                    prox[i, j] = 1.0
                for p in env.prey:
                    if (self.wrapped_cheb(env.pos[i], p, env.size) <= env.vision
                            and self.wrapped_cheb(env.pos[j], p, env.size) <= env.vision):
                        shared[i, j] = 1.0
                        break
        return prox, shared

    def test_matches_pairwise_scan(self):
        env = make_env("pursuit", seed=0)
        rng = np.random.default_rng(0)
        for trial in range(30):
            env.reset(seed=trial)
            for _ in range(int(rng.integers(0, 6))):
                res = env.step(rng.integers(0, 6, size=10))
                if res.terminated:
                    env.reset(seed=trial + 100)
            tensor = env.interaction_graphs()
            assert isinstance(tensor, AdjacencyTensor)
            assert not tensor.identity_appended
            stack = tensor.stack()
            assert stack.shape == (2, 10, 10)
            prox, shared = self.oracle_layers(env)
            assert np.array_equal(stack[0], prox)
            assert np.array_equal(stack[1], shared)
            assert np.array_equal(stack[0], stack[0].T)
            assert np.array_equal(stack[1], stack[1].T)
            assert np.trace(stack[0]) == 0 and np.trace(stack[1]) == 0

    def test_empty_prey_shared_layer_zero(self):
        env = make_env("pursuit", seed=0)
        env.reset(seed=0)
        env.prey = np.zeros((0, 2), dtype=int)
        stack = env.interaction_graphs().stack()
        assert stack[1].sum() == 0.0


class TestClimb:
    def test_full_table(self):
        env = ClimbEnv(seed=0)
        for a in range(3):
            for b in range(3):
                env.reset()
                res = env.step([a, b])
                assert res.reward == TABLE[a, b]
                assert res.terminated

    def test_optimum_and_attractor(self):
        assert TABLE[0, 0] == TABLE.max() == 11.0
        row_avg_best = int(np.argmax(TABLE.mean(axis=1)))
        assert row_avg_best == 2

    def test_constant_obs(self):
        env = ClimbEnv(seed=0)
        obs = env.reset(seed=0)
        assert all(np.array_equal(o, np.ones(1)) for o in obs)
