"""Episode replay, epsilon-greedy collection, TD updates, and greedy evaluation.

td_update replays whole episodes through the online and target networks as one
stacked batch: episodes are padded to a common length, every (episode, step)
pair becomes one sample row, and the loss mask removes the padding. Targets
are double-Q: the online network picks the greedy joint action at the next
step, the target network evaluates it. All randomness flows through explicit
generators so a (config, seed) pair reproduces runs bitwise.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .coordination import QNetwork, eval_objective, greedy_action, maxsum_greedy
from .errors import ConfigError, NumericError
from .graphs import extract_edges
from .numerics import AdamState, adam_step, zero_grads


@dataclass
class EpisodeRecord:
    """One episode: parallel arrays over steps, terminal exactly at the end."""

    obs: np.ndarray          # (T, n, obs_len)
    actions: np.ndarray      # (T, n)
    rewards: np.ndarray      # (T,)
    terminated: np.ndarray   # (T,) bool
    graphs: np.ndarray = None  # (T, k, n, n) when the env supplies layers

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.terminated = np.asarray(self.terminated, dtype=bool)
        if self.obs.ndim != 3 or self.obs.shape[0] < 1:
            raise ValueError(f"obs must be (T, n, obs_len) with T >= 1, got {self.obs.shape}")
        t = self.obs.shape[0]
        if not (self.actions.shape[0] == self.rewards.shape[0] == self.terminated.shape[0] == t):
            raise ValueError("parallel episode arrays disagree on length")
        if self.terminated.sum() != 1 or not self.terminated[-1]:
            raise ValueError("episode must terminate exactly once, at the last step")
        if not np.isfinite(self.rewards).all():
            raise ValueError("rewards must be finite")
        if self.graphs is not None:
            self.graphs = np.asarray(self.graphs, dtype=np.float64)
            if self.graphs.ndim != 4 or self.graphs.shape[0] != t:
                raise ValueError(f"graphs must be (T, k, n, n), got {self.graphs.shape}")

    @property
    def length(self) -> int:
        return self.obs.shape[0]


class ReplayBuffer:
    """Ring buffer of episodes with uniform seeded sampling."""

    def __init__(self, capacity: int = 2000):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._episodes = deque(maxlen=capacity)

    def __len__(self):
        return len(self._episodes)

    def push(self, record: EpisodeRecord):
        self._episodes.append(record)

    def sample(self, rng: np.random.Generator, count: int):
        if not self._episodes:
            raise ValueError("cannot sample from an empty buffer")
        pool = list(self._episodes)
        idx = rng.integers(0, len(pool), size=count)
        return [pool[i] for i in idx]


@dataclass
class TrainConfig:
    total_steps: int
    gamma: float = 0.99
    lr: float = 5e-4
    batch_episodes: int = 16
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_anneal_steps: int = 50_000
    target_interval: int = 200
    eval_interval: int = 10_000
    eval_episodes: int = 20
    buffer_capacity: int = 2000
    update_interval: int = 1   # episodes between gradient updates
    seed: int = 0

    def validate(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must be in [0, 1), got {self.gamma}", key="train.gamma")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}", key="train.lr")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ConfigError(
                f"need 0 <= eps_end <= eps_start <= 1, got {self.eps_start}..{self.eps_end}",
                key="train.eps_start")
        for key in ("total_steps", "batch_episodes", "eps_anneal_steps", "target_interval",
                    "eval_interval", "eval_episodes", "buffer_capacity", "update_interval"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}",
                                  key=f"train.{key}")
        if self.buffer_capacity < self.batch_episodes:
            raise ConfigError("buffer_capacity must be at least batch_episodes",
                              key="train.buffer_capacity")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}", key="train.seed")
        return self


class Optimizer:
    """Adam over one parameter list; grads are zeroed by td_update, not here."""

    def __init__(self, params, lr: float):
        self.params = list(params)
        self.lr = lr
        self.states = [AdamState(p.value.shape) for p in self.params]

    def step(self):
        adam_step(self.params, self.states, self.lr)


# ---------------------------------------------------------------------- #
# collection and evaluation

def collect_episode(env, net: QNetwork, eps: float, rng: np.random.Generator) -> EpisodeRecord:
    """Roll out one episode with per-agent epsilon randomization.

    The exploration draws (mask + random actions) happen every step, so the
    rng stream advances identically whichever branch is taken; when every
    agent explores, the heads are skipped but hidden states still advance.
    """
    n, a_count = env.spec.n_agents, env.spec.n_actions
    obs = env.reset()
    net.encoder.reset()
    prev = None
    obs_l, act_l, rew_l, term_l, graph_l = [], [], [], [], []
    while True:
        hook = env.interaction_graphs()
        stack = hook.stack() if hook is not None else None
        explore = rng.random(n) < eps
        randa = rng.integers(0, a_count, size=n)
        if explore.all():
            net.encode_only(obs, prev)
            acts = randa
        else:
            fq = net.q_factored(obs, prev, env_layers=stack)
            acts = np.where(explore, randa, np.asarray(greedy_action(fq, net.iterations)))
        res = env.step(acts)
        obs_l.append(np.asarray(obs, dtype=np.float64))
        act_l.append(acts)
        rew_l.append(res.reward)
        term_l.append(res.terminated)
        if stack is not None:
            graph_l.append(stack)
        prev = acts
        obs = res.obs
        if res.terminated:
            break
    graphs = np.stack(graph_l) if graph_l else None
    return EpisodeRecord(np.stack(obs_l), np.stack(act_l), np.array(rew_l),
                         np.array(term_l), graphs)


@dataclass
class EvalResult:
    return_mean: float
    return_std: float
    metric_name: str
    metric_value: float
    episodes: int


def evaluate(env, net: QNetwork, episodes: int, seed: int) -> EvalResult:
    """Greedy evaluation on a dedicated rng stream.

    The stream is rebuilt from (seed, 4) on every call and each episode
    reseeds the env, so the same parameters always produce the same result
    regardless of where training left the env generator.
    """
    rng = np.random.default_rng([seed, 4])
    returns = np.zeros(episodes)
    metrics = np.zeros(episodes)
    for e in range(episodes):
        obs = env.reset(seed=int(rng.integers(0, 2**31 - 1)))
        net.encoder.reset()
        prev = None
        total = 0.0
        while True:
            hook = env.interaction_graphs()
            stack = hook.stack() if hook is not None else None
            fq = net.q_factored(obs, prev, env_layers=stack)
            acts = np.asarray(greedy_action(fq, net.iterations))
            res = env.step(acts)
            total += res.reward
            prev = acts
            obs = res.obs
            if res.terminated:
                break
        returns[e] = total
        name = env.spec.metric_name
        if name == "win_rate":
            metrics[e] = 1.0 if res.info.get("win") else 0.0
        elif name == "prey_caught":
            metrics[e] = float(res.info.get("prey_caught", 0))
        else:
            metrics[e] = total
    return EvalResult(float(returns.mean()), float(returns.std()),
                      env.spec.metric_name, float(metrics.mean()), episodes)


# ---------------------------------------------------------------------- #
# TD update

def _pad_batch(batch):
    b_count = len(batch)
    t_max = max(r.length for r in batch)
    n, obs_len = batch[0].obs.shape[1:]
    obs = np.zeros((b_count, t_max, n, obs_len))
    act = np.zeros((b_count, t_max, n), dtype=np.int64)
    prev = np.full((b_count, t_max, n), -1, dtype=np.int64)
    rew = np.zeros((b_count, t_max))
    mask = np.zeros((b_count, t_max))
    term = np.zeros((b_count, t_max), dtype=bool)
    graphs = None
    if batch[0].graphs is not None:
        graphs = np.zeros((b_count, t_max) + batch[0].graphs.shape[1:])
    for b, rec in enumerate(batch):
        if (rec.graphs is None) != (graphs is None):
            raise ValueError("episodes mix graph-carrying and graph-free records")
        t = rec.length
        obs[b, :t] = rec.obs
        act[b, :t] = rec.actions
        prev[b, 1:t] = rec.actions[:-1]
        rew[b, :t] = rec.rewards
        mask[b, :t] = 1.0
        term[b, :t] = rec.terminated
        if graphs is not None:
            graphs[b, :t] = rec.graphs
    return obs, act, prev, rew, mask, term, graphs


def _replay_encoder(encoder, obs, prev, cache: bool):
    """Run the shared encoder over all episodes step-locked; rows are (B*n)."""
    b_count, t_count, n, _ = obs.shape
    h = np.zeros((b_count * n, encoder.hidden))
    feats = np.empty((t_count, b_count * n, encoder.hidden))
    for t in range(t_count):
        u = encoder.build_inputs(obs[:, t], prev[:, t])
        h = encoder.forward_rows(u, h, cache=cache)
        feats[t] = h
    x = feats.reshape(t_count, b_count, n, encoder.hidden).transpose(1, 0, 2, 3)
    return np.ascontiguousarray(x).reshape(b_count * t_count, n, encoder.hidden)


def _forward_features(net: QNetwork, x, graphs_flat, cache: bool):
    """Head inputs plus generator channels/cache entry (None for plain modes)."""
    if net.mcg is None:
        return x, None, None
    if net.dynamic_graphs:
        if graphs_flat is None:
            raise ConfigError("network expects environment graph layers but the batch has none")
        s_count, n = x.shape[:2]
        stack = np.empty((s_count, net.mcg.k, n, n))
        stack[:, 0] = np.eye(n)
        stack[:, 1:] = graphs_flat
    else:
        stack = net.input_stack()
    z, channels, entry = net.mcg.forward_batch(stack, x, cache=cache)
    if cache:
        net.mcg._cache.pop()  # the entry is threaded through td_update explicitly
    return z, channels, entry


def _tile_edges(edges, s_count):
    e_count = len(edges)
    if e_count == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty, np.zeros(0)
    edge_i = np.tile(np.array([i for i, _ in edges], dtype=np.int64), s_count)
    edge_j = np.tile(np.array([j for _, j in edges], dtype=np.int64), s_count)
    edge_sample = np.repeat(np.arange(s_count, dtype=np.int64), e_count)
    scale = np.full(e_count * s_count, 1.0 / (2.0 * e_count))
    return edge_sample, edge_i, edge_j, scale


def _edge_instances(net: QNetwork, channels, s_count):
    """Flat (sample, i, j) edge instances and the per-instance payoff scale."""
    if net.mode == "dcg":
        return _tile_edges(net.static_edges, s_count)
    if net.mode != "dmcg":
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty, np.zeros(0)
    thr = net.mcg.cfg.edge_threshold
    if channels.ndim == 3:  # static adjacency input: one edge set for every sample
        return _tile_edges(extract_edges(list(channels), thr), s_count)
    sample_l, i_l, j_l, scale_l = [], [], [], []
    for s in range(s_count):
        edges = extract_edges(list(channels[s]), thr)
        if not edges:
            continue
        scale = 1.0 / (2.0 * len(edges))
        for (i, j) in edges:
            sample_l.append(s)
            i_l.append(i)
            j_l.append(j)
            scale_l.append(scale)
    return (np.array(sample_l, dtype=np.int64), np.array(i_l, dtype=np.int64),
            np.array(j_l, dtype=np.int64), np.array(scale_l))


def _folded_tables(net: QNetwork, feat, edge_sample, edge_i, edge_j, scale, cache: bool):
    """(Q_ij + Q_ji^T) * scale per edge instance; caches live in the payoff head."""
    if net.payoff is None or len(edge_sample) == 0:
        return np.zeros((0, net.n_actions, net.n_actions))
    z_i = feat[edge_sample, edge_i]
    z_j = feat[edge_sample, edge_j]
    tab_ij = net.payoff.forward_pairs(z_i, z_j, cache=cache)
    tab_ji = net.payoff.forward_pairs(z_j, z_i, cache=cache)
    return (tab_ij + tab_ji.transpose(0, 2, 1)) * scale[:, None, None]


def _scaled_utils(net: QNetwork, utils):
    return utils / net.n_agents if net.aggregation == "mean" else utils


def _td_pass(arrays, net: QNetwork, target: QNetwork, gamma: float, cache: bool):
    """Forward TD loss; with cache also a closure that runs the full backward."""
    obs, act, prev, rew, mask, term, graphs = arrays
    b_count, t_count, n = act.shape
    s_count = b_count * t_count
    a_count = net.n_actions
    graphs_flat = graphs.reshape((s_count,) + graphs.shape[2:]) if graphs is not None else None

    x_on = _replay_encoder(net.encoder, obs, prev, cache=cache)
    feat_on, chan_on, entry_on = _forward_features(net, x_on, graphs_flat, cache=cache)
    feat_dim = feat_on.shape[2]
    utils_on = net.utility.lin.forward(
        feat_on.reshape(s_count * n, feat_dim), cache=cache).reshape(s_count, n, a_count)

    x_tg = _replay_encoder(target.encoder, obs, prev, cache=False)
    feat_tg, chan_tg, _ = _forward_features(target, x_tg, graphs_flat, cache=False)
    utils_tg = target.utility.lin.forward(
        feat_tg.reshape(s_count * n, feat_dim), cache=False).reshape(s_count, n, a_count)

    act_flat = act.reshape(s_count, n)
    es = ei = ej = scale = None
    if net.mode == "iql":
        # independent per-agent TD on the shared reward; no joint value exists
        q_pred = np.take_along_axis(utils_on, act_flat[:, :, None], axis=2)[:, :, 0]
        astar = utils_on.argmax(axis=2)
        q_next = np.take_along_axis(utils_tg, astar[:, :, None], axis=2)[:, :, 0]
        q_next = q_next.reshape(b_count, t_count, n)
        boot = np.zeros_like(q_next)
        boot[:, :-1] = q_next[:, 1:]
        y = rew[:, :, None] + gamma * boot * ~term[:, :, None]
        diff = (q_pred.reshape(b_count, t_count, n) - y) * mask[:, :, None]
        count = mask.sum() * n
    else:
        es, ei, ej, scale = _edge_instances(net, chan_on, s_count)
        folded_on = _folded_tables(net, feat_on, es, ei, ej, scale, cache=cache)
        utils_on_scaled = _scaled_utils(net, utils_on)
        q_pred = eval_objective(utils_on_scaled, es, ei, ej, folded_on, act_flat)
        astar = maxsum_greedy(utils_on_scaled, es, ei, ej, folded_on, net.iterations)

        es_t, ei_t, ej_t, scale_t = _edge_instances(target, chan_tg, s_count)
        folded_tg = _folded_tables(target, feat_tg, es_t, ei_t, ej_t, scale_t, cache=False)
        q_next = eval_objective(_scaled_utils(target, utils_tg), es_t, ei_t, ej_t,
                                folded_tg, astar)
        q_next = q_next.reshape(b_count, t_count)
        boot = np.zeros_like(q_next)
        boot[:, :-1] = q_next[:, 1:]
        y = rew + gamma * boot * ~term
        diff = (q_pred.reshape(b_count, t_count) - y) * mask
        count = mask.sum()
    loss = float((diff * diff).sum() / count)
    if not cache:
        return loss, None

    def backward():
        dutils = np.zeros((s_count * n, a_count))
        if net.mode == "iql":
            dutils[np.arange(s_count * n), act_flat.reshape(-1)] = \
                (2.0 / count) * diff.reshape(s_count * n)
            dfeat = net.utility.lin.backward(dutils).reshape(s_count, n, feat_dim)
        else:
            dq = ((2.0 / count) * diff).reshape(s_count)
            util_w = 1.0 / n if net.aggregation == "mean" else 1.0
            dutils[np.arange(s_count * n), act_flat.reshape(-1)] = np.repeat(dq, n) * util_w
            dfeat = net.utility.lin.backward(dutils).reshape(s_count, n, feat_dim)
            if len(es):
                m_count = len(es)
                a_i = act_flat[es, ei]
                a_j = act_flat[es, ej]
                g_edge = dq[es] * scale
                d_ij = np.zeros((m_count, a_count, a_count))
                d_ij[np.arange(m_count), a_i, a_j] = g_edge
                d_ji = np.zeros((m_count, a_count, a_count))
                d_ji[np.arange(m_count), a_j, a_i] = g_edge
                dz_j2, dz_i2 = net.payoff.backward_pairs(d_ji)  # (j,i) was cached last
                dz_i1, dz_j1 = net.payoff.backward_pairs(d_ij)
                np.add.at(dfeat, (es, ei), dz_i1 + dz_i2)
                np.add.at(dfeat, (es, ej), dz_j1 + dz_j2)

        dx = net.mcg.backward_batch(entry_on, dfeat) if net.mcg is not None else dfeat
        dx = np.ascontiguousarray(
            dx.reshape(b_count, t_count, n, net.hidden).transpose(1, 0, 2, 3)
        ).reshape(t_count, b_count * n, net.hidden)
        carry = np.zeros((b_count * n, net.hidden))
        for t in reversed(range(t_count)):
            _, carry = net.encoder.backward_rows(dx[t] + carry)

    return loss, backward


def td_losses(batch, net: QNetwork, target: QNetwork, gamma: float) -> float:
    """The TD objective alone, touching no caches or gradients."""
    if not batch:
        raise ValueError("td_losses needs a nonempty batch")
    loss, _ = _td_pass(_pad_batch(batch), net, target, gamma, cache=False)
    return loss


def td_update(batch, net: QNetwork, target: QNetwork, optimizer: Optimizer,
              gamma: float) -> float:
    """One double-Q TD step over a batch of episodes; returns the masked MSE."""
    if not batch:
        raise ValueError("td_update needs a nonempty batch")
    zero_grads(net.params)
    loss, backward = _td_pass(_pad_batch(batch), net, target, gamma, cache=True)
    if not np.isfinite(loss):
        raise NumericError(f"TD loss is not finite: {loss}")
    backward()
    optimizer.step()
    return loss


def sync_target(online: QNetwork, target: QNetwork):
    """Hard-copy online parameter values into the target network."""
    po, pt = online.params, target.params
    if len(po) != len(pt):
        raise ConfigError(f"parameter sets differ in size: {len(po)} vs {len(pt)}")
    for a, b in zip(po, pt):
        if a.name != b.name or a.value.shape != b.value.shape:
            raise ConfigError(
                f"parameter mismatch: {a.name}{a.value.shape} vs {b.name}{b.value.shape}")
        b.value[...] = a.value


# ---------------------------------------------------------------------- #
# training loop

@dataclass
class EvalEvent:
    env_steps: int
    episodes: int
    updates: int
    loss: float
    result: EvalResult


class Trainer:
    """Sequential train loop for one (env, algorithm, seed) triple.

    RNG streams are split from the seed by purpose: (seed, 1) drives the env,
    (seed, 2) exploration, (seed, 3) replay sampling; evaluation derives its
    own stream from (seed, 4) inside evaluate().
    """

    def __init__(self, make_net, env, eval_env, cfg: TrainConfig, on_eval=None):
        cfg.validate()
        self.cfg = cfg
        self.env = env
        self.eval_env = eval_env
        self.net = make_net()
        self.target = make_net()
        sync_target(self.net, self.target)
        self.optimizer = Optimizer(self.net.params, cfg.lr)
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.explore_rng = np.random.default_rng([cfg.seed, 2])
        self.replay_rng = np.random.default_rng([cfg.seed, 3])
        self.env.rng = np.random.default_rng([cfg.seed, 1])
        self.on_eval = on_eval
        self.env_steps = 0
        self.episodes = 0
        self.updates = 0
        self.last_loss = float("nan")

    def epsilon(self) -> float:
        cfg = self.cfg
        if self.env_steps >= cfg.eps_anneal_steps:
            return cfg.eps_end
        frac = self.env_steps / cfg.eps_anneal_steps
        return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac

    def run(self):
        cfg = self.cfg
        events = []
        next_eval = cfg.eval_interval
        while self.env_steps < cfg.total_steps:
            record = collect_episode(self.env, self.net, self.epsilon(), self.explore_rng)
            self.buffer.push(record)
            self.episodes += 1
            self.env_steps += record.length
            if len(self.buffer) >= cfg.batch_episodes and self.episodes % cfg.update_interval == 0:
                batch = self.buffer.sample(self.replay_rng, cfg.batch_episodes)
                loss = td_update(batch, self.net, self.target, self.optimizer, cfg.gamma)
                self.updates += 1
                self.last_loss = loss
                if abs(loss) > 1e6:
                    raise NumericError(
                        f"training diverged: |loss| = {abs(loss):.3e} at update {self.updates}")
                if self.updates % cfg.target_interval == 0:
                    sync_target(self.net, self.target)
            if self.env_steps >= next_eval or self.env_steps >= cfg.total_steps:
                events.append(self._evaluate_now())
                while next_eval <= self.env_steps:
                    next_eval += cfg.eval_interval
        return events

    def _evaluate_now(self) -> EvalEvent:
        result = evaluate(self.eval_env, self.net, self.cfg.eval_episodes, self.cfg.seed)
        event = EvalEvent(self.env_steps, self.episodes, self.updates, self.last_loss, result)
        if self.on_eval is not None:
            self.on_eval(event)
        return event
