"""Agent histories, utility/payoff heads, the factored joint value, and greedy
joint-action selection by anytime max-sum message passing.

A FactoredQ is one evaluation-time snapshot: per-agent utility vectors plus a
payoff table pair per edge. With mean aggregation the joint value is

    Q(a) = (1/n) sum_i Q_i(a_i) + (1/(2|E|)) sum_{ij in E} [Q_ij(a_i,a_j) + Q_ji(a_j,a_i)]

with the payoff term defined as 0 when E is empty. Sum aggregation (value
decomposition) is the plain sum of utilities and carries no edges.

The max-sum engine runs on S independent factor graphs at once over flat edge
instance arrays; greedy_action is its single-sample view.
"""

import numpy as np

from .errors import ConfigError, DimensionError, StateError
from .graphs import (AdjacencyTensor, MetaPathConfig, append_identity,
                     extract_edges, make_topology)
from .mcg import McgGenerator, McgOutput
from .numerics import GRUCell, Linear

MODES = ("iql", "vdn", "dcg", "dmcg", "dmcg_vdn")
GRAPH_MODES = ("dcg", "dmcg")  # modes whose factorization carries payoff edges
MCG_MODES = ("dmcg", "dmcg_vdn")  # modes that run the generator


class AgentEncoder:
    """Shared embedding + GRU over [obs | one-hot previous action | one-hot agent id].

    Per-agent hidden states are rows of one matrix, reset to zero at episode
    start; all agents share the parameters.
    """

    def __init__(self, n_agents: int, obs_len: int, n_actions: int, hidden: int,
                 seed: int, name: str = "encoder"):
        self.n_agents = n_agents
        self.obs_len = obs_len
        self.n_actions = n_actions
        self.hidden = hidden
        self.in_dim = obs_len + n_actions + n_agents
        self.embed = Linear(name + ".embed", self.in_dim, hidden, seed)
        self.gru = GRUCell(name + ".gru", hidden, hidden, seed)
        self.h = None

    @property
    def params(self):
        return self.embed.params + self.gru.params

    def reset(self):
        self.h = np.zeros((self.n_agents, self.hidden))

    def build_inputs(self, obs: np.ndarray, prev_actions) -> np.ndarray:
        """Assemble GRU inputs for stacked steps: obs (S, n, obs_len),
        prev_actions (S, n) int with -1 meaning none. Returns (S*n, in_dim)."""
        s_count, n = obs.shape[:2]
        out = np.zeros((s_count, n, self.in_dim))
        out[:, :, :self.obs_len] = obs
        if prev_actions is not None:
            s_idx, n_idx = np.nonzero(prev_actions >= 0)
            out[s_idx, n_idx, self.obs_len + prev_actions[s_idx, n_idx]] = 1.0
        ids = self.obs_len + self.n_actions + np.arange(n)
        out[:, np.arange(n), ids] = 1.0
        return out.reshape(s_count * n, self.in_dim)

    def forward_rows(self, u_rows: np.ndarray, h_rows: np.ndarray, cache: bool = True) -> np.ndarray:
        emb = self.embed.forward(u_rows, cache=cache)
        return self.gru.forward(emb, h_rows, cache=cache)

    def backward_rows(self, dh: np.ndarray):
        demb, dh_prev = self.gru.backward(dh)
        du = self.embed.backward(demb)
        return du, dh_prev

    def encode_step(self, obs, prev_actions=None) -> np.ndarray:
        """One stateful step for action selection; no caches are kept."""
        if self.h is None:
            raise StateError("encoder hidden states not initialized; call reset() at episode start")
        if len(obs) != self.n_agents:
            raise ValueError(f"got {len(obs)} observations for {self.n_agents} agents")
        obs = np.asarray(obs, dtype=np.float64)
        prev = None
        if prev_actions is not None:
            prev = np.asarray(prev_actions, dtype=np.int64)[None]
        u = self.build_inputs(obs[None], prev)
        self.h = self.forward_rows(u, self.h, cache=False)
        return self.h


class UtilityHead:
    """Linear map from a node representation to per-action utilities."""

    def __init__(self, feat_dim: int, n_actions: int, seed: int, name: str = "utility"):
        self.lin = Linear(name, feat_dim, n_actions, seed)
        self.n_actions = n_actions

    @property
    def params(self):
        return self.lin.params


class PayoffHead:
    """Shared linear map from a concatenated pair (z_i | z_j) to an A x A table.

    The reversed orientation Q_ji comes from the same head on swapped inputs.
    """

    def __init__(self, feat_dim: int, n_actions: int, seed: int, name: str = "payoff"):
        self.lin = Linear(name, 2 * feat_dim, n_actions * n_actions, seed)
        self.feat_dim = feat_dim
        self.n_actions = n_actions

    @property
    def params(self):
        return self.lin.params

    def forward_pairs(self, z_first: np.ndarray, z_second: np.ndarray, cache: bool = True) -> np.ndarray:
        rows = np.concatenate([z_first, z_second], axis=1)
        a = self.n_actions
        return self.lin.forward(rows, cache=cache).reshape(-1, a, a)

    def backward_pairs(self, d_tables: np.ndarray):
        a = self.n_actions
        d_rows = self.lin.backward(d_tables.reshape(-1, a * a))
        return d_rows[:, :self.feat_dim], d_rows[:, self.feat_dim:]


class FactoredQ:
    """Immutable snapshot of utilities, per-edge payoff tables, and the edge set."""

    __slots__ = ("utilities", "payoffs", "edges", "aggregation")

    def __init__(self, utilities, payoffs, edges, aggregation: str = "mean"):
        self.utilities = np.asarray(utilities, dtype=np.float64)
        if self.utilities.ndim != 2:
            raise DimensionError(f"utilities must be (n, actions), got {self.utilities.shape}")
        if aggregation not in ("mean", "sum"):
            raise ValueError(f"unknown aggregation {aggregation!r}")
        if aggregation == "sum" and edges:
            raise ValueError("sum aggregation carries no payoff edges")
        for edge in edges:
            if edge not in payoffs or len(payoffs[edge]) != 2:
                raise ValueError(f"edge {edge} is missing a payoff table pair")
        self.payoffs = payoffs
        self.edges = list(edges)
        self.aggregation = aggregation

    @property
    def n_agents(self):
        return self.utilities.shape[0]


def evaluate_q(fq: FactoredQ, actions) -> float:
    """Joint value of one joint action under the factorization."""
    a = np.asarray(actions, dtype=np.int64)
    util = fq.utilities[np.arange(fq.n_agents), a]
    if fq.aggregation == "sum":
        return float(util.sum())
    total = util.mean()
    if fq.edges:
        pay = 0.0
        for (i, j) in fq.edges:
            q_ij, q_ji = fq.payoffs[(i, j)]
            pay += q_ij[a[i], a[j]] + q_ji[a[j], a[i]]
        total += pay / (2.0 * len(fq.edges))
    return float(total)


# ---------------------------------------------------------------------- #
# batched anytime max-sum

def eval_objective(utils, edge_sample, edge_i, edge_j, tables, actions) -> np.ndarray:
    """sum_i utils[s,i,a_i] + sum_m tables[m,a_i,a_j] per sample; inputs pre-scaled."""
    total = np.take_along_axis(utils, actions[:, :, None], axis=2)[:, :, 0].sum(axis=1)
    if len(edge_sample):
        a_i = actions[edge_sample, edge_i]
        a_j = actions[edge_sample, edge_j]
        np.add.at(total, edge_sample, tables[np.arange(len(edge_sample)), a_i, a_j])
    return total


def maxsum_greedy(utils, edge_sample, edge_i, edge_j, tables, iterations: int, trace=None):
    """Anytime max-sum over S independent factor graphs.

    utils (S, n, A) and tables (M, A, A) must already carry the aggregation
    scaling, so the maximized objective is exactly eval_objective. Messages
    update synchronously and are mean-normalized; after every round the local
    argmax candidate (ties to the lowest index) is scored and the best-scoring
    candidate so far is retained. Returns actions (S, n).
    """
    s_count, n, a_count = utils.shape
    best_actions = utils.argmax(axis=2)
    best_value = eval_objective(utils, edge_sample, edge_i, edge_j, tables, best_actions)
    if trace is not None:
        trace.append(best_value.copy())
    m_count = len(edge_sample)
    if m_count == 0 or iterations < 1:
        return best_actions

    flat_i = edge_sample * n + edge_i
    flat_j = edge_sample * n + edge_j
    u_flat = utils.reshape(s_count * n, a_count)
    msg_ij = np.zeros((m_count, a_count))  # message from i's factor side to j, function of a_j
    msg_ji = np.zeros((m_count, a_count))
    tables_t = tables.transpose(0, 2, 1)

    for _ in range(iterations):
        inbox = np.zeros((s_count * n, a_count))
        np.add.at(inbox, flat_j, msg_ij)
        np.add.at(inbox, flat_i, msg_ji)
        base_i = u_flat[flat_i] + inbox[flat_i] - msg_ji
        base_j = u_flat[flat_j] + inbox[flat_j] - msg_ij
        new_ij = (base_i[:, :, None] + tables).max(axis=1)
        new_ji = (base_j[:, :, None] + tables_t).max(axis=1)
        msg_ij = new_ij - new_ij.mean(axis=1, keepdims=True)
        msg_ji = new_ji - new_ji.mean(axis=1, keepdims=True)

        inbox = np.zeros((s_count * n, a_count))
        np.add.at(inbox, flat_j, msg_ij)
        np.add.at(inbox, flat_i, msg_ji)
        candidate = (u_flat + inbox).reshape(s_count, n, a_count).argmax(axis=2)
        value = eval_objective(utils, edge_sample, edge_i, edge_j, tables, candidate)
        improved = value > best_value
        best_actions[improved] = candidate[improved]
        best_value = np.maximum(best_value, value)
        if trace is not None:
            trace.append(best_value.copy())
    return best_actions


def scaled_pieces(fq: FactoredQ):
    """Utilities and folded tables scaled so eval_objective equals evaluate_q."""
    n = fq.n_agents
    if fq.aggregation == "sum" or not fq.edges:
        utils = fq.utilities if fq.aggregation == "sum" else fq.utilities / n
        empty = np.zeros(0, dtype=np.int64)
        return utils[None], empty, empty, empty, np.zeros((0,) + (fq.utilities.shape[1],) * 2)
    scale = 1.0 / (2.0 * len(fq.edges))
    edge_i = np.array([i for i, _ in fq.edges], dtype=np.int64)
    edge_j = np.array([j for _, j in fq.edges], dtype=np.int64)
    tables = np.stack([
        (fq.payoffs[e][0] + fq.payoffs[e][1].T) * scale for e in fq.edges])
    return (fq.utilities / n)[None], np.zeros(len(fq.edges), dtype=np.int64), edge_i, edge_j, tables


def greedy_action(fq: FactoredQ, iterations: int = 8):
    """Best joint action found by anytime max-sum (exact when E is a tree)."""
    utils, edge_sample, edge_i, edge_j, tables = scaled_pieces(fq)
    actions = maxsum_greedy(utils, edge_sample, edge_i, edge_j, tables, iterations)
    return tuple(int(x) for x in actions[0])


# ---------------------------------------------------------------------- #
# algorithm modes

class QNetwork:
    """One complete action-value model: encoder, optional generator, heads.

    mode selects the factorization: dmcg (generated channels and edges), dcg
    (static topology, features bypass the generator), vdn / dmcg_vdn (sum of
    utilities, no edges), iql (independent per-agent values).
    """

    def __init__(self, mode: str, n_agents: int, obs_len: int, n_actions: int,
                 hidden: int, seed: int, mcg_cfg=None, topologies=("full",),
                 activation: str = "relu", bypass: bool = False,
                 dcg_topology: str = "full", iterations: int = 8,
                 env_graph_layers: int | None = None):
        if mode not in MODES:
            raise ConfigError(f"unknown algo {mode!r}, expected one of {MODES}", key="algo")
        self.mode = mode
        self.n_agents = n_agents
        self.obs_len = obs_len
        self.n_actions = n_actions
        self.hidden = hidden
        self.iterations = iterations
        self.encoder = AgentEncoder(n_agents, obs_len, n_actions, hidden, seed)
        self.aggregation = "mean" if mode in GRAPH_MODES else "sum"

        self.mcg = None
        self.input_tensor = None
        self.dynamic_graphs = False
        feat_dim = hidden
        if mode in MCG_MODES:
            cfg = mcg_cfg if mcg_cfg is not None else MetaPathConfig()
            if env_graph_layers is not None:
                self.dynamic_graphs = True
                k = env_graph_layers + 1
            else:
                self.input_tensor = append_identity(
                    AdjacencyTensor.from_topologies(topologies, n_agents))
                k = self.input_tensor.k
            self.mcg = McgGenerator(cfg, k=k, d=hidden, seed=seed,
                                    bypass=bypass, activation=activation)
            feat_dim = self.mcg.out_dim

        self.utility = UtilityHead(feat_dim, n_actions, seed)
        self.payoff = None
        self.static_edges = []
        if mode in GRAPH_MODES:
            self.payoff = PayoffHead(feat_dim, n_actions, seed)
        if mode == "dcg":
            self.static_edges = extract_edges([make_topology(dcg_topology, n_agents)])

    @property
    def params(self):
        out = list(self.encoder.params)
        if self.mcg is not None:
            out += self.mcg.params
        out += self.utility.params
        if self.payoff is not None:
            out += self.payoff.params
        return out

    def input_stack(self, env_layers=None) -> np.ndarray | None:
        """Adjacency stack (k, n, n) for the generator, identity at layer 0."""
        if self.mcg is None:
            return None
        if self.dynamic_graphs:
            if env_layers is None:
                raise ConfigError("environment graph layers expected but not provided")
            return np.concatenate([np.eye(self.n_agents)[None], np.asarray(env_layers, dtype=np.float64)])
        return self.input_tensor.stack()

    def build_factored_q(self, x: np.ndarray, mcg_out: McgOutput | None = None) -> FactoredQ:
        """Assemble the factorization for one step from features (and generator output)."""
        if self.mode in MCG_MODES and mcg_out is None:
            raise ConfigError(f"mode {self.mode} needs a generator output")
        feat = mcg_out.z if self.mode in MCG_MODES else x
        utils = self.utility.lin.forward(feat, cache=False)
        edges = []
        payoffs = {}
        if self.mode == "dmcg":
            edges = mcg_out.edges
        elif self.mode == "dcg":
            edges = self.static_edges
        if self.payoff is not None and edges:
            idx_i = np.array([i for i, _ in edges])
            idx_j = np.array([j for _, j in edges])
            tab_ij = self.payoff.forward_pairs(feat[idx_i], feat[idx_j], cache=False)
            tab_ji = self.payoff.forward_pairs(feat[idx_j], feat[idx_i], cache=False)
            payoffs = {e: (tab_ij[m], tab_ji[m]) for m, e in enumerate(edges)}
        return FactoredQ(utils, payoffs, edges, self.aggregation)

    def q_factored(self, obs, prev_actions=None, env_layers=None) -> FactoredQ:
        """Stateful selection-path step: encode, generate, factorize."""
        x = self.encoder.encode_step(obs, prev_actions)
        mcg_out = None
        if self.mcg is not None:
            stack = self.input_stack(env_layers)
            z, channels, _ = self.mcg.forward_batch(stack, x[None], cache=False)
            if self.mcg.bypass:
                chans = [channels[0]]
                mcg_out = McgOutput(chans, extract_edges(chans, self.mcg.cfg.edge_threshold), x)
            else:
                mcg_out = McgOutput(list(channels), self.mcg.edges_from_channels(channels), z[0])
        return self.build_factored_q(x, mcg_out)

    def encode_only(self, obs, prev_actions=None):
        """Advance hidden states without evaluating heads (pure exploration steps)."""
        self.encoder.encode_step(obs, prev_actions)


def build_factored_q(net: QNetwork, x: np.ndarray, mcg_out: McgOutput | None = None) -> FactoredQ:
    return net.build_factored_q(x, mcg_out)
