"""Self-check suites: gradients, combinatorial oracles, env contracts, reduction.

Each suite returns a list of CheckResult rows. The checks re-derive expected
values from scratch (path enumeration, exhaustive maximization, pure-python
resummation) rather than trusting the implementation under test, so they stay
meaningful as the code evolves. The CLI `verify` subcommand prints one line
per check; the acceptance tests call the same functions.
"""

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .coordination import (FactoredQ, QNetwork, evaluate_q, greedy_action,
                           maxsum_greedy, scaled_pieces)
from .envs import ENV_NAMES, make_env
from .graphs import (AdjacencyTensor, MetaPathConfig, SelectionWeights,
                     append_identity, compose_metapath, compose_metapath_backward,
                     normalize, normalize_backward, soft_select, soft_select_backward)
from .mcg import McgGenerator
from .numerics import GRUCell, Linear, Parameter, finite_diff_check, zero_grads
from .training import EpisodeRecord, Optimizer, td_losses, td_update


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        mark = "[ok]  " if self.ok else "[FAIL]"
        tail = f"  ({self.detail})" if self.detail else ""
        return f"{mark} {self.name}{tail}  [{self.seconds:.2f}s]"


def _timed(name, fn) -> CheckResult:
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashed check is a failed check, not a crashed run
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, ok, detail, time.perf_counter() - start)


# ---------------------------------------------------------------------- #
# gradient checks

def _episode(t_len, n, obs_len, seed, graphs_k=None) -> EpisodeRecord:
    rng = np.random.default_rng(seed)
    term = np.zeros(t_len, dtype=bool)
    term[-1] = True
    graphs = None
    if graphs_k is not None:
        graphs = rng.integers(0, 2, size=(t_len, graphs_k, n, n)).astype(float)
    return EpisodeRecord(rng.normal(size=(t_len, n, obs_len)),
                         rng.integers(0, 3, size=(t_len, n)),
                         rng.normal(size=t_len), term, graphs)


def _td_fd(mode, seed, **net_kwargs) -> float:
    n, obs_len, a_count, hidden = 3, 4, 3, 5
    graphs_k = net_kwargs.pop("graphs_k", None)
    if graphs_k is not None:
        net_kwargs["env_graph_layers"] = graphs_k
    net = QNetwork(mode, n, obs_len, a_count, hidden, seed=seed, **net_kwargs)
    tgt = QNetwork(mode, n, obs_len, a_count, hidden, seed=seed + 1, **net_kwargs)
    batch = [_episode(3, n, obs_len, seed + 2, graphs_k),
             _episode(2, n, obs_len, seed + 3, graphs_k)]
    # lr=0 accumulates analytic grads without moving the parameters
    td_update(batch, net, tgt, Optimizer(net.params, 0.0), gamma=0.9)
    return finite_diff_check(lambda: td_losses(batch, net, tgt, 0.9), net.params)


GRAD_CASES = (
    ("vdn", 10, {}),
    ("iql", 20, {}),
    ("dcg", 30, {"dcg_topology": "line"}),
    ("dmcg", 40, {"topologies": ("full", "cycle")}),
    ("dmcg_vdn", 50, {}),
    ("dmcg", 60, {"bypass": True}),
    ("dmcg", 70, {"graphs_k": 1}),
    ("dmcg", 80, {"activation": "tanh"}),
)


def _layer_fd_cases(rng):
    """Per-layer checks: (name, loss_fn, params, tol) with grads pre-accumulated."""
    cases = []

    lin = Linear("lin", 4, 2, seed=1)
    xp = Parameter("x", rng.normal(size=(3, 4)))
    proj = rng.normal(size=(3, 2))
    zero_grads([lin.w, lin.b, xp])
    lin.forward(xp.value)
    xp.grad += lin.backward(proj)
    cases.append(("linear", lambda: float((lin.forward(xp.value, cache=False) * proj).sum()),
                  [lin.w, lin.b, xp]))

    gru = GRUCell("gru", 3, 4, seed=2)
    xs = [Parameter(f"x{t}", rng.normal(size=(2, 3))) for t in range(3)]
    gproj = rng.normal(size=(2, 4))

    def gru_loss():
        h = np.zeros((2, 4))
        for x in xs:
            h = gru.forward(x.value, h, cache=False)
        return float((h * gproj).sum())

    zero_grads(gru.params + xs)
    h = np.zeros((2, 4))
    for x in xs:
        h = gru.forward(x.value, h)
    dh = gproj
    for x in reversed(xs):
        dx, dh = gru.backward(dh)
        x.grad += dx
    cases.append(("gru-bptt", gru_loss, gru.params + xs))

    layers = AdjacencyTensor([rng.random((3, 3)) for _ in range(3)])
    sel = SelectionWeights(2, 2, 3, seed=3)
    sproj = rng.normal(size=(3, 3))
    zero_grads([sel.w_phi])
    soft_select_backward(layers, sel, 1, 0, sproj)
    cases.append(("soft-select",
                  lambda: float((soft_select(layers, sel, 1, 0) * sproj).sum()),
                  [sel.w_phi]))

    slots = [Parameter(f"m{i}", rng.random((3, 3))) for i in range(3)]
    cproj = rng.normal(size=(3, 3))
    zero_grads(slots)
    for s, g in zip(slots, compose_metapath_backward([s.value for s in slots], cproj)):
        s.grad += g
    cases.append(("composition",
                  lambda: float((compose_metapath([s.value for s in slots]) * cproj).sum()),
                  slots))

    am = Parameter("a", rng.random((4, 4)))
    nproj = rng.normal(size=(4, 4))
    zero_grads([am])
    am.grad += normalize_backward(am.value, nproj)
    cases.append(("normalize", lambda: float((normalize(am.value) * nproj).sum()), [am]))

    gx = Parameter("x", rng.normal(size=(3, 4)))
    zproj = rng.normal(size=(3, 8))
    stack = append_identity(AdjacencyTensor(
        [(rng.random((3, 3)) < 0.5).astype(float) for _ in range(2)]))
    gen = McgGenerator(MetaPathConfig(length=2, channels=2), k=stack.k, d=4, seed=4)
    zero_grads(gen.params + [gx])
    gen.generate(stack, gx.value)
    gx.grad += gen.generate_backward(zproj)
    cases.append(("generator",
                  lambda: float((gen.forward_batch(stack.stack(), gx.value[None],
                                                   cache=False)[0][0] * zproj).sum()),
                  gen.params + [gx]))
    return cases


def grads_suite(tol: float = 1e-4):
    results = []
    rng = np.random.default_rng(100)
    for name, loss_fn, params in _layer_fd_cases(rng):
        def run(loss_fn=loss_fn, params=params):
            err = finite_diff_check(loss_fn, params)
            return err < tol, f"rel err {err:.2e}"

        results.append(_timed(f"grads/layer-{name}", run))
    for mode, seed, kwargs in GRAD_CASES:
        tag = "-".join([mode] + [f"{k}={v}" for k, v in kwargs.items()])

        def run(mode=mode, seed=seed, kwargs=kwargs):
            err = _td_fd(mode, seed, **dict(kwargs))
            return err < tol, f"rel err {err:.2e}"

        results.append(_timed(f"grads/td-{tag}", run))
    return results


# ---------------------------------------------------------------------- #
# combinatorial oracles

def _typed_path_support(layers, seq):
    """(end, start) pairs reachable following the type sequence, first type first."""
    n = layers[0].shape[0]
    reach = {(v, v) for v in range(n)}
    for t in seq:
        a = layers[t]
        reach = {(i, s) for (cur, s) in reach for i in range(n) if a[i, cur] > 0.0}
    return reach


def check_composition(instances: int = 200, seed: int = 101):
    def run():
        rng = np.random.default_rng(seed)
        for trial in range(instances):
            n = int(rng.integers(2, 7))
            k = int(rng.integers(1, 4))
            length = int(rng.integers(1, 4))
            layers = [(rng.random((n, n)) < 0.35).astype(float) for _ in range(k)]
            seq = [int(t) for t in rng.integers(0, k, size=length)]
            out = compose_metapath([layers[t] for t in seq])
            support = {(i, j) for i, j in zip(*np.nonzero(out))}
            if support != _typed_path_support(layers, seq):
                return False, f"support mismatch at trial {trial}"
        return True, f"{instances} instances"

    return _timed("oracles/composition-path-enumeration", run)


def _random_tree(rng, n):
    edges = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.append((min(u, v), max(u, v)))
    return sorted(edges)


def _random_factored(rng, n, a, edges, aggregation="mean"):
    utils = rng.normal(size=(n, a))
    payoffs = {e: (rng.normal(size=(a, a)), rng.normal(size=(a, a))) for e in edges}
    return FactoredQ(utils, payoffs, edges, aggregation)


def check_maxsum_trees(instances: int = 100, seed: int = 102):
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for trial in range(instances):
            n = int(rng.integers(2, 7))
            a = int(rng.integers(2, 5))
            fq = _random_factored(rng, n, a, _random_tree(rng, n))
            best = greedy_action(fq, 2 * n)
            exact = max(evaluate_q(fq, joint)
                        for joint in itertools.product(range(a), repeat=n))
            gap = abs(evaluate_q(fq, best) - exact)
            worst = max(worst, gap)
            if gap > 1e-12:
                return False, f"gap {gap:.2e} at trial {trial}"
        return True, f"{instances} trees, worst gap {worst:.1e}"

    return _timed("oracles/maxsum-exact-on-trees", run)


def check_maxsum_monotone(instances: int = 100, seed: int = 103):
    def run():
        rng = np.random.default_rng(seed)
        for trial in range(instances):
            n = int(rng.integers(3, 6))
            edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
            fq = _random_factored(rng, n, 3, edges)
            utils, es, ei, ej, tables = scaled_pieces(fq)
            trace = []
            maxsum_greedy(utils, es, ei, ej, tables, iterations=12, trace=trace)
            values = [float(v[0]) for v in trace]
            if not all(b >= a - 1e-12 for a, b in zip(values, values[1:])):
                return False, f"retained value decreased at trial {trial}"
        return True, f"{instances} cyclic graphs"

    return _timed("oracles/maxsum-anytime-monotone", run)


def _resummation(fq, actions) -> float:
    n = fq.utilities.shape[0]
    total = sum(float(fq.utilities[i, actions[i]]) for i in range(n))
    if fq.aggregation == "sum":
        return total
    total /= n
    if fq.edges:
        acc = 0.0
        for (i, j) in fq.edges:
            q_ij, q_ji = fq.payoffs[(i, j)]
            acc += float(q_ij[actions[i], actions[j]]) + float(q_ji[actions[j], actions[i]])
        total += acc / (2.0 * len(fq.edges))
    return total


def check_factorization(instances: int = 100, seed: int = 104, tol: float = 1e-12):
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for trial in range(instances):
            n = int(rng.integers(2, 7))
            a = int(rng.integers(2, 5))
            agg = "sum" if rng.random() < 0.3 else "mean"
            edges = [] if agg == "sum" else _random_tree(rng, n)
            fq = _random_factored(rng, n, a, edges, agg)
            actions = tuple(int(x) for x in rng.integers(0, a, size=n))
            gap = abs(evaluate_q(fq, actions) - _resummation(fq, actions))
            worst = max(worst, gap)
            if gap > tol:
                return False, f"gap {gap:.2e} at trial {trial}"
        return True, f"{instances} instances, worst gap {worst:.1e}"

    return _timed("oracles/factorization-resummation", run)


def oracles_suite():
    return [check_composition(), check_maxsum_trees(),
            check_maxsum_monotone(), check_factorization()]


# ---------------------------------------------------------------------- #
# environment contracts

def check_env_contract(name: str, n_steps: int = 2000, seed: int = 105):
    def run():
        rng = np.random.default_rng([seed, hash(name) % (2 ** 31)])
        env = make_env(name, seed=seed)
        spec = env.spec
        obs = env.reset()
        steps = 0
        while steps < n_steps:
            if len(obs) != spec.n_agents:
                return False, f"obs count {len(obs)} != {spec.n_agents}"
            for o in obs:
                if o.shape != (spec.obs_len,) or not np.all(np.isfinite(o)):
                    return False, f"bad obs shape/values at step {steps}"
            actions = rng.integers(0, spec.n_actions, size=spec.n_agents)
            res = env.step(actions)
            steps += 1
            if not np.isfinite(res.reward):
                return False, f"non-finite reward at step {steps}"
            obs = res.obs
            if res.terminated:
                if spec.metric_name not in ("mean_return",) and \
                        spec.metric_name not in res.info and "win" not in res.info:
                    return False, f"terminal info missing metric at step {steps}"
                obs = env.reset()
        return True, f"{n_steps} steps"

    return _timed(f"envs/{name}-contract", run)


def check_env_determinism(name: str, n_steps: int = 200, seed: int = 106):
    def run():
        def rollout():
            env = make_env(name)
            obs = [env.reset(seed=seed)]
            rng = np.random.default_rng(seed + 1)
            rews = []
            for _ in range(n_steps):
                res = env.step(rng.integers(0, env.spec.n_actions, size=env.spec.n_agents))
                rews.append(res.reward)
                obs.append(env.reset(seed=seed) if res.terminated else res.obs)
            return obs, rews

        obs_a, rew_a = rollout()
        obs_b, rew_b = rollout()
        if rew_a != rew_b:
            return False, "reward streams differ"
        for oa, ob in zip(obs_a, obs_b):
            for x, y in zip(oa, ob):
                if x.tobytes() != y.tobytes():
                    return False, "observations differ bitwise"
        return True, f"{n_steps} steps bitwise"

    return _timed(f"envs/{name}-seeded-reset", run)


def envs_suite(n_steps: int = 2000):
    results = []
    for name in ENV_NAMES:
        results.append(check_env_contract(name, n_steps))
        results.append(check_env_determinism(name))
    return results


# ---------------------------------------------------------------------- #
# bypass reduction

def check_reduction(instances: int = 50, seed: int = 107, tol: float = 1e-12):
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        done = 0
        pair_seed = seed
        while done < instances:
            common = dict(n_agents=3, obs_len=4, n_actions=3, hidden=8, seed=pair_seed)
            dmcg = QNetwork("dmcg", bypass=True, topologies=("full",), **common)
            dcg = QNetwork("dcg", dcg_topology="full", **common)
            pair_seed += 1
            dmcg.encoder.reset()
            dcg.encoder.reset()
            prev = None
            for _ in range(5):
                if done >= instances:
                    break
                obs = [rng.normal(size=4) for _ in range(3)]
                fq_a = dmcg.q_factored(obs, prev)
                fq_b = dcg.q_factored(obs, prev)
                if fq_a.edges != fq_b.edges:
                    return False, f"edge sets differ at instance {done}"
                gap = float(np.abs(fq_a.utilities - fq_b.utilities).max())
                for e in fq_a.edges:
                    gap = max(gap, float(np.abs(fq_a.payoffs[e][0] - fq_b.payoffs[e][0]).max()),
                              float(np.abs(fq_a.payoffs[e][1] - fq_b.payoffs[e][1]).max()))
                act = greedy_action(fq_a, 8)
                if act != greedy_action(fq_b, 8):
                    return False, f"greedy actions differ at instance {done}"
                gap = max(gap, abs(evaluate_q(fq_a, act) - evaluate_q(fq_b, act)))
                worst = max(worst, gap)
                if gap > tol:
                    return False, f"gap {gap:.2e} at instance {done}"
                prev = list(act)
                done += 1
        return True, f"{instances} instances, worst gap {worst:.1e}"

    return _timed("reduction/bypass-matches-pairwise", run)


def reduction_suite():
    return [check_reduction()]


SUITES = {
    "grads": grads_suite,
    "oracles": oracles_suite,
    "envs": envs_suite,
    "reduction": reduction_suite,
}


def run_suites(names):
    results = []
    for name in names:
        results.extend(SUITES[name]())
    return results
