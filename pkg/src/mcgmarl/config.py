"""Run configuration: TOML schema, dotted overrides, deterministic dump.

The resolved config is a plain nested dict holding every key with defaults
materialized. Validation is strict: unknown sections, unknown keys, and type
mismatches all raise ConfigError naming the offending dotted key, before any
environment or network is constructed. The MCG_SEED environment variable
overrides the seed list last.
"""

import json
import os
from copy import deepcopy

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .coordination import MODES, QNetwork
from .envs import ENV_NAMES, env_param_defaults, make_env
from .errors import ConfigError
from .graphs import TOPOLOGY_KINDS, MetaPathConfig
from .mcg import ACTIVATIONS
from .training import TrainConfig

SEED_ENV_VAR = "MCG_SEED"

_TOP_DEFAULTS = {"algo": "dmcg", "run_id": "", "out": "runs", "seeds": [0]}
_SECTION_DEFAULTS = {
    "model": {"hidden": 64},
    "mcg": {"length": 2, "channels": 2, "edge_threshold": 1e-6, "bypass": False,
            "topologies": ["full"], "activation": "relu"},
    "msgpass": {"iterations": 8},
    "dcg": {"topology": "full"},
    "train": {"total_steps": 50_000, "gamma": 0.99, "lr": 5e-4, "batch_episodes": 16,
              "eps_start": 1.0, "eps_end": 0.05, "eps_anneal_steps": 50_000,
              "target_interval": 200, "eval_interval": 10_000, "eval_episodes": 20,
              "buffer_capacity": 2000, "update_interval": 1},
}


def defaults() -> dict:
    cfg = deepcopy(_TOP_DEFAULTS)
    cfg["env"] = {"name": ""}
    for sec, table in _SECTION_DEFAULTS.items():
        cfg[sec] = deepcopy(table)
    return cfg


def _check_type(value, sample, key: str):
    """Coerce value to the type of the schema sample, or raise naming the key."""
    if isinstance(sample, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean, got {value!r}", key=key)
        return value
    if isinstance(sample, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}", key=key)
        return value
    if isinstance(sample, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}", key=key)
        return float(value)
    if isinstance(sample, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}", key=key)
        return value
    if isinstance(sample, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} must be a list, got {value!r}", key=key)
        return [_check_type(v, sample[0], key) for v in value]
    raise ConfigError(f"unsupported schema type for {key}", key=key)


def parse_override(text: str):
    """'dotted.key=value' with the value read as a TOML literal when it parses."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value", key=text)
    key, raw = text.split("=", 1)
    key = key.strip()
    raw = raw.strip()
    if not key:
        raise ConfigError(f"override {text!r} has an empty key", key=text)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw  # bare strings like algo=vdn
    return key.split("."), value


def _set_path(cfg: dict, path, value, key: str):
    node = cfg
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{key} indexes into a non-table value", key=key)
    node[path[-1]] = value


def _parse_seed_list(text: str, key: str):
    try:
        seeds = [int(p) for p in str(text).split(",") if p.strip() != ""]
    except ValueError:
        raise ConfigError(f"{key} must be comma-separated integers, got {text!r}",
                          key=key) from None
    if not seeds:
        raise ConfigError(f"{key} must name at least one seed", key=key)
    return seeds


def load_config(path=None, overrides=(), seeds=None, out=None, use_env_var=True) -> dict:
    """Merge defaults, the TOML file, overrides, and flags into a validated config."""
    cfg = defaults()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", key="config") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}",
                              key="config") from None
        _merge(cfg, data, prefix="")
    for text in overrides:
        key_path, value = parse_override(text)
        _set_path(cfg, key_path, value, ".".join(key_path))
    if seeds is not None:
        cfg["seeds"] = _parse_seed_list(seeds, "seeds")
    if out is not None:
        cfg["out"] = str(out)
    if use_env_var and os.environ.get(SEED_ENV_VAR):
        cfg["seeds"] = _parse_seed_list(os.environ[SEED_ENV_VAR], SEED_ENV_VAR)
    validate(cfg)
    return cfg


def _merge(cfg: dict, data: dict, prefix: str):
    for k, v in data.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            _merge(cfg.setdefault(k, {}), v, prefix=key + ".")
        elif isinstance(v, dict) and k not in cfg:
            cfg[k] = deepcopy(v)
        else:
            cfg[k] = v


def validate(cfg: dict):
    known_top = set(_TOP_DEFAULTS) | set(_SECTION_DEFAULTS) | {"env"}
    for k in cfg:
        if k not in known_top:
            raise ConfigError(f"unknown config key {k!r}", key=k)

    cfg["algo"] = _check_type(cfg["algo"], "s", "algo")
    if cfg["algo"] not in MODES:
        raise ConfigError(f"unknown algo {cfg['algo']!r}, expected one of {MODES}", key="algo")
    cfg["run_id"] = _check_type(cfg["run_id"], "s", "run_id")
    cfg["out"] = _check_type(cfg["out"], "s", "out")
    cfg["seeds"] = _check_type(cfg["seeds"], [0], "seeds")
    if not cfg["seeds"] or any(s < 0 for s in cfg["seeds"]):
        raise ConfigError("seeds must be a non-empty list of non-negative integers",
                          key="seeds")

    env_tab = cfg["env"]
    if not isinstance(env_tab, dict):
        raise ConfigError("env must be a table with a name key", key="env")
    name = env_tab.get("name", "")
    if not isinstance(name, str) or not name:
        raise ConfigError("env.name is required", key="env.name")
    if name not in ENV_NAMES:
        raise ConfigError(f"unknown env {name!r}, expected one of {ENV_NAMES}",
                          key="env.name")
    for sub, params in env_tab.items():
        if sub == "name":
            continue
        if sub not in ENV_NAMES:
            raise ConfigError(f"unknown env table {sub!r}", key=f"env.{sub}")
        if not isinstance(params, dict):
            raise ConfigError(f"env.{sub} must be a table", key=f"env.{sub}")
        allowed = env_param_defaults(sub)
        for pk, pv in params.items():
            if pk not in allowed:
                raise ConfigError(
                    f"unknown parameter {pk!r} for env {sub} "
                    f"(known: {sorted(allowed)})", key=f"env.{sub}.{pk}")
            params[pk] = _check_type(pv, allowed[pk], f"env.{sub}.{pk}")

    for sec, table in _SECTION_DEFAULTS.items():
        got = cfg[sec]
        if not isinstance(got, dict):
            raise ConfigError(f"{sec} must be a table", key=sec)
        for k in got:
            if k not in table:
                raise ConfigError(f"unknown config key {sec}.{k}", key=f"{sec}.{k}")
        for k, sample in table.items():
            got[k] = _check_type(got[k], sample, f"{sec}.{k}")

    if cfg["model"]["hidden"] < 1:
        raise ConfigError("model.hidden must be positive", key="model.hidden")
    mcg = cfg["mcg"]
    for topo in mcg["topologies"]:
        if topo not in TOPOLOGY_KINDS:
            raise ConfigError(f"unknown topology {topo!r}, expected one of {TOPOLOGY_KINDS}",
                              key="mcg.topologies")
    if mcg["activation"] not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {mcg['activation']!r}", key="mcg.activation")
    try:
        MetaPathConfig(mcg["length"], mcg["channels"], mcg["edge_threshold"])
    except ValueError as exc:
        raise ConfigError(str(exc), key="mcg") from None
    if cfg["dcg"]["topology"] not in TOPOLOGY_KINDS:
        raise ConfigError(f"unknown topology {cfg['dcg']['topology']!r}", key="dcg.topology")
    if cfg["msgpass"]["iterations"] < 1:
        raise ConfigError("msgpass.iterations must be positive", key="msgpass.iterations")
    TrainConfig(seed=cfg["seeds"][0], **cfg["train"]).validate()

    if not cfg["run_id"]:
        cfg["run_id"] = f"{name}_{cfg['algo']}"
    return cfg


# ---------------------------------------------------------------------- #
# deterministic writer

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)  # shortest round-tripping decimal, valid TOML
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize config value {v!r}")


def dump_config(cfg: dict) -> str:
    lines = []
    for k in ("algo", "run_id", "out", "seeds"):
        lines.append(f"{k} = {_fmt(cfg[k])}")
    lines += ["", "[env]", f"name = {_fmt(cfg['env']['name'])}"]
    for sub in sorted(k for k in cfg["env"] if k != "name"):
        if cfg["env"][sub]:
            lines += ["", f"[env.{sub}]"]
            for pk in sorted(cfg["env"][sub]):
                lines.append(f"{pk} = {_fmt(cfg['env'][sub][pk])}")
    for sec, table in _SECTION_DEFAULTS.items():
        lines += ["", f"[{sec}]"]
        for k in table:
            lines.append(f"{k} = {_fmt(cfg[sec][k])}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------- #
# builders

def build_env(cfg: dict, seed=None):
    name = cfg["env"]["name"]
    return make_env(name, seed=seed, **cfg["env"].get(name, {}))


def probe_graph_layers(cfg: dict):
    """Layer count of the env's dynamic graph hook, or None when absent."""
    env = build_env(cfg, seed=0)
    env.reset(seed=0)
    hook = env.interaction_graphs()
    return None if hook is None else hook.k


def net_factory(cfg: dict, spec, seed: int):
    """Closure building identically-initialized networks for online and target."""
    algo = cfg["algo"]
    mcg = cfg["mcg"]
    env_layers = probe_graph_layers(cfg) if algo in ("dmcg", "dmcg_vdn") else None

    def make() -> QNetwork:
        return QNetwork(algo, spec.n_agents, spec.obs_len, spec.n_actions,
                        cfg["model"]["hidden"], seed=seed,
                        mcg_cfg=MetaPathConfig(mcg["length"], mcg["channels"],
                                               mcg["edge_threshold"]),
                        topologies=tuple(mcg["topologies"]),
                        activation=mcg["activation"], bypass=mcg["bypass"],
                        dcg_topology=cfg["dcg"]["topology"],
                        iterations=cfg["msgpass"]["iterations"],
                        env_graph_layers=env_layers)
    return make


def train_config(cfg: dict, seed: int) -> TrainConfig:
    return TrainConfig(seed=seed, **cfg["train"]).validate()
