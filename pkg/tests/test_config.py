import numpy as np
import pytest

from mcgmarl import config
from mcgmarl.errors import ConfigError
from mcgmarl.training import TrainConfig


def load(*overrides, **kwargs):
    kwargs.setdefault("use_env_var", False)
    return config.load_config(overrides=list(overrides), **kwargs)


class TestLoad:
    def test_defaults_plus_name(self):
        cfg = load("env.name=climb")
        assert cfg["algo"] == "dmcg"
        assert cfg["run_id"] == "climb_dmcg"
        assert cfg["seeds"] == [0]
        assert cfg["train"]["total_steps"] == 50_000

    def test_run_id_respects_explicit_value(self):
        cfg = load("env.name=climb", "run_id=mine")
        assert cfg["run_id"] == "mine"

    def test_file_then_override_precedence(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('algo = "vdn"\n[env]\nname = "climb"\n[train]\nlr = 0.001\n')
        cfg = config.load_config(p, overrides=["train.lr=0.002"], use_env_var=False)
        assert cfg["algo"] == "vdn"
        assert cfg["train"]["lr"] == 0.002

    def test_seeds_flag_beats_config(self):
        cfg = load("env.name=climb", "seeds=[9]", seeds="1,2")
        assert cfg["seeds"] == [1, 2]

    def test_env_var_beats_seeds_flag(self, monkeypatch):
        monkeypatch.setenv(config.SEED_ENV_VAR, "7")
        cfg = config.load_config(overrides=["env.name=climb"], seeds="1,2")
        assert cfg["seeds"] == [7]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            config.load_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("= broken")
        with pytest.raises(ConfigError):
            config.load_config(p)


class TestOverrideParsing:
    def test_literals(self):
        cases = [("a=3", 3), ("a=0.5", 0.5), ("a=true", True),
                 ("a=[1, 2]", [1, 2]), ('a="x"', "x"), ("a=vdn", "vdn")]
        for text, want in cases:
            path, value = config.parse_override(text)
            assert path == ["a"] and value == want

    def test_dotted_path(self):
        path, value = config.parse_override("train.eps_end=0.1")
        assert path == ["train", "eps_end"] and value == 0.1

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            config.parse_override("no_value")


class TestValidation:
    @pytest.mark.parametrize("overrides,key", [
        (["algo=bogus"], "algo"),
        (["env.name=nope"], "env.name"),
        (["env.name=climb", "typo=1"], "typo"),
        (["env.name=climb", "train.bogus=1"], "train.bogus"),
        (["env.name=climb", "train.gamma=1.5"], "train.gamma"),
        (["env.name=climb", "model.hidden=true"], "model.hidden"),
        (["env.name=climb", "model.hidden=0"], "model.hidden"),
        (["env.name=climb", "mcg.length=0"], "mcg"),
        (["env.name=climb", 'mcg.topologies=["ring"]'], "mcg.topologies"),
        (["env.name=climb", "mcg.activation=gelu"], "mcg.activation"),
        (["env.name=climb", "dcg.topology=tree"], "dcg.topology"),
        (["env.name=climb", "msgpass.iterations=0"], "msgpass.iterations"),
        (["env.name=gather", "env.gather.bogus=1"], "env.gather.bogus"),
        (["env.name=climb", "env.fake.x=1"], "env.fake"),
        (["env.name=climb", "seeds=[-1]"], "seeds"),
    ])
    def test_error_carries_dotted_key(self, overrides, key):
        with pytest.raises(ConfigError) as exc_info:
            load(*overrides)
        assert exc_info.value.key == key
        assert str(exc_info.value)

    def test_name_required(self):
        with pytest.raises(ConfigError) as exc_info:
            load()
        assert exc_info.value.key == "env.name"

    def test_int_accepted_for_float_field(self):
        cfg = load("env.name=climb", "train.gamma=0")
        assert cfg["train"]["gamma"] == 0.0
        assert isinstance(cfg["train"]["gamma"], float)


class TestDump:
    def test_round_trip_equality(self, tmp_path):
        cfg = load("env.name=hallway", "algo=dcg", "env.hallway.length=4",
                   "train.lr=0.00025", "mcg.topologies=[\"cycle\", \"star\"]")
        p = tmp_path / "resolved.toml"
        p.write_text(config.dump_config(cfg))
        assert config.load_config(p, use_env_var=False) == cfg

    def test_dump_deterministic(self):
        a = config.dump_config(load("env.name=climb"))
        b = config.dump_config(load("env.name=climb"))
        assert a == b


class TestBuilders:
    def test_build_env_passes_params(self):
        cfg = load("env.name=hallway", "env.hallway.length=4", "env.hallway.n_groups=3")
        env = config.build_env(cfg, seed=0)
        assert env.length == 4 and env.n_groups == 3

    def test_net_factory_modes(self):
        for algo in ("iql", "vdn", "dcg", "dmcg", "dmcg_vdn"):
            cfg = load("env.name=climb", f"algo={algo}", "model.hidden=8")
            env = config.build_env(cfg, seed=0)
            net = config.net_factory(cfg, env.spec, seed=0)()
            assert net.mode == algo
            net.encoder.reset()
            assert net.q_factored([np.array([1.0])] * 2).utilities.shape == (2, 3)

    def test_factory_builds_identical_nets(self):
        cfg = load("env.name=climb", "model.hidden=8")
        make = config.net_factory(cfg, config.build_env(cfg, 0).spec, seed=4)
        a, b = make(), make()
        for pa, pb in zip(a.params, b.params):
            assert pa.name == pb.name
            assert pa.value.tobytes() == pb.value.tobytes()

    def test_dmcg_picks_up_env_graph_layers(self):
        cfg = load("env.name=pursuit", "model.hidden=8")
        net = config.net_factory(cfg, config.build_env(cfg, 0).spec, seed=0)()
        # two env layers plus the appended identity
        assert net.mcg.k == 3

    def test_static_algos_ignore_env_graphs(self):
        cfg = load("env.name=pursuit", "algo=dcg", "model.hidden=8")
        net = config.net_factory(cfg, config.build_env(cfg, 0).spec, seed=0)()
        assert net.mcg is None

    def test_train_config(self):
        cfg = load("env.name=climb", "train.total_steps=123")
        tc = config.train_config(cfg, seed=6)
        assert isinstance(tc, TrainConfig)
        assert tc.total_steps == 123 and tc.seed == 6
