import os

import pytest

from mcgmarl import cli
from mcgmarl.metrics import read_rows

FAST = ["--override", "env.name=climb", "--override", "train.total_steps=120",
        "--override", "train.eval_interval=60", "--override", "train.eval_episodes=3",
        "--override", "train.batch_episodes=4", "--override", "train.buffer_capacity=32",
        "--override", "train.eps_anneal_steps=100", "--override", "model.hidden=8"]


def run_cli(*argv):
    return cli.main(list(argv))


class TestRun:
    def test_outputs_per_seed(self, tmp_path, capsys):
        code = run_cli("run", *FAST, "--override", "algo=vdn",
                       "--seeds", "0,1", "--out", str(tmp_path))
        assert code == 0
        for seed in (0, 1):
            d = tmp_path / "climb_vdn" / f"seed{seed}"
            assert (d / "metrics.csv").exists()
            assert (d / "resolved.toml").exists()
            assert (d / "checkpoint.bin").exists()
            rows = read_rows(d / "metrics.csv")
            assert [r.env_steps for r in rows] == [60, 120]
            assert all(r.seed == seed and r.algo == "vdn" and r.env == "climb"
                       for r in rows)

    def test_rerun_is_bitwise_identical(self, tmp_path):
        args = ("run", *FAST, "--override", "algo=dmcg", "--seeds", "2")
        assert run_cli(*args, "--out", str(tmp_path / "a")) == 0
        assert run_cli(*args, "--out", str(tmp_path / "b")) == 0
        rel = os.path.join("climb_dmcg", "seed2")
        for name in ("metrics.csv", "checkpoint.bin"):
            pa = tmp_path / "a" / rel / name
            pb = tmp_path / "b" / rel / name
            assert pa.read_bytes() == pb.read_bytes()

    def test_resolved_toml_reproduces_run(self, tmp_path):
        assert run_cli("run", *FAST, "--seeds", "1", "--out", str(tmp_path / "a")) == 0
        resolved = tmp_path / "a" / "climb_dmcg" / "seed1" / "resolved.toml"
        assert run_cli("run", "--config", str(resolved), "--out", str(tmp_path / "b")) == 0
        a = (tmp_path / "a" / "climb_dmcg" / "seed1" / "metrics.csv").read_bytes()
        b = (tmp_path / "b" / "climb_dmcg" / "seed1" / "metrics.csv").read_bytes()
        assert a == b

    def test_stale_metrics_removed(self, tmp_path):
        d = tmp_path / "climb_vdn" / "seed0"
        d.mkdir(parents=True)
        (d / "metrics.csv").write_text("junk\n")
        assert run_cli("run", *FAST, "--override", "algo=vdn",
                       "--seeds", "0", "--out", str(tmp_path)) == 0
        rows = read_rows(d / "metrics.csv")
        assert len(rows) == 2

    def test_env_var_selects_seeds(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MCG_SEED", "5")
        assert run_cli("run", *FAST, "--seeds", "0", "--out", str(tmp_path)) == 0
        assert (tmp_path / "climb_dmcg" / "seed5").exists()
        assert not (tmp_path / "climb_dmcg" / "seed0").exists()

    def test_divergence_exit_code(self, tmp_path, capsys):
        code = run_cli("run", *FAST, "--override", "algo=vdn",
                       "--override", "train.lr=1e8",
                       "--override", "train.total_steps=400",
                       "--override", "train.eval_interval=400",
                       "--out", str(tmp_path))
        assert code == 3
        assert "numeric error" in capsys.readouterr().err


class TestConfigErrors:
    def test_missing_env_name(self, tmp_path, capsys):
        code = run_cli("run", "--out", str(tmp_path))
        assert code == 2
        assert "env.name" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        code = run_cli("run", *FAST, "--override", "train.bogus=1",
                       "--out", str(tmp_path))
        assert code == 2
        assert "train.bogus" in capsys.readouterr().err


class TestEval:
    @pytest.fixture()
    def trained(self, tmp_path):
        run_cli("run", *FAST, "--override", "algo=vdn", "--seeds", "0",
                "--out", str(tmp_path))
        return tmp_path / "climb_vdn" / "seed0"

    def test_eval_prints_and_appends(self, trained, capsys):
        args = ("eval", *FAST, "--override", "algo=vdn",
                "--checkpoint", str(trained / "checkpoint.bin"), "--episodes", "4")
        assert run_cli(*args) == 0
        line = capsys.readouterr().out.strip().splitlines()[-1]
        assert line.startswith("climb_vdn,0,climb,vdn,0,4,")
        assert run_cli(*args) == 0
        rows = read_rows(trained / "eval.csv")
        # nan loss breaks dataclass equality, compare serialized lines
        assert len(rows) == 2 and rows[0].to_line() == rows[1].to_line()

    def test_truncated_checkpoint(self, trained, tmp_path, capsys):
        bad = tmp_path / "trunc.bin"
        bad.write_bytes((trained / "checkpoint.bin").read_bytes()[:80])
        code = run_cli("eval", *FAST, "--override", "algo=vdn",
                       "--checkpoint", str(bad))
        assert code == 4
        assert "checkpoint error" in capsys.readouterr().err

    def test_architecture_mismatch(self, trained, capsys):
        code = run_cli("eval", *FAST, "--override", "algo=dcg",
                       "--checkpoint", str(trained / "checkpoint.bin"))
        assert code == 4


class TestVerify:
    def test_suite_runs_clean(self, capsys):
        assert run_cli("verify", "reduction") == 0
        out = capsys.readouterr().out
        assert "[ok]" in out and "1/1 checks passed" in out

    def test_unknown_suite(self, capsys):
        assert run_cli("verify", "nope") == 2
        assert "unknown suite" in capsys.readouterr().err
