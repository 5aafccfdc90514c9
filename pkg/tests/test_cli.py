import hashlib
import json
import shutil
from pathlib import Path

import pytest

from ncsynth.cli import main
from ncsynth.config import ConfigError, RunConfig

CONFIGS = Path(__file__).parent.parent / "configs"


def toy_config(tmp_path, **overrides):
    cfg = json.loads((CONFIGS / "toy.json").read_text())
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    p = tmp_path / "config.json"
    p.write_text(json.dumps(cfg))
    return p


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class TestConfigValidation:
    def test_missing_section(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"plant": {}}))
        with pytest.raises(ConfigError, match="delays"):
            RunConfig.from_file(p)

    def test_bad_delay_bounds(self, tmp_path):
        p = toy_config(tmp_path, **{"delays.nsc_min": 3})
        with pytest.raises(ConfigError, match="nsc_min"):
            RunConfig.from_file(p)

    def test_unknown_spec_kind(self, tmp_path):
        p = toy_config(tmp_path, **{"spec.kind": "liveness"})
        with pytest.raises(ConfigError, match="kind"):
            RunConfig.from_file(p)

    def test_reach_requires_targets(self, tmp_path):
        p = toy_config(tmp_path)
        cfg = json.loads(p.read_text())
        cfg["spec"].pop("targets")
        p.write_text(json.dumps(cfg))
        with pytest.raises(ConfigError, match="targets"):
            RunConfig.from_file(p)

    def test_exit_code_on_config_error(self, tmp_path, capsys):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        rc = main(["abstract", "--config", str(p), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        rc = main(["abstract", "--config", str(tmp_path / "nope.json"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2


class TestToyPipeline:
    def test_full_chain_and_manifests(self, tmp_path, capsys):
        cfgp = toy_config(tmp_path)
        out = tmp_path / "out"
        for stage in ("abstract", "expand", "synth", "sim", "codegen"):
            rc = main([stage, "--config", str(cfgp), "--out", str(out)])
            assert rc == 0, stage
        for name in ("plant.bdd", "ncs.bdd", "ncs.init.bdd", "controller.bdd",
                     "trace.csv", "trace.json", "toyctl.c", "toyctl.h",
                     "toyctl.v"):
            assert (out / name).exists(), name
        expand_manifest = json.loads((out / "expand.manifest.json").read_text())
        assert expand_manifest["sizes"]["n_states_formula"] == 100
        assert expand_manifest["sizes"]["n_states_symbolic"] == 100
        assert "n_reachable" in expand_manifest["sizes"]
        synth_manifest = json.loads((out / "synth.manifest.json").read_text())
        assert synth_manifest["sizes"]["empty"] is False
        assert synth_manifest["inputs"]

    def test_run_command_equivalent(self, tmp_path):
        cfgp = toy_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfgp), "--out", str(out)]) == 0
        assert (out / "trace.csv").exists()

    def test_pipeline_determinism(self, tmp_path):
        cfgp = toy_config(tmp_path)
        hashes = []
        for i in range(2):
            out = tmp_path / f"out{i}"
            assert main(["run", "--config", str(cfgp), "--out", str(out)]) == 0
            hashes.append({name: sha(out / name) for name in
                           ("plant.bdd", "ncs.bdd", "controller.bdd",
                            "trace.csv", "toyctl.c", "toyctl.v")})
        assert hashes[0] == hashes[1]

    @pytest.mark.filterwarnings("ignore:box does not intersect")
    def test_empty_controller_exit_code(self, tmp_path, capsys):
        # target disconnected from every state: unreachable box
        cfgp = toy_config(tmp_path, **{"spec.targets": [[[3], [3]]],
                                       "spec.kind": "safety",
                                       "spec.safe": [[[9], [9]]]})
        cfg = json.loads(cfgp.read_text())
        cfg["spec"] = {"kind": "safety", "safe": [[[9], [9]]]}
        cfgp.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        assert main(["abstract", "--config", str(cfgp), "--out", str(out)]) == 0
        assert main(["expand", "--config", str(cfgp), "--out", str(out)]) == 0
        rc = main(["synth", "--config", str(cfgp), "--out", str(out)])
        assert rc == 3
        assert "empty" in capsys.readouterr().err

    def test_stage_ordering_enforced(self, tmp_path, capsys):
        cfgp = toy_config(tmp_path)
        rc = main(["expand", "--config", str(cfgp),
                   "--out", str(tmp_path / "fresh")])
        assert rc == 2
        assert "abstract" in capsys.readouterr().err


class TestGuards:
    def test_random_channels_need_unsafe(self, tmp_path, capsys):
        cfgp = toy_config(tmp_path, **{"sim.channel_mode": "random"})
        out = tmp_path / "out"
        for stage in ("abstract", "expand", "synth"):
            assert main([stage, "--config", str(cfgp), "--out", str(out)]) == 0
        rc = main(["sim", "--config", str(cfgp), "--out", str(out)])
        assert rc == 2
        assert "prolonged" in capsys.readouterr().err
        rc = main(["sim", "--config", str(cfgp), "--out", str(out), "--unsafe"])
        assert rc == 0

    def test_codegen_refuses_time_varying_delays(self, tmp_path, capsys):
        cfgp = toy_config(tmp_path, **{"delays.nsc_max": 3,
                                       "sim.steps": 3})
        out = tmp_path / "out"
        for stage in ("abstract", "expand", "synth"):
            assert main([stage, "--config", str(cfgp), "--out", str(out)]) == 0
        rc = main(["codegen", "--config", str(cfgp), "--out", str(out)])
        assert rc == 2
        err = capsys.readouterr().err
        assert "prolonged" in err and "buffering" in err

    def test_domain_violation_exit_code(self, tmp_path, capsys):
        # safety controller whose domain misses the configured start
        cfgp = toy_config(tmp_path)
        cfg = json.loads(cfgp.read_text())
        cfg["spec"] = {"kind": "safety", "safe": [[[2], [3]]]}
        cfg["sim"]["x0"] = [0]
        cfgp.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        for stage in ("abstract", "expand", "synth"):
            assert main([stage, "--config", str(cfgp), "--out", str(out)]) == 0
        rc = main(["sim", "--config", str(cfgp), "--out", str(out)])
        assert rc == 4


class TestInspectCommands:
    def test_fsm_dump_explore(self, tmp_path, capsys, monkeypatch):
        cfgp = toy_config(tmp_path)
        out = tmp_path / "out"
        for stage in ("abstract", "expand", "synth"):
            assert main([stage, "--config", str(cfgp), "--out", str(out)]) == 0

        rel = tmp_path / "rel.csv"
        assert main(["fsm", str(out / "plant.bdd"), "--to", str(rel)]) == 0
        assert rel.exists()
        assert main(["dump", str(out / "plant.bdd")]) == 0
        assert "plant_model" in capsys.readouterr().out

        import io
        monkeypatch.setattr("sys.stdin", io.StringIO("0\nquit\n"))
        assert main(["explore", str(out / "plant.bdd")]) == 0
        assert "state: (0,)" in capsys.readouterr().out

    def test_coverage_command_planar(self, tmp_path, capsys):
        cfg = {
            "plant": {"name": "robot", "tau": 1.0,
                      "grid": {"lb": [0, 0], "ub": [5, 5], "eta": [1, 1]},
                      "input_grid": {"lb": [-1, -1], "ub": [1, 1],
                                     "eta": [1, 1]}},
            "delays": {"nsc_min": 1, "nsc_max": 1, "nca_min": 1, "nca_max": 1},
            "spec": {"kind": "reach", "targets": [[[4, 4], [5, 5]]],
                     "obstacles": [[[2, 2], [3, 3]]]},
            "sim": {"steps": 10, "x0": [0, 0], "seed": 0},
        }
        cfgp = tmp_path / "planar.json"
        cfgp.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        for stage in ("abstract", "expand", "synth"):
            assert main([stage, "--config", str(cfgp), "--out", str(out)]) == 0
        assert main(["coverage", str(out / "controller.bdd"),
                     "--dims", "0,1"]) == 0
        art = capsys.readouterr().out.strip().splitlines()
        assert len(art) == 6 and all(len(row) == 6 for row in art)
        assert "#" in "".join(art)
