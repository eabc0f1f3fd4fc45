"""Command-line round trips: run, eval, snapshot, exit codes."""
import json
from pathlib import Path

import numpy as np
import pytest

from rtakit.cli import main
from rtakit import validate_trace_dict

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def acc_doc(**overrides):
    doc = {
        "workspace_dim": 1,
        "time": {"dt": 0.1, "T": 5.0},
        "agents": [
            {
                "id": "follower",
                "model": "acc",
                "params": {"leader_id": "leader"},
                "init": [0.0, 1.0],
                "mode": "UNTRUSTED",
                "rta": {"type": "sim", "horizon": 1.0},
            },
            {"id": "leader", "model": "acc", "init": [5.0, 1.0], "mode": "NORMAL"},
        ],
        "unsafe_sets": [
            {
                "id": "unsafe1",
                "type": "ball",
                "definition": [[0.0], 7.0],
                "anchor": "leader",
                "offset": [5.0],
            }
        ],
    }
    doc.update(overrides)
    return doc


def test_run_writes_expected_grid(tmp_path, capsys):
    out = tmp_path / "trace.json"
    code = main(["run", "--config", str(CONFIGS / "acc.json"), "--out", str(out)])
    assert code == 0
    assert "exec time" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    validate_trace_dict(doc)
    assert len(doc["agents"]["follower"]["state_trace"]) == 51
    assert (tmp_path / "trace.timings.json").exists()


def test_run_twice_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["run", "--config", str(CONFIGS / "acc_sim_rta.json"), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(CONFIGS / "acc_sim_rta.json"), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_run_seed_check(tmp_path, capsys):
    out = tmp_path / "trace.json"
    code = main(["run", "--config", str(CONFIGS / "acc.json"), "--out", str(out), "--seed-check"])
    assert code == 0
    assert "seed-check passed" in capsys.readouterr().out


def test_run_unknown_model_names_it(tmp_path, capsys):
    doc = acc_doc()
    doc["agents"][0]["model"] = "hovercraft"
    code = main(["run", "--config", str(write_config(tmp_path, doc)),
                 "--out", str(tmp_path / "t.json")])
    assert code == 2
    assert "hovercraft" in capsys.readouterr().err


def test_run_missing_time_section(tmp_path, capsys):
    doc = acc_doc()
    del doc["time"]
    code = main(["run", "--config", str(write_config(tmp_path, doc)),
                 "--out", str(tmp_path / "t.json")])
    assert code == 2
    assert "time" in capsys.readouterr().err


def test_run_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "t.json")]) == 2


def test_run_dangling_anchor(tmp_path, capsys):
    doc = acc_doc()
    doc["unsafe_sets"][0]["anchor"] = "ghost"
    code = main(["run", "--config", str(write_config(tmp_path, doc)),
                 "--out", str(tmp_path / "t.json")])
    assert code == 2
    assert "anchor" in capsys.readouterr().err


def test_usage_error_exit_code():
    assert main(["run"]) == 1
    assert main([]) == 1


def test_eval_round_trip(tmp_path, capsys):
    out = tmp_path / "trace.json"
    main(["run", "--config", str(CONFIGS / "acc_sim_rta.json"), "--out", str(out)])
    outdir = tmp_path / "report"
    code = main(["eval", str(out), "--out", str(outdir)])
    assert code == 0
    assert "eval time" in capsys.readouterr().out
    summary = json.loads((outdir / "summary.json").read_text())
    usage = summary["agents"]["follower"]["usage_percent"]
    assert sum(usage.values()) == pytest.approx(100.0, abs=1e-9)
    assert (outdir / "summary.txt").exists()
    assert list(outdir.glob("*__dist_set__*.csv"))
    # timing samples from the run's timings file are folded in
    assert summary["agents"]["follower"]["timing"]["count"] == 50


def test_eval_external_trace(tmp_path):
    # hand-written document in the wire format, not produced by this engine
    doc = {
        "agents": {
            "probe": {
                "state_trace": [[0.0, 0.0, 1.0], [0.5, 0.5, 1.0], [1.0, 1.0, 1.0]],
                "mode_trace": ["NORMAL", "SAFETY"],
            }
        },
        "unsafe": {
            "zone": {
                "type": "hyperrectangle",
                "state_trace": [
                    [0.0, [[5.0], [6.0]]],
                    [0.5, [[5.0], [6.0]]],
                    [1.0, [[5.0], [6.0]]],
                ],
            }
        },
    }
    trace_path = tmp_path / "external.json"
    trace_path.write_text(json.dumps(doc))
    outdir = tmp_path / "report"
    assert main(["eval", str(trace_path), "--out", str(outdir)]) == 0
    summary = json.loads((outdir / "summary.json").read_text())
    assert summary["agents"]["probe"]["min_distance_to_sets"]["zone"] == pytest.approx(4.0)


def test_eval_corrupt_trace_names_path(tmp_path, capsys):
    out = tmp_path / "trace.json"
    main(["run", "--config", str(CONFIGS / "acc.json"), "--out", str(out)])
    doc = json.loads(out.read_text())
    doc["agents"]["follower"]["state_trace"][3] = [0.3]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code = main(["eval", str(bad), "--out", str(tmp_path / "r")])
    assert code == 2
    assert "agents.follower.state_trace" in capsys.readouterr().err


def test_eval_missing_file(tmp_path):
    assert main(["eval", str(tmp_path / "nope.json"), "--out", str(tmp_path / "r")]) == 2


def test_snapshot_prints_state(tmp_path, capsys):
    out = tmp_path / "trace.json"
    main(["run", "--config", str(CONFIGS / "acc.json"), "--out", str(out)])
    capsys.readouterr()
    assert main(["snapshot", str(out), "--time", "0.0"]) == 0
    text = capsys.readouterr().out
    assert "t = 0" in text
    assert "follower" in text and "unsafe1" in text


def test_snapshot_mid_run_floors_to_grid(tmp_path, capsys):
    out = tmp_path / "trace.json"
    main(["run", "--config", str(CONFIGS / "acc.json"), "--out", str(out)])
    doc = json.loads(out.read_text())
    capsys.readouterr()
    assert main(["snapshot", str(out), "--time", "2.55"]) == 0
    text = capsys.readouterr().out
    row = doc["agents"]["follower"]["state_trace"][25]
    assert f"{row[1]}" in text


def test_snapshot_out_of_range(tmp_path):
    out = tmp_path / "trace.json"
    main(["run", "--config", str(CONFIGS / "acc.json"), "--out", str(out)])
    assert main(["snapshot", str(out), "--time", "99.0"]) == 2


def test_run_eval_fuzz_all_models(tmp_path):
    rng = np.random.default_rng(23)
    for i in range(6):
        model = ("acc", "dubins_car", "dubins_plane")[i % 3]
        if model == "acc":
            agents = [
                {"id": "ego", "model": "acc", "params": {"leader_id": "lead"},
                 "init": [float(rng.uniform(-5, 5)), float(rng.uniform(-2, 2))],
                 "mode": "UNTRUSTED",
                 "rta": {"type": ("sim", "reach")[i % 2], "horizon": 0.5}},
                {"id": "lead", "model": "acc",
                 "init": [float(rng.uniform(6, 12)), 1.0], "mode": "NORMAL"},
            ]
            sets = [{"id": "u", "type": "ball", "definition": [[0.0], 2.0],
                     "anchor": "lead", "offset": [1.0]}]
            dim = 1
        elif model == "dubins_car":
            agents = [
                {"id": "ego", "model": "dubins_car",
                 "params": {"waypoints": [[again, again] for again in (5.0, 9.0)],
                            "v_cruise": 2.0},
                 "init": [0.0, 0.0, 0.0, 1.0], "mode": "UNTRUSTED",
                 "rta": {"type": "sim", "horizon": 0.5}},
            ]
            sets = [{"id": "u", "type": "hyperrectangle",
                     "definition": [[4.0, -1.0], [6.0, 1.0]]}]
            dim = 2
        else:
            agents = [
                {"id": "ego", "model": "dubins_plane",
                 "params": {"waypoints": [[30.0, 0.0, -5.0]]},
                 "init": [0.0, 0.0, 8.0, 0.0, -0.2, 2.0], "mode": "UNTRUSTED",
                 "rta": {"type": "sim", "horizon": 1.0}},
            ]
            sets = [{"id": "ground", "type": "polytope",
                     "definition": [[[0.0, 0.0, 1.0]], [0.0]]}]
            dim = 3
        doc = {"workspace_dim": dim, "time": {"dt": 0.1, "T": 2.0},
               "agents": agents, "unsafe_sets": sets}
        cfg = write_config(tmp_path, doc, name=f"fuzz{i}.json")
        out = tmp_path / f"fuzz{i}_trace.json"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["eval", str(out), "--out", str(tmp_path / f"fuzz{i}_report")]) == 0
