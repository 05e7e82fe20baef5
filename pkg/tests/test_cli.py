import json
import os

import pytest

from unionerm.cli import main

from conftest import canonical_atoms


def _canonical_config(**params):
    xs, ys, ws = canonical_atoms()
    return {
        "seed": 19,
        "law": {
            "kind": "discrete",
            "atoms": [
                {"x": list(map(float, xs[i])), "y": float(ys[i]), "w": float(ws[i])}
                for i in range(len(ys))
            ],
        },
        "collection": {
            "kind": "explicit",
            "entries": [{"id": "A", "coords": [0]}, {"id": "B", "coords": [1]}],
        },
        "params": params,
    }


def _write(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_profile_command(tmp_path, capsys):
    cfg = _write(tmp_path, _canonical_config())
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "profile"]) == 0
    payload = json.loads((out / "profile.json").read_text())
    assert payload["t_star"] == ["A"]
    assert payload["gamma"] == pytest.approx(0.25)
    table = (out / "profile.txt").read_text()
    assert "optimal set = {A}" in table


def test_profile_singleton_shows_infinite_gap(tmp_path):
    cfg_data = _canonical_config()
    cfg_data["collection"]["entries"] = [{"id": "A", "coords": [0]}]
    cfg = _write(tmp_path, cfg_data)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "profile"]) == 0
    assert "gap = inf" in (out / "profile.txt").read_text()
    assert json.loads((out / "profile.json").read_text())["gamma"] == "inf"


def test_missing_seed_exits_2(tmp_path):
    cfg_data = _canonical_config()
    del cfg_data["seed"]
    cfg = _write(tmp_path, cfg_data)
    assert main(["--config", cfg, "--out", str(tmp_path / "o"), "profile"]) == 2


def test_schema_violation_reports_field_path(tmp_path, capsys):
    cfg_data = _canonical_config()
    cfg_data["law"]["atoms"][0]["w"] = -1
    cfg = _write(tmp_path, cfg_data)
    assert main(["--config", cfg, "--out", str(tmp_path / "o"), "profile"]) == 2
    assert "$." in capsys.readouterr().err


def test_degenerate_collection_exits_3(tmp_path):
    cfg_data = _canonical_config()
    cfg_data["collection"]["entries"].append({"id": "Z", "matrix": [[0.0, 0.0]]})
    cfg = _write(tmp_path, cfg_data)
    assert main(["--config", cfg, "--out", str(tmp_path / "o"), "profile"]) == 3


def test_insufficient_trials_exits_4(tmp_path):
    cfg = _write(tmp_path, _canonical_config(n_grid=[50], delta=0.1))
    code = main(["--config", cfg, "--out", str(tmp_path / "o"), "--trials", "60",
                 "montecarlo", "quantiles"])
    assert code == 4


def test_bounds_deterministic_json(tmp_path):
    cfg = _write(tmp_path, _canonical_config(n=200, delta=0.1, trials=300))
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["--config", cfg, "--out", str(out1), "bounds"]) == 0
    assert main(["--config", cfg, "--out", str(out2), "bounds"]) == 0
    assert (out1 / "bounds.json").read_bytes() == (out2 / "bounds.json").read_bytes()
    assert (out1 / "thresholds.csv").read_bytes() == (out2 / "thresholds.csv").read_bytes()
    payload = json.loads((out1 / "bounds.json").read_text())
    for field in ("single_class_threshold", "explicit_threshold", "expected_sup_threshold"):
        assert payload[field]["tag"].startswith(("exact", "estimated"))
    rows = (out1 / "thresholds.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 6  # header + default delta grid


def test_localize_command_and_large_n_collapse(tmp_path):
    cfg = _write(tmp_path, _canonical_config(n=50_000, delta=0.1, trials=400, k=1))
    out = tmp_path / "loc"
    assert main(["--config", cfg, "--out", str(out), "localize"]) == 0
    trace = json.loads((out / "trace.json").read_text())
    assert trace["sets"][-1] == ["A"]
    assert (out / "localize.svg").exists()
    svg = (out / "localize.svg").read_text()
    assert svg.startswith("<svg") and "</svg>" in svg


def test_localize_choose_k_plot_points(tmp_path):
    cfg = _write(tmp_path, _canonical_config(n=200, delta=0.1, trials=300))
    out = tmp_path / "loc"
    assert main(["--config", cfg, "--out", str(out), "localize"]) == 0
    trace = json.loads((out / "trace.json").read_text())
    assert 1 <= trace["k"] <= 2  # k_max = 1 + |suboptimal| = 2
    assert len(trace["sets"]) == trace["k"] + 1
    sweep = (out / "localize_ksweep.svg").read_text()
    assert sweep.count("<circle") == 2  # one point per candidate k


def test_montecarlo_consistency_rows(tmp_path):
    cfg = _write(tmp_path, _canonical_config(n_grid=[30, 60, 120, 240]))
    out = tmp_path / "mc"
    assert main(["--config", cfg, "--out", str(out), "--trials", "100",
                 "montecarlo", "consistency"]) == 0
    rows = (out / "consistency.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 4
    verdict = json.loads((out / "verdict_consistency.json").read_text())
    assert {"clauses", "pass"} <= set(verdict)
    out2 = tmp_path / "mc2"
    assert main(["--config", cfg, "--out", str(out2), "--trials", "100",
                 "montecarlo", "consistency"]) == 0
    assert (out / "consistency.csv").read_bytes() == (out2 / "consistency.csv").read_bytes()
    assert (out / "consistency.svg").read_bytes() == (out2 / "consistency.svg").read_bytes()


def test_montecarlo_pathwise(tmp_path):
    cfg = _write(tmp_path, _canonical_config(n=100))
    out = tmp_path / "mc"
    assert main(["--config", cfg, "--out", str(out), "--trials", "100",
                 "montecarlo", "pathwise"]) == 0
    verdict = json.loads((out / "verdict_pathwise.json").read_text())
    assert verdict["violations"] == 0
    assert verdict["clauses"][0]["id"] == "c9_pathwise"


def test_montecarlo_bss(tmp_path):
    cfg_data = _canonical_config(
        design="discrete", d=3, s=2, w_true=[1.0, 1.0, 0.0], noise_std=1.0,
        n_grid=[50, 100], check_threshold=False,
    )
    del cfg_data["law"]
    del cfg_data["collection"]
    cfg = _write(tmp_path, cfg_data)
    out = tmp_path / "bss"
    assert main(["--config", cfg, "--out", str(out), "--trials", "60",
                 "montecarlo", "bss"]) == 0
    rows = (out / "bss.csv").read_text().strip().splitlines()
    assert len(rows) == 3
    assert (out / "bss.svg").exists()


def test_montecarlo_validity_small(tmp_path):
    cfg = _write(tmp_path, _canonical_config(delta=0.5, n_grid=[120], bound="explicit"))
    out = tmp_path / "mc"
    assert main(["--config", cfg, "--out", str(out), "--trials", "150",
                 "montecarlo", "validity"]) == 0
    verdict = json.loads((out / "verdict_validity.json").read_text())
    assert verdict["rows"][0]["n"] == 120


def test_seed_override_changes_outputs(tmp_path):
    cfg = _write(tmp_path, _canonical_config(n_grid=[40]))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["--config", cfg, "--out", str(out1), "--trials", "100", "montecarlo", "consistency"])
    main(["--config", cfg, "--out", str(out2), "--trials", "100", "--seed", "99",
          "montecarlo", "consistency"])
    csv1 = (out1 / "consistency.csv").read_text()
    csv2 = (out2 / "consistency.csv").read_text()
    assert csv1.splitlines()[0] == csv2.splitlines()[0]


def test_no_temp_files_left_behind(tmp_path):
    cfg = _write(tmp_path, _canonical_config(n=100, delta=0.2, trials=200))
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "bounds"]) == 0
    leftovers = [p for p in os.listdir(out) if p.endswith(".tmp")]
    assert leftovers == []
