import json

import numpy as np
import pytest

from lindbladrate.cli import main
from lindbladrate.config import ConfigError, OutputTable, emit_csv, parse_config

BASE_CONFIG = {
    "model": {"type": "preset", "name": "fig2"},
    "grid": {"stop": 10.0, "count": 41, "spacing": "linear"},
}


def write_config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(x) for x in line.split(",")] for line in fh if line.strip()]
    return header, np.array(rows)


class TestParseConfig:
    def test_preset_with_grid(self):
        config = parse_config(json.dumps(BASE_CONFIG))
        assert config.model.preset_name() == "fig2"
        assert config.grid[0] == 0.0 and config.grid[-1] == 10.0

    def test_weights_not_normalized_rejected_with_path(self):
        payload = {
            "model": {
                "type": "rate",
                "basis": [[[1, 0], [0, -1]]],
                "weights": [0.5, 0.6],
                "diagonal_blocks": [[[0.1]], [[0.2]]],
            },
            "grid": {"stop": 1.0, "count": 3},
        }
        with pytest.raises(ConfigError, match=r"\$\.model"):
            parse_config(json.dumps(payload))

    def test_missing_seed_for_stochastic_rejected(self):
        payload = dict(BASE_CONFIG, engine="stochastic", trajectories=100)
        with pytest.raises(ConfigError, match=r"\$\.seed"):
            parse_config(json.dumps(payload))

    def test_missing_trajectories_rejected(self):
        payload = dict(BASE_CONFIG, engine="stochastic", seed=1)
        with pytest.raises(ConfigError, match=r"\$\.trajectories"):
            parse_config(json.dumps(payload))

    def test_syntax_error_carries_location(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("{not json")

    def test_complex_entries(self):
        payload = dict(BASE_CONFIG, initial_state=[[0.5, [0.25, 0.25]], [[0.25, -0.25], 0.5]])
        config = parse_config(json.dumps(payload))
        assert config.initial_state[0, 1] == 0.25 + 0.25j

    def test_log_grid(self):
        payload = dict(BASE_CONFIG, grid={"stop": 10.0, "count": 6, "spacing": "log"})
        grid = parse_config(json.dumps(payload)).grid
        assert grid[0] == 0.0
        assert np.all(np.diff(grid) > 0)
        assert grid[-1] == pytest.approx(10.0)

    def test_bad_spacing_named(self):
        payload = dict(BASE_CONFIG, grid={"stop": 1.0, "count": 3, "spacing": "cubic"})
        with pytest.raises(ConfigError, match=r"\$\.grid\.spacing"):
            parse_config(json.dumps(payload))


class TestEmitCsv:
    def test_header_only_for_empty_grid(self, tmp_path):
        table = OutputTable(["t", "x"], np.empty((0, 2)))
        path = tmp_path / "empty.csv"
        emit_csv(table, str(path))
        assert path.read_text() == "t,x\n"

    def test_roundtrip_bit_exact(self, tmp_path, rng):
        values = rng.normal(size=(7, 3)) * 10.0 ** rng.integers(-12, 12, size=(7, 3))
        table = OutputTable(["a", "b", "c"], values)
        path = tmp_path / "table.csv"
        emit_csv(table, str(path))
        _, back = read_csv(path)
        assert np.array_equal(back, values)

    def test_rows_newline_terminated(self, tmp_path):
        table = OutputTable(["t"], np.array([[1.0], [2.0]]))
        path = tmp_path / "rows.csv"
        emit_csv(table, str(path))
        assert path.read_text().endswith("\n")


class TestCliCommands:
    def test_validate_preset_passes(self, capsys):
        assert main(["validate", "--preset", "fig2"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_validate_bad_weights_config_usage_error(self, tmp_path, capsys):
        payload = {
            "model": {
                "type": "rate",
                "basis": [[[1, 0], [0, -1]]],
                "weights": [0.5, 0.6],
                "diagonal_blocks": [[[0.1]], [[0.2]]],
            },
            "grid": {"stop": 1.0, "count": 3},
        }
        assert main(["validate", "--config", write_config(tmp_path, payload)]) == 1
        assert "configuration error" in capsys.readouterr().err

    def test_validate_indefinite_block_exit_2(self, tmp_path, capsys):
        payload = {
            "model": {
                "type": "rate",
                "basis": [[[0, 1], [1, 0]], [[0, [0, -1]], [[0, 1], 0]]],
                "weights": [1.0],
                "diagonal_blocks": [[[1.0, 0.0], [0.0, -0.1]]],
            },
            "grid": {"stop": 1.0, "count": 3},
        }
        assert main(["validate", "--config", write_config(tmp_path, payload)]) == 2
        out = capsys.readouterr().out
        assert "NOT PSD" in out and "-1.0" in out

    def test_evolve_zero_model_constant_rows(self, tmp_path):
        payload = {
            "model": {
                "type": "rate",
                "basis": [[[1, 0], [0, -1]]],
                "weights": [1.0],
                "diagonal_blocks": [[[0.0]]],
            },
            "grid": {"stop": 2.0, "count": 5},
            "initial_state": [[0.5, [0.25, 0.25]], [[0.25, -0.25], 0.5]],
        }
        out = tmp_path / "evolve.csv"
        assert main(["evolve", "--config", write_config(tmp_path, payload), "--out", str(out)]) == 0
        header, rows = read_csv(out)
        for name in ("pop_0", "pop_1", "coh_01_re", "coh_01_im"):
            col = rows[:, header.index(name)]
            assert np.all(col == col[0])

    def test_example_fig2_final_coherence(self, tmp_path):
        out = tmp_path / "fig2.csv"
        payload = dict(BASE_CONFIG, grid={"stop": 100.0, "count": 201})
        assert main(["example", "fig2", "--config", write_config(tmp_path, payload), "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert abs(rows[-1, header.index("h_closed")] - (-0.6545454545)) < 1e-3
        assert rows[:, header.index("abs_residual")].max() < 1e-7

    def test_example_with_monte_carlo_columns(self, tmp_path):
        out = tmp_path / "fig2_mc.csv"
        assert main(["example", "fig2", "--n", "300", "--seed", "5", "--out", str(out)]) == 0
        header, rows = read_csv(out)
        for col in ("h_mc", "se_mc", "abs_mc_residual"):
            assert col in header
        dev = rows[1:, header.index("abs_mc_residual")]
        se = rows[1:, header.index("se_mc")]
        assert np.all(dev <= 6 * se + 1e-12)

    def test_example_residuals_below_tolerance_all_presets(self, tmp_path):
        for name in ("fig1-upper", "fig1-lower", "fig2"):
            out = tmp_path / f"{name}.csv"
            assert main(["example", name, "--out", str(out)]) == 0
            header, rows = read_csv(out)
            assert rows[:, header.index("abs_residual")].max() < 1e-7

    def test_traj_outputs_se_columns_and_is_reproducible(self, tmp_path):
        payload = dict(BASE_CONFIG, engine="stochastic", trajectories=400, seed=7)
        cfg = write_config(tmp_path, payload)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["traj", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["traj", "--config", cfg, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        header, rows = read_csv(out1)
        assert "se_coh_01_re" in header
        assert "trace_ch0" in header
        # deterministic table has no SE columns
        det = tmp_path / "det.csv"
        assert main(["evolve", "--config", cfg, "--out", str(det)]) == 0
        det_header, _ = read_csv(det)
        assert not any(c.startswith("se_") for c in det_header)

    def test_traj_worker_count_does_not_change_output(self, tmp_path):
        payload = dict(BASE_CONFIG, engine="stochastic", trajectories=2100, seed=13)
        single = write_config(tmp_path, payload, "w1.json")
        multi = write_config(tmp_path, dict(payload, workers=4), "w4.json")
        out1, out4 = tmp_path / "w1.csv", tmp_path / "w4.csv"
        assert main(["traj", "--config", single, "--out", str(out1)]) == 0
        assert main(["traj", "--config", multi, "--out", str(out4)]) == 0
        assert out1.read_bytes() == out4.read_bytes()

    def test_kernel_table(self, tmp_path):
        out = tmp_path / "kernel.csv"
        assert main(["kernel", "--preset", "fig1-upper", "--u", "0.5,1,2,4", "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert rows.shape[0] == 4
        from lindbladrate.qubit import h_of_u, preset_params

        p = preset_params("fig1-upper")
        for row in rows:
            u = row[header.index("u_re")]
            kappa = row[header.index("K_11_re")] + 1j * row[header.index("K_11_im")]
            h = h_of_u(p, u)
            assert abs(kappa * h - (u * h - 1)) < 1e-8

    def test_stationary_report(self, capsys):
        assert main(["stationary", "--preset", "fig2"]) == 0
        out = capsys.readouterr().out
        assert "homogeneity holds: False" in out
        assert "coherence" in out

    def test_missing_model_is_usage_error(self, capsys):
        assert main(["evolve"]) == 1
        assert "required" in capsys.readouterr().err

    def test_engine_failure_exit_3(self, tmp_path, capsys):
        # kernel sample at a pole of the reduced propagator
        payload = dict(BASE_CONFIG, model={"type": "preset", "name": "fig1-upper"}, kernel_u=[-0.19])
        assert main(["kernel", "--config", write_config(tmp_path, payload)]) == 3
        assert "engine failure" in capsys.readouterr().err

    def test_unknown_preset_usage_error(self, tmp_path, capsys):
        payload = dict(BASE_CONFIG, model={"type": "preset", "name": "fig9"})
        assert main(["validate", "--config", write_config(tmp_path, payload)]) == 1


class TestModelSources:
    def test_walk_model_matches_preset_bit_for_bit(self, tmp_path):
        walk_payload = {
            "model": {
                "type": "walk",
                "basis": [[[1, 0], [0, -1]]],
                "hamiltonian": [[0, 0], [0, 0]],
                "channel_dissipators": [[[0.0]], [[0.0]]],
                "hop_rates": [[0.0, 1.0], [0.1, 0.0]],
                "jump_kraus": [[[[1, 0], [0, -1]]], [[[1, 0], [0, -1]]]],
                "weights": [0.1, 0.9],
            },
            "grid": {"stop": 10.0, "count": 41},
            "engine": "stochastic",
            "trajectories": 500,
            "seed": 99,
        }
        preset_payload = dict(BASE_CONFIG, engine="stochastic", trajectories=500, seed=99)
        out_walk, out_preset = tmp_path / "walk.csv", tmp_path / "preset.csv"
        assert main(["traj", "--config", write_config(tmp_path, walk_payload, "w.json"), "--out", str(out_walk)]) == 0
        assert main(["traj", "--config", write_config(tmp_path, preset_payload, "p.json"), "--out", str(out_preset)]) == 0
        assert out_walk.read_bytes() == out_preset.read_bytes()

    def test_tripartite_source_matches_preset_evolution(self, tmp_path):
        tri_payload = {
            "model": {
                "type": "tripartite",
                "channels": 2,
                "basis": [[[1, 0], [0, -1]]],
                "weights": [0.1, 0.9],
                "b": [
                    {"u": [0, 1], "v": [0, 1], "block": [[1.0]]},
                    {"u": [1, 0], "v": [1, 0], "block": [[0.1]]},
                ],
            },
            "grid": {"stop": 10.0, "count": 41},
        }
        out_tri, out_preset = tmp_path / "tri.csv", tmp_path / "preset.csv"
        assert main(["evolve", "--config", write_config(tmp_path, tri_payload, "t.json"), "--out", str(out_tri)]) == 0
        assert main(["evolve", "--config", write_config(tmp_path, BASE_CONFIG, "p.json"), "--out", str(out_preset)]) == 0
        assert out_tri.read_bytes() == out_preset.read_bytes()

    def test_tripartite_off_diagonal_rejected(self, tmp_path, capsys):
        payload = {
            "model": {
                "type": "tripartite",
                "channels": 2,
                "basis": [[[1, 0], [0, -1]]],
                "b": [
                    {"u": [0, 1], "v": [0, 1], "block": [[1.0]]},
                    {"u": [0, 1], "v": [1, 0], "block": [[0.1]]},
                    {"u": [1, 0], "v": [0, 1], "block": [[0.1]]},
                ],
            },
            "grid": {"stop": 1.0, "count": 3},
        }
        assert main(["validate", "--config", write_config(tmp_path, payload)]) == 1
        assert "rate-equation form" in capsys.readouterr().err

    def test_correlations_source(self, tmp_path):
        tau_c, c = 0.5, 0.4
        tau = np.linspace(0.0, 12.0, 481)
        chi = (c * np.exp(-tau / tau_c)).tolist()
        payload = {
            "model": {
                "type": "correlations",
                "basis": [[[1, 0], [0, -1]]],
                "system_hamiltonian": [[0, 0], [0, 0]],
                "weights": [1.0],
                "tau": tau.tolist(),
                "chi": [[[[ [x] ] for x in chi]]],
            },
            "grid": {"stop": 2.0, "count": 5},
        }
        cfg = write_config(tmp_path, payload)
        assert main(["validate", "--config", cfg]) == 0
        from lindbladrate.config import load_config

        model, _ = load_config(cfg).model.build()
        assert model.blocks[0, 0, 0, 0].real == pytest.approx(2 * c * tau_c, rel=1e-5)
