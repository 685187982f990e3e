"""Artifact writers, expression parsing, CLI exit behavior."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from reebflow import cli, io
from reebflow import (
    BasicPotential,
    FunctionalLedger,
    metric_state,
    run_continuity_path,
    run_flow,
)
from reebflow.cli import UsageError, parse_expression
from reebflow.flow import FlowPolicy


class TestWriters:
    def test_field_csv_roundtrip(self, tmp_path, grid96, rng):
        values = rng.standard_normal(grid96.n)
        path = io.write_field_csv(tmp_path / "f.csv", grid96.x, values)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "value"]
        back = np.array([[float(a), float(b)] for a, b in rows[1:]])
        # %.17g survives the float64 round trip bit for bit
        np.testing.assert_array_equal(back[:, 0], grid96.x)
        np.testing.assert_array_equal(back[:, 1], values)

    def test_state_json_keys(self, tmp_path, base128):
        path = io.write_state_json(tmp_path / "s.json", base128)
        data = json.loads(path.read_text())
        assert set(data) == {
            "m", "n", "ratio", "scalar_curvature", "ricci_potential", "norm_constant",
        }
        assert data["m"] == 1 and data["n"] == 128
        np.testing.assert_array_equal(np.array(data["ratio"]), base128.ratio)

    def test_ledger_csv(self, tmp_path, grid96, ref96):
        led = FunctionalLedger.evaluate(
            "probe", BasicPotential.from_callable(grid96, lambda x: 0.1 * x), ref96
        )
        path = io.write_ledger_csv(tmp_path / "l.csv", [led])
        rows = list(csv.reader(open(path, newline="")))
        assert rows[0] == ["tag", "I", "J", "F0", "F", "K", "osc", "margin"]
        assert rows[1][0] == "probe"
        assert float(rows[1][1]) == led.I

    def test_flow_and_path_csv_shapes(self, tmp_path, base96):
        traj = run_flow(base96, s_end=0.2, policy=FlowPolicy(record_stride=50))
        fpath = io.write_flow_csv(tmp_path / "flow.csv", traj)
        rows = list(csv.reader(open(fpath, newline="")))
        assert rows[0][:4] == ["s", "sup_vdot", "sup_h", "sup_dh2"]
        assert len(rows) == 1 + len(traj.records)

        path = run_continuity_path(base96, records=[0.1, 0.5, 1.0])
        ppath = io.write_path_csv(tmp_path / "path.csv", path)
        rows = list(csv.reader(open(ppath, newline="")))
        assert rows[0][0] == "t" and "IminusJ" in rows[0]
        assert len(rows) == 1 + len(path.records)

    def test_checks_csv_booleans(self, tmp_path):
        from reebflow.verification import CheckResult

        checks = [
            CheckResult("alpha", True, 1e-12, 1e-8),
            CheckResult("beta", False, 2.0, 1e-8),
        ]
        path = io.write_checks_csv(tmp_path / "c.csv", checks)
        rows = list(csv.reader(open(path, newline="")))
        assert rows[1][:2] == ["alpha", "1"]
        assert rows[2][:2] == ["beta", "0"]

    def test_manifest_hashes(self, tmp_path, grid96):
        f = io.write_field_csv(tmp_path / "f.csv", grid96.x, np.zeros(grid96.n))
        man = io.write_manifest(
            tmp_path / "manifest.json", {"command": "probe"}, [f], 0.1
        )
        data = json.loads(man.read_text())
        assert data["schema_version"] == io.SCHEMA_VERSION
        assert data["config"]["command"] == "probe"
        assert data["artifacts"] == [
            {"name": "f.csv", "sha256": io.content_hash(f)}
        ]
        assert io.content_hash(f) == io.content_hash(f)


class TestExpressionParser:
    @pytest.mark.parametrize(
        "text, fn",
        [
            ("0.3*(1-x^2)", lambda x: 0.3 * (1 - x**2)),
            ("sin(2*x) + cos(x)/2", lambda x: np.sin(2 * x) + np.cos(x) / 2),
            ("exp(-x**2) * pi", lambda x: np.exp(-(x**2)) * np.pi),
            ("-x + 2", lambda x: -x + 2),
            ("0", lambda x: 0.0 * x),
        ],
    )
    def test_accepts_whitelisted_grammar(self, text, fn, grid96):
        got = parse_expression(text)(grid96.x)
        np.testing.assert_allclose(got, fn(grid96.x), rtol=0, atol=1e-15)
        assert got.shape == grid96.x.shape

    @pytest.mark.parametrize(
        "text",
        [
            "__import__('os').system('true')",
            "x.real",
            "open('f')",
            "y + 1",
            "x[0]",
            "lambda t: t",
            "'abc'",
        ],
    )
    def test_rejects_everything_else(self, text):
        with pytest.raises(UsageError):
            parse_expression(text)

    def test_malformed_syntax(self):
        with pytest.raises(UsageError):
            parse_expression("1 +")


class TestCliCommands:
    def test_solve_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "run"
        rc = cli.main(
            ["solve", "--n", "96", "--t", "0.5", "--out", str(out)]
        )
        assert rc == 0
        assert (out / "solution.csv").exists()
        assert (out / "state.json").exists()
        man = json.loads((out / "manifest.json").read_text())
        assert man["config"]["command"] == "solve"
        names = {a["name"] for a in man["artifacts"]}
        assert names == {"solution.csv", "state.json"}
        for entry in man["artifacts"]:
            assert entry["sha256"] == io.content_hash(out / entry["name"])
        assert "residual" in capsys.readouterr().out

    def test_scan_is_deterministic(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            rc = cli.main(
                ["scan", "--n", "96", "--family", "mobius",
                 "--lambdas", "1,2,4", "--out", str(out)]
            )
            assert rc == 0
            outs.append((out / "scan.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_spectrum_reports_obstruction(self, tmp_path):
        out = tmp_path / "spec"
        rc = cli.main(["spectrum", "--n", "96", "--k", "6", "--out", str(out)])
        assert rc == 0
        rows = list(csv.reader(open(out / "spectrum.csv", newline="")))
        assert rows[0] == ["index", "eigenvalue"]
        man = json.loads((out / "manifest.json").read_text())
        assert man["extra"]["has_obstruction"] is True

    def test_curvature_json(self, tmp_path):
        out = tmp_path / "curv"
        rc = cli.main(["curvature", "--m", "3", "--c", "4.0", "--out", str(out)])
        assert rc == 0
        data = json.loads((out / "curvature.json").read_text())
        assert data["m"] == 3
        assert abs(data["characteristic_integrand"]) < 1e-12

    def test_config_file_merge(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 96, "t": 0.4}))
        out = tmp_path / "run"
        rc = cli.main(
            ["solve", "--config", str(cfg), "--t", "0.6", "--out", str(out)]
        )
        assert rc == 0
        man = json.loads((out / "manifest.json").read_text())
        # config file sets n, explicit flag beats the file for t
        assert man["config"]["n"] == 96
        assert man["config"]["t"] == 0.6

    def test_config_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"plutonium": 1}))
        rc = cli.main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "usage error" in capsys.readouterr().err


class TestCliExitCodes:
    def test_usage_error(self, capsys):
        assert cli.main(["frobnicate"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_invalid_input(self, tmp_path, capsys):
        rc = cli.main(
            ["solve", "--n", "96", "--psi", "3*(1-x^2)",
             "--out", str(tmp_path / "o")]
        )
        assert rc == 1
        assert "invalid input" in capsys.readouterr().err

    def test_resolution_error(self, tmp_path, capsys):
        rc = cli.main(
            ["spectrum", "--n", "96", "--k", "64", "--out", str(tmp_path / "o")]
        )
        assert rc == 1
        assert "invalid input" in capsys.readouterr().err

    def test_invariant_violation(self, tmp_path, capsys, monkeypatch):
        def broken_flow(base, s_end, policy):
            traj = run_flow(base, s_end=0.05, policy=FlowPolicy(record_stride=10))
            return type(traj)(
                initial=traj.initial,
                records=traj.records,
                policy=traj.policy,
                completed=False,
                failure="stub failure",
            )

        monkeypatch.setattr(cli, "run_flow", broken_flow)
        rc = cli.main(
            ["flow", "--n", "96", "--s-end", "0.05", "--out", str(tmp_path / "o")]
        )
        assert rc == 2
        assert "invariant violated" in capsys.readouterr().err
