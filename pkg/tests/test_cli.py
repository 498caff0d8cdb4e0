"""CLI surface: exit codes, artifacts, and byte-identical determinism."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

CMD = [sys.executable, "-m", "confmix.cli"]


def run(*args, cwd=None):
    return subprocess.run(CMD + [str(a) for a in args], capture_output=True,
                          text=True, cwd=cwd)


def pipeline(root: Path, seed=0, n=150):
    """synth -> graph -> front -> tokens; returns output paths."""
    root.mkdir(parents=True, exist_ok=True)
    r = run("synth", "moons", "--n", n, "--noise", "0.05", "--seed", seed,
            "--out", root / "data")
    assert r.returncode == 0, r.stderr
    r = run("graph", "--input", root / "data.csv", "--k", 8,
            "--label-column", -1, "--out", root / "g")
    assert r.returncode == 0, r.stderr
    r = run("front", "--graph", root / "g", "--seed", seed, "--out", root / "f")
    assert r.returncode == 0, r.stderr
    r = run("tokens", "--input", root / "f.cfgs.csv", "--out", root / "t")
    assert r.returncode == 0, r.stderr
    return root


class TestExitCodes:
    def test_usage_error(self):
        r = run("synth", "nonsense", "--out", "/tmp/never")
        assert r.returncode == 2

    def test_missing_required_flag(self):
        r = run("graph", "--out", "/tmp/never")
        assert r.returncode == 2

    def test_data_error_bad_csv(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0,2.0\n3.0,oops\n")
        r = run("graph", "--input", bad, "--out", tmp_path / "g")
        assert r.returncode == 3
        assert "data error" in r.stderr

    def test_data_error_missing_file(self, tmp_path):
        r = run("tokens", "--input", tmp_path / "nope.csv", "--out", tmp_path / "t")
        assert r.returncode == 2  # click validates existence -> usage error

    def test_data_error_malformed_cfgs(self, tmp_path):
        p = tmp_path / "cfgs.csv"
        p.write_text("no header\n1,2\n")
        r = run("tokens", "--input", p, "--out", tmp_path / "t")
        assert r.returncode == 3

    def test_success(self, tmp_path):
        r = run("synth", "moons", "--n", 50, "--out", tmp_path / "d")
        assert r.returncode == 0


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    return pipeline(tmp_path_factory.mktemp("cli") / "run")


class TestArtifacts:

    def test_synth_shape(self, outdir):
        lines = (outdir / "data.csv").read_text().splitlines()
        assert len(lines) == 150
        assert len(lines[0].split(",")) == 3  # x, y, label

    def test_graph_header(self, outdir):
        hdr = json.loads((outdir / "g.graph.json").read_text())
        assert hdr["k"] == 8 and hdr["reweighted"] is True
        assert (outdir / "g.mtx").exists()

    def test_front_json_tiles(self, outdir):
        entries = json.loads((outdir / "f.front.json").read_text())
        lo = 0.0
        for e in entries:
            assert e["interval"][0] == pytest.approx(lo, abs=1e-12)
            lo = e["interval"][1]

    def test_lineage_is_dot(self, outdir):
        text = (outdir / "f.lineage.dot").read_text()
        assert text.startswith("digraph lineage {") and text.rstrip().endswith("}")

    def test_tokens_schema(self, outdir):
        schema = json.loads((outdir / "t.schema.json").read_text())
        cfg_lines = (outdir / "t.tokens.csv").read_text().splitlines()
        m = len(cfg_lines[0].split(":")[1].split(","))
        assert schema["m"] == m == len(schema["cardinalities"]) == len(schema["gammas"])

    def test_manifests_written(self, outdir):
        for prefix in ("data", "g", "f", "t"):
            m = json.loads((outdir / f"{prefix}.manifest.json").read_text())
            assert {"command", "parameters", "input_hashes", "outputs", "wall_ms"} <= m.keys()

    def test_align_self(self, outdir, tmp_path):
        r = run("align", "--train", outdir / "f.cfgs.csv",
                "--test", outdir / "f.cfgs.csv", "--out", tmp_path / "a")
        assert r.returncode == 0, r.stderr
        mapping = json.loads((tmp_path / "a.mapping.json").read_text())
        assert mapping["surplus_test_columns"] == []

    def test_bench_table(self, tmp_path):
        r = run("bench", "--kinds", "moons", "--seeds", "0", "--n", 150,
                "--out", tmp_path / "b")
        assert r.returncode == 0, r.stderr
        rows = (tmp_path / "b.bench.csv").read_text().splitlines()
        assert rows[0] == "dataset,seed,best_ari,front_size,seconds"
        assert len(rows) == 2
