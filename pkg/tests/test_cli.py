import csv
import subprocess
import sys

import pytest

from dlim.cli import build_parser, main
from dlim.config import ConfigError, RunConfig
from dlim.dynamics import TWO_PI


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGroundTruth:
    def test_mobius(self, capsys):
        code, out, _ = run(["ground-truth", "--mobius", "8", "--coupling", "-1"], capsys)
        assert code == 0
        assert "energy: -16" in out and "degeneracy: 8" in out

    def test_two_spin_ferromagnet(self, capsys, tmp_path):
        dest = tmp_path / "gt.csv"
        code, out, _ = run(["ground-truth", "--random", "2", "--density", "1", "--weights", "+1",
                            "--seed", "1", "--out", str(dest)], capsys)
        assert code == 0
        assert "energy: -2" in out and "degeneracy: 2" in out
        assert dest.read_text() == "energy,degeneracy\n-2,2\n"

    def test_odd_mobius(self, capsys):
        code, _, err = run(["ground-truth", "--mobius", "7"], capsys)
        assert code == 1 and "even" in err

    def test_oversize_names_guard(self, capsys):
        code, _, err = run(["ground-truth", "--mobius", "30"], capsys)
        assert code == 1 and "enumeration too large" in err

    def test_conflicting_sources(self, capsys):
        code, _, err = run(["ground-truth", "--mobius", "8", "--graph", "fig1b"], capsys)
        assert code == 1


class TestGenGraph:
    def test_roundtrip_through_file(self, capsys, tmp_path):
        dest = tmp_path / "g.txt"
        assert run(["gen-graph", "--random", "6", "--density", "0.5", "--seed", "4", "--out", str(dest)],
                   capsys)[0] == 0
        code, out, _ = run(["ground-truth", "--file", str(dest)], capsys)
        assert code == 0 and "n: 6" in out

    def test_stdout(self, capsys):
        code, out, _ = run(["gen-graph", "--graph", "fig1d"], capsys)
        lines = out.splitlines()
        assert code == 0 and lines[0] == "8" and len(lines) == 10


class TestConfig:
    def test_defaults(self):
        m = RunConfig().params(2)
        assert m.omega0 == pytest.approx(TWO_PI * 1.0)
        assert m.omega_e == pytest.approx(TWO_PI * 2 * 1.0015)
        assert m.tau == 10 and m.p0 == 1
        assert m.gamma0 == pytest.approx(TWO_PI * 0.05)
        assert m.K == pytest.approx(TWO_PI * 0.06)
        assert m.kappa == pytest.approx(TWO_PI * 0.003)
        assert m.Ke == pytest.approx(TWO_PI * 0.01)

    def test_misspelled_key(self):
        with pytest.raises(ConfigError, match="machine.kapa"):
            RunConfig.from_dict({"machine": {"kapa": 0.01}})

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="outputs"):
            RunConfig.from_dict({"outputs": {"dir": "x"}})

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"sweep": {"kind": "spiral"}})
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"sweep": {"beta_r": {"min": 0.1, "max": 0.5, "step": 0}}})
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"machine": {"tau": -1}})

    def test_axes(self):
        cfg = RunConfig.from_dict({"sweep": {"kind": "detuning", "beta_i": [-0.16, 0, 0.16],
                                             "detuning": {"min": -0.002, "max": 0.002, "step": 0.001}}})
        from dlim.ising import named_graph
        spec = cfg.sweep_spec(named_graph("ferro2"))
        assert list(spec.axis("beta_i")) == [-0.16, 0.0, 0.16]
        assert spec.axis("detuning").size == 5

    def test_validate_command(self, capsys, tmp_path):
        good = tmp_path / "good.yaml"
        good.write_text("machine:\n  beta_r: 0.42\n  beta_i: -0.16\nsweep:\n  kind: kappa\n")
        code, out, _ = run(["validate-config", str(good), "--show"], capsys)
        assert code == 0 and "beta_r: 0.42" in out
        bad = tmp_path / "bad.yaml"
        bad.write_text("machine:\n  kapa: 0.01\n")
        code, _, err = run(["validate-config", str(bad)], capsys)
        assert code == 1 and "machine.kapa" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(["validate-config", str(tmp_path / "none.yaml")], capsys)[0] == 1


class TestTrial:
    ARGS = ["trial", "--graph", "ferro2", "--beta-r", "0.42", "--beta-i", "-0.16", "--t-end", "300"]

    def test_deterministic(self, capsys):
        a = run(self.ARGS + ["--seed", "5"], capsys)
        b = run(self.ARGS + ["--seed", "5"], capsys)
        assert a[0] == 0 and a[1] == b[1]
        assert "is_ground: true" in a[1]

    def test_trace_rows(self, capsys, tmp_path):
        dest = tmp_path / "trace.csv"
        code, out, _ = run(self.ARGS + ["--seed", "1", "--trace", str(dest), "--t-end", "50"], capsys)
        assert code == 0
        with open(dest) as fh:
            rows = list(csv.reader(fh))
        per_osc = (len(rows) - 1) // 2
        assert per_osc == round(50 / 0.05) + 1
        assert "1001 samples" in out

    def test_frames_agree(self, capsys):
        spins = []
        for frame in ("rotating", "lab"):
            code, out, _ = run(self.ARGS + ["--seed", "9", "--frame", frame], capsys)
            assert code == 0
            spins.append([ln for ln in out.splitlines() if ln.startswith("spins:")][0])
        flipped = spins[1].replace("+1", "x").replace("-1", "+1").replace("x", "-1")
        assert spins[0] in (spins[1], flipped)

    def test_divergence_is_runtime_failure(self, capsys):
        code, _, err = run(["trial", "--graph", "fig1d", "--beta-r", "0.42", "--beta-i", "-0.16",
                            "--kappa", "0.018", "--t-end", "300"], capsys)
        assert code == 2 and "beta_r=0.42" in err


class TestSweep:
    def test_kappa_csv(self, capsys, tmp_path):
        code, out, _ = run(["sweep", "--kind", "kappa", "--graph", "ferro2", "--beta-r", "0.42",
                            "--beta-i", "-0.16", "--trials", "2", "--out", str(tmp_path), "--threads", "1"],
                           capsys)
        assert code == 0 and "peak gmp" in out
        rows = (tmp_path / "kappa.csv").read_text().splitlines()
        assert rows[0] == "kappa,beta_r,beta_i,trials,gmp"
        assert any(r.startswith("0.012,") for r in rows[1:])

    def test_thread_count_irrelevant(self, capsys, tmp_path):
        base = ["sweep", "--kind", "beta-plane", "--graph", "ferro2", "--beta-r", "0.3,0.42",
                "--beta-i=-0.16:0.14:0.3", "--trials", "2", "--seed", "3"]
        for t in ("1", "3"):
            assert run(base + ["--threads", t, "--out", str(tmp_path / t)], capsys)[0] == 0
        for name in ("beta_plane.csv", "transition_fit.csv", "gmp_matrix.txt", "locked_matrix.txt",
                     "metadata.yaml"):
            assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "3" / name).read_bytes()
        matrix = (tmp_path / "1" / "gmp_matrix.txt").read_text().splitlines()
        assert len(matrix) == 2 and len(matrix[0].split()) == 2

    def test_env_threads(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("DLIM_THREADS", "zero")
        code, _, err = run(["sweep", "--kind", "kappa", "--graph", "ferro2", "--kappa", "0.003",
                            "--out", str(tmp_path)], capsys)
        assert code == 1 and "DLIM_THREADS" in err

    def test_unwritable_output_fails_first(self, capsys, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        code, _, err = run(["sweep", "--fast", "--out", str(blocker / "sub")], capsys)
        assert code == 1 and "not writable" in err

    def test_fast_profile_grid(self):
        from dlim.sweep import axis_values
        assert axis_values(0.1, 0.5, 0.04).size == 11 and axis_values(-1, 1, 0.04).size == 51


@pytest.mark.parametrize("sub", ["ground-truth", "trial", "sweep", "gen-graph", "validate-config"])
def test_help_documents_defaults(sub):
    parser = build_parser()
    action = next(a for a in parser._actions if a.dest == "command")
    text = action.choices[sub].format_help()
    assert "usage" in text
    if sub in ("trial", "sweep"):
        assert "default" in text and "0.003" in text


def test_usage_error_is_input_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--kind", "nonsense"])
    assert exc.value.code == 1


def test_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "dlim.cli", "sweep", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "--fast" in res.stdout and "200" in res.stdout
