import json

import numpy as np
import pytest

from projsplit import cli
from projsplit.lasso import contiguous_partition, random_instance
from projsplit.params import beta_from_alpha
from projsplit.problem_io import (
    Manifest,
    ProblemFormatError,
    gen_problem,
    load_pair,
    load_problem,
    parse_gen_spec,
    save_problem,
)
from projsplit.solver import TRACE_FIELDS, IterateTrace
from projsplit.trace import read_trace, save_trace


@pytest.fixture
def toy_file(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("1,1\n")
    return p


def stderr_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


class TestProblemIO:
    def test_toy(self, toy_file):
        Q, b = load_problem(toy_file)
        assert Q.shape == (1, 1) and Q[0, 0] == 1.0 and b.tolist() == [1.0]

    def test_ragged_line_reported(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2,3\n4,5,6\n7,8\n")
        with pytest.raises(ProblemFormatError) as exc:
            load_problem(p)
        assert exc.value.line == 3
        assert "bad.csv:3" in str(exc.value)

    @pytest.mark.parametrize("text,line", [("1,x\n", 1), ("1,2\n\n3,nan\n", 3), ("", 0)])
    def test_bad_values(self, tmp_path, text, line):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(ProblemFormatError) as exc:
            load_problem(p)
        assert exc.value.line == line

    def test_single_column_rejected(self, tmp_path):
        p = tmp_path / "one.csv"
        p.write_text("1\n2\n")
        with pytest.raises(ProblemFormatError):
            load_problem(p)

    def test_round_trip_bit_exact(self, tmp_path, rng):
        Q, b = rng.normal(size=(7, 3)) * 1e3, rng.normal(size=7) * 1e-7
        save_problem(tmp_path / "p.csv", Q, b)
        Q2, b2 = load_problem(tmp_path / "p.csv")
        np.testing.assert_array_equal(Q2, Q)
        np.testing.assert_array_equal(b2, b)

    def test_pair_files(self, tmp_path):
        (tmp_path / "Q.csv").write_text("1,2\n3,4\n")
        (tmp_path / "b.csv").write_text("5,6\n")
        Q, b = load_problem(tmp_path)
        assert Q.tolist() == [[1, 2], [3, 4]] and b.tolist() == [5, 6]
        (tmp_path / "b.csv").write_text("5\n6\n7\n")
        with pytest.raises(ProblemFormatError):
            load_pair(tmp_path / "Q.csv", tmp_path / "b.csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_problem(tmp_path / "nope.csv")


class TestGenerator:
    def test_deterministic(self):
        Q1, b1, m1 = gen_problem(30, 4, 3, 7)
        Q2, b2, m2 = gen_problem(30, 4, 3, 7)
        np.testing.assert_array_equal(Q1, Q2)
        np.testing.assert_array_equal(b1, b2)
        assert m1 == m2
        assert set(np.unique(b1)) <= {0.0, 1.0}

    def test_seed_changes_data(self):
        assert not np.array_equal(gen_problem(30, 4, 3, 7)[0], gen_problem(30, 4, 3, 8)[0])

    def test_writes_manifest(self, tmp_path):
        Q, b, man = gen_problem(12, 3, 5, 1, tmp_path / "out")
        back = Manifest.read(tmp_path / "out")
        assert back == man
        assert back.partition_sizes == [2, 2, 2, 2, 4]
        Q2, b2 = load_problem(tmp_path / "out" / "manifest.json")
        np.testing.assert_array_equal(Q2, Q)
        np.testing.assert_array_equal(b2, b)

    def test_large_instance_manifests(self):
        # the large instances are checked through their partition only
        _, _, man = gen_problem(1000, 100, 10, 0)
        assert man.partition_sizes == [100] * 10
        sizes = [c.size for c in contiguous_partition(100_000, 325)]
        assert sizes[:324] == [307] * 324 and sizes[-1] == 532

    def test_parse_spec(self):
        assert parse_gen_spec("10,3,2") == (10, 3, 2, 0)
        assert parse_gen_spec("10, 3, 2, 9", 4) == (10, 3, 2, 9)
        assert parse_gen_spec("10,3,2", 4) == (10, 3, 2, 4)
        for bad in ("10,3", "a,b,c", "1,2,3,4,5"):
            with pytest.raises(ValueError):
                parse_gen_spec(bad)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            gen_problem(3, 2, 5, 0)


def sample_records():
    return [
        IterateTrace(0, 0.1, 1.55, 0.5, 0.25, 0.5, 1.0, 0.5, [1, 0], 0.5, 0.0),
        IterateTrace(1, 0.1, 1.55, 0.125, 1e-3, 3.5e-2, 0.1, 0.05, [3, 0], None, 0.75),
    ]


class TestTrace:
    @pytest.mark.parametrize("fmt,header", [("jsonl", False), ("csv", False), ("csv", True)])
    def test_round_trip(self, tmp_path, fmt, header):
        path = tmp_path / f"t.{fmt}"
        assert save_trace(sample_records(), path, fmt, header) == 2
        back = read_trace(path)
        assert [r.to_dict() for r in back] == [r.to_dict() for r in sample_records()]

    def test_csv_headerless_by_default(self, tmp_path):
        path = tmp_path / "t.csv"
        save_trace(sample_records(), path, "csv")
        first = path.read_text().splitlines()[0].split(",")
        assert len(first) == len(TRACE_FIELDS) and first[0] == "0"

    def test_jsonl_schema(self, tmp_path):
        path = tmp_path / "t.jsonl"
        save_trace(sample_records(), path)
        for line in path.read_text().splitlines():
            assert tuple(json.loads(line)) == TRACE_FIELDS
        path.write_text('{"k": 0}\n')
        with pytest.raises(ValueError):
            read_trace(path)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            save_trace(sample_records(), tmp_path / "t.x", "xml")


class TestSolveCommand:
    def test_toy(self, toy_file, tmp_path):
        rep = tmp_path / "r.json"
        assert cli.main(["solve", "--problem", str(toy_file), "--report", str(rep)]) == 0
        out = json.loads(rep.read_text())
        assert out["status"] == "converged"
        assert abs(out["objective_z"] - 0.095) <= 1e-4 * 0.095
        assert out["f_star"] == pytest.approx(0.095, rel=1e-12)
        assert out["lambda"] == pytest.approx(0.1)

    @pytest.mark.parametrize("fmt", ["jsonl", "csv"])
    def test_trace_identical_across_runs(self, tmp_path, fmt):
        args = ["solve", "--gen", "40,5,2,3", "--format", fmt, "--report", str(tmp_path / "r.json")]
        assert cli.main(args + ["--trace", str(tmp_path / f"a.{fmt}")]) == 0
        assert cli.main(args + ["--trace", str(tmp_path / f"b.{fmt}")]) == 0
        a, b = (tmp_path / f"a.{fmt}").read_bytes(), (tmp_path / f"b.{fmt}").read_bytes()
        assert a == b and a
        recs = read_trace(tmp_path / f"a.{fmt}")
        assert [r.k for r in recs] == list(range(len(recs)))

    def test_residual_stop(self, toy_file, tmp_path):
        rep = tmp_path / "r.json"
        code = cli.main(["solve", "--problem", str(toy_file), "--stop", "residual",
                         "--residual-tol", "1e-8", "--report", str(rep)])
        assert code == 0
        out = json.loads(rep.read_text())
        assert out["f_star"] is None and out["x_n"][0] == pytest.approx(0.9, abs=1e-6)

    def test_not_converged_exit(self, toy_file, tmp_path, capsys):
        code = cli.main(["solve", "--problem", str(toy_file), "--max-outer", "1", "--tol", "1e-12",
                         "--report", str(tmp_path / "r.json")])
        assert code == cli.EXIT_NOT_CONVERGED
        assert stderr_json(capsys)["status"] == "max_outer"

    def test_inadmissible_parameters(self, toy_file, capsys):
        code = cli.main(["solve", "--problem", str(toy_file), "--alpha", "0.2", "--alpha-bar", "0.17"])
        assert code == cli.EXIT_BAD_INPUT
        assert stderr_json(capsys)["status"] == "bad_input"

    def test_bad_problem_file(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("1,2\n3\n")
        assert cli.main(["solve", "--problem", str(p)]) == cli.EXIT_BAD_INPUT
        assert "bad.csv:2" in stderr_json(capsys)["reason"]

    def test_blocks_from_manifest(self, tmp_path):
        assert cli.main(["gen", "--gen", "30,4,3,1", "--out", str(tmp_path / "g")]) == 0
        spec = cli.RunSpec("solve", dict(cli.DEFAULTS), problem=[str(tmp_path / "g")])
        insts = cli._instances(spec, spec.settings)
        assert insts[0].r == 3


class TestConfigPrecedence:
    def _settings(self, argv):
        return cli.resolve_settings(cli.build_parser().parse_args(argv))

    def test_defaults(self):
        st = self._settings(["solve", "--gen", "5,2,1"])
        assert st["alpha"] == 0.1 and st["alpha_bar"] == 0.17 and st["sigma"] == 0.99

    def test_file_then_flags(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"alpha": 0.05, "sigma": 0.5, "max-outer": 7}))
        st = self._settings(["solve", "--gen", "5,2,1", "--config", str(cfg), "--sigma", "0.3"])
        assert st["alpha"] == 0.05 and st["sigma"] == 0.3 and st["max_outer"] == 7

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"momentum": 1}))
        assert cli.main(["solve", "--gen", "5,2,1", "--config", str(cfg)]) == cli.EXIT_BAD_INPUT
        assert "momentum" in stderr_json(capsys)["reason"]


class TestSweepCommand:
    def test_beta_column(self, tmp_path):
        out = tmp_path / "s.jsonl"
        assert cli.main(["sweep", "--report", str(out)]) == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert [r["alpha_bar"] for r in rows] == [0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
        betas = [r["beta_bar"] for r in rows]
        assert all(b1 > b2 for b1, b2 in zip(betas, betas[1:]))
        for r in rows:
            assert r["beta_bar"] == beta_from_alpha(r["alpha_bar"])

    def test_csv_with_instance(self, tmp_path):
        out = tmp_path / "s.csv"
        code = cli.main(["sweep", "--gen", "40,5,2,0", "--alpha-bar-grid", "0.1,0.3",
                         "--format", "csv", "--header", "--report", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].split(",") == ["alpha_bar", "beta_bar", "problem", "alpha", "iterations", "status"]
        assert len(lines) == 3
        assert all(line.endswith("converged") for line in lines[1:])

    def test_bad_grid(self, capsys):
        assert cli.main(["sweep", "--alpha-bar-grid", "0.1,x"]) == cli.EXIT_BAD_INPUT


class TestCompareCommand:
    def test_same_baseline_ratio_one(self, tmp_path, capsys):
        rep = tmp_path / "c.json"
        code = cli.main(["compare", "--gen", "60,8,3,0", "--instances", "2", "--baseline", "same",
                         "--report", str(rep)])
        assert code == 0
        out = capsys.readouterr().out
        assert "Outer iterations" in out and "Runtime (s)" in out
        d = json.loads(rep.read_text())
        assert d["geomean_iters"]["ratio"] == 1.0
        assert len(d["rows"]) == 2

    def test_classical_baseline(self, tmp_path):
        rep = tmp_path / "c.json"
        assert cli.main(["compare", "--gen", "60,8,3,0", "--report", str(rep)]) == 0
        d = json.loads(rep.read_text())
        assert d["variants"] == ["PS", "PS_in_rel"]
        assert d["rows"][0]["status_a"] == "converged"


class TestGenCommand:
    def test_writes_files(self, tmp_path, capsys):
        assert cli.main(["gen", "--gen", "20,3,2,5", "--out", str(tmp_path)]) == 0
        man = json.loads(capsys.readouterr().out)
        assert man["m"] == 20 and man["seed"] == 5
        Q, b = load_problem(tmp_path)
        Q_ref, b_ref = random_instance(20, 3, 5)
        np.testing.assert_array_equal(Q, Q_ref)
        np.testing.assert_array_equal(b, b_ref)
