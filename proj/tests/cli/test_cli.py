#!/usr/bin/env python3
"""End-to-end checks of the sklr command-line tool.

usage: test_cli.py SKLR_BINARY SCHEMA_DIR
"""
import json
import pathlib
import subprocess
import sys
import tempfile
import unittest

import numpy as np

HERE = pathlib.Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))
import validate_json  # noqa: E402

SKLR = None
SCHEMAS = None


def run(*args, cwd, expect=0):
    proc = subprocess.run([SKLR, *map(str, args)], cwd=cwd, capture_output=True, text=True)
    if expect is not None and proc.returncode != expect:
        raise AssertionError(
            f"sklr {' '.join(map(str, args))}: exit {proc.returncode}, expected {expect}\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}"
        )
    return proc


def write_block_data(path):
    """Three labeled points per class, two classes far apart."""
    rows = ["0.0,0.0,0", "0.1,0.0,0", "0.0,0.1,0", "5.0,5.0,1", "5.1,5.0,1", "5.0,5.1,1"]
    path.write_text("\n".join(rows) + "\n")


def write_block_kernel(path):
    K = np.zeros((6, 6))
    K[:3, :3] = 1.0
    K[3:, 3:] = 1.0
    K += 1e-3 * np.eye(6)
    np.savetxt(path, K, delimiter=",")


class Cli(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory(prefix="sklr_cli_")
        self.dir = pathlib.Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def json_outputs(self):
        return sorted(str(p) for p in self.dir.rglob("*.json"))

    def validate_all(self):
        files = self.json_outputs()
        self.assertTrue(files)
        self.assertEqual(validate_json.main(["validate_json.py", str(SCHEMAS), *files]), 0)

    def test_pipeline_and_schemas(self):
        d = self.dir
        run("blobs", "--out", "d.csv", "--per-cluster", 12, "--seed", 3, cwd=d)
        run("split", "--data", "d.csv", "--labels", "--train-fraction", 0.75, "--seed", 4,
            "--train-out", "train.csv", "--holdout-out", "hold.csv", cwd=d)
        run("synth", "--data", "train.csv", "--labels", "--n-neq", 15, "--eq-mode", "same-class", "--n-eq", 3,
            "--seed", 5, "--out", "c.txt", cwd=d)
        run("learn", "--data", "train.csv", "--labels", "--constraints", "c.txt", "--energy", 1, "--knn", 3,
            "--out", "k.bin", cwd=d)
        report = json.loads((d / "k.bin.json").read_text())
        self.assertTrue(report["converged"])
        run("cluster", "--kernel", "k.bin", "--k", 4, "--out", "a.csv", cwd=d)
        run("evaluate", "--data", "train.csv", "--labels", "--assignments", "a.csv", "--out", "eval.json", cwd=d)
        ar = json.loads((d / "eval.json").read_text())["adjusted_rand"]
        self.assertGreaterEqual(ar, -1.0)
        self.assertLessEqual(ar, 1.0)
        run("extend", "--data", "train.csv", "--labels", "--model", "k.bin", "--holdout", "hold.csv",
            "--holdout-labels", "--knn", 3, "--out", "g.txt", "--cross", "x.txt", cwd=d)
        G = np.loadtxt(d / "g.txt", delimiter=",", ndmin=2)
        n_hold = sum(1 for line in (d / "hold.csv").read_text().splitlines() if line and not line.startswith("#"))
        self.assertEqual(G.shape, (n_hold, n_hold))
        np.testing.assert_array_equal(G, G.T)
        self.assertGreaterEqual(np.linalg.eigvalsh(G).min(), -1e-6)
        self.validate_all()

    def test_cluster_block_kernel(self):
        d = self.dir
        write_block_data(d / "d.csv")
        write_block_kernel(d / "k.txt")
        run("cluster", "--kernel", "k.txt", "--k", 2, "--out", "a2.csv", cwd=d)
        out = run("evaluate", "--data", "d.csv", "--labels", "--assignments", "a2.csv", cwd=d)
        self.assertAlmostEqual(json.loads(out.stdout)["adjusted_rand"], 1.0, places=12)
        run("cluster", "--kernel", "k.txt", "--k", 1, "--out", "a1.csv", cwd=d)
        out = run("evaluate", "--data", "d.csv", "--labels", "--assignments", "a1.csv", cwd=d)
        self.assertEqual(json.loads(out.stdout)["adjusted_rand"], 0.0)
        self.validate_all()

    def test_contradictory_constraints_exit_3(self):
        d = self.dir
        (d / "d.csv").write_text("0.0\n1.0\n2.5\n")
        (d / "c.txt").write_text("neq 0 1 2\nneq 1 2 0\n")
        # Hard projections shrink every distance until the relative tolerance
        # is met, so the cap has to be reached first.
        proc = run("learn", "--data", "d.csv", "--constraints", "c.txt", "--energy", 1, "--knn", 1,
                   "--max-epochs", 20, "--out", "k.bin", cwd=d, expect=3)
        self.assertIn("violated", proc.stderr)
        self.assertFalse(json.loads((d / "k.bin.json").read_text())["converged"])
        run("learn", "--data", "d.csv", "--constraints", "c.txt", "--energy", 1, "--knn", 1, "--mode", "soft",
            "--lambda-neq", 1, "--out", "s.bin", cwd=d)
        self.validate_all()

    def test_missing_file_exit_1(self):
        missing = self.dir / "nowhere" / "absent.csv"
        proc = run("cluster", "--kernel", missing, "--out", "a.csv", cwd=self.dir, expect=1)
        self.assertIn(str(missing), proc.stderr)

    def test_bad_arguments_exit_2(self):
        d = self.dir
        write_block_data(d / "d.csv")
        (d / "a.csv").write_text("index,cluster\n0,0\n1,0\n2,1\n")
        proc = run("evaluate", "--data", "d.csv", "--labels", "--assignments", "a.csv", cwd=d, expect=2)
        self.assertIn("3 items", proc.stderr)
        run("synth", "--data", "d.csv", "--labels", "--constraint-mode", "sideways", "--out", "c.txt", cwd=d,
            expect=2)
        run("learn", "--data", "d.csv", "--labels", "--constraints", "c.txt", "--gamma2", 0.5, "--out", "k.bin",
            cwd=d, expect=2)

    def test_corrupt_changes_exact_count(self):
        d = self.dir
        run("blobs", "--out", "d.csv", "--per-cluster", 10, "--seed", 1, cwd=d)
        run("synth", "--data", "d.csv", "--labels", "--n-neq", 10, "--seed", 2, "--out", "c.txt", cwd=d)
        run("corrupt", "--constraints", "c.txt", "--noise", 0.3, "--seed", 3, "--out", "n.txt", cwd=d)
        before = [ln for ln in (d / "c.txt").read_text().splitlines() if ln and not ln.startswith("#")]
        after = [ln for ln in (d / "n.txt").read_text().splitlines() if ln and not ln.startswith("#")]
        self.assertEqual(len(before), len(after))
        changed = [(a, b) for a, b in zip(before, after) if a != b]
        self.assertEqual(len(changed), 3)
        for a, b in changed:
            ta, tb = a.split(), b.split()
            self.assertEqual(ta[0], "neq")
            self.assertEqual(sorted(ta[1:]), sorted(tb[1:]))
            # the old outlier now sits where an inlier was
            self.assertIn(tb[3], (ta[1], ta[2]))
            self.assertIn(ta[3], (tb[1], tb[2]))
        self.validate_all()

    def test_experiment_is_deterministic(self):
        d = self.dir
        run("blobs", "--out", "d.csv", "--per-cluster", 10, "--sigma", 0.5, "--seed", 7, cwd=d)
        args = ["experiment", "--data", "d.csv", "--labels", "--grid", "5,10", "--noise", "0,0.2",
                "--modes", "hard,soft", "--trials", 2, "--baseline", "--energy", 1, "--seed", 11]
        run(*args, "--out", "e1", cwd=d)
        run(*args, "--out", "e2", cwd=d)
        for name in ("trials.csv", "aggregate.csv"):
            self.assertEqual((d / "e1" / name).read_bytes(), (d / "e2" / name).read_bytes())
        rows = (d / "e1" / "trials.csv").read_text().strip().splitlines()
        # header, 2 baseline trials, 2 counts x 2 noise x 2 modes x 2 trials
        self.assertEqual(len(rows), 1 + 2 + 16)
        self.validate_all()

    def test_config_precedence(self):
        d = self.dir
        run("blobs", "--out", "d.csv", "--per-cluster", 8, "--seed", 2, cwd=d)
        run("synth", "--data", "d.csv", "--labels", "--n-neq", 6, "--seed", 3, "--out", "c.txt", cwd=d)
        (d / "learn.ini").write_text("# learner settings\n[learn]\ngamma2 = 3\nenergy = 1\nmax-epochs = 50\n")
        run("learn", "--config", "learn.ini", "--data", "d.csv", "--labels", "--constraints", "c.txt",
            "--out", "a.bin", cwd=d)
        run("learn", "--config", "learn.ini", "--data", "d.csv", "--labels", "--constraints", "c.txt",
            "--gamma2", 4, "--out", "b.bin", cwd=d)
        a = json.loads((d / "a.bin.json").read_text())
        b = json.loads((d / "b.bin.json").read_text())
        self.assertEqual(a["config"]["gamma2"], 3)
        self.assertEqual(a["config"]["max_epochs"], 50)
        self.assertEqual(b["config"]["gamma2"], 4)
        self.assertEqual(b["config"]["energy"], 1)
        (d / "bad.ini").write_text("gamma2 3\n")
        run("learn", "--config", "bad.ini", "--data", "d.csv", "--labels", "--constraints", "c.txt",
            "--out", "c.bin", cwd=d, expect=1)
        self.validate_all()


if __name__ == "__main__":
    if len(sys.argv) < 3:
        print(__doc__, file=sys.stderr)
        sys.exit(2)
    SKLR = str(pathlib.Path(sys.argv[1]).resolve())
    SCHEMAS = pathlib.Path(sys.argv[2]).resolve()
    unittest.main(argv=sys.argv[:1], verbosity=2)
