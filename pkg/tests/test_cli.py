import json
import subprocess
import sys

import pytest

from qwloc.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main
from qwloc.config import config_hash, load_config
from qwloc.tables import read_csv


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run(cfg, out, *extra, command=("simulate",)):
    return main([*command, "--config", str(cfg), "--out", str(out), *extra])


SIM = "seed: 3\nn_t: 40\nmodel:\n  kind: discrete_angle\n  magnitude: 0.1\n"
SWEEP = "seed: 0\nn_t: 100\nsweep:\n  n_points: 30\n"
ML = (
    "seed: 1\nn_t: 30\nml:\n  n_samples: 200\n  mlp_hidden: [16]\n  mlp_max_epochs: 40\n"
    "  scan_points: 30\n  sizes: [40, 80]\n  repetitions: 2\n"
)
SCALING = "seed: 5\nsweep:\n  n_points: 20\nscaling:\n  n_values: [30, 40, 50]\n  methods: [MoI, IPR]\n  replicates: 2\n"


class TestSimulate:
    def test_outputs(self, tmp_path):
        cfg = write(tmp_path, SIM)
        assert run(cfg, tmp_path / "o") == EXIT_OK
        rows = read_csv(tmp_path / "o" / "distribution.csv")
        assert list(rows[0]) == ["t", "x", "P"]
        assert len(rows) == 41 * 81
        final = [float(r["P"]) for r in rows if r["t"] == "40"]
        assert sum(final) == pytest.approx(1.0, abs=1e-12)
        diag = read_csv(tmp_path / "o" / "diagnostics.csv")
        assert list(diag[0]) == ["t", "MoI", "IPR"] and len(diag) == 40
        for name in ("distribution.svg", "diagnostics.svg", "run.json"):
            assert (tmp_path / "o" / name).exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write(tmp_path, SIM)
        run(cfg, tmp_path / "a")
        run(cfg, tmp_path / "b", "--threads", "4")
        for name in ("distribution.csv", "diagnostics.csv", "distribution.svg", "diagnostics.svg", "run.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_zero_magnitude_matches_no_randomness(self, tmp_path):
        run(write(tmp_path, "n_t: 30\nmodel:\n  kind: discrete_angle\n  magnitude: 0.0\n", "a.yaml"), tmp_path / "a")
        run(write(tmp_path, "n_t: 30\nmodel:\n  kind: none\n", "b.yaml"), tmp_path / "b")
        assert (tmp_path / "a" / "distribution.csv").read_bytes() == (tmp_path / "b" / "distribution.csv").read_bytes()

    def test_plots_off(self, tmp_path):
        assert run(write(tmp_path, SIM), tmp_path / "o", "--plots", "off") == EXIT_OK
        assert not list((tmp_path / "o").glob("*.svg"))

    def test_seed_override_and_metadata(self, tmp_path):
        cfg = write(tmp_path, SIM)
        run(cfg, tmp_path / "o", "--seed", "99", "--plots", "off")
        meta = json.loads((tmp_path / "o" / "run.json").read_text())
        assert meta["seed"] == 99 and meta["command"] == "simulate"
        assert meta["config_hash"] != config_hash(load_config(cfg))


class TestErrors:
    def test_unknown_key(self, tmp_path):
        assert run(write(tmp_path, "n_tt: 3\n"), tmp_path / "o") == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        assert run(tmp_path / "missing.yaml", tmp_path / "o") == EXIT_CONFIG

    @pytest.mark.parametrize("seed", ["-1", str(2**64)])
    def test_bad_seed(self, tmp_path, seed):
        assert run(write(tmp_path, SIM), tmp_path / "o", "--seed", seed) == EXIT_CONFIG

    def test_bad_threads(self, tmp_path):
        assert run(write(tmp_path, SIM), tmp_path / "o", "--threads", "0") == EXIT_CONFIG

    def test_usage_error(self):
        assert main(["teleport"]) == 2

    def test_magnitude_above_theta0(self, tmp_path):
        cfg = write(tmp_path, "n_t: 10\nmodel:\n  kind: discrete_angle\n  magnitude: 1.0\n")
        assert run(cfg, tmp_path / "o") == EXIT_CONFIG

    def test_sweep_without_randomness(self, tmp_path):
        cfg = write(tmp_path, "n_t: 10\nmodel:\n  kind: none\n")
        assert run(cfg, tmp_path / "o", command=("sweep",)) == EXIT_CONFIG

    def test_console_script(self, tmp_path):
        res = subprocess.run(
            [sys.executable, "-m", "qwloc.cli", "simulate", "--config", str(write(tmp_path, "n_tt: 1\n")), "--out", str(tmp_path)],
            capture_output=True, text=True,
        )
        assert res.returncode == EXIT_CONFIG
        assert "n_tt" in res.stderr


class TestSweep:
    def test_outputs(self, tmp_path):
        assert run(write(tmp_path, SWEEP), tmp_path / "o", command=("sweep",)) == EXIT_OK
        rows = read_csv(tmp_path / "o" / "sweep.csv")
        assert list(rows[0]) == ["param", "MoI", "IPR", "label"]
        assert rows[0]["label"] == "TwoPeak" and rows[-1]["label"] == "SinglePeak"
        crit = {r["method"]: r for r in read_csv(tmp_path / "o" / "critical.csv")}
        assert set(crit) == {"Human", "MoI", "IPR"}
        assert all(r["critical_value"] for r in crit.values())
        assert (tmp_path / "o" / "sweep.svg").exists()

    def test_single_point_grid(self, tmp_path):
        cfg = write(tmp_path, "n_t: 30\nsweep:\n  n_points: 1\n")
        assert run(cfg, tmp_path / "o", command=("sweep",)) == EXIT_FAILED
        crit = {r["method"]: r for r in read_csv(tmp_path / "o" / "critical.csv")}
        assert "RegimeCoverageError" in crit["Human"]["error"]
        assert all(r["critical_value"] == "" for r in crit.values())

    def test_replicates_thread_independent(self, tmp_path):
        cfg = write(tmp_path, "n_t: 40\nsweep:\n  n_points: 20\n  replicates: 3\n")
        run(cfg, tmp_path / "a", "--threads", "1", "--plots", "off", command=("sweep",))
        run(cfg, tmp_path / "b", "--threads", "3", "--plots", "off", command=("sweep",))
        for name in ("sweep.csv", "critical.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("ml")
    cfg = write(root, ML)
    code = run(cfg, root / "o", command=("ml", "train"))
    return root, cfg, code


class TestMl:
    def test_train(self, trained):
        root, _, code = trained
        assert code == EXIT_OK
        report = {r["classifier"]: r for r in read_csv(root / "o" / "train_report.csv")}
        assert set(report) == {"svm", "mlp"}
        assert float(report["svm"]["holdout_accuracy"]) >= 0.9
        assert report["mlp"]["normalization"] == "max" and report["svm"]["normalization"] == "sum"
        assert (root / "o" / "model_svm.json").exists() and (root / "o" / "model_mlp.json").exists()

    def test_scan(self, trained):
        root, cfg, _ = trained
        assert run(cfg, root / "o", command=("ml", "scan")) == EXIT_OK
        rows = read_csv(root / "o" / "critical.csv")
        assert [(r["classifier"], r["rule"]) for r in rows] == [
            ("svm", "crossing"), ("svm", "first_below"), ("mlp", "crossing"), ("mlp", "first_below"),
        ]
        assert [r["default"] for r in rows] == ["true", "false", "false", "true"]
        curve = read_csv(root / "o" / "confusion_svm.csv")
        assert list(curve[0]) == ["param", "p_delocalized"] and len(curve) == 30
        assert (root / "o" / "confusion_mlp.svg").exists()

    def test_scan_without_models(self, tmp_path):
        cfg = write(tmp_path, ML)
        assert run(cfg, tmp_path / "empty", command=("ml", "scan")) == EXIT_CONFIG

    def test_regions(self, tmp_path):
        cfg = write(tmp_path, ML + "  classifiers: [svm]\n")
        code = run(cfg, tmp_path / "o", "--plots", "off", command=("ml", "regions"))
        assert code in (EXIT_OK, 4)
        rows = {r["region"]: r for r in read_csv(tmp_path / "o" / "regions.csv")}
        assert list(rows) == ["all", "1", "2", "3"]
        assert int(rows["all"]["feature_length"]) == 61
        assert int(rows["2"]["feature_length"]) == 29
        assert rows["1"]["feature_length"] == rows["3"]["feature_length"]

    def test_samplesize(self, tmp_path):
        cfg = write(tmp_path, ML + "  classifiers: [svm]\n")
        run(cfg, tmp_path / "a", command=("ml", "samplesize"))
        run(cfg, tmp_path / "b", command=("ml", "samplesize"))
        rows = read_csv(tmp_path / "a" / "samplesize.csv")
        assert [(r["size"], r["repetition"]) for r in rows] == [("40", "0"), ("40", "1"), ("80", "0"), ("80", "1")]
        assert (tmp_path / "a" / "samplesize.csv").read_bytes() == (tmp_path / "b" / "samplesize.csv").read_bytes()
        assert (tmp_path / "a" / "samplesize.svg").exists()


class TestScaling:
    def test_outputs_and_thread_independence(self, tmp_path):
        cfg = write(tmp_path, SCALING)
        assert run(cfg, tmp_path / "a", "--threads", "1", command=("scaling",)) == EXIT_OK
        assert run(cfg, tmp_path / "b", "--threads", "4", command=("scaling",)) == EXIT_OK
        for name in ("criticals.csv", "replicates.csv", "exponents.csv", "scaling_discrete_angle.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
        crit = read_csv(tmp_path / "a" / "criticals.csv")
        assert [(r["method"], r["N"]) for r in crit] == [(m, n) for m in ("MoI", "IPR") for n in ("30", "40", "50")]
        exps = read_csv(tmp_path / "a" / "exponents.csv")
        assert [r["method"] for r in exps] == ["MoI", "IPR"]
        assert all(r["exponent"] and r["reliable"] == "true" for r in exps)

    def test_two_sizes_fail(self, tmp_path):
        cfg = write(tmp_path, "sweep:\n  n_points: 20\nscaling:\n  n_values: [30, 40]\n  methods: [IPR]\n  replicates: 1\n")
        assert run(cfg, tmp_path / "o", "--plots", "off", command=("scaling",)) == EXIT_FAILED
        exps = read_csv(tmp_path / "o" / "exponents.csv")
        assert "InsufficientDataError" in exps[0]["error"]
        assert exps[0]["exponent"] == ""

    def test_no_randomness_fails(self, tmp_path):
        cfg = write(tmp_path, "scaling:\n  n_values: [10, 20, 30]\n  methods: [MoI]\n  model_kinds: [none]\n  replicates: 1\n")
        assert run(cfg, tmp_path / "o", "--plots", "off", command=("scaling",)) == EXIT_FAILED
        exps = read_csv(tmp_path / "o" / "exponents.csv")
        assert exps[0]["reliable"] == "false"
