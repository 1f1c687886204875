"""Tests for the command-line interface and its exit codes."""

import contextlib
import io
import os
import unittest
from dataclasses import replace
from unittest import mock

import numpy as np
import pandas as pd
import yaml

from spiketsa.__main__ import EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL, EXIT_OK, main
from spiketsa.cli import (
    CHECKPOINT_FILE,
    HISTORY_FILE,
    METRICS_FILE,
    PREDICTIONS_FILE,
    SPECTRUM_FILE,
    heatmap_file,
    restore,
    spectrum_frame,
)
from spiketsa.data import synth_multimodal, synth_series, write_series_csv
from spiketsa.errors import ConfigError, DataError
from spiketsa.model import TRACE_COMPONENTS
from tests.test_setup import test_data_manager, tiny_run_config


def run(argv):
    """Run the CLI with stdout and stderr captured."""
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
        code = main(argv)
    return code, stdout.getvalue(), stderr.getvalue()


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


class TestCommands(unittest.TestCase):
    """train, eval, predict and inspect on the synthetic classification task."""

    @classmethod
    def setUpClass(cls):
        """Train one small model shared by every command test."""
        cls.test_data_dir = test_data_manager.setup_test_data()
        cls.out = test_data_manager.path("run")
        cls.config = test_data_manager.write_text(test_data_manager.path("run.yaml"),
                                                  yaml.safe_dump(tiny_run_config(out=cls.out)))
        code, _, stderr = run(["train", "--config", cls.config])
        assert code == EXIT_OK, stderr
        cls.checkpoint = os.path.join(cls.out, CHECKPOINT_FILE)

    @classmethod
    def tearDownClass(cls):
        """Clean up test data."""
        test_data_manager.cleanup()

    def test_train_writes_artifacts(self):
        """Test train writes the checkpoint and one history row per epoch."""
        history = pd.read_csv(os.path.join(self.out, HISTORY_FILE))
        self.assertEqual(list(history.columns),
                         ["epoch", "train_loss", "val_loss", "accuracy", "f1", "precision", "recall"])
        self.assertEqual(history["epoch"].tolist(), [1, 2])
        self.assertTrue(os.path.exists(self.checkpoint))

    def test_train_is_reproducible(self):
        """Test retraining with the same configuration gives byte-identical artifacts."""
        before = read_bytes(self.checkpoint)
        history = read_bytes(os.path.join(self.out, HISTORY_FILE))
        self.assertEqual(run(["train", "--config", self.config])[0], EXIT_OK)
        self.assertEqual(read_bytes(self.checkpoint), before)
        self.assertEqual(read_bytes(os.path.join(self.out, HISTORY_FILE)), history)

    def test_failed_train_leaves_no_artifacts(self):
        """Test a write failure after training leaves neither the checkpoint nor the history."""
        out = test_data_manager.path("interrupted")
        config = test_data_manager.write_text(test_data_manager.path("interrupted.yaml"),
                                              yaml.safe_dump(tiny_run_config(out=out)))
        with mock.patch("spiketsa.cli.write_csv", side_effect=OSError("disk full")):
            code, _, stderr = run(["train", "--config", config])
        self.assertEqual(code, EXIT_INTERNAL)
        self.assertIn("disk full", stderr)
        self.assertEqual(os.listdir(out), [])

    def test_eval(self):
        """Test eval prints a report and writes classification metrics in [0, 1]."""
        out = test_data_manager.path("eval")
        code, stdout, _ = run(["eval", "--checkpoint", self.checkpoint, "--out", out])
        self.assertEqual(code, EXIT_OK)
        self.assertIn("accuracy", stdout)
        metrics = pd.read_csv(os.path.join(out, METRICS_FILE))
        self.assertEqual(list(metrics.columns), ["accuracy", "f1", "precision", "recall"])
        self.assertEqual(len(metrics), 1)
        self.assertTrue(((metrics >= 0) & (metrics <= 1)).all().all())

    def test_seed_is_fixed_by_checkpoint(self):
        """Test eval and inspect refuse a seed that would redraw the data split."""
        code, _, stderr = run(["eval", "--checkpoint", self.checkpoint, "--seed", "5"])
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("--seed", stderr)
        self.assertEqual(run(["inspect", "heatmap", "--checkpoint", self.checkpoint, "--seed", "5"])[0],
                         EXIT_CONFIG)

    def test_restore_keeps_stored_split(self):
        """Test restore accepts the stored seed but rejects one that changes the split."""
        _, cfg, _, _ = restore(self.checkpoint, {"seed": 0, "out": test_data_manager.path("elsewhere")})
        self.assertEqual(cfg.seed, 0)
        with self.assertRaises(ConfigError) as ctx:
            restore(self.checkpoint, {"seed": 5})
        self.assertIn("seed", str(ctx.exception))

    def test_predict_probabilities(self):
        """Test predict writes one probability row per input window."""
        windows = test_data_manager.path("windows.csv")
        test_data_manager.write_beats(windows, synth_multimodal(seed=11, n=5, length=8), labeled=False)
        output = test_data_manager.path("predicted.csv")
        self.assertEqual(run(["predict", "--checkpoint", self.checkpoint, "--input", windows,
                              "--output", output])[0], EXIT_OK)
        frame = pd.read_csv(output)
        self.assertEqual(list(frame.columns), ["label", "p_0", "p_1"])
        self.assertEqual(len(frame), 5)
        np.testing.assert_allclose(frame[["p_0", "p_1"]].sum(axis=1), 1.0, atol=1e-12)
        # Label is the most probable class
        np.testing.assert_array_equal(frame["label"], frame[["p_0", "p_1"]].to_numpy().argmax(axis=1))

    def test_predict_rejects_wrong_window_length(self):
        """Test windows longer than the model's lookback are a data error."""
        windows = test_data_manager.path("long.csv")
        test_data_manager.write_beats(windows, synth_multimodal(seed=11, n=2, length=16), labeled=False)
        self.assertEqual(run(["predict", "--checkpoint", self.checkpoint, "--input", windows])[0], EXIT_DATA)

    def test_inspect_heatmap(self):
        """Test the heatmap has one column per component with rates in [0, 1]."""
        out = test_data_manager.path("inspect")
        self.assertEqual(run(["inspect", "heatmap", "--checkpoint", self.checkpoint, "--out", out])[0], EXIT_OK)
        frame = pd.read_csv(os.path.join(out, heatmap_file(True)))
        self.assertEqual(list(frame.columns), ["image_encoder", "series_encoder", "fused"])
        values = frame.to_numpy()
        values = values[~np.isnan(values)]
        self.assertTrue(np.all((values >= 0) & (values <= 1)))

    def test_inspect_spectrum(self):
        """Test the spectrum has a row per component and epoch, encoders next to the fused output."""
        out = test_data_manager.path("spectrum")
        self.assertEqual(run(["inspect", "spectrum", "--checkpoint", self.checkpoint, "--out", out])[0], EXIT_OK)
        frame = pd.read_csv(os.path.join(out, SPECTRUM_FILE))
        self.assertEqual(list(frame.columns), ["component", "epoch", "bin_0", "bin_1", "bin_2", "bin_3"])
        self.assertEqual(sorted(set(frame["component"])), sorted(TRACE_COMPONENTS))
        for component in TRACE_COMPONENTS:
            self.assertEqual(frame.loc[frame["component"] == component, "epoch"].tolist(), [1, 2])

        # Encoder traces are firing fractions over 4 steps, so the DC bin is at most 4
        encoders = frame[frame["component"] != "fused"]
        self.assertTrue(np.all((encoders["bin_0"] >= 0) & (encoders["bin_0"] <= 4 + 1e-12)))

    def test_without_wavelet(self):
        """Test a --no-wavelet run writes its own heatmap file."""
        out = test_data_manager.path("plain")
        self.assertEqual(run(["train", "--config", self.config, "--no-wavelet", "--out", out])[0], EXIT_OK)
        checkpoint = os.path.join(out, CHECKPOINT_FILE)
        self.assertEqual(run(["inspect", "heatmap", "--checkpoint", checkpoint])[0], EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(out, heatmap_file(False))))
        self.assertFalse(os.path.exists(os.path.join(out, heatmap_file(True))))
        self.assertNotEqual(heatmap_file(False), heatmap_file(True))


class TestExitCodes(unittest.TestCase):
    """Failures map to distinct exit codes before any output is written."""

    @classmethod
    def setUpClass(cls):
        """Set up test data once for all tests."""
        cls.test_data_dir = test_data_manager.setup_test_data()

    @classmethod
    def tearDownClass(cls):
        """Clean up test data."""
        test_data_manager.cleanup()

    def test_unknown_config_key(self):
        """Test a misspelled key is a configuration error and nothing is written."""
        out = test_data_manager.path("never")
        config = test_data_manager.write_text(test_data_manager.path("typo.yaml"),
                                              yaml.safe_dump(tiny_run_config(epoch=2, out=out)))
        code, _, stderr = run(["train", "--config", config])
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("'epoch'", stderr)
        self.assertFalse(os.path.exists(out))

    def test_usage_errors(self):
        """Test bad command lines exit with the configuration code."""
        self.assertEqual(run([])[0], EXIT_CONFIG)
        self.assertEqual(run(["fit"])[0], EXIT_CONFIG)
        self.assertEqual(run(["eval"])[0], EXIT_CONFIG)
        self.assertEqual(run(["train", "--config", test_data_manager.path("absent.yaml")])[0], EXIT_CONFIG)
        # --config belongs to train
        self.assertEqual(run(["eval", "--checkpoint", "x.ckpt", "--config", "run.yaml"])[0], EXIT_CONFIG)

    def test_missing_checkpoint(self):
        """Test a missing checkpoint is a data error."""
        code, _, stderr = run(["eval", "--checkpoint", test_data_manager.path("absent.ckpt")])
        self.assertEqual(code, EXIT_DATA)
        self.assertIn("Data error", stderr)

    def test_corrupt_checkpoint(self):
        """Test a file that is not a checkpoint is a data error."""
        path = test_data_manager.write_text(test_data_manager.path("bad.ckpt"), "not a checkpoint")
        self.assertEqual(run(["inspect", "heatmap", "--checkpoint", path])[0], EXIT_DATA)

    def test_missing_data_file(self):
        """Test a missing series CSV is a data error."""
        config = test_data_manager.write_text(
            test_data_manager.path("series.yaml"),
            yaml.safe_dump(tiny_run_config(source="series", data_path=test_data_manager.path("absent.csv"))))
        self.assertEqual(run(["train", "--config", config])[0], EXIT_DATA)


class TestForecastCommands(unittest.TestCase):
    """Regression on a timestamped series CSV."""

    @classmethod
    def setUpClass(cls):
        """Train a one-epoch forecaster on the series fixture."""
        cls.test_data_dir = test_data_manager.setup_test_data()
        cls.out = test_data_manager.path("forecast")
        mapping = tiny_run_config(task="regression", source="series", data_path=test_data_manager.path("ett.csv"),
                                  epochs=1, batch_size=32, out=cls.out)
        config = test_data_manager.write_text(test_data_manager.path("forecast.yaml"), yaml.safe_dump(mapping))
        code, _, stderr = run(["train", "--config", config])
        assert code == EXIT_OK, stderr
        cls.checkpoint = os.path.join(cls.out, CHECKPOINT_FILE)

    @classmethod
    def tearDownClass(cls):
        """Clean up test data."""
        test_data_manager.cleanup()

    def test_predict_one_row_per_window(self):
        """Test predict forecasts every complete lookback window of the file."""
        self.assertEqual(run(["predict", "--checkpoint", self.checkpoint,
                              "--input", test_data_manager.path("ett.csv")])[0], EXIT_OK)
        frame = pd.read_csv(os.path.join(self.out, PREDICTIONS_FILE))
        self.assertEqual(list(frame.columns), ["h1", "h2", "h3", "h4"])
        self.assertEqual(len(frame), 120 - 8 + 1)
        self.assertTrue(np.all(np.isfinite(frame.to_numpy())))

    def test_eval_reports_regression_metrics(self):
        """Test eval reports regression metrics and the last-value baseline."""
        code, stdout, _ = run(["eval", "--checkpoint", self.checkpoint, "--split", "val"])
        self.assertEqual(code, EXIT_OK)
        self.assertIn("naive_mse", stdout)
        metrics = pd.read_csv(os.path.join(self.out, METRICS_FILE))
        self.assertEqual(list(metrics.columns), ["mse", "mae"])


class TestSeriesClassification(unittest.TestCase):
    """Classification on a labeled series CSV."""

    @classmethod
    def setUpClass(cls):
        """Write labeled and unlabeled copies of one series and train on the labeled one."""
        cls.test_data_dir = test_data_manager.setup_test_data()
        dataset = synth_series(seed=5, rows=80)
        target = dataset.values[:, dataset.target_index]
        cls.labeled = test_data_manager.path("labeled.csv")
        cls.unlabeled = test_data_manager.path("unlabeled.csv")
        write_series_csv(replace(dataset, labels=(target > np.median(target)).astype(np.int64)), cls.labeled)
        write_series_csv(dataset, cls.unlabeled)
        cls.out = test_data_manager.path("series_classes")
        mapping = tiny_run_config(source="series", data_path=cls.labeled, label_column="label", epochs=1,
                                  out=cls.out)
        config = test_data_manager.write_text(test_data_manager.path("series_classes.yaml"),
                                              yaml.safe_dump(mapping))
        code, _, stderr = run(["train", "--config", config])
        assert code == EXIT_OK, stderr
        cls.checkpoint = os.path.join(cls.out, CHECKPOINT_FILE)

    @classmethod
    def tearDownClass(cls):
        """Clean up test data."""
        test_data_manager.cleanup()

    def test_predict_without_labels(self):
        """Test predict accepts a series file that has no label column."""
        self.assertNotIn("label", pd.read_csv(self.unlabeled, nrows=1).columns)
        output = test_data_manager.path("unlabeled_predictions.csv")
        code, _, stderr = run(["predict", "--checkpoint", self.checkpoint, "--input", self.unlabeled,
                               "--output", output])
        self.assertEqual(code, EXIT_OK, stderr)
        frame = pd.read_csv(output)
        self.assertEqual(list(frame.columns), ["label", "p_0", "p_1"])
        self.assertEqual(len(frame), 80 - 8 + 1)

    def test_predict_ignores_label_column(self):
        """Test a label column in the prediction input is not read as a channel."""
        output = test_data_manager.path("labeled_predictions.csv")
        self.assertEqual(run(["predict", "--checkpoint", self.checkpoint, "--input", self.labeled,
                              "--output", output])[0], EXIT_OK)
        self.assertEqual(len(pd.read_csv(output)), 80 - 8 + 1)


class TestSpectrumFrame(unittest.TestCase):
    """Spectrum rows from stored traces."""

    def test_constant_trace_has_only_dc(self):
        """Test a constant trace puts all amplitude in bin 0."""
        frame = spectrum_frame({"fused": [[1.0, 1.0, 1.0, 1.0]]})
        self.assertEqual(frame["component"].tolist(), ["fused"])
        np.testing.assert_allclose(frame.iloc[0, 2:].to_numpy(dtype=float), [4.0, 0.0, 0.0, 0.0], atol=1e-12)

    def test_components_in_order(self):
        """Test components are stacked in the order given and empty ones skipped."""
        frame = spectrum_frame({"image_encoder": [[0.5, 0.0], [0.0, 0.5]], "series_encoder": [],
                                "fused": [[1.0, -1.0]]})
        self.assertEqual(frame["component"].tolist(), ["image_encoder", "image_encoder", "fused"])
        self.assertEqual(frame["epoch"].tolist(), [1, 2, 1])
        np.testing.assert_allclose(frame.loc[2, ["bin_0", "bin_1"]].to_numpy(dtype=float), [0.0, 2.0])

    def test_no_traces(self):
        """Test a checkpoint without traces is a data error."""
        with self.assertRaises(DataError):
            spectrum_frame({name: [] for name in TRACE_COMPONENTS})


if __name__ == "__main__":
    unittest.main()
