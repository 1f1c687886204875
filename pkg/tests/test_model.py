"""Tests for the end-to-end spiking fusion model."""

import unittest

import numpy as np

from spiketsa.data import batch_arrays, synth_multimodal
from spiketsa.errors import CheckpointError, ConfigError, ShapeError
from spiketsa.fusion import CLASSIFICATION, REGRESSION
from spiketsa.lif import LifParams
from spiketsa.model import TRACE_COMPONENTS, ModelConfig, SpikingFusionModel, wavelet_inputs
from spiketsa.numerics import Tape
from tests.test_setup import tiny_model_config


class TestModelConfig(unittest.TestCase):
    """Derived encoder and joint-space configurations."""

    def test_wavelet_extents(self):
        """Test encoder and joint widths after the wavelet step."""
        cfg = tiny_model_config()
        self.assertEqual(cfg.image_encoder_config().in_channels, 4)
        self.assertEqual((cfg.image_encoder_config().height, cfg.image_encoder_config().width), (4, 4))
        self.assertEqual(cfg.series_encoder_config().in_channels, 4)
        self.assertEqual(cfg.series_encoder_config().length, 2)
        joint = cfg.joint_config()
        self.assertEqual((joint.image_width, joint.series_width, joint.d_j), (2 * 4 * 2 * 2, 2 * 6 * 2, 5))

    def test_without_wavelet(self):
        """Test raw inputs go straight to the encoders."""
        cfg = tiny_model_config(use_wavelet=False)
        self.assertEqual(cfg.image_encoder_config().in_channels, 1)
        self.assertEqual(cfg.series_encoder_config().length, 8)

    def test_odd_series_length_is_padded(self):
        """Test odd lengths are padded before the transform."""
        cfg = tiny_model_config(length=10)
        self.assertEqual(cfg.series_encoder_config().length, 3)
        self.assertEqual(cfg.image_encoder_config().height, 5)

    def test_dict_round_trip(self):
        """Test serialization to a plain mapping."""
        cfg = tiny_model_config(lif=LifParams(tau=3.0))
        data = cfg.to_dict()
        self.assertEqual(data["lif"]["tau"], 3.0)
        self.assertIsInstance(data["image_size"], list)
        self.assertEqual(ModelConfig.from_dict(data), cfg)

    def test_validation(self):
        """Test invalid model settings."""
        with self.assertRaises(ConfigError):
            tiny_model_config(steps=0)
        with self.assertRaises(ConfigError):
            tiny_model_config(task="ranking")
        with self.assertRaises(ConfigError):
            tiny_model_config(gasf_channels=(1,))
        with self.assertRaises(ConfigError):
            tiny_model_config(length=2, image_stages=(4, 4))


class TestSpikingFusionModel(unittest.TestCase):
    """Forward passes, parameters and state."""

    def setUp(self):
        """Set up test fixtures."""
        self.samples = synth_multimodal(seed=0, n=6, length=8)
        self.images, self.series, self.labels = batch_arrays(self.samples, (0,))
        self.model = SpikingFusionModel(tiny_model_config(), seed=0)

    def test_forward_shapes(self):
        """Test intermediate and output shapes."""
        self.assertEqual(self.images.shape, (6, 1, 8, 8))
        result = self.model.run(self.images, self.series)
        self.assertEqual(result.image_spikes.shape, (4, 6, 4, 2, 2))
        self.assertEqual(result.series_spikes.shape, (4, 6, 6, 2))
        self.assertEqual(result.bundle.j_fusion.shape, (4, 6, 5))
        self.assertEqual(result.output.shape, (6, 2))

    def test_regression_output(self):
        """Test regression outputs and the probability guard."""
        model = SpikingFusionModel(tiny_model_config(task=REGRESSION, outputs=3), seed=1)
        out = model.predict(self.images, self.series)
        self.assertEqual(out.shape, (6, 3))
        with self.assertRaises(ConfigError):
            model.predict_proba(self.images, self.series)

    def test_predict_proba(self):
        """Test probabilities sum to one and agree with predict."""
        probs = self.model.predict_proba(self.images, self.series)
        self.assertEqual(probs.shape, (6, 2))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(self.model.predict(self.images, self.series), probs.argmax(axis=1))

    def test_deterministic_by_seed(self):
        """Test the same seed builds the same model."""
        first = SpikingFusionModel(tiny_model_config(), seed=4).forward(self.images, self.series).value
        second = SpikingFusionModel(tiny_model_config(), seed=4).forward(self.images, self.series).value
        np.testing.assert_array_equal(first, second)

    def test_parameter_names_unique(self):
        """Test parameter names are unique and ordered."""
        names = [p.name for p in self.model.parameters()]
        self.assertEqual(len(names), len(set(names)))
        self.assertEqual(list(self.model.state_dict()), names)

    def test_state_dict_round_trip(self):
        """Test loading another model's state reproduces its outputs."""
        other = SpikingFusionModel(tiny_model_config(), seed=9)
        other.load_state_dict(self.model.state_dict())
        np.testing.assert_array_equal(other.forward(self.images, self.series).value,
                                      self.model.forward(self.images, self.series).value)

    def test_load_state_dict_mismatch(self):
        """Test missing and misshapen tensors are refused."""
        state = self.model.state_dict()
        state.pop("head.out.bias")
        with self.assertRaises(CheckpointError):
            self.model.load_state_dict(state)
        # Test a tensor with the wrong shape
        state = self.model.state_dict()
        state["head.out.bias"] = np.zeros(7)
        with self.assertRaises(CheckpointError):
            self.model.load_state_dict(state)

    def test_input_checks(self):
        """Test mismatched batches and ranks."""
        with self.assertRaises(ShapeError):
            self.model.forward(self.images[:3], self.series)
        with self.assertRaises(ShapeError):
            self.model.forward(self.images[:, 0], self.series)

    def test_wavelet_inputs(self):
        """Test subband stacking of both modalities."""
        images, series = wavelet_inputs(self.images, self.series[:, :, :6])
        self.assertEqual(images.shape, (6, 4, 4, 4))
        self.assertEqual(series.shape, (6, 4, 2))

    def test_every_parameter_gets_a_gradient(self):
        """Test every parameter receives a finite gradient."""
        rng = np.random.default_rng(2)
        series = rng.standard_normal((4, 1, 8)) * 2
        images, _, _ = batch_arrays(synth_multimodal(seed=1, n=4, length=8), (0,))
        with Tape() as tape:
            output = self.model.forward(images, series)
        grads = tape.backward(output, rng.standard_normal(output.shape))
        for param in self.model.parameters():
            self.assertIn(param, grads, param.name)
            self.assertTrue(np.all(np.isfinite(grads[param])), param.name)

    def test_activation_rates(self):
        """Test per-neuron firing rates by component."""
        rates = self.model.activation_rates(self.images, self.series)
        self.assertEqual(sorted(rates), ["fused", "image_encoder", "series_encoder"])
        self.assertEqual(rates["image_encoder"].shape, (16,))
        self.assertEqual(rates["series_encoder"].shape, (12,))
        self.assertEqual(rates["fused"].shape, (5,))
        for values in rates.values():
            self.assertTrue(np.all((values >= 0) & (values <= 1)))

    def test_zero_model_is_silent(self):
        """Test zeroed parameters silence every layer."""
        for param in self.model.parameters():
            param.assign(np.zeros(param.shape))
        rates = self.model.activation_rates(self.images, self.series)
        for values in rates.values():
            self.assertFalse(np.any(values))
        self.assertFalse(np.any(self.model.forward(self.images, self.series).value))

    def test_trace_components(self):
        """Test every component yields one finite value per time step."""
        traces = self.model.probe_traces(self.images, self.series)
        self.assertEqual(tuple(traces), TRACE_COMPONENTS)
        for name, trace in traces.items():
            self.assertEqual(trace.shape, (4,), name)
            self.assertTrue(np.all(np.isfinite(trace)), name)
        # Test encoder traces are firing fractions
        for name in ("image_encoder", "series_encoder"):
            self.assertTrue(np.all((traces[name] >= 0) & (traces[name] <= 1)), name)

    def test_silent_model_has_flat_traces(self):
        """Test a model with zeroed parameters records all-zero traces."""
        for param in self.model.parameters():
            param.assign(np.zeros(param.shape))
        for name, trace in self.model.probe_traces(self.images, self.series).items():
            np.testing.assert_array_equal(trace, np.zeros(4), err_msg=name)


class TestTaskKinds(unittest.TestCase):
    def test_task_property(self):
        """Test the task derived from the configuration."""
        model = SpikingFusionModel(tiny_model_config(outputs=3))
        self.assertEqual(model.task.kind, CLASSIFICATION)
        self.assertEqual(model.task.outputs, 3)


if __name__ == "__main__":
    unittest.main()
