"""Tests for leaky integrate-and-fire dynamics."""

import unittest

import numpy as np

from spiketsa.errors import ConfigError, ShapeError
from spiketsa.lif import (
    LifParams,
    LifState,
    SpikeTensor,
    lif_sequence,
    lif_step,
    pulse_accumulate,
    recurrent_spike_sequence,
    spike_sequence,
    surrogate_grad,
)
from spiketsa.numerics import Parameter, Tape, Tensor


class TestLifStep(unittest.TestCase):
    """Single membrane updates."""

    def setUp(self):
        """Set up test fixtures."""
        self.params = LifParams(tau=2.0, v_rest=0.0, v_th=1.0, v_reset=0.0)

    def step(self, v, current):
        """Advance one neuron one step."""
        state, spikes = lif_step(LifState(np.array([v])), np.array([current]), self.params)
        return state.v[0], spikes.value[0]

    def test_rest_stays_at_rest(self):
        """Test a resting neuron with no input."""
        self.assertEqual(self.step(0.0, 0.0), (0.0, 0.0))

    def test_subthreshold_update(self):
        """Test a subthreshold membrane update."""
        v, spike = self.step(0.5, 1.0)
        self.assertAlmostEqual(v, 0.75, places=15)
        self.assertEqual(spike, 0.0)

    def test_spike_and_reset(self):
        """Test crossing threshold fires and resets."""
        v, spike = self.step(0.9, 1.5)
        self.assertEqual(spike, 1.0)
        self.assertEqual(v, 0.0)

    def test_threshold_is_inclusive(self):
        """Test reaching the threshold exactly fires."""
        v, spike = self.step(0.0, 2.0)
        self.assertEqual(spike, 1.0)

    def test_shape_mismatch(self):
        """Test state and current shapes must match."""
        with self.assertRaises(ShapeError):
            lif_step(LifState(np.zeros(3)), np.zeros(2), self.params)

    def test_zero_input_decay(self):
        """Test geometric decay toward rest without input."""
        params = LifParams(tau=3.0, v_rest=-0.2, v_th=1.0, v_reset=-0.2)
        v0 = 0.8
        state = LifState(np.array([v0]))
        for k in range(1, 101):
            state, spikes = lif_step(state, np.zeros(1), params)
            self.assertEqual(spikes.value[0], 0.0)
            expected = params.v_rest + (v0 - params.v_rest) * (1 - 1 / params.tau) ** k
            self.assertLessEqual(abs(state.v[0] - expected), 1e-12)


class TestLifParams(unittest.TestCase):
    """Parameter validation."""

    def test_defaults(self):
        """Test default neuron parameters."""
        params = LifParams()
        self.assertEqual((params.tau, params.v_rest, params.v_th, params.v_reset, params.surrogate_slope),
                         (2.0, 0.0, 1.0, 0.0, 2.0))

    def test_invalid(self):
        """Test invalid parameter combinations."""
        with self.assertRaises(ConfigError):
            LifParams(tau=1.0)
        with self.assertRaises(ConfigError):
            LifParams(v_rest=1.0, v_th=1.0)
        with self.assertRaises(ConfigError):
            LifParams(v_reset=1.5)
        with self.assertRaises(ConfigError):
            LifParams(surrogate_slope=0.0)


class TestLifSequence(unittest.TestCase):
    """Spike trains over several time steps."""

    def setUp(self):
        """Set up test fixtures."""
        self.params = LifParams(tau=2.0, v_rest=0.0, v_th=1.0, v_reset=0.0)

    def test_zero_currents(self):
        """Test zero drive never fires."""
        spikes = lif_sequence(np.zeros((6, 2, 3)), self.params)
        self.assertIsInstance(spikes, SpikeTensor)
        self.assertFalse(np.any(spikes.numpy()))

    def test_constant_unit_current_never_spikes(self):
        """Test unit drive only approaches threshold."""
        spikes = lif_sequence(np.ones((10, 1)), self.params)
        self.assertFalse(np.any(spikes.numpy()))

    def test_constant_double_current_spikes_every_step(self):
        """Test double drive fires every step."""
        spikes = lif_sequence(np.full((10, 1), 2.0), self.params)
        np.testing.assert_array_equal(spikes.numpy()[:, 0], np.ones(10))

    def test_empty_time_axis(self):
        """Test an empty time axis."""
        with self.assertRaises(ShapeError):
            lif_sequence(np.zeros((0, 3)), self.params)

    def test_layout_tag(self):
        """Test the layout tag and its rank check."""
        spikes = lif_sequence(np.zeros((2, 1, 3, 4)), self.params, layout="TBCL")
        self.assertEqual(spikes.layout, "TBCL")
        with self.assertRaises(ShapeError):
            lif_sequence(np.zeros((2, 1, 3)), self.params, layout="TBCHW")

    def test_equals_repeated_steps(self):
        """Test the sequence matches stepping by hand."""
        params = LifParams(tau=1.7, v_rest=-0.1, v_th=0.6, v_reset=-0.3)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            currents = rng.standard_normal((12, 3, 4)) * 1.5
            train = lif_sequence(currents, params).numpy()
            state = LifState.at_rest((3, 4), params)
            for t in range(12):
                state, spikes = lif_step(state, currents[t], params)
                np.testing.assert_array_equal(train[t], spikes.value)

    def test_spike_implies_reset(self):
        """Test every spike follows a threshold crossing and resets."""
        rng = np.random.default_rng(3)
        currents = rng.uniform(0, 3, size=(20, 8))
        state = LifState.at_rest((8,), self.params)
        for t in range(20):
            pre = state.v + (currents[t] - (state.v - self.params.v_rest)) / self.params.tau
            state, spikes = lif_step(state, currents[t], self.params)
            fired = spikes.value == 1.0
            self.assertTrue(np.all(pre[fired] >= self.params.v_th))
            self.assertTrue(np.all(state.v[fired] == self.params.v_reset))
            self.assertTrue(np.all(np.isin(spikes.value, (0.0, 1.0))))

    def test_higher_threshold_never_adds_spikes(self):
        """Test spike counts fall as the threshold rises."""
        for seed in range(20):
            currents = np.random.default_rng(seed).uniform(-1, 3, size=(16, 10))
            counts = [lif_sequence(currents, LifParams(v_th=th)).numpy().sum() for th in (0.25, 0.5, 1.0, 2.0)]
            self.assertEqual(counts, sorted(counts, reverse=True))

    def test_initial_state_shape(self):
        """Test an initial state of the wrong shape."""
        with self.assertRaises(ShapeError):
            spike_sequence(Tensor(np.zeros((3, 4))), self.params, LifState(np.zeros(5)))


class TestSurrogate(unittest.TestCase):
    """Surrogate derivative used on the backward pass."""

    def test_values(self):
        """Test surrogate values at known points."""
        self.assertEqual(surrogate_grad(0.0, 2.0), 1.0)
        self.assertAlmostEqual(surrogate_grad(1.0, 1.0), 0.25)

    def test_shape_properties(self):
        """Test symmetry, peak and decay."""
        x = np.linspace(0, 5, 50)
        values = surrogate_grad(x, 2.0)
        np.testing.assert_array_equal(values, surrogate_grad(-x, 2.0))
        self.assertTrue(np.all(values <= 1.0))
        self.assertTrue(np.all(np.diff(values) < 0))

    def test_slope_must_be_positive(self):
        """Test a zero slope is rejected."""
        with self.assertRaises(ConfigError):
            surrogate_grad(0.0, 0.0)

    def test_single_step_backward(self):
        """Test the single-step gradient by hand."""
        params = LifParams(tau=2.0, surrogate_slope=2.0)
        current = Parameter(np.array([[0.4, 1.6, 3.0]]), "current")
        with Tape() as tape:
            spikes = spike_sequence(current, params)
        grads = tape.backward(spikes, np.ones((1, 3)))
        v_pre = current.value[0] / params.tau
        np.testing.assert_allclose(grads[current][0], surrogate_grad(v_pre - 1.0, 2.0) / params.tau)

    def test_backward_through_time_is_finite(self):
        """Test gradients through recurrent steps are finite and non-zero."""
        rng = np.random.default_rng(4)
        drive = Parameter(rng.standard_normal((6, 2, 5)) + 0.8, "drive")
        feedback = Parameter(rng.standard_normal((5, 5)) * 0.3, "feedback")
        with Tape() as tape:
            spikes = recurrent_spike_sequence(drive, feedback, LifParams())
        grads = tape.backward(spikes, rng.standard_normal(spikes.shape))
        for param in (drive, feedback):
            self.assertTrue(np.all(np.isfinite(grads[param])))
            self.assertTrue(np.any(grads[param] != 0))

    def test_zero_feedback_matches_feed_forward(self):
        """Test zero feedback matches the feed-forward sequence."""
        drive = np.random.default_rng(5).standard_normal((7, 3, 4)) * 2
        recurrent = recurrent_spike_sequence(Tensor(drive), Tensor(np.zeros((4, 4))), LifParams())
        np.testing.assert_array_equal(recurrent.value, spike_sequence(Tensor(drive), LifParams()).value)


class TestPulseAccumulate(unittest.TestCase):
    """Spike counts, rates and the population trace."""

    def test_counts_and_rates(self):
        """Test counts, rates and trace of one train."""
        stats = pulse_accumulate(SpikeTensor(np.array([1.0, 0.0, 1.0, 0.0]).reshape(4, 1)))
        self.assertEqual(stats.counts[0], 2.0)
        self.assertEqual(stats.rates[0], 0.5)
        np.testing.assert_array_equal(stats.trace, [1, 0, 1, 0])

    def test_extremes(self):
        """Test silent and saturated trains."""
        self.assertFalse(np.any(pulse_accumulate(np.zeros((5, 3))).rates))
        np.testing.assert_array_equal(pulse_accumulate(np.ones((5, 3))).rates, np.ones(3))

    def test_rejects_non_binary(self):
        """Test non-binary spikes are rejected."""
        with self.assertRaises(ShapeError):
            SpikeTensor(np.array([[0.5]]))


if __name__ == "__main__":
    unittest.main()
