#!/usr/bin/env python3
"""Example usage of the spiketsa library."""

import numpy as np

import spiketsa


def demonstrate_building_blocks():
    """Show the wavelet, LIF and FFT pieces on hand-sized inputs."""
    print("=== spiketsa Demo ===\n")

    bands = spiketsa.haar_dwt2d([[1.0, 2.0], [3.0, 4.0]])
    print("Haar subbands of [[1, 2], [3, 4]]:")
    for name, band in zip(("LL", "LH", "HL", "HH"), bands.bands()):
        print(f"  {name}: {band.item():+.1f}")

    currents = np.full((6, 1), 2.0)
    spikes = spiketsa.lif_sequence(currents, spiketsa.LifParams())
    print(f"\nLIF spikes for a constant current of 2.0: {spikes.numpy()[:, 0].astype(int).tolist()}")

    spectrum = spiketsa.fft1d([1.0, 0.0, 0.0, 0.0])
    print(f"FFT of an impulse: {np.round(spectrum.real, 3).tolist()}")


def demonstrate_training():
    """Train a small model on the synthetic two-frequency task."""
    print("\n=== Training Example ===")
    samples = spiketsa.synth_multimodal(seed=0, n=96, classes=2, length=16)
    train, val, test = spiketsa.split(samples, seed=0, mode="shuffled")

    cfg = spiketsa.ModelConfig(task="classification", outputs=2, image_channels=1, image_size=(16, 16),
                               series_channels=1, series_length=16, steps=4, image_stages=(8,),
                               series_hidden=(16,), d_j=16, gasf_channels=(0,))
    model = spiketsa.SpikingFusionModel(cfg, seed=0)
    history = spiketsa.train_loop(model, (train, val),
                                  spiketsa.TrainConfig(epochs=5, batch_size=16, lr=0.01, steps=4))
    for row in history:
        print(f"  epoch {row['epoch']}: train_loss={row['train_loss']:.4f} accuracy={row['accuracy']:.3f}")

    result = spiketsa.evaluate(model, test)
    print(f"Test accuracy: {result.metrics['accuracy']:.3f}")

    print("\n=== Error Handling ===")
    try:
        spiketsa.ModelConfig(task="ranking", outputs=2, image_channels=1, image_size=(16, 16),
                             series_channels=1, series_length=16)
    except spiketsa.ConfigError as e:
        print(f"  ✗ {e}")

    print("\n=== Command Line ===")
    print("  python -m spiketsa train --config run.yaml --out runs/demo")
    print("  python -m spiketsa eval --checkpoint runs/demo/model.ckpt")
    print("  python -m spiketsa inspect heatmap --checkpoint runs/demo/model.ckpt")


if __name__ == "__main__":
    demonstrate_building_blocks()
    demonstrate_training()
