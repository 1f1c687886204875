"""Test package for spiketsa."""
