"""Rate coding of pixel intensities into binary input spike rasters."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

DEFAULT_NUM_STEPS = 250
# 63.75 Hz peak rate at 1 ms steps
DEFAULT_RATE_SCALE = 0.06375


@dataclass
class SpikeTrain:
    """Binary raster indexed ``[input_index, timestep]``."""

    spikes: np.ndarray

    def __post_init__(self):
        spikes = np.asarray(self.spikes)
        if spikes.ndim != 2:
            raise ValueError(f"spike raster must be 2-D, got shape {spikes.shape}")
        if spikes.dtype != np.bool_:
            if spikes.size and not np.isin(spikes, (0, 1)).all():
                raise ValueError("spike raster entries must be 0 or 1")
            spikes = spikes.astype(np.bool_)
        self.spikes = spikes

    @property
    def num_inputs(self) -> int:
        return self.spikes.shape[0]

    @property
    def num_steps(self) -> int:
        return self.spikes.shape[1]

    def counts(self) -> np.ndarray:
        return self.spikes.sum(axis=1)


def sample_rng(seed, index):
    """Independent generator for sample ``index`` under a run seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))


def poisson_encode(image, num_steps=DEFAULT_NUM_STEPS, rate_scale=DEFAULT_RATE_SCALE, rng=None) -> SpikeTrain:
    """Bernoulli-per-step approximation of a Poisson rate code.

    Each input spikes at each step independently with probability
    ``intensity * rate_scale``.
    """
    if rng is None:
        raise ValueError("poisson_encode requires a seeded random generator")
    image = np.asarray(image, dtype=np.float64).ravel()
    bad = np.flatnonzero(~((image >= 0.0) & (image <= 1.0)))
    if bad.size:
        raise ValueError(f"pixel intensity {image[bad[0]]!r} at index {int(bad[0])} is outside [0, 1]")
    if not 0.0 <= rate_scale <= 1.0:
        raise ValueError(f"rate_scale must lie in [0, 1], got {rate_scale}")
    if num_steps < 0:
        raise ValueError("num_steps must be non-negative")
    p = image * rate_scale
    draws = rng.random((image.size, int(num_steps)))
    return SpikeTrain(draws < p[:, None])


def normalize_pixels(images) -> np.ndarray:
    """Map raw byte intensities to [0, 1] and flatten each image."""
    images = np.asarray(images)
    return images.reshape(len(images), -1).astype(np.float64) / 255.0


class EncodedSamples(Sequence):
    """Lazily rate-coded view of a labelled image set.

    Sample ``i`` is always encoded with the generator ``sample_rng(seed, i)``,
    so rasters do not depend on iteration order or batching.
    """

    def __init__(self, intensities, labels, num_steps=DEFAULT_NUM_STEPS, rate_scale=DEFAULT_RATE_SCALE, seed=0):
        self.intensities = np.asarray(intensities, dtype=np.float64)
        if self.intensities.ndim != 2:
            self.intensities = self.intensities.reshape(len(self.intensities), -1)
        self.labels = np.asarray(labels, dtype=np.int64)
        if len(self.labels) != len(self.intensities):
            raise ValueError("intensities and labels differ in length")
        self.num_steps = int(num_steps)
        self.rate_scale = float(rate_scale)
        self.seed = seed

    @property
    def num_inputs(self) -> int:
        return self.intensities.shape[1]

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, index):
        if isinstance(index, slice):
            idx = range(*index.indices(len(self)))
            return [self[i] for i in idx]
        if index < 0:
            index += len(self)
        if not 0 <= index < len(self):
            raise IndexError(index)
        train = poisson_encode(self.intensities[index], self.num_steps, self.rate_scale, sample_rng(self.seed, index))
        return train, int(self.labels[index])
