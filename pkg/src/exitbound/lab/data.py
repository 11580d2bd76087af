"""Synthetic classification data with controllable easy/hard structure.

Each sample belongs to one of two subpopulations:

* easy: class means are points on a circle in input dimensions 0-1 at
  radius ``easy_margin``; a linear classifier on the raw input separates
  them.
* hard: classes are interleaved concentric rings in input dimensions 2-3.
  With ``rings_per_class = 2`` (the default) class c owns the rings with
  radii ``c * hard_margin`` and ``(C + c) * hard_margin``, so class
  membership alternates radially.  No linear classifier on the raw input
  beats chance by much, a single narrow tanh block separates the bands
  only crudely, and composed nonlinear features resolve them.

Isotropic Gaussian noise of scale ``noise_std`` is added to every
dimension; the remaining dimensions carry pure noise.  ``label_noise``
flips that fraction of hard-sample labels (train and test alike) to a
uniformly random other class, giving high-capacity deep exits something
to memorize: this is what opens a measurable train/test gap at full depth
while the capacity-limited first exit stays honest.

The subpopulation tag is stored for diagnostics only; policies never see it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class SyntheticSpec:
    n_train: int = 2000
    n_test: int = 20000
    input_dim: int = 8
    C: int = 3
    alpha: float = 0.5  # easy fraction
    easy_margin: float = 3.0
    hard_margin: float = 0.75
    noise_std: float = 0.10
    seed: int = 0
    rings_per_class: int = 2
    label_noise: float = 0.01  # hard-subpopulation label flip rate

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 1:
            raise DomainError("n_train and n_test must be >= 1")
        if self.input_dim < 4:
            raise DomainError("input_dim must be >= 4 (two easy + two hard dimensions)")
        if self.C < 2:
            raise DomainError("C must be >= 2")
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError("alpha must lie in [0, 1]")
        if self.easy_margin <= 0 or self.hard_margin <= 0:
            raise DomainError("margins must be positive")
        if self.noise_std < 0:
            raise DomainError("noise_std must be >= 0")
        if self.rings_per_class < 1:
            raise DomainError("rings_per_class must be >= 1")
        if not (0.0 <= self.label_noise < 1.0):
            raise DomainError("label_noise must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray  # (n, input_dim)
    y: np.ndarray  # (n,) labels in 1..C
    easy_mask: np.ndarray  # (n,) bool, diagnostics only
    C: int

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass(frozen=True, eq=False)
class SyntheticData:
    train: Dataset
    test: Dataset
    spec: SyntheticSpec


def _sample(spec: SyntheticSpec, n: int, rng: np.random.Generator) -> Dataset:
    d, C = spec.input_dim, spec.C
    y = rng.integers(1, C + 1, size=n)
    easy = rng.random(n) < spec.alpha
    X = rng.normal(0.0, spec.noise_std, size=(n, d))

    theta = 2.0 * math.pi * (y - 1) / C
    X[easy, 0] += spec.easy_margin * np.cos(theta[easy])
    X[easy, 1] += spec.easy_margin * np.sin(theta[easy])

    hard = ~easy
    n_hard = int(hard.sum())
    lap = rng.integers(0, spec.rings_per_class, size=n_hard)
    ring_index = lap * C + (y[hard] - 1)
    radius = spec.hard_margin * (ring_index + 1)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n_hard)
    X[hard, 2] += radius * np.cos(phi)
    X[hard, 3] += radius * np.sin(phi)

    if spec.label_noise > 0.0:
        flip = hard & (rng.random(n) < spec.label_noise)
        shift = rng.integers(1, C, size=n)
        y = np.where(flip, (y - 1 + shift) % C + 1, y)

    for arr in (X, y, easy):
        arr.flags.writeable = False
    return Dataset(X=X, y=y, easy_mask=easy, C=C)


def generate_dataset(spec: SyntheticSpec) -> SyntheticData:
    """Draw the train and test portions; bit-identical for equal specs."""
    rng = np.random.default_rng([spec.seed, 0])
    train = _sample(spec, spec.n_train, rng)
    test = _sample(spec, spec.n_test, rng)
    return SyntheticData(train=train, test=test, spec=spec)
