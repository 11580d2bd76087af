"""Bundled 2-exit, 2-class reference model and its tiny dataset.

Both are deterministic: the model's weights come from a fixed torch seed
and the dataset from a fixed numpy seed, so exports are reproducible test
fixtures rather than downloads.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


class Reference2Exit(nn.Module):
    """Two tanh blocks with a linear classifier head after each."""

    def __init__(self):
        super().__init__()
        self.block1 = nn.Sequential(nn.Linear(4, 8), nn.Tanh())
        self.exit1 = nn.Linear(8, 2)
        self.block2 = nn.Sequential(nn.Linear(8, 8), nn.Tanh())
        self.exit2 = nn.Linear(8, 2)

    def forward(self, x):
        h1 = self.block1(x)
        self.exit1(h1)
        h2 = self.block2(h1)
        return self.exit2(h2)


def reference_model(seed: int = 7) -> Reference2Exit:
    torch.manual_seed(seed)
    model = Reference2Exit()
    model.eval()
    return model


def reference_dataset(n: int = 64, seed: int = 11, labeled: bool = True):
    """Two Gaussian blobs in 4 dimensions; labels are 1-based."""
    rng = np.random.default_rng(seed)
    y = rng.integers(1, 3, size=n)
    centers = np.where(y[:, None] == 1, 1.0, -1.0) * np.array([1.5, -1.0, 0.5, 0.0])
    X = (centers + rng.normal(0.0, 0.7, size=(n, 4))).astype(np.float32)
    return X, (y if labeled else None)
