"""A small multi-exit feedforward network trained by hand-written backprop.

The backbone is K blocks of affine + tanh; head k is a linear classifier
reading the depth-k representation only, so a forward pass stopped at
depth k touches exactly blocks 1..k.  Training minimizes the equally
weighted sum of per-exit cross-entropies with mini-batch gradient descent
(momentum 0.9 by default).  tanh keeps the loss surface smooth enough for
central-finite-difference gradient checks at 1e-5 relative error.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import DomainError, TrainingDivergedError
from ..trace import ExitRecord, ExitTrace, SampleRecord, TraceHeader
from .data import Dataset


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _one_hot(y: np.ndarray, C: int) -> np.ndarray:
    out = np.zeros((len(y), C), dtype=np.float64)
    out[np.arange(len(y)), y - 1] = 1.0
    return out


class MultiExitNet:
    """K tanh blocks with a linear classifier head at every depth."""

    def __init__(self, input_dim: int, widths, C: int, seed: int):
        widths = [int(w) for w in widths]
        if not widths or min(widths) < 1:
            raise DomainError("widths must be a nonempty vector of positive integers")
        self.input_dim = input_dim
        self.widths = widths
        self.K = len(widths)
        self.C = C
        rng = np.random.default_rng([seed, 1])
        self.blocks = []  # (W, b) per block
        self.heads = []  # (V, c) per exit
        fan_in = input_dim
        for w in widths:
            W = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, w))
            self.blocks.append((W, np.zeros(w)))
            V = rng.normal(0.0, 1.0 / np.sqrt(w), size=(w, C))
            self.heads.append((V, np.zeros(C)))
            fan_in = w

    # -- forward ------------------------------------------------------------

    def hidden_states(self, X: np.ndarray) -> list:
        acts = []
        a = X
        for W, b in self.blocks:
            a = np.tanh(a @ W + b)
            acts.append(a)
        return acts

    def logits(self, X: np.ndarray) -> list:
        """Per-exit logits, one (n, C) array per depth."""
        return [a @ V + c for a, (V, c) in zip(self.hidden_states(X), self.heads)]

    def exit_losses(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Mean cross-entropy at each exit, shape (K,)."""
        out = np.empty(self.K)
        rows = np.arange(len(y))
        for k, z in enumerate(self.logits(X)):
            shifted = z - z.max(axis=1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            out[k] = -log_probs[rows, y - 1].mean()
        return out

    # -- backward -----------------------------------------------------------

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray):
        """Total loss (sum of per-exit mean cross-entropies) and its gradients."""
        n = len(y)
        onehot = _one_hot(y, self.C)
        acts = self.hidden_states(X)
        loss = 0.0
        rows = np.arange(n)
        d_heads = []
        d_acts = [None] * self.K
        for k in range(self.K):
            V, c = self.heads[k]
            z = acts[k] @ V + c
            shifted = z - z.max(axis=1, keepdims=True)
            log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            loss += float(-(shifted[rows, y - 1] - log_norm[:, 0]).mean())
            dz = (np.exp(shifted - log_norm) - onehot) / n
            d_heads.append((acts[k].T @ dz, dz.sum(axis=0)))
            d_acts[k] = dz @ V.T
        d_blocks = [None] * self.K
        upstream = np.zeros_like(acts[-1])
        for k in range(self.K - 1, -1, -1):
            da = d_acts[k] + upstream
            dz = da * (1.0 - acts[k] ** 2)
            prev = X if k == 0 else acts[k - 1]
            d_blocks[k] = (prev.T @ dz, dz.sum(axis=0))
            if k > 0:
                upstream = dz @ self.blocks[k][0].T
        return loss, (d_blocks, d_heads)

    # -- parameter vector (for gradient checks) ------------------------------

    def get_params(self) -> np.ndarray:
        parts = []
        for W, b in self.blocks + self.heads:
            parts.extend([W.ravel(), b.ravel()])
        return np.concatenate(parts)

    def set_params(self, flat: np.ndarray):
        offset = 0

        def take(shape):
            nonlocal offset
            size = int(np.prod(shape))
            out = flat[offset : offset + size].reshape(shape)
            offset += size
            return out.copy()

        self.blocks = [(take(W.shape), take(b.shape)) for W, b in self.blocks]
        self.heads = [(take(V.shape), take(c.shape)) for V, c in self.heads]

    def flat_grads(self, grads) -> np.ndarray:
        d_blocks, d_heads = grads
        parts = []
        for dW, db in d_blocks + d_heads:
            parts.extend([dW.ravel(), db.ravel()])
        return np.concatenate(parts)


def gradient_check(net: MultiExitNet, X: np.ndarray, y: np.ndarray, h: float = 1e-6) -> float:
    """Relative error between analytic and central-finite-difference gradients."""
    base = net.get_params()
    _, grads = net.loss_and_grads(X, y)
    analytic = net.flat_grads(grads)
    numeric = np.empty_like(analytic)
    for i in range(len(base)):
        perturbed = base.copy()
        perturbed[i] = base[i] + h
        net.set_params(perturbed)
        plus, _ = net.loss_and_grads(X, y)
        perturbed[i] = base[i] - h
        net.set_params(perturbed)
        minus, _ = net.loss_and_grads(X, y)
        numeric[i] = (plus - minus) / (2.0 * h)
    net.set_params(base)
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


def train_model(
    dataset: Dataset,
    K: int,
    widths,
    epochs: int,
    learning_rate: float,
    seed: int,
    batch_size: int = 64,
    momentum: float = 0.9,
    lr_schedule: str = "cosine",
    target_loss: float | None = None,
) -> MultiExitNet:
    """Train a fresh multi-exit net on a dataset; deterministic given seed.

    ``lr_schedule`` is "cosine" (anneal to zero over the run) or "constant".
    """
    widths = [int(w) for w in widths]
    if len(widths) != K:
        raise DomainError(f"widths has {len(widths)} entries, expected K={K}")
    if lr_schedule not in ("cosine", "constant"):
        raise DomainError(f"unknown lr_schedule {lr_schedule!r}")
    net = MultiExitNet(dataset.X.shape[1], widths, dataset.C, seed)
    if epochs == 0:
        return net
    X, y = dataset.X, dataset.y
    n = len(y)
    order_rng = np.random.default_rng([seed, 2])
    velocity = None
    for epoch in range(epochs):
        if lr_schedule == "cosine":
            lr = learning_rate * 0.5 * (1.0 + np.cos(np.pi * epoch / epochs))
        else:
            lr = learning_rate
        perm = order_rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            loss, grads = net.loss_and_grads(X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"training loss became {loss}")
            flat = net.flat_grads(grads)
            if velocity is None:
                velocity = np.zeros_like(flat)
            velocity = momentum * velocity - lr * flat
            net.set_params(net.get_params() + velocity)
    final = net.exit_losses(X, y)[-1]
    if not np.isfinite(final):
        raise TrainingDivergedError(f"final training loss is {final}")
    if target_loss is not None and final > target_loss:
        warnings.warn(
            f"final depth-{K} training loss {final:.4f} above target {target_loss}",
            stacklevel=2,
        )
    return net


def train_linear_probe(
    train: Dataset,
    epochs: int = 200,
    learning_rate: float = 0.5,
    seed: int = 0,
) -> tuple:
    """Multinomial logistic regression on raw inputs (full-batch GD).

    Returns (weights, bias) for scoring with X @ W + b.
    """
    X, y = train.X, train.y
    n, d = X.shape
    C = train.C
    rng = np.random.default_rng([seed, 3])
    W = rng.normal(0.0, 0.01, size=(d, C))
    b = np.zeros(C)
    onehot = _one_hot(y, C)
    for _ in range(epochs):
        probs = _softmax_rows(X @ W + b)
        dz = (probs - onehot) / n
        W -= learning_rate * (X.T @ dz)
        b -= learning_rate * dz.sum(axis=0)
    return W, b


def probe_accuracy(weights, dataset: Dataset) -> float:
    W, b = weights
    preds = np.argmax(dataset.X @ W + b, axis=1) + 1
    return float((preds == dataset.y).mean())


def emit_trace(
    net: MultiExitNet,
    dataset: Dataset,
    split: str,
    loss_kind: str = "cross-entropy",
) -> ExitTrace:
    """Per-sample, per-exit logits (and losses) in the trace file model.

    Cross-entropy traces store the per-exit loss explicitly; zero-one
    traces omit it, since it is recomputed on demand from the argmax.
    """
    logits = net.logits(dataset.X)
    header = TraceHeader(
        K=net.K, C=net.C, loss_kind=loss_kind, labeled=True, split=split
    )
    rows = np.arange(dataset.n)
    losses = None
    if loss_kind == "cross-entropy":
        losses = []
        for z in logits:
            shifted = z - z.max(axis=1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            losses.append(-log_probs[rows, dataset.y - 1])
    samples = []
    width = len(str(dataset.n - 1))
    for i in range(dataset.n):
        exits = tuple(
            ExitRecord(
                depth=k + 1,
                logits=tuple(float(v) for v in logits[k][i]),
                loss=None if losses is None else float(losses[k][i]),
            )
            for k in range(net.K)
        )
        samples.append(
            SampleRecord(
                sample_id=f"{split}-{i:0{width}d}",
                label=int(dataset.y[i]),
                exits=exits,
            )
        )
    return ExitTrace(header, samples)
