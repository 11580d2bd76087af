import numpy as np
import pytest

import exitbound as eb


def make_trace(
    n=12,
    K=3,
    C=3,
    seed=0,
    labeled=True,
    loss_kind="zero-one",
    split="train",
    store_loss=False,
    sharpen=0.8,
):
    """Random labeled trace whose logits favor the true class more at deeper
    exits, mimicking a progressively refined classifier."""
    rng = np.random.default_rng(seed)
    header = eb.TraceHeader(K=K, C=C, loss_kind=loss_kind, labeled=labeled, split=split)
    samples = []
    for i in range(n):
        label = int(rng.integers(1, C + 1))
        exits = []
        for k in range(1, K + 1):
            logits = rng.normal(size=C)
            logits[label - 1] += sharpen * k
            loss = None
            if store_loss:
                if loss_kind == "zero-one":
                    loss = float(np.argmax(logits) + 1 != label)
                else:
                    shifted = logits - logits.max()
                    loss = float(np.log(np.exp(shifted).sum()) - shifted[label - 1])
            exits.append(eb.ExitRecord(k, tuple(float(v) for v in logits), loss))
        samples.append(
            eb.SampleRecord(f"s{i}", label if labeled else None, tuple(exits))
        )
    return eb.ExitTrace(header, samples)


@pytest.fixture
def small_trace():
    return make_trace(n=12, K=3, C=3, seed=0)


@pytest.fixture
def binary_trace():
    return make_trace(n=8, K=2, C=2, seed=1)
