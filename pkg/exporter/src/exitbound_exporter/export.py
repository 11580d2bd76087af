"""Capture per-exit logits with forward hooks and write a trace file."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .config import ExporterConfig
from .errors import DatasetError, HookAttachmentError, ModelLoadError
from .reference import reference_dataset
from .registry import MODEL_REGISTRY
from .writer import write_trace_file


def _load_model(config: ExporterConfig, model=None):
    if model is not None:
        return model
    factory = MODEL_REGISTRY.get(config.model)
    if factory is None:
        raise ModelLoadError(
            f"unknown model {config.model!r}; registered: {sorted(MODEL_REGISTRY)}"
        )
    return factory()


def _load_dataset(config: ExporterConfig):
    if config.dataset == "builtin:reference":
        return reference_dataset()
    path = Path(config.dataset)
    if path.suffix != ".npz":
        raise DatasetError(f"unknown dataset {config.dataset!r} (expected builtin:reference or an .npz path)")
    try:
        blob = np.load(path)
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    if "X" not in blob:
        raise DatasetError(f"dataset {path} lacks an 'X' array")
    X = np.asarray(blob["X"], dtype=np.float32)
    y = np.asarray(blob["y"], dtype=np.int64) if "y" in blob.files else None
    if y is not None and len(y) != len(X):
        raise DatasetError(f"dataset {path}: X has {len(X)} rows but y has {len(y)}")
    return X, y


def export_trace(config: ExporterConfig, model=None) -> str:
    """Run the model over the dataset, capturing logits at every exit layer.

    Hooks attach to the configured submodules; their outputs are taken as
    pre-softmax logits.  The forward firing order must match the shallow-
    to-deep order of ``config.exit_layers``.  Returns the output path.
    """
    net = _load_model(config, model)
    net.eval()
    X, y = _load_dataset(config)
    if config.max_samples is not None:
        X = X[: config.max_samples]
        y = None if y is None else y[: config.max_samples]
    n = len(X)
    if n == 0:
        raise DatasetError("dataset is empty")

    captured = {}
    fire_order = []
    handles = []

    def make_hook(name):
        def hook(module, args, output):
            fire_order.append(name)
            captured[name] = output.detach()

        return hook

    try:
        for name in config.exit_layers:
            try:
                submodule = net.get_submodule(name)
            except AttributeError as exc:
                raise HookAttachmentError(f"model has no submodule {name!r}") from exc
            handles.append(submodule.register_forward_hook(make_hook(name)))

        rows = []
        C = None
        with torch.no_grad():
            for start in range(0, n, config.batch_size):
                batch = torch.from_numpy(X[start : start + config.batch_size])
                captured.clear()
                fire_order.clear()
                net(batch)
                if tuple(fire_order) != config.exit_layers:
                    raise HookAttachmentError(
                        f"exit layers fired as {fire_order}, expected shallow-to-deep "
                        f"order {list(config.exit_layers)}"
                    )
                batch_logits = []
                for name in config.exit_layers:
                    out = captured[name]
                    if out.ndim != 2 or len(out) != len(batch):
                        raise HookAttachmentError(
                            f"layer {name!r} produced shape {tuple(out.shape)}, "
                            "expected (batch, classes)"
                        )
                    if C is None:
                        C, c_source = out.shape[1], name
                    elif out.shape[1] != C:
                        raise HookAttachmentError(
                            f"layer {name!r} produced {out.shape[1]} classes but "
                            f"layer {c_source!r} produced {C}; exit layers must all "
                            "emit class logits"
                        )
                    batch_logits.append(out.cpu().numpy().astype(np.float64))
                for i in range(len(batch)):
                    rows.append([exit_out[i] for exit_out in batch_logits])
    finally:
        for handle in handles:
            handle.remove()

    width = len(str(n - 1))
    labeled = y is not None

    def samples():
        for i, exit_logits in enumerate(rows):
            yield (
                f"{config.split}-{i:0{width}d}",
                None if y is None else int(y[i]),
                exit_logits,
            )

    write_trace_file(
        config.output_path,
        K=config.K,
        C=int(C),
        loss_kind="zero-one",
        labeled=labeled,
        split=config.split,
        samples=samples(),
    )
    return str(config.output_path)
