"""Model factories and known exit-layer mappings.

``MODEL_REGISTRY`` maps identifiers to zero-argument factories returning a
ready ``torch.nn.Module``.  ``EXIT_LAYER_REGISTRY`` ships the matching
depth-to-layer name lists as plain data; generic patterns for common
multi-exit encoder layouts are included so configs can reference them by
name instead of spelling out twelve layer paths.
"""

from .reference import reference_model

MODEL_REGISTRY = {
    "reference-2exit": reference_model,
}

EXIT_LAYER_REGISTRY = {
    "reference-2exit": ("exit1", "exit2"),
    # common layouts for models exposing one classifier per encoder block
    "encoder-6layer": tuple(f"exits.{i}" for i in range(6)),
    "encoder-12layer": tuple(f"exits.{i}" for i in range(12)),
}


def resolve_exit_layers(name_or_layers):
    """Accept either a registry key or an explicit tuple of layer names."""
    if isinstance(name_or_layers, str):
        return EXIT_LAYER_REGISTRY[name_or_layers]
    return tuple(name_or_layers)
