"""Standalone writer for the exit-trace file format (format_version=1).

Intentionally independent of the analysis package: the text format is the
contract between the two.  One JSON header line, then one JSON object per
sample; numbers serialize as shortest round-trip decimals; key order is
fixed; lines end with \\n.
"""

from __future__ import annotations

import json

FORMAT_VERSION = 1


def _line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def write_trace_file(path, K, C, loss_kind, labeled, split, samples):
    """``samples`` yields (sample_id, label_or_None, logits_per_exit) where
    ``logits_per_exit`` is a length-K sequence of length-C float sequences."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            _line(
                {
                    "format_version": FORMAT_VERSION,
                    "K": K,
                    "C": C,
                    "loss_kind": loss_kind,
                    "labeled": labeled,
                    "split": split,
                }
            )
            + "\n"
        )
        for sample_id, label, exit_logits in samples:
            rec = {"id": sample_id}
            if labeled:
                rec["label"] = int(label)
            rec["exits"] = [
                {"depth": k + 1, "logits": [float(v) for v in row]}
                for k, row in enumerate(exit_logits)
            ]
            fh.write(_line(rec) + "\n")
