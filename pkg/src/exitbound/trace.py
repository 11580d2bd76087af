"""Exit-trace data model and its line-delimited file format.

A trace file is UTF-8 text: one JSON header line followed by one JSON
sample line per record.  Logits are the canonical stored quantity;
probabilities are always derived via :func:`stable_softmax`.  Numbers are
serialized as shortest round-trip decimals (Python ``repr``), so writing a
loaded canonical file reproduces it byte for byte.

Header line::

    {"format_version":1,"K":2,"C":2,"loss_kind":"zero-one","labeled":true,"split":"train"}

Sample line::

    {"id":"s0","label":1,"exits":[{"depth":1,"logits":[0.4,-0.4],"loss":0.0},
                                  {"depth":2,"logits":[1.2,-0.9]}]}

The ``label`` key is present iff the header declares ``labeled``; the
``loss`` key is optional per exit.  When a loss is absent and labels are
present it is computed on demand: zero-one loss from the argmax of the
logits (ties broken toward the lowest class index), cross-entropy loss
from the log-softmax at the true label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import (
    DomainError,
    DuplicateSampleError,
    TraceParseError,
    TraceSchemaError,
)

FORMAT_VERSION = 1
LOSS_KINDS = ("zero-one", "cross-entropy")
SPLITS = ("train", "validation", "calibration", "test")


@dataclass(frozen=True)
class TraceHeader:
    K: int
    C: int
    loss_kind: str
    labeled: bool
    split: str

    def __post_init__(self):
        if not (isinstance(self.K, int) and self.K >= 1):
            raise TraceSchemaError(f"header K must be an integer >= 1, got {self.K!r}")
        if not (isinstance(self.C, int) and self.C >= 2):
            raise TraceSchemaError(f"header C must be an integer >= 2, got {self.C!r}")
        if self.loss_kind not in LOSS_KINDS:
            raise TraceSchemaError(f"unknown loss_kind {self.loss_kind!r}")
        if not isinstance(self.labeled, bool):
            raise TraceSchemaError("header labeled must be a boolean")
        if self.split not in SPLITS:
            raise TraceSchemaError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class ExitRecord:
    """Logits (and optional loss) produced at one exit depth."""

    depth: int
    logits: tuple
    loss: Optional[float] = None


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    label: Optional[int]
    exits: tuple  # K ExitRecords, ascending depth 1..K


class ExitTrace:
    """A validated, immutable collection of per-sample exit records."""

    def __init__(self, header: TraceHeader, samples):
        self.header = header
        self.samples = tuple(samples)
        if len(self.samples) < 1:
            raise TraceSchemaError("trace must contain at least one sample")
        seen = set()
        for sample in self.samples:
            _validate_sample(sample, header)
            if sample.sample_id in seen:
                raise DuplicateSampleError(f"duplicate sample_id {sample.sample_id!r}")
            seen.add(sample.sample_id)
        self._logits = None
        self._losses = None

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def K(self) -> int:
        return self.header.K

    @property
    def C(self) -> int:
        return self.header.C

    def __eq__(self, other):
        return (
            isinstance(other, ExitTrace)
            and self.header == other.header
            and self.samples == other.samples
        )

    def logits_tensor(self) -> np.ndarray:
        """All logits as an (n, K, C) array; cached, marked read-only."""
        if self._logits is None:
            arr = np.array(
                [[ex.logits for ex in s.exits] for s in self.samples], dtype=np.float64
            )
            arr.flags.writeable = False
            self._logits = arr
        return self._logits

    def labels_vector(self) -> np.ndarray:
        """Labels as an (n,) int array; raises if the trace is unlabeled."""
        if not self.header.labeled:
            raise DomainError("trace is unlabeled")
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def loss_matrix(self) -> np.ndarray:
        """Per-sample, per-depth losses as an (n, K) array.

        Stored values win; missing entries are computed on demand from
        logits and labels per the header's loss_kind.
        """
        if self._losses is not None:
            return self._losses
        n, K = self.n, self.K
        out = np.empty((n, K), dtype=np.float64)
        logits = self.logits_tensor()
        labels = self.labels_vector() if self.header.labeled else None
        for i, sample in enumerate(self.samples):
            for k, ex in enumerate(sample.exits):
                if ex.loss is not None:
                    out[i, k] = ex.loss
                elif labels is None:
                    raise DomainError(
                        f"sample {sample.sample_id!r} has no loss at depth {k + 1} "
                        "and the trace is unlabeled"
                    )
                elif self.header.loss_kind == "zero-one":
                    pred = int(np.argmax(logits[i, k])) + 1
                    out[i, k] = 0.0 if pred == labels[i] else 1.0
                else:
                    out[i, k] = _cross_entropy(logits[i, k], labels[i])
        out.flags.writeable = False
        self._losses = out
        return out


def _cross_entropy(logits: np.ndarray, label: int) -> float:
    shifted = logits - np.max(logits)
    return float(np.log(np.sum(np.exp(shifted))) - shifted[label - 1])


def _validate_sample(sample: SampleRecord, header: TraceHeader):
    sid = sample.sample_id
    if not isinstance(sid, str) or not sid:
        raise TraceSchemaError(f"sample_id must be a nonempty string, got {sid!r}")
    if header.labeled:
        if sample.label is None:
            raise TraceSchemaError(f"sample {sid!r}: missing label in a labeled trace")
        if not (isinstance(sample.label, int) and 1 <= sample.label <= header.C):
            raise TraceSchemaError(
                f"sample {sid!r}: label {sample.label!r} outside [1, {header.C}]"
            )
    elif sample.label is not None:
        raise TraceSchemaError(f"sample {sid!r}: label present in an unlabeled trace")
    depths = [ex.depth for ex in sample.exits]
    if depths != list(range(1, header.K + 1)):
        raise TraceSchemaError(
            f"sample {sid!r}: exit depths {depths} must cover 1..{header.K} in order"
        )
    for ex in sample.exits:
        if len(ex.logits) != header.C:
            raise TraceSchemaError(
                f"sample {sid!r}: depth {ex.depth} has {len(ex.logits)} logits, "
                f"expected C={header.C}"
            )
        if not all(math.isfinite(v) for v in ex.logits):
            raise TraceSchemaError(f"sample {sid!r}: non-finite logit at depth {ex.depth}")
        if ex.loss is not None and not (math.isfinite(ex.loss) and ex.loss >= 0):
            raise TraceSchemaError(
                f"sample {sid!r}: loss at depth {ex.depth} must be finite and >= 0"
            )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _dump_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def dumps_trace(trace: ExitTrace) -> str:
    """Canonical text form: one header line plus one line per sample."""
    header = trace.header
    lines = [
        _dump_line(
            {
                "format_version": FORMAT_VERSION,
                "K": header.K,
                "C": header.C,
                "loss_kind": header.loss_kind,
                "labeled": header.labeled,
                "split": header.split,
            }
        )
    ]
    for sample in trace.samples:
        rec = {"id": sample.sample_id}
        if header.labeled:
            rec["label"] = sample.label
        exits = []
        for ex in sample.exits:
            entry = {"depth": ex.depth, "logits": [float(v) for v in ex.logits]}
            if ex.loss is not None:
                entry["loss"] = float(ex.loss)
            exits.append(entry)
        rec["exits"] = exits
        lines.append(_dump_line(rec))
    return "\n".join(lines) + "\n"


def write_trace(trace: ExitTrace, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_trace(trace))


def _parse_header(line: str) -> TraceHeader:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"malformed header: {exc.msg}", line=1) from exc
    if not isinstance(obj, dict):
        raise TraceParseError("header must be a JSON object", line=1)
    if obj.get("format_version") != FORMAT_VERSION:
        raise TraceParseError(
            f"unsupported format_version {obj.get('format_version')!r}", line=1
        )
    missing = {"K", "C", "loss_kind", "labeled", "split"} - set(obj)
    if missing:
        raise TraceParseError(f"header missing fields {sorted(missing)}", line=1)
    return TraceHeader(
        K=obj["K"],
        C=obj["C"],
        loss_kind=obj["loss_kind"],
        labeled=obj["labeled"],
        split=obj["split"],
    )


def _parse_sample(obj, header: TraceHeader, line_no: int) -> SampleRecord:
    if not isinstance(obj, dict) or "id" not in obj or "exits" not in obj:
        raise TraceParseError("sample must be an object with 'id' and 'exits'", line=line_no)
    exits = []
    for entry in obj["exits"]:
        if not isinstance(entry, dict) or "depth" not in entry or "logits" not in entry:
            raise TraceParseError(
                f"sample {obj['id']!r}: each exit needs 'depth' and 'logits'", line=line_no
            )
        loss = entry.get("loss")
        try:
            exits.append(
                ExitRecord(
                    depth=entry["depth"],
                    logits=tuple(float(v) for v in entry["logits"]),
                    loss=None if loss is None else float(loss),
                )
            )
        except (TypeError, ValueError) as exc:
            raise TraceParseError(
                f"sample {obj['id']!r}: bad exit record ({exc})", line=line_no
            ) from exc
    return SampleRecord(
        sample_id=obj["id"], label=obj.get("label"), exits=tuple(exits)
    )


def loads_trace(text: str) -> ExitTrace:
    lines = text.splitlines()
    if not lines:
        raise TraceParseError("empty trace file", line=1)
    header = _parse_header(lines[0])
    samples = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"malformed sample: {exc.msg}", line=line_no) from exc
        samples.append(_parse_sample(obj, header, line_no))
    return ExitTrace(header, samples)


def load_trace(path) -> ExitTrace:
    """Load and validate a trace file; see the module docstring for the format."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise TraceParseError(f"cannot read trace file {path}: {exc.strerror}") from exc
    return loads_trace(text)


# ---------------------------------------------------------------------------
# numerics
# ---------------------------------------------------------------------------


def stable_softmax(logits) -> np.ndarray:
    """Softmax computed after subtracting the max logit.

    Shift invariance and absence of overflow are part of the contract;
    outputs sum to 1 within 1e-12.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise DomainError("softmax requires a nonempty vector of finite logits")
    shifted = arr - np.max(arr, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceSplits:
    train: ExitTrace
    validation: ExitTrace
    calibration: ExitTrace
    test: Optional[ExitTrace]  # None when the remainder after the three fractions is empty


def split_trace(trace: ExitTrace, fractions, seed: int) -> TraceSplits:
    """Partition a trace into train/validation/calibration plus a test remainder.

    ``fractions`` is (train, validation, calibration); each must be positive
    and their sum at most 1.  Shuffling uses NumPy's PCG64 generator
    (``np.random.default_rng(seed)``), and samples keep their original file
    order inside each split, so the partition is bit-reproducible.
    """
    f_train, f_val, f_cal = (float(f) for f in fractions)
    if min(f_train, f_val, f_cal) <= 0:
        raise DomainError("all three fractions must be positive")
    if f_train + f_val + f_cal > 1 + 1e-12:
        raise DomainError(
            f"fractions sum to {f_train + f_val + f_cal}, which exceeds 1"
        )
    n = trace.n
    sizes = [int(math.floor(f * n + 1e-9)) for f in (f_train, f_val, f_cal)]
    for name, size in zip(("train", "validation", "calibration"), sizes):
        if size == 0:
            raise DomainError(f"split {name!r} would receive 0 samples")
    perm = np.random.default_rng(seed).permutation(n)
    bounds = np.cumsum([0] + sizes)
    groups = [sorted(perm[bounds[i] : bounds[i + 1]]) for i in range(3)]
    groups.append(sorted(perm[bounds[3] :]))

    def subtrace(indices, split_name):
        header = replace(trace.header, split=split_name)
        return ExitTrace(header, [trace.samples[i] for i in indices])

    test = subtrace(groups[3], "test") if groups[3] else None
    return TraceSplits(
        train=subtrace(groups[0], "train"),
        validation=subtrace(groups[1], "validation"),
        calibration=subtrace(groups[2], "calibration"),
        test=test,
    )
