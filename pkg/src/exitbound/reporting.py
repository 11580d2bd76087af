"""Serialization of results to machine-readable JSON and human text tables.

Machine-readable payloads keep full round-trip float precision; text
tables round to 4 significant digits.  Both renderings always carry the
same quantities, and all output is deterministic for a fixed input.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .bounds import BoundReport
from .selection import SelectionResult
from .stats import CalibrationReport, DepthStats, EpsilonEstimate


def fmt4(value) -> str:
    """4-significant-digit rendering used by every text table."""
    if value is None:
        return "-"
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.4g}"


def _listify(arr) -> Optional[list]:
    if arr is None:
        return None
    return [float(v) for v in np.asarray(arr).ravel()]


def render_kv(title: str, pairs) -> str:
    lines = [title]
    width = max((len(k) for k, _ in pairs), default=0)
    for key, value in pairs:
        rendered = " ".join(fmt4(v) for v in value) if isinstance(value, (list, tuple)) else fmt4(value)
        lines.append(f"  {key:<{width}}  {rendered}")
    return "\n".join(lines) + "\n"


def render_table(headers, rows) -> str:
    cells = [[fmt4(v) for v in row] for row in rows]
    widths = [
        max(len(headers[i]), max((len(r[i]) for r in cells), default=0))
        for i in range(len(headers))
    ]
    out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    for row in cells:
        out.append("  ".join(row[i].ljust(widths[i]) for i in range(len(row))))
    return "\n".join(out) + "\n"


def dumps_json(payload) -> str:
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# payload builders (JSON-ready dicts) and their text twins
# ---------------------------------------------------------------------------


def stats_payload(stats: DepthStats, policy_desc: dict) -> dict:
    return {
        "policy": policy_desc,
        "n": stats.n,
        "K": stats.K,
        "p": _listify(stats.p),
        "counts": [int(c) for c in stats.counts],
        "expected_depth": stats.expected_depth,
        "H_marginal_nats": stats.H_marginal,
        "H_conditional_nats": stats.H_conditional,
        "mutual_information_nats": stats.mutual_information,
        "speedup": stats.K / stats.expected_depth,
    }


def stats_text(payload: dict) -> str:
    pairs = [(k, v) for k, v in payload.items() if k != "policy"]
    policy = ", ".join(f"{k}={v}" for k, v in payload["policy"].items())
    return render_kv(f"depth stats [{policy}]", pairs)


def calibration_payload(report: CalibrationReport) -> dict:
    return {
        "ece": report.ece,
        "n": report.n,
        "bins": [
            {
                "lower": b.lower,
                "upper": b.upper,
                "mean_confidence": b.mean_confidence,
                "accuracy": b.accuracy,
                "count": b.count,
            }
            for b in report.bins
        ],
    }


def calibration_text(payload: dict) -> str:
    head = render_kv("calibration", [("ece", payload["ece"]), ("n", payload["n"])])
    rows = [
        [b["lower"], b["upper"], b["mean_confidence"], b["accuracy"], b["count"]]
        for b in payload["bins"]
    ]
    return head + render_table(
        ["lower", "upper", "mean_conf", "accuracy", "count"], rows
    )


def epsilon_payload(est: EpsilonEstimate) -> dict:
    return {
        "epsilon_hat": est.value,
        "excluded_labels": list(est.excluded_labels),
        "warning": est.warning,
    }


def bound_report_payload(report: BoundReport) -> dict:
    inp = report.inputs
    payload = {
        "inputs": {
            "n": inp.n,
            "K": inp.K,
            "H_marginal_nats": inp.H_marginal,
            "expected_depth": inp.expected_depth,
            "delta": inp.delta,
            "empirical_loss": inp.empirical_loss,
            "kl_total": inp.kl_total,
            "kl_per_depth": _listify(inp.kl_per_depth),
            "p": _listify(inp.p),
            "n_k": None if inp.n_k is None else [int(v) for v in inp.n_k],
            "epsilon": inp.epsilon,
            "per_depth_complexity": _listify(inp.per_depth_complexity),
            "d_eff": inp.d_eff,
            "alpha": inp.alpha,
            "k_easy": inp.k_easy,
            "constant_c": inp.constant_c,
            "sc_constant": inp.sc_constant,
        },
        "loss_kind": report.loss_kind,
        "bounds": {
            "main": report.main,
            "deterministic": report.deterministic,
            "explicit_total": report.explicit.total,
            "explicit_entropy_term": report.explicit.entropy_term,
            "explicit_complexity_term": report.explicit.complexity_term,
            "epsilon_adjusted": report.epsilon_adjusted,
            "naive_lnk": report.naive_lnk,
            "weighted": report.weighted,
        },
        "vacuous": list(report.vacuous),
        "observed_gap": report.observed_gap,
        "tightness_ratio": report.tightness_ratio,
    }
    if report.complexity is not None:
        payload["complexity"] = {
            "weighted": report.complexity.weighted,
            "envelope": report.complexity.envelope,
        }
    if report.samples is not None:
        payload["sample_complexity"] = {
            "n_adaptive": report.samples.n_adaptive,
            "n_fixed": report.samples.n_fixed,
            "ratio": report.samples.ratio,
        }
    if report.advantage_result is not None:
        adv = report.advantage_result
        payload["advantage"] = {
            "advantage": adv.advantage,
            "composite_bound": adv.composite_bound,
            "full_depth_bound": adv.full_depth_bound,
            "easy_depth_bound": adv.easy_depth_bound,
        }
    return payload


def bound_report_text(payload: dict) -> str:
    parts = []
    if "policy" in payload:
        parts.append(render_kv("policy", list(payload["policy"].items())))
    parts.append(render_kv("inputs", list(payload["inputs"].items())))
    parts.append(render_kv("bounds", list(payload["bounds"].items())))
    extras = []
    for key in ("observed_gap", "tightness_ratio"):
        if payload.get(key) is not None:
            extras.append((key, payload[key]))
    if payload["vacuous"]:
        extras.append(("vacuous", ",".join(payload["vacuous"])))
    for section in ("complexity", "sample_complexity", "advantage"):
        if section in payload:
            extras.extend((f"{section}.{k}", v) for k, v in payload[section].items())
    if extras:
        parts.append(render_kv("derived", extras))
    return "\n".join(parts)


def selection_payload(result: SelectionResult, kind: str, delta: float) -> dict:
    return {
        "kind": kind,
        "delta": delta,
        "tau_star": result.tau_star,
        "validation_tau": result.validation_tau,
        "test_accuracy_delta": result.test_accuracy_delta,
        "candidates": [
            {
                "tau": row.tau,
                "p": _listify(row.p),
                "H_nats": row.H_nats,
                "expected_depth": row.expected_depth,
                "bound": row.bound,
                "train_loss": row.train_loss,
            }
            for row in result.table
        ],
    }


def selection_text(payload: dict) -> str:
    pairs = [("tau_star", payload["tau_star"])]
    if payload["validation_tau"] is not None:
        pairs.append(("validation_tau", payload["validation_tau"]))
        pairs.append(("test_accuracy_delta", payload["test_accuracy_delta"]))
    head = render_kv(f"threshold selection [{payload['kind']}]", pairs)
    rows = [
        [c["tau"], c["H_nats"], c["expected_depth"], c["train_loss"], c["bound"]]
        for c in payload["candidates"]
    ]
    return head + render_table(["tau", "H_nats", "E[D]", "train_loss", "bound"], rows)


def selection_tsv(payload: dict) -> str:
    lines = ["tau\tH_nats\texpected_depth\ttrain_loss\tbound"]
    for c in payload["candidates"]:
        lines.append(
            "\t".join(
                repr(float(v))
                for v in (c["tau"], c["H_nats"], c["expected_depth"], c["train_loss"], c["bound"])
            )
        )
    return "\n".join(lines) + "\n"


def experiment_payload(result) -> dict:
    return {
        "spec": {
            "n_train": result.spec.n_train,
            "n_test": result.spec.n_test,
            "input_dim": result.spec.input_dim,
            "C": result.spec.C,
            "alpha": result.spec.alpha,
            "easy_margin": result.spec.easy_margin,
            "hard_margin": result.spec.hard_margin,
            "noise_std": result.spec.noise_std,
            "rings_per_class": result.spec.rings_per_class,
            "label_noise": result.spec.label_noise,
        },
        "delta": result.delta,
        "seeds": list(result.seeds),
        "partial": result.partial,
        "failures": [list(f) for f in result.failures],
        "pearson_r": result.pearson_r,
        "spearman_rho": result.spearman_rho,
        "bound_validity_fraction": result.bound_validity_fraction,
        "summary": [
            {
                "policy": s.label,
                "expected_depth": s.mean_expected_depth,
                "H_nats": s.mean_H,
                "train_loss": s.mean_train_loss,
                "test_loss": s.mean_test_loss,
                "gap": s.mean_gap,
                "gap_std": s.std_gap,
                "det_bound": s.mean_det_bound,
                "speedup": s.mean_speedup,
                "tightness": s.mean_tightness,
            }
            for s in result.summary
        ],
        "rows": [
            {
                "seed": r.seed,
                "policy": r.label,
                "expected_depth": r.expected_depth,
                "H_nats": r.H_marginal,
                "train_loss": r.train_loss,
                "test_loss": r.test_loss,
                "gap": r.gap,
                "det_bound": r.det_bound,
                "explicit_total": r.explicit_total,
                "tightness": r.tightness,
                "speedup": r.speedup,
            }
            for r in result.rows
        ],
    }


def experiment_text(payload: dict) -> str:
    head = render_kv(
        "experiment",
        [
            ("seeds", ",".join(str(s) for s in payload["seeds"])),
            ("delta", payload["delta"]),
            ("pearson_r", payload["pearson_r"]),
            ("spearman_rho", payload["spearman_rho"]),
            ("bound_validity_fraction", payload["bound_validity_fraction"]),
            ("partial", payload["partial"]),
        ],
    )
    rows = [
        [
            s["policy"], s["expected_depth"], s["H_nats"], s["train_loss"],
            s["test_loss"], s["gap"], s["gap_std"], s["det_bound"], s["speedup"],
        ]
        for s in payload["summary"]
    ]
    return head + render_table(
        ["policy", "E[D]", "H", "train", "test", "gap", "gap_std", "bound", "speedup"],
        rows,
    )


def experiment_rows_tsv(payload: dict) -> str:
    cols = [
        "seed", "policy", "expected_depth", "H_nats", "train_loss",
        "test_loss", "gap", "det_bound", "explicit_total", "speedup",
    ]
    lines = ["\t".join(cols)]
    for r in payload["rows"]:
        vals = []
        for c in cols:
            v = r[c]
            vals.append(str(v) if isinstance(v, (int, str)) else repr(float(v)))
        lines.append("\t".join(vals))
    return "\n".join(lines) + "\n"


def gap_vs_entropy_tsv(payload: dict) -> str:
    """Two-column (H, gap) plot data over the threshold policies."""
    lines = ["H_nats\tgap"]
    for s in payload["summary"]:
        if s["policy"].startswith(("entropy@", "confidence@")):
            lines.append(f"{float(s['H_nats'])!r}\t{float(s['gap'])!r}")
    return "\n".join(lines) + "\n"
