"""Command-line front end.

Subcommands: analyze, bounds, sweep, simulate, epsilon, ece, report.
Configuration precedence is flags > --config JSON file > defaults.  The
default output directory comes from $EXITBOUND_OUT (falling back to the
current directory).  Exit codes: 0 success, 2 parse error (including
unreadable input paths), 3 schema error, 4 domain/config error, 5 partial
experiment result, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import reporting
from .bounds import BoundInputs, bound_report, gaussian_kl
from .errors import (
    DomainError,
    ExitboundError,
    MissingInputError,
    PartialResultError,
    TraceParseError,
)
from .lab import (
    SyntheticSpec,
    default_policy_grid,
    default_tau_grid,
    run_experiment,
)
from .policies import PolicyConfig, apply_policy
from .selection import compare_with_validation, select_threshold
from .stats import depth_stats, ece, epsilon_estimate, mean_policy_loss
from .trace import load_trace

DEFAULT_DELTA = 0.05
DEFAULT_BINS = 15
OUT_ENV = "EXITBOUND_OUT"


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v != ""]


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v != ""]


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags override its keys")
    sub.add_argument("--out", help=f"output directory (default ${OUT_ENV} or '.')")
    sub.add_argument(
        "--format",
        choices=["both", "text", "machine"],
        help="which renderings to write (default both)",
    )


def _add_policy_flags(sub):
    sub.add_argument(
        "--policy",
        choices=["entropy", "confidence", "patience", "fixed", "stochastic"],
        help="exit policy kind",
    )
    sub.add_argument("--tau", type=float, help="threshold for entropy/confidence kinds")
    sub.add_argument("--patience-t", type=int, help="agreement run length for patience kind")
    sub.add_argument("--fixed-k", type=int, help="exit depth for fixed kind")
    sub.add_argument("--table", help="JSON file of per-sample depth distributions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exitbound",
        description="Exit-depth statistics, entropy-aware generalization bounds, "
        "threshold selection, and a synthetic multi-exit lab.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("analyze", help="depth statistics (optionally calibration) for a trace")
    p.add_argument("--trace", help="trace file")
    _add_policy_flags(p)
    p.add_argument("--ece", action="store_true", help="also write a calibration report")
    p.add_argument("--bins", type=int, help=f"calibration bins (default {DEFAULT_BINS})")
    _add_common(p)

    p = subs.add_parser("bounds", help="full bound report for a trace + policy")
    p.add_argument("--trace", help="trace file")
    _add_policy_flags(p)
    p.add_argument("--delta", type=float, help=f"confidence level (default {DEFAULT_DELTA})")
    p.add_argument("--kl", type=float, help="total posterior-prior KL")
    p.add_argument("--kl-mean-sq-norm", type=float, help="compute --kl from an isotropic Gaussian pair")
    p.add_argument("--kl-dim", type=int, help="dimension for the Gaussian KL")
    p.add_argument("--kl-prior-var", type=float, help="Gaussian prior variance (default 0.1)")
    p.add_argument("--kl-posterior-std", type=float, help="Gaussian posterior std (default 0.01)")
    p.add_argument("--kl-per-depth", help="comma list of per-depth KL values")
    p.add_argument("--epsilon", type=float, help="label-independence slack")
    p.add_argument("--complexities", help="comma list of per-depth capacities")
    p.add_argument("--d-eff", type=float, help="effective dimension")
    p.add_argument("--alpha", type=float, help="easy fraction for the advantage calculator")
    p.add_argument("--k-easy", type=int, help="easy exit depth for the advantage calculator")
    p.add_argument("--advantage", action="store_true", help="require the advantage calculator")
    p.add_argument("--target-eps", type=float, help="target gap for sample-complexity")
    p.add_argument("--sample-complexity", action="store_true", help="require the sample-complexity calculator")
    p.add_argument("--observed-gap", type=float, help="measured gap for the tightness ratio")
    p.add_argument("--constant-c", type=float, help="capacity-term constant (default 1)")
    p.add_argument("--sc-constant", type=float, help="sample-complexity constant (default 2)")
    _add_common(p)

    p = subs.add_parser("sweep", help="bound-guided threshold selection over a candidate grid")
    p.add_argument("--trace", help="labeled training trace")
    p.add_argument("--kind", choices=["entropy", "confidence"], help="threshold kind (default entropy)")
    p.add_argument("--taus", help="comma list of candidate thresholds")
    p.add_argument("--delta", type=float, help=f"confidence level (default {DEFAULT_DELTA})")
    p.add_argument("--validation", help="validation trace (enables the tuned comparator)")
    p.add_argument("--test", help="test trace (required with --validation)")
    _add_common(p)

    p = subs.add_parser("simulate", help="run the synthetic multi-exit experiment")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--input-dim", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--easy-margin", type=float)
    p.add_argument("--hard-margin", type=float)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--rings-per-class", type=int)
    p.add_argument("--label-noise", type=float)
    p.add_argument("--k", type=int, help="number of exits (default 4)")
    p.add_argument("--taus", help="entropy thresholds for the policy grid")
    p.add_argument("--seeds", help="comma list of seeds (default 42,123,456,789,1024)")
    p.add_argument("--delta", type=float)
    p.add_argument("--widths", help="comma list of block widths")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    _add_common(p)

    p = subs.add_parser("epsilon", help="label-independence estimate for a trace + policy")
    p.add_argument("--trace", help="labeled trace")
    _add_policy_flags(p)
    _add_common(p)

    p = subs.add_parser("ece", help="calibration report for a trace + policy")
    p.add_argument("--trace", help="labeled trace")
    _add_policy_flags(p)
    p.add_argument("--bins", type=int)
    _add_common(p)

    p = subs.add_parser("report", help="stats + bounds + epsilon in one file")
    p.add_argument("--trace", help="labeled trace")
    _add_policy_flags(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--bins", type=int)
    p.add_argument("--kl", type=float)
    p.add_argument("--observed-gap", type=float)
    _add_common(p)

    return parser


def _merge_config(args):
    """Fill argparse Nones from the --config JSON file, if given."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise TraceParseError(f"cannot read config file {args.config}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"malformed config file {args.config}: {exc.msg}")
    if not isinstance(cfg, dict):
        raise TraceParseError(f"config file {args.config} must hold a JSON object")
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise DomainError(f"config key {key!r} is not a flag of this command")
        if getattr(args, attr) in (None, False):
            setattr(args, attr, value)
    return args


def _outdir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(args, name: str, payload, text: str, extra_files=()):
    outdir = _outdir(args)
    fmt = args.format or "both"
    written = []
    if fmt in ("both", "machine"):
        target = outdir / f"{name}.json"
        target.write_text(reporting.dumps_json(payload), encoding="utf-8")
        written.append(target)
    if fmt in ("both", "text"):
        target = outdir / f"{name}.txt"
        target.write_text(text, encoding="utf-8")
        written.append(target)
    for fname, content in extra_files:
        target = outdir / fname
        target.write_text(content, encoding="utf-8")
        written.append(target)
    for target in written:
        print(f"wrote {target}")


def _require(args, flag):
    value = getattr(args, flag.lstrip("-").replace("-", "_"))
    if value is None:
        raise MissingInputError(f"missing required flag {flag}")
    return value


def _policy_from_args(args) -> PolicyConfig:
    kind = args.policy or "entropy"
    if kind == "entropy":
        return PolicyConfig.entropy(_require(args, "--tau"))
    if kind == "confidence":
        return PolicyConfig.confidence(_require(args, "--tau"))
    if kind == "patience":
        return PolicyConfig.patience(_require(args, "--patience-t"))
    if kind == "fixed":
        return PolicyConfig.fixed(_require(args, "--fixed-k"))
    path = _require(args, "--table")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            rows = json.load(fh)
    except OSError as exc:
        raise TraceParseError(f"cannot read table file {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"malformed table file {path}: {exc.msg}")
    return PolicyConfig.stochastic(np.asarray(rows, dtype=np.float64))


def _load_trace_arg(args, flag="--trace", attr="trace"):
    path = getattr(args, attr)
    if path is None:
        raise MissingInputError(f"missing required flag {flag}")
    return load_trace(path)


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    trace = _load_trace_arg(args)
    policy = _policy_from_args(args)
    assignment = apply_policy(trace, policy)
    stats = depth_stats(assignment)
    payload = reporting.stats_payload(stats, policy.describe())
    extra = []
    if args.ece:
        rep = ece(trace, assignment, args.bins or DEFAULT_BINS)
        cal = reporting.calibration_payload(rep)
        extra.append(("calibration.json", reporting.dumps_json(cal)))
        extra.append(("calibration.txt", reporting.calibration_text(cal)))
    _write(args, "depth_stats", payload, reporting.stats_text(payload), extra)
    return 0


def _bound_inputs_from_args(args, trace, policy) -> tuple:
    assignment = apply_policy(trace, policy)
    stats = depth_stats(assignment)
    loss = mean_policy_loss(trace, assignment)
    delta = args.delta if args.delta is not None else DEFAULT_DELTA
    kl_total = args.kl or 0.0
    if getattr(args, "kl_mean_sq_norm", None) is not None:
        dim = _require(args, "--kl-dim")
        prior_var = args.kl_prior_var if args.kl_prior_var is not None else 0.1
        posterior_std = args.kl_posterior_std if args.kl_posterior_std is not None else 0.01
        kl_total = gaussian_kl(args.kl_mean_sq_norm, dim, prior_var, posterior_std**2)
    aux = {}
    if getattr(args, "kl_per_depth", None):
        aux["kl_per_depth"] = _float_list(args.kl_per_depth)
    if getattr(args, "complexities", None):
        aux["per_depth_complexity"] = _float_list(args.complexities)
    for name in ("d_eff", "alpha", "k_easy", "epsilon"):
        value = getattr(args, name, None)
        if value is not None:
            aux[name] = value
    for name in ("constant_c", "sc_constant"):
        value = getattr(args, name, None)
        if value is not None:
            aux[name] = value
    inputs = BoundInputs.from_stats(stats, delta=delta, empirical_loss=loss, kl_total=kl_total, **aux)
    return inputs, stats


def cmd_bounds(args) -> int:
    trace = _load_trace_arg(args)
    policy = _policy_from_args(args)
    if args.advantage:
        for flag in ("--alpha", "--k-easy", "--d-eff"):
            _require(args, flag)
    if args.sample_complexity:
        for flag in ("--target-eps", "--d-eff"):
            _require(args, flag)
    inputs, _ = _bound_inputs_from_args(args, trace, policy)
    report = bound_report(
        inputs,
        loss_kind=trace.header.loss_kind,
        observed_gap=args.observed_gap,
        target_eps=args.target_eps,
    )
    payload = reporting.bound_report_payload(report)
    payload["policy"] = policy.describe()
    _write(args, "bounds", payload, reporting.bound_report_text(payload))
    return 0


def cmd_sweep(args) -> int:
    trace = _load_trace_arg(args)
    kind = {"entropy": "entropy-threshold", "confidence": "confidence-threshold"}[
        args.kind or "entropy"
    ]
    taus = _float_list(args.taus) if args.taus else list(default_tau_grid(trace.C))
    delta = args.delta if args.delta is not None else DEFAULT_DELTA
    if args.validation or args.test:
        if not (args.validation and args.test):
            raise MissingInputError("--validation and --test must be given together")
        val = load_trace(args.validation)
        test = load_trace(args.test)
        result = compare_with_validation(trace, val, test, kind, taus, delta, trace.K)
    else:
        result = select_threshold(trace, kind, taus, delta, trace.K)
    payload = reporting.selection_payload(result, kind, delta)
    _write(
        args,
        "sweep",
        payload,
        reporting.selection_text(payload),
        [("sweep.tsv", reporting.selection_tsv(payload))],
    )
    return 0


def cmd_simulate(args) -> int:
    spec_kwargs = {}
    for flag, field in (
        ("n_train", "n_train"),
        ("n_test", "n_test"),
        ("input_dim", "input_dim"),
        ("classes", "C"),
        ("alpha", "alpha"),
        ("easy_margin", "easy_margin"),
        ("hard_margin", "hard_margin"),
        ("noise_std", "noise_std"),
        ("rings_per_class", "rings_per_class"),
        ("label_noise", "label_noise"),
    ):
        value = getattr(args, flag)
        if value is not None:
            spec_kwargs[field] = value
    spec = SyntheticSpec(**spec_kwargs)
    K = args.k or 4
    if args.taus:
        policies = [PolicyConfig.entropy(t) for t in _float_list(args.taus)]
        policies.append(PolicyConfig.fixed(K))
    else:
        policies = default_policy_grid(K, spec.C)
    kwargs = {}
    if args.widths:
        kwargs["widths"] = _int_list(args.widths)
    if args.epochs is not None:
        kwargs["epochs"] = args.epochs
    if args.learning_rate is not None:
        kwargs["learning_rate"] = args.learning_rate
    seeds = _int_list(args.seeds) if args.seeds else None
    result = run_experiment(
        spec,
        K,
        policies,
        args.delta if args.delta is not None else DEFAULT_DELTA,
        seeds=seeds if seeds else (42, 123, 456, 789, 1024),
        **kwargs,
    )
    payload = reporting.experiment_payload(result)
    _write(
        args,
        "experiment",
        payload,
        reporting.experiment_text(payload),
        [
            ("experiment_rows.tsv", reporting.experiment_rows_tsv(payload)),
            ("gap_vs_entropy.tsv", reporting.gap_vs_entropy_tsv(payload)),
        ],
    )
    if result.partial:
        raise PartialResultError(f"seeds failed: {result.failures}")
    return 0


def cmd_epsilon(args) -> int:
    trace = _load_trace_arg(args)
    policy = _policy_from_args(args)
    est = epsilon_estimate(trace, apply_policy(trace, policy))
    payload = reporting.epsilon_payload(est)
    payload["policy"] = policy.describe()
    text = reporting.render_kv(
        "label-independence estimate",
        [("epsilon_hat", payload["epsilon_hat"]), ("warning", payload["warning"])],
    )
    _write(args, "epsilon", payload, text)
    return 0


def cmd_ece(args) -> int:
    trace = _load_trace_arg(args)
    policy = _policy_from_args(args)
    rep = ece(trace, apply_policy(trace, policy), args.bins or DEFAULT_BINS)
    payload = reporting.calibration_payload(rep)
    payload["policy"] = policy.describe()
    _write(args, "calibration", payload, reporting.calibration_text(payload))
    return 0


def cmd_report(args) -> int:
    trace = _load_trace_arg(args)
    policy = _policy_from_args(args)
    assignment = apply_policy(trace, policy)
    stats = depth_stats(assignment)
    loss = mean_policy_loss(trace, assignment)
    delta = args.delta if args.delta is not None else DEFAULT_DELTA
    inputs = BoundInputs.from_stats(
        stats, delta=delta, empirical_loss=loss, kl_total=args.kl or 0.0
    )
    rep = bound_report(
        inputs, loss_kind=trace.header.loss_kind, observed_gap=args.observed_gap
    )
    payload = {
        "stats": reporting.stats_payload(stats, policy.describe()),
        "bounds": reporting.bound_report_payload(rep),
    }
    text = reporting.stats_text(payload["stats"]) + "\n" + reporting.bound_report_text(payload["bounds"])
    if trace.header.labeled and assignment.deterministic:
        est = epsilon_estimate(trace, assignment)
        payload["epsilon"] = reporting.epsilon_payload(est)
        cal = ece(trace, assignment, args.bins or DEFAULT_BINS)
        payload["calibration"] = reporting.calibration_payload(cal)
        text += "\n" + reporting.render_kv(
            "label-independence estimate", [("epsilon_hat", est.value)]
        )
        text += "\n" + reporting.calibration_text(payload["calibration"])
    _write(args, "report", payload, text)
    return 0


_COMMANDS = {
    "analyze": cmd_analyze,
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "epsilon": cmd_epsilon,
    "ece": cmd_ece,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        return _COMMANDS[args.command](args)
    except ExitboundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
