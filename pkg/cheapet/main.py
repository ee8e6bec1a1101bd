"""cheapet command line: fit, calibrate, evaluate, sweep, serve.

Results go to stdout as JSON; logs go to stderr.

Exit codes: 0 success, 1 invalid input or configuration, 2 I/O or remote
failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core.evaluation import summarize, sweep_curve, system_accuracy
from .core.exceptions import (
    ConfigurationError,
    NumericError,
    RemoteError,
    SingularityError,
    UnknownClassError,
    ValidationError,
)
from .core.models import PredictionRecord, RoutingPolicy, SupervisorKind
from .core.routing import calibrate_threshold
from .core.supervision import DEFAULT_LAMBDA_SCALE, fit_mdsa, score_trace
from .infrastructure.config import get_config, import_config, load_gateway_config, policy_to_config
from .infrastructure.logging import Debug
from .infrastructure.model_store import load_mdsa, save_mdsa
from .infrastructure.save_service import FORMATS, emit_report
from .infrastructure.trace_io import annotate_file, load_trace
from .infrastructure.weights import load_weights

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_USAGE = 64


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that exits with EX_USAGE (64) on bad arguments."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj: dict) -> None:
    print(json.dumps(obj))


def _scores_for(args: argparse.Namespace, records: Sequence[PredictionRecord]) -> tuple[SupervisorKind, np.ndarray]:
    kind = SupervisorKind.parse(args.supervisor)
    mdsa = None
    if kind is SupervisorKind.MDSA:
        if not args.mdsa_model:
            raise ConfigurationError("--supervisor mdsa needs --mdsa-model")
        mdsa = load_mdsa(args.mdsa_model)
    return kind, score_trace(records, kind, mdsa)


def cmd_fit_mdsa(args: argparse.Namespace) -> int:
    records = load_trace(args.trace, strict=not args.permissive)
    if not records:
        raise ValidationError(f"{args.trace}: trace is empty")
    labels = None
    if not args.global_model:
        if args.label_source == "predicted":
            labels = [r.local_label for r in records]
        else:
            missing = [r.id for r in records if r.true_label is None]
            if missing:
                raise ValidationError(
                    f"record {missing[0]!r} has no true_label (use --label-source predicted)"
                )
            labels = [r.true_label for r in records]
    model = fit_mdsa(
        [r.activation for r in records],
        labels,
        class_conditional=not args.global_model,
        lambda_scale=args.lambda_scale,
    )
    save_mdsa(model, args.out)
    _emit(
        {
            "out": str(args.out),
            "classes": [str(c) for c in model.classes],
            "dimension": model.dimension,
            "class_conditional": model.class_conditional,
            "lambda_scale": model.lambda_scale,
        }
    )
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    records = load_trace(args.trace, strict=not args.permissive)
    kind, scores = _scores_for(args, records)
    result = calibrate_threshold(scores, args.target_forward)
    policy = RoutingPolicy(kind, result.threshold, args.target_forward)
    _emit({**result.to_dict(), "supervisor": kind.value, "config": policy_to_config(policy)})
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    records = load_trace(args.trace, strict=not args.permissive)
    kind, scores = _scores_for(args, records)

    if args.threshold is not None:
        threshold, origin = args.threshold, "given"
    else:
        same = Path(args.calibration_trace).resolve() == Path(args.trace).resolve()
        if same:
            calibration_scores = scores
        else:
            _, calibration_scores = _scores_for(
                args, load_trace(args.calibration_trace, strict=not args.permissive)
            )
        threshold = calibrate_threshold(calibration_scores, args.target_forward).threshold
        origin = "post-hoc" if same else "held-out"
        if same:
            Debug.warning(
                f"evaluate: threshold calibrated on the evaluated trace {args.trace}; "
                "accuracy is post-hoc, not held-out"
            )

    outcome = system_accuracy(
        records,
        scores,
        threshold,
        uniform_cost=not args.cost_weighted,
        allow_missing_remote=args.allow_missing_remote,
    )
    _emit(
        {
            "supervisor": kind.value,
            "threshold": threshold,
            "threshold_origin": origin,
            **outcome.to_dict(),
        }
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    records = load_trace(args.trace, strict=not args.permissive)
    kind, scores = _scores_for(args, records)
    report = sweep_curve(
        records,
        scores,
        uniform_cost=not args.cost_weighted,
        supervisor_kind=kind,
        trace_id=Path(args.trace).stem,
        allow_missing_remote=args.allow_missing_remote,
    )
    emit_report(report, args.out, args.format, sidecar=not args.no_sidecar)
    if args.summary:
        _emit(summarize(report, args.budget))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    kinds = args.supervisor or ["sm"]
    for trace_path in args.trace:
        records = load_trace(trace_path, strict=not args.permissive)
        for kind_name in kinds:
            args.supervisor = kind_name
            kind, scores = _scores_for(args, records)
            report = sweep_curve(
                records,
                scores,
                uniform_cost=not args.cost_weighted,
                supervisor_kind=kind,
                trace_id=Path(trace_path).stem,
                allow_missing_remote=args.allow_missing_remote,
            )
            _emit(summarize(report, args.budget))
    return EXIT_OK


def cmd_annotate(args: argparse.Namespace) -> int:
    model = load_weights(args.weights)
    count = annotate_file(model, args.inputs, args.out)
    _emit({"out": str(args.out), "records": count})
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .gateway.app import serve

    serve(load_gateway_config(args.config))
    return EXIT_OK


def cmd_stub_remote(args: argparse.Namespace) -> int:
    from .infrastructure.mocks.stub_remote import StubSettings, run_stub

    try:
        settings = StubSettings(
            accuracy=args.accuracy,
            latency_ms=args.latency_ms,
            failure_rate=args.failure_rate,
            seed=args.seed,
            num_classes=args.num_classes,
            fail_first=args.fail_first,
            report=args.report,
            tokens_per_request=args.tokens,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    run_stub(args.host, args.port, settings)
    return EXIT_OK


def _add_trace_options(p: argparse.ArgumentParser, supervisor: bool = True) -> None:
    p.add_argument("--trace", required=True, help="JSONL prediction trace")
    p.add_argument("--permissive", action="store_true", help="repair local_label mismatches")
    if supervisor:
        p.add_argument("--supervisor", default="sm", choices=[k.value for k in SupervisorKind])
        p.add_argument("--mdsa-model", help="fitted MDSA model (for --supervisor mdsa)")


def _add_eval_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cost-weighted", action="store_true", help="weight savings by remote_cost_units")
    p.add_argument(
        "--allow-missing-remote",
        action="store_true",
        help="count forwarded records without remote_label as wrong",
    )


def build_parser() -> CliParser:
    defaults = import_config()
    stub = defaults.get("stub", {})
    level_default = defaults.get("debug", {}).get("level_default", "info")

    parser = CliParser(prog="cheapet", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--log-level", default=level_default, choices=list(Debug.LEVEL_NAMES)
    )
    parser.add_argument("--log-file", action="store_true", help="also write a log file")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("fit-mdsa", help="fit MDSA statistics from a trace")
    _add_trace_options(p, supervisor=False)
    p.add_argument("--out", required=True)
    p.add_argument("--global", dest="global_model", action="store_true", help="one global class")
    p.add_argument(
        "--lambda-scale",
        type=float,
        default=float(get_config("supervision").get("lambda_scale", DEFAULT_LAMBDA_SCALE)),
    )
    p.add_argument("--label-source", choices=["true", "predicted"], default="true")
    p.set_defaults(func=cmd_fit_mdsa)

    p = sub.add_parser("calibrate", help="threshold for a target forward fraction")
    _add_trace_options(p)
    p.add_argument("--target-forward", type=float, required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="system accuracy at one threshold")
    _add_trace_options(p)
    _add_eval_options(p)
    p.add_argument("--threshold", type=float)
    p.add_argument("--calibration-trace", help="calibrate the threshold on this trace")
    p.add_argument("--target-forward", type=float)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="cost/accuracy curve over every routing partition")
    _add_trace_options(p)
    _add_eval_options(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--summary", action="store_true", help="print notable points as JSON")
    p.add_argument("--budget", type=float, action="append", help="max forward fraction to report")
    p.add_argument("--no-sidecar", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="summaries for several traces and supervisors")
    p.add_argument("--trace", action="append", required=True)
    p.add_argument("--permissive", action="store_true")
    p.add_argument(
        "--supervisor", action="append", choices=[k.value for k in SupervisorKind]
    )
    p.add_argument("--mdsa-model")
    p.add_argument("--budget", type=float, action="append")
    _add_eval_options(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("annotate", help="run the local model over inputs, write a trace")
    p.add_argument("--weights", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("serve", help="run the gateway")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("stub-remote", help="run the deterministic remote stub")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(stub.get("port", 8081)))
    p.add_argument("--accuracy", type=float, default=float(stub.get("accuracy", 0.9)))
    p.add_argument("--latency-ms", type=float, default=float(stub.get("latency_ms", 0)))
    p.add_argument("--failure-rate", type=float, default=float(stub.get("failure_rate", 0.0)))
    p.add_argument("--seed", type=int, default=int(stub.get("seed", 0)))
    p.add_argument("--num-classes", type=int, default=int(stub.get("num_classes", 2)))
    p.add_argument("--fail-first", type=int, default=0)
    p.add_argument("--report", choices=["tokens", "cost_units"], default="tokens")
    p.add_argument("--tokens", type=int, default=int(stub.get("tokens_per_request", 4000)))
    p.set_defaults(func=cmd_stub_remote)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "evaluate":
        if (args.threshold is None) == (args.calibration_trace is None):
            parser.error("evaluate needs exactly one of --threshold or --calibration-trace")
        if args.calibration_trace is not None and args.target_forward is None:
            parser.error("--calibration-trace needs --target-forward")

    Debug.init(
        debug_level=Debug.level_from_name(args.log_level),
        app_name=get_config("application").get("name", "cheapet"),
        log_to_file=args.log_file,
    )
    sys.excepthook = Debug.exception_hook
    Debug.debug(f"{args.command}: {vars(args)}")

    try:
        return args.func(args)
    except (
        ValidationError,
        ConfigurationError,
        SingularityError,
        UnknownClassError,
        NumericError,
    ) as exc:
        Debug.error(f"{args.command}: {exc}")
        return EXIT_INVALID
    except (OSError, RemoteError) as exc:
        Debug.error(f"{args.command}: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
