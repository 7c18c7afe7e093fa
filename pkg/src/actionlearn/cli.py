"""Command-line front end.

Every subcommand is a batch step: read inputs, run, write outputs once.
Exit codes: 0 success, 1 pipeline failure, 2 usage error, 3 I/O or input
format error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .evaluation import ABLATIONS, NOISE_KINDS, NoiseSpec, cross_validate, inject_noise, score_domain
from .features import RegressionConfig
from .generators import GENERATORS, generate_traces
from .model import Domain
from .noise_filter import FilterConfig, discretise_fluents, filter_logical_noise
from .pddl import PddlSyntaxError, UnsupportedConstructError, parse_reference_domain, serialize_domain
from .refinement import RefineConfig
from .replay import UnknownActionError, replay_validate
from .synthesis import LearnConfig, learn_domain, report_json, robust_config
from .traces import TraceError, read_traces, write_traces
from .transitions import build_dataset, group_transitions

SEED_ENV = "ACTIONLEARN_SEED"

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return value


def _add_learning_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("learning")
    g.add_argument("--preset", choices=("default", "noisy"), default="default",
                   help="noisy: tolerant covering, trimmed regression scores (see README)")
    g.add_argument("--logical-threshold", type=_fraction, default=None, help="logical noise filter threshold (0.05)")
    g.add_argument("--alpha", type=float, default=None, help="cluster quality silhouette weight (0.6)")
    g.add_argument("--beta", type=float, default=None, help="cluster quality nSTD weight (0.4)")
    g.add_argument("--acceptance", type=float, default=None, help="cluster acceptance criterion (0.05)")
    g.add_argument("--irrelevance", type=_fraction, default=None, help="irrelevant feature ratio (0.05)")
    g.add_argument("--sr-threshold", type=float, default=None, help="regression acceptance threshold (0.02)")
    g.add_argument("--sr-timeout", type=float, default=None, help="regression timeout in seconds (300)")
    g.add_argument("--skip-filters", action="store_true")
    g.add_argument("--skip-refinement", action="store_true")
    g.add_argument("--jobs", type=_positive, default=1, help="parallel per-action pipelines")
    g.add_argument("--seed", type=int, default=None, help=f"default from ${SEED_ENV}, else 0")


def _seed(args: argparse.Namespace) -> int:
    return args.seed if args.seed is not None else _default_seed()


def _learn_config(args: argparse.Namespace) -> LearnConfig:
    try:
        return _build_config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _build_config(args: argparse.Namespace) -> LearnConfig:
    cfg = robust_config() if args.preset == "noisy" else LearnConfig()
    overrides = {
        name: getattr(args, name)
        for name in ("logical_threshold", "alpha", "beta", "acceptance")
        if getattr(args, name) is not None
    }
    filters = replace(cfg.filters, seed=_seed(args), **overrides)
    regression: RegressionConfig = cfg.regression
    if args.sr_threshold is not None:
        regression = replace(regression, acceptance_threshold=args.sr_threshold)
    if args.sr_timeout is not None:
        regression = replace(regression, timeout_seconds=args.sr_timeout)
    refinement: RefineConfig = cfg.refinement
    if args.irrelevance is not None:
        refinement = replace(refinement, irrelevance_ratio=args.irrelevance)
    return replace(
        cfg,
        filters=filters,
        regression=regression,
        refinement=refinement,
        skip_filters=args.skip_filters,
        skip_refinement=args.skip_refinement,
        jobs=args.jobs,
    )


def _traces(path: str) -> list:
    try:
        traces = read_traces(path)
    except FileNotFoundError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except (OSError, TraceError) as exc:
        raise InputError(str(exc)) from None
    if not traces:
        raise InputError(f"{path}: no trace files found")
    return traces


def _domain(path: str) -> Domain:
    try:
        return parse_reference_domain(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except (PddlSyntaxError, UnsupportedConstructError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def _json(obj: object) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_learn(args: argparse.Namespace) -> int:
    cfg = _learn_config(args)
    traces = _traces(args.traces)
    domain, report = learn_domain(traces, replace(cfg, domain_name=args.name))
    _write(args.out, serialize_domain(domain))
    _write(args.report, report_json(report))
    failed = sorted(k for k, v in report["actions"].items() if "error" in v)
    for name in failed:
        print(f"error: {name}: {report['actions'][name]['error']}", file=sys.stderr)
    return EXIT_PIPELINE if failed else EXIT_OK


def cmd_inject_noise(args: argparse.Namespace) -> int:
    traces = _traces(args.traces)
    noisy = inject_noise(traces, NoiseSpec(args.pct, args.kind, _seed(args)))
    try:
        paths = write_traces(noisy, args.out)
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc.strerror}") from None
    print(f"wrote {len(paths)} traces to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    learned, reference = _domain(args.domain), _domain(args.reference)
    per, means = score_domain(learned, reference)
    out = {"per_action": {k: m.as_dict() for k, m in per.items()}, "domain": means}
    _write(args.report, _json(out))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    domain = _domain(args.domain)
    traces = _traces(args.traces)
    results = []
    for i, trace in enumerate(traces):
        try:
            v = replay_validate(domain, trace)
            results.append({"trace": i, "valid": v.valid, "detail": v.detail, "step": v.step})
        except (UnknownActionError, ValueError) as exc:
            results.append({"trace": i, "valid": False, "detail": f"{type(exc).__name__}: {exc}", "step": None})
    valid = sum(r["valid"] for r in results)
    _write(args.report, _json({"traces": results, "valid": valid, "total": len(results)}))
    if args.require_valid and valid < len(results):
        return EXIT_PIPELINE
    return EXIT_OK


def cmd_xval(args: argparse.Namespace) -> int:
    cfg = _learn_config(args)
    traces = _traces(args.traces)
    reference = _domain(args.reference) if args.reference else None
    noise = NoiseSpec(args.noise, args.kind, _seed(args)) if args.noise > 0 else None
    ablation = None if args.ablation == "none" else args.ablation
    report = cross_validate(traces, args.k, replace(cfg, jobs=1), noise, reference, ablation, _seed(args), args.jobs)
    _write(args.report, report.to_json())
    return EXIT_OK


def cmd_gen_traces(args: argparse.Namespace) -> int:
    spec = GENERATORS[args.generator]()
    traces = generate_traces(spec, args.n, _seed(args), args.length)
    try:
        write_traces(traces, args.out)
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc.strerror}") from None
    if args.domain_out:
        _write(args.domain_out, serialize_domain(spec.domain))
    print(f"wrote {len(traces)} {spec.name} traces to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_inspect_dataset(args: argparse.Namespace) -> int:
    traces = _traces(args.traces)
    groups = group_transitions(traces)
    if args.action not in groups:
        known = ", ".join(sorted(groups)) or "none"
        raise UsageError(f"action {args.action!r} not in traces (known: {known})")
    objects: dict[str, str] = {}
    for t in traces:
        objects.update(t.objects)
    transitions = groups[args.action]
    d = build_dataset(args.action, len(transitions[0].action.args), transitions, objects or None)
    if args.filtered:
        cfg = replace(FilterConfig(), seed=_seed(args))
        d, _ = discretise_fluents(filter_logical_noise(d, cfg), cfg, LearnConfig().continuous_ratio)
    _write(args.out, d.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="actionlearn", description="Learn numeric planning action models from plan traces.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("learn", help="learn a PDDL domain from traces")
    p.add_argument("--traces", required=True, help="trace file or directory")
    p.add_argument("--out", default="-", help="PDDL output path (default stdout)")
    p.add_argument("--report", default=None, help="learning report JSON path")
    p.add_argument("--name", default="learned", help="domain name")
    _add_learning_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("inject-noise", help="write corrupted copies of traces")
    p.add_argument("--traces", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--pct", type=_fraction, required=True)
    p.add_argument("--kind", choices=NOISE_KINDS, default="mixed")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_inject_noise)

    p = sub.add_parser("evaluate", help="score a learned domain against a reference")
    p.add_argument("--domain", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("validate", help="replay traces through a domain")
    p.add_argument("--domain", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--require-valid", action="store_true", help="exit 1 unless every trace replays")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("xval", help="k-fold cross-validation")
    p.add_argument("--traces", required=True)
    p.add_argument("--reference", default=None, help="reference PDDL for precision/recall")
    p.add_argument("--k", type=_positive, default=5)
    p.add_argument("--noise", type=_fraction, default=0.0, help="share of training state elements to corrupt")
    p.add_argument("--kind", choices=NOISE_KINDS, default="mixed")
    p.add_argument("--ablation", choices=["none", *(a for a in ABLATIONS if a)], default="none")
    p.add_argument("--report", default=None)
    _add_learning_flags(p)
    p.set_defaults(func=cmd_xval)

    p = sub.add_parser("gen-traces", help="random-walk traces from a built-in domain")
    p.add_argument("--generator", choices=sorted(GENERATORS), required=True)
    p.add_argument("--n", type=_positive, default=50)
    p.add_argument("--length", type=_positive, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--domain-out", default=None, help="also write the generator's domain")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen_traces)

    p = sub.add_parser("inspect-dataset", help="dump one action's dataset as CSV")
    p.add_argument("--traces", required=True)
    p.add_argument("--action", required=True)
    p.add_argument("--filtered", action="store_true", help="after the noise filters")
    p.add_argument("--out", default="-")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_inspect_dataset)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # anything else is a pipeline failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
