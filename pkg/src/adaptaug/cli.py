"""Command-line surface.

Commands: perturb (apply one augmentation to an image), kid (distance
between two feature CSVs), solve (level solving against an evaluator),
simulate (the full augmented-training loop at desk scale), and plot
(SVG rendering of traces). Exit codes are stable for scripting:
0 success, 1 usage or parse error, 2 I/O failure, 3 evaluator protocol
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import augment
from .augment import ALL_KINDS, AugmentationError, AugmentationKind, AugmentationSpec
from .evaluators import EvaluatorSpecError, make_evaluator
from .image import ImageError, read_image, synthetic_image, write_image
from .loop import LoopConfig, LoopError, SimulatedLearner, training_loop
from .metrics import MetricsError, feature_set_from_csv, kid
from .plotsvg import PlotError, levels_json_to_trace, read_trace_csv, render_svg
from .sensitivity import (
    EvaluatorBinding,
    FatalEvaluatorError,
    SAConfig,
    level_sets_to_json,
    run_sensitivity_analysis,
    solve_levels_dense,
    write_trace_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_EVALUATOR = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; route through the
    # documented usage exit code instead
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptaug", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("perturb", help="apply one augmentation to an image")
    p.add_argument("input", help="input image (.ppm or anything Pillow reads)")
    p.add_argument("output", help="output image path")
    p.add_argument("--kind", required=True, help="augmentation kind, e.g. r_lighter, blur")
    p.add_argument("--alpha", type=float, required=True, help="magnitude in [0, 1]")
    p.add_argument("--seed", type=int, default=0, help="noise seed (used by kind=noise)")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("kid", help="KID between two feature CSV files")
    p.add_argument("features_a", help="perturbed feature CSV")
    p.add_argument("features_b", help="clean feature CSV")
    p.set_defaults(func=cmd_kid)

    p = sub.add_parser("solve", help="solve sensitivity levels against an evaluator")
    p.add_argument("--evaluator", required=True,
                   help="analytic:power:<p> | table:<csv> | exec:<command>")
    p.add_argument("--kinds", default="all",
                   help="comma-separated kind names or 'all' (default)")
    p.add_argument("--levels", type=int, default=5, help="level count L (default 5)")
    p.add_argument("--epsilon", type=float, default=0.05, help="stop threshold (default 0.05)")
    p.add_argument("--out", required=True, help="output level-set JSON path")
    p.add_argument("--compare-dense", type=int, metavar="N",
                   help="also run the N-point dense baseline and report its budget")
    p.add_argument("--trace", help="optional knot/level trace CSV for plotting")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run the augmented training loop")
    p.add_argument("config", help="TOML or JSON run configuration")
    p.add_argument("outdir", help="output directory for run artifacts")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="render a trace CSV or level-set JSON as SVG")
    p.add_argument("input", help="trace CSV (from solve/simulate) or level-set JSON")
    p.add_argument("output", help="output SVG path")
    p.set_defaults(func=cmd_plot)
    return parser


def _parse_kinds(text: str) -> list:
    if text.strip().lower() == "all":
        return list(ALL_KINDS)
    kinds = []
    for name in text.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            kinds.append(AugmentationKind(name))
        except ValueError:
            raise UsageError(f"unknown augmentation kind {name!r}")
    if not kinds:
        raise UsageError("no kinds selected")
    return kinds


def cmd_perturb(args) -> int:
    try:
        spec = AugmentationSpec(kind=AugmentationKind.from_name(args.kind),
                                magnitude=args.alpha, seed=args.seed)
    except AugmentationError as exc:
        raise UsageError(str(exc))
    img = read_image(args.input)
    try:
        out = augment.apply(spec, img)
    except AugmentationError as exc:
        raise UsageError(str(exc))
    write_image(out, args.output)
    print(json.dumps(augment.describe(spec)))
    return EXIT_OK


def cmd_kid(args) -> int:
    a = feature_set_from_csv(args.features_a, source_tag="perturbed")
    b = feature_set_from_csv(args.features_b, source_tag="clean")
    value = kid(a, b)
    print(f'{{"kid": {value:.9f}}}')
    return EXIT_OK


def cmd_solve(args) -> int:
    kinds = _parse_kinds(args.kinds)
    if args.levels < 2:
        raise UsageError("--levels must be >= 2")
    if args.epsilon <= 0:
        raise UsageError("--epsilon must be positive")
    cfg = SAConfig(levels=args.levels, epsilon=args.epsilon)
    evaluator_fn = make_evaluator(args.evaluator)
    binding = EvaluatorBinding(evaluator_fn,
                               concurrent_safe=getattr(evaluator_fn, "concurrent_safe", False))
    try:
        level_sets = run_sensitivity_analysis(binding, kinds, cfg)
        dense_counts = {}
        if args.compare_dense:
            for kind in kinds:
                dense_binding = EvaluatorBinding(evaluator_fn)
                dense = solve_levels_dense(dense_binding, kind, cfg, grid_n=args.compare_dense)
                dense_counts[kind] = dense.evaluations_used
    finally:
        if hasattr(evaluator_fn, "close"):
            evaluator_fn.close()

    Path(args.out).write_text(level_sets_to_json(level_sets))
    if args.trace:
        write_trace_csv(args.trace, [ls for ls in level_sets if ls.knots], g_max=cfg.g_max)
    for ls in level_sets:
        line = {"kind": ls.kind.value, "status": ls.status,
                "adaptive_evaluations": ls.evaluations_used}
        if ls.kind in dense_counts:
            line["dense_evaluations"] = dense_counts[ls.kind]
        print(json.dumps(line))
    return EXIT_OK


def _load_config(path: Path) -> dict:
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}")
    try:
        import tomllib  # py3.11+
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(text.decode())
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: invalid TOML: {exc}")


def _cfg_get(section: dict, path: str, default=None, required_type=None):
    node = section
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    if required_type is not None and not isinstance(node, required_type):
        raise UsageError(f"config field {path!r}: expected {required_type.__name__}, "
                         f"got {type(node).__name__}")
    return node


def cmd_simulate(args) -> int:
    config_path = Path(args.config)
    if not config_path.exists():
        raise FileNotFoundError(f"config file not found: {config_path}")
    raw = _load_config(config_path)

    try:
        loop_cfg = LoopConfig(
            max_iter=int(_cfg_get(raw, "loop.max_iter", 200)),
            r_v=int(_cfg_get(raw, "loop.r_v", 20)),
            r_sa=int(_cfg_get(raw, "loop.r_sa", 40)),
            warmup=int(_cfg_get(raw, "loop.warmup", 0)),
            seed=int(_cfg_get(raw, "seed", 0)),
            sort_order=str(_cfg_get(raw, "loop.sort_order", "ascending")),
        )
        sa_cfg = SAConfig(
            levels=int(_cfg_get(raw, "sa.levels", 5)),
            epsilon=float(_cfg_get(raw, "sa.epsilon", 0.05)),
            lam=float(_cfg_get(raw, "sa.lam", 2.0)),
            g_max=float(_cfg_get(raw, "sa.lam", 2.0)) * float(_cfg_get(raw, "sa.alpha_max", 1.0)),
            alpha_max=float(_cfg_get(raw, "sa.alpha_max", 1.0)),
            max_refinements=int(_cfg_get(raw, "sa.max_refinements", 50)),
        )
        learner = SimulatedLearner(
            ma_clean=float(_cfg_get(raw, "learner.ma_clean", 0.9)),
            ma_floor=float(_cfg_get(raw, "learner.ma_floor", 0.2)),
            width=float(_cfg_get(raw, "learner.width", 0.12)),
            adapt_rate=float(_cfg_get(raw, "learner.adapt_rate", 0.0)),
            kid_power=float(_cfg_get(raw, "learner.kid_power", 1.0)),
            midpoints=_cfg_get(raw, "learner.midpoints", {}, dict),
            drift=_cfg_get(raw, "learner.drift", {}, dict),
        )
        base_image = synthetic_image(
            width=int(_cfg_get(raw, "image.width", 64)),
            height=int(_cfg_get(raw, "image.height", 64)),
            seed=int(_cfg_get(raw, "seed", 0)),
        )
        kinds_field = _cfg_get(raw, "kinds", "all")
        kinds = _parse_kinds(",".join(kinds_field) if isinstance(kinds_field, list) else str(kinds_field))
    except (ValueError, LoopError) as exc:
        raise UsageError(f"bad simulate config: {exc}")

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "run.jsonl", "w") as sink:
        result = training_loop(learner, loop_cfg, sa_cfg, kinds=kinds,
                               base_image=base_image, log_sink=sink)

    if result.final_policy is not None:
        from .policy import policy_to_json

        (outdir / "policy.json").write_text(policy_to_json(result.final_policy))
    with open(outdir / "levels_trajectory.csv", "w", newline="") as fh:
        fh.write("round_iter,kind,level_index,alpha,uncertainty,ma\n")
        for iteration, level_sets in result.sa_rounds:
            for ls in level_sets:
                for idx, (alpha, unc, ma) in enumerate(
                    zip(ls.levels, ls.uncertainties, ls.level_ma)
                ):
                    fh.write(f"{iteration},{ls.kind.value},{idx},{alpha!r},{unc!r},{ma!r}\n")
    with open(outdir / "trace.csv", "w", newline="") as fh:
        fh.write("kind,round,point_type,x,y\n")
    for iteration, level_sets in result.sa_rounds:
        write_trace_csv(outdir / "trace.csv", [ls for ls in level_sets if ls.knots],
                        round_index=iteration, append=True, g_max=sa_cfg.g_max)
    print(json.dumps({
        "iterations": loop_cfg.max_iter,
        "sa_rounds": len(result.sa_rounds),
        "peak_augmented_bytes": result.meter.peak,
        "single_image_bytes": base_image.nbytes,
    }))
    return EXIT_OK


def cmd_plot(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"plot input not found: {path}")
    try:
        if path.suffix.lower() == ".json":
            trace = levels_json_to_trace(json.loads(path.read_text()))
        else:
            trace = read_trace_csv(path)
    except (PlotError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"unparseable plot input {path}: {exc}")
    svg = render_svg(trace)
    Path(args.output).write_text(svg)
    return EXIT_OK


def main(argv=None) -> int:
    # order matters below: the evaluator and image errors subclass
    # ValueError/OSError and must be matched before the generic buckets
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvaluatorSpecError, FatalEvaluatorError) as exc:
        print(f"evaluator error: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    except ImageError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MetricsError, AugmentationError, PlotError, LoopError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
