"""Command-line interface.

Subcommands: generate, train, evaluate, ablate, lambda, compare.  Reports
go to stdout as fixed-format CSV (6-decimal numbers) so runs with the same
seed produce byte-identical output.  Usage errors exit with 2, data and
model errors with 1.

The --bundle flag falls back to the CITETREND_DATA_DIR environment
variable when omitted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .data import (DataError, SyntheticConfig, bundle_corpus,
                   bundle_presets, generate_synthetic, load_bundle,
                   save_bundle)
from .errors import CitetrendError
from .experiments import (TrainConfig, ablate_edges, ablation_csv,
                          compare_models, eval_report_csv, evaluate,
                          lambda_predictivity, run_model)
from .experiments import label_vector
from .features import build_features
from .graph import label_by_percentile, split_by_year
from .models import (count_parameters, load_checkpoint, prepare_inputs,
                     save_checkpoint)

from dataclasses import asdict, replace


def _add_bundle_flag(parser: argparse.ArgumentParser) -> None:
    env = os.environ.get("CITETREND_DATA_DIR")
    parser.add_argument("--bundle", default=env, required=env is None,
                        help="bundle directory (default: $CITETREND_DATA_DIR)")


def _add_split_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--target-year", type=int, required=True)
    parser.add_argument("--window", type=int, default=10)
    parser.add_argument("--percentile", type=float, default=0.9)


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=150)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--weight-decay", type=float, default=5e-4)
    parser.add_argument("--dropout", type=float, default=0.1)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        dropout=args.dropout,
        percentile=args.percentile,
        window_years=args.window,
        seed=args.seed,
    )


def _pipeline(args):
    graph = load_bundle(args.bundle)
    split = split_by_year(graph, args.target_year, args.window)
    features = build_features(graph, split)
    labels = label_by_percentile(graph, split.node_ids, args.percentile)
    return graph, split, features, labels


def _emit(text: str, out_path: str | None) -> None:
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_generate(args) -> int:
    payload = {}
    if args.preset:
        presets = bundle_presets()
        if args.preset not in presets:
            raise DataError(f"unknown preset {args.preset!r} "
                            f"(have: {', '.join(sorted(presets))})")
        payload = asdict(presets[args.preset])
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                payload.update(json.load(fh))
            except json.JSONDecodeError as exc:
                raise DataError(f"{args.config}: invalid JSON ({exc.msg})") from exc
    if args.seed is not None:
        payload["seed"] = args.seed
    try:
        cfg = SyntheticConfig(**payload)
    except TypeError as exc:
        raise DataError(f"{args.config}: {exc}") from exc
    graph = generate_synthetic(cfg)
    save_bundle(graph, args.out, corpus=cfg.corpus)
    sys.stdout.write(
        f"{args.out}: {graph.n_nodes} nodes, {graph.n_edges} edges\n")
    return 0


def _cmd_train(args) -> int:
    graph, split, features, labels = _pipeline(args)
    config = _train_config(args)
    model, report = run_model(args.model, graph, split, features, labels, config)
    if args.out:
        save_checkpoint(model, args.out)
    _emit(eval_report_csv([report]), None)
    return 0


def _cmd_evaluate(args) -> int:
    model = load_checkpoint(args.ckpt)
    graph, split, features, labels = _pipeline(args)
    inputs = prepare_inputs(graph, split, features)
    if model.kind == "gnn":
        cache = model.prior_stage(inputs)
        logits_t = model.predict_targets(cache, inputs.plan.target_ids,
                                         inputs.target_blocks(),
                                         split.target_edges)
    else:
        _, logits = model.forward(inputs, mode="eval")
        logits_t = logits.data
    y_t = label_vector(labels, inputs.plan.target_ids)
    report = evaluate(logits_t, y_t, inputs.plan.target_ids)
    report = replace(report, model=model.kind, seed=model.seed,
                     lambda_=lambda_predictivity(split),
                     params=count_parameters(model))
    _emit(eval_report_csv([report]), None)
    return 0


def _cmd_ablate(args) -> int:
    graph, split, features, labels = _pipeline(args)
    config = _train_config(args)
    fractions = [float(x) for x in args.fractions.split(",") if x]
    seeds = [args.seed + k for k in range(args.seeds)]
    curve = ablate_edges(graph, split, fractions, config, seeds=seeds,
                         features=features, labels=labels)
    _emit(ablation_csv(curve), args.out)
    return 0


def _cmd_lambda(args) -> int:
    graph = load_bundle(args.bundle)
    split = split_by_year(graph, args.target_year, args.window)
    value = lambda_predictivity(split)
    sys.stdout.write(("inf" if value == float("inf") else f"{value:.6f}") + "\n")
    return 0


def _cmd_compare(args) -> int:
    graph, split, features, labels = _pipeline(args)
    config = _train_config(args)
    reports = compare_models(graph, split, features, labels, config)
    _emit(eval_report_csv(reports), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citetrend",
        description="Citation-trend prediction: graph attention vs. "
                    "parameter-matched baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic graph bundle")
    p.add_argument("--preset", help="named generator settings "
                   "(full, mid, toy)")
    p.add_argument("--config",
                   help="JSON file of generator settings; "
                   "overrides preset fields")
    p.add_argument("--out", required=True, help="bundle directory to write")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train one model and report CSV")
    _add_bundle_flag(p)
    _add_split_flags(p)
    _add_train_flags(p)
    p.add_argument("--model", choices=("gnn", "mlp", "logistic"),
                   required=True)
    p.add_argument("--out", help="checkpoint file to write")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on target nodes")
    _add_bundle_flag(p)
    _add_split_flags(p)
    p.add_argument("--ckpt", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("ablate", help="edge-removal curve for gnn and mlp")
    _add_bundle_flag(p)
    _add_split_flags(p)
    _add_train_flags(p)
    p.add_argument("--fractions", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
                   help="comma-separated removal fractions, ascending")
    p.add_argument("--seeds", type=int, default=5,
                   help="number of consecutive seeds starting at --seed")
    p.add_argument("--out", help="also write the CSV here")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("lambda", help="print the predictivity parameter")
    _add_bundle_flag(p)
    p.add_argument("--target-year", type=int, required=True)
    p.add_argument("--window", type=int, default=10)
    p.set_defaults(func=_cmd_lambda)

    p = sub.add_parser("compare", help="train gnn, mlp, and logistic")
    _add_bundle_flag(p)
    _add_split_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", help="also write the CSV here")
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CitetrendError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
