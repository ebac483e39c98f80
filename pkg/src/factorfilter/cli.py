"""Command line interface.

Subcommands: gen, train, filter, correlate, eval, demo.  Exit code 0 on
success, 1 on runtime failures (bad inputs, failed gates), 2 on usage
errors (argparse's convention).  All file outputs are written
atomically and contain no timestamps, so reruns with the same inputs
produce byte-identical artifacts.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .evaluation import (
    run_full_evaluation,
    write_association_csv,
    write_association_svg,
)
from .fileio import write_json
from .filtering import FilterPolicy, apply_filter, batch_audit_summary, save_policy
from .model import gradient_check, load_model, save_model, train
from .schema import Dataset, load_dataset, save_dataset
from .stats import association_matrix
from .synthworld import (
    demo_world_spec,
    exact_association_matrix,
    load_world,
    make_world,
    save_world,
)

GRADIENT_GATE = 1e-3


def _print_matrix(names, values, fmt="{:8.4f}") -> None:
    width = max(len(n) for n in names) + 2
    print(" " * width + "".join(f"{n:>9}" for n in names))
    for i, name in enumerate(names):
        row = "".join(fmt.format(v).rjust(9) for v in values[i])
        print(f"{name:<{width}}" + row)


def _parse_attr_list(text: str | None, schema) -> tuple[str, ...]:
    if not text:
        return schema.names
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    for n in names:
        schema.index(n)  # raises KeyError with the offending name
    return names


def _load_world_arg(args) -> "object":
    spec = load_world(args.world) if args.world else demo_world_spec()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    return spec


def cmd_gen(args) -> int:
    spec = _load_world_arg(args)
    dataset = make_world(spec, args.n, threads=args.threads)
    out = Path(args.out or "dataset.csv")
    save_dataset(dataset, out)
    world_out = out.with_name(out.stem + ".world.json")
    save_world(spec, world_out)
    print(f"wrote {out} ({dataset.n_samples} samples, "
          f"{dataset.feature_dim} features) and {world_out}")
    exact = exact_association_matrix(spec)
    print("planted pairwise association (exact Cramer's V):")
    _print_matrix(spec.schema.names, exact.values)
    if args.verbose:
        nontrivial = [
            (a, b, exact.values[i, j], exact.categories[i][j])
            for i, a in enumerate(spec.schema.names)
            for j, b in enumerate(spec.schema.names)
            if i < j and exact.values[i, j] > 0.005
        ]
        for a, b, v, cat in nontrivial:
            print(f"  {a} ~ {b}: V = {v:.4f} ({cat})")
    return 0


def cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    disentangle = _parse_attr_list(args.disentangle, dataset.schema)
    model = train(
        dataset,
        disentangle,
        factor_dim=args.factor_dim,
        residual_dim=args.residual_dim,
        beta=args.beta,
        lr=args.lr,
        epochs=args.epochs,
        seed=args.seed if args.seed is not None else 0,
    )
    val = model.val_accuracy_
    n_check = min(64, dataset.n_samples)
    worst = gradient_check(
        model, dataset.features[:n_check], dataset.labels[:n_check]
    )
    print(f"final loss {model.loss_history_[-1]:.6f} after "
          f"{len(model.loss_history_) - 1} steps")
    print(f"reconstruction error (relative, holdout): "
          f"{model.reconstruction_error_:.4f}")
    for name in dataset.schema.names:
        print(f"  val accuracy {name}: {val[name]:.4f}")
    print(f"gradient check: max relative error {worst:.3g}")
    if worst > GRADIENT_GATE:
        print(
            f"gradient check failed: {worst:.3g} > {GRADIENT_GATE:g}; "
            "refusing to save the model",
            file=sys.stderr,
        )
        return 1
    out = Path(args.out or "model.json")
    save_model(model, out)
    print(f"wrote {out}")
    if args.verbose:
        head = ", ".join(f"{v:.4f}" for v in model.loss_history_[:3])
        tail = ", ".join(f"{v:.4f}" for v in model.loss_history_[-3:])
        print(f"loss history: {head} ... {tail}")
    return 0


def cmd_filter(args) -> int:
    dataset = load_dataset(args.data)
    model = load_model(args.model)
    policy = FilterPolicy(
        mode=args.mode,
        attributes=_parse_attr_list(args.attributes, model.schema),
        residual=args.residual,
        seed=args.seed if args.seed is not None else 0,
    )
    batch = apply_filter(model, dataset.features, policy, ids=dataset.ids)
    out = Path(args.out or "filtered.csv")
    save_dataset(
        Dataset(model.schema, dataset.ids, batch.labels, batch.filtered_features),
        out,
    )
    policy_out = out.with_name(out.stem + ".policy.json")
    save_policy(policy, policy_out)
    audit_out = out.with_name(out.stem + ".audit.json")
    write_json(audit_out, batch_audit_summary(batch, model.schema))
    hidden = ", ".join(batch.hidden) if batch.hidden else "(nothing)"
    print(f"wrote {out}, {policy_out} and {audit_out}")
    print(f"hidden attributes: {hidden}; residual: {policy.residual}")
    return 0


def cmd_correlate(args) -> int:
    dataset = load_dataset(args.data)
    matrix = association_matrix(
        dataset.labels, dataset.schema, measure=args.measure, source="labels"
    )
    out = Path(args.out or "associations.csv")
    write_association_csv(matrix, out)
    write_association_svg(matrix, out.with_suffix(".svg"))
    label = "Cramer's V" if args.measure == "cramers_v" else "uncertainty U(row|col)"
    print(f"{label} over {dataset.n_samples} samples:")
    _print_matrix(dataset.schema.names, matrix.values)
    if matrix.categories is not None and args.verbose:
        for i, a in enumerate(dataset.schema.names):
            for j, b in enumerate(dataset.schema.names):
                if i < j:
                    print(f"  {a} ~ {b}: {matrix.categories[i][j]}")
    if args.world:
        exact = exact_association_matrix(load_world(args.world))
        if exact.measure == matrix.measure:
            diff = float(np.abs(exact.values - matrix.values).max())
            print(f"max |sampled - exact| = {diff:.4f}")
    print(f"wrote {out} and {out.with_suffix('.svg')}")
    return 0


def cmd_eval(args) -> int:
    spec = _load_world_arg(args)
    disentangle = _parse_attr_list(args.disentangle, spec.schema)
    if args.held_out is not None:
        spec.schema.index(args.held_out)
    out_dir = Path(args.out or "eval_out")
    report = run_full_evaluation(
        spec,
        disentangle,
        n_samples=args.n,
        seed=args.seed if args.seed is not None else 0,
        n_trials=args.trials,
        held_out=args.held_out,
        out_dir=out_dir,
        threads=args.threads,
        factor_dim=args.factor_dim,
        residual_dim=args.residual_dim,
        beta=args.beta,
        lr=args.lr,
        epochs=args.epochs,
    )
    print(f"wrote evaluation artifacts to {out_dir}/")
    val = report.model_metrics.get("val_accuracy", {})
    for name, acc in val.items():
        print(f"  val accuracy {name}: {acc:.4f}")
    for key, matrix in report.matrices.items():
        rel = matrix.relative
        diag = float(np.nanmean(np.diag(rel)))
        off = rel[~np.eye(len(matrix.attributes), dtype=bool)]
        print(f"  {key}: mean diag relative {diag:.4f}, "
              f"mean off-diag relative {float(np.nanmean(off)):.4f}")
    for key, study in report.studies.items():
        reg = study.regression
        print(f"  drop study {key}: r = {reg.r:.4f}, p = {reg.p_value:.3g}")
    unseen = report.unseen
    print(f"  unseen attribute {unseen.held_out}: clean probe "
          f"{unseen.probe_accuracy_clean:.4f}, majority {unseen.baseline:.4f}")
    return 0


def cmd_demo(args) -> int:
    out_dir = Path(args.out or "demo_out")
    demo_args = argparse.Namespace(
        world=None,
        seed=args.seed,
        n=args.n,
        trials=3,
        out=str(out_dir),
        threads=args.threads,
        disentangle=None,
        held_out=None,
        factor_dim=8,
        residual_dim=16,
        beta=0.5,
        lr=4.0,
        epochs=args.epochs,
        verbose=args.verbose,
    )
    print("demo: generating, training, filtering, and evaluating a "
          "six-attribute synthetic world")
    rc = cmd_eval(demo_args)
    if rc == 0:
        print(f"demo complete; inspect {out_dir}/report.json and the "
              "CSV/SVG files next to it")
    return rc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factorfilter",
        description="synthetic evaluation bench for attribute-level "
        "privacy filtering of factored representations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None, help="stream seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--out", type=str, default=None, help="output path")
        p.add_argument("--verbose", action="store_true", help="extra detail")

    p = sub.add_parser("gen", help="sample a labeled dataset from a world spec")
    p.add_argument("--world", type=str, default=None, help="world spec JSON")
    p.add_argument("--n", type=int, default=5000, help="number of samples")
    add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="fit a factor model on a dataset CSV")
    p.add_argument("--data", type=str, required=True, help="dataset CSV")
    p.add_argument("--disentangle", type=str, default=None,
                   help="comma-separated attribute names (default: all)")
    p.add_argument("--factor-dim", type=int, default=8)
    p.add_argument("--residual-dim", type=int, default=16)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=4.0)
    p.add_argument("--epochs", type=int, default=200)
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("filter", help="apply a privacy policy to a dataset")
    p.add_argument("--data", type=str, required=True, help="dataset CSV")
    p.add_argument("--model", type=str, required=True, help="model JSON")
    p.add_argument("--mode", choices=("opt_in", "opt_out"), required=True)
    p.add_argument("--attributes", type=str, required=True,
                   help="comma-separated attribute names for the policy")
    p.add_argument("--residual", choices=("keep", "swap"), default="keep")
    add_common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("correlate", help="pairwise association of labels")
    p.add_argument("--data", type=str, required=True, help="dataset CSV")
    p.add_argument("--measure", choices=("cramers_v", "uncertainty"),
                   default="cramers_v")
    p.add_argument("--world", type=str, default=None,
                   help="world spec JSON for the exact comparison")
    add_common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("eval", help="full generate/train/filter/score run")
    p.add_argument("--world", type=str, default=None, help="world spec JSON")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--disentangle", type=str, default=None)
    p.add_argument("--held-out", type=str, default=None,
                   help="attribute for the unseen-attribute study "
                   "(default: last schema attribute)")
    p.add_argument("--factor-dim", type=int, default=8)
    p.add_argument("--residual-dim", type=int, default=16)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=4.0)
    p.add_argument("--epochs", type=int, default=200)
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("demo", help="small end-to-end run on the demo world")
    p.add_argument("--n", type=int, default=2500)
    p.add_argument("--epochs", type=int, default=150)
    add_common(p)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyError as exc:
        print(f"error: unknown attribute {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
