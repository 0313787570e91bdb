"""Command-line surface for batch use.

Subcommands: import-csv, fit, eval, predict, incremental, explain, rules,
sweep, inspect. All IO goes through files; given identical flags and inputs
every subcommand writes byte-identical outputs (wall-clock timings are opt-in
via --timings for exactly that reason).

Exit codes: 0 ok, 2 usage/validation, 3 IO/format, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bundle as bundle_mod
from .bundle import EmbeddingDataset, load_bundle, normalize, save_bundle
from .decision import DecisionConfig, predict
from .errors import ProtoclassError, UsageError
from .explain import emit_rules, explain, report_to_markdown
from .incremental import IncrementPlan, run_plan
from .metrics import (
    aggregate_runs,
    evaluate,
    repeat_runs,
    results_csv,
    results_json_dict,
    sensitivity_sweep,
    step_metrics_csv,
)
from .selection import (
    BudgetSpec,
    PrototypeSet,
    fit_prototypes,
    load_prototypes,
    save_prototypes,
)


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("IDEAL_JOBS", "1")))
    except ValueError:
        return 1


def _add_budget_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--budget-frac", type=float, help="per-class budget as a fraction in (0, 1]")
    group.add_argument("--budget-count", type=int, help="fixed per-class prototype count")


def _add_method_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--method",
        required=True,
        choices=["random", "kmeans", "kmeans_nearest", "xdnn", "elm"],
    )
    _add_budget_flags(parser)
    parser.add_argument("--radius", type=float, help="absorption radius (elm only)")
    parser.add_argument("--max-iters", type=int, default=300, help="k-means iteration cap")
    parser.add_argument("--tol", type=float, default=1e-4, help="k-means relative inertia tolerance")
    parser.add_argument("--restarts", type=int, default=10, help="k-means restarts, best inertia wins")


def _add_decision_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rule", choices=["wta", "knn"], default="wta")
    parser.add_argument("--k", type=int, default=1, help="neighbors for --rule knn")
    parser.add_argument(
        "--scores",
        action="store_true",
        help="attach exp-normalized per-class similarity scores",
    )


def _budget_from_args(args, method: str) -> BudgetSpec | None:
    if args.budget_frac is not None:
        budget = BudgetSpec("fraction_of_class", args.budget_frac)
    elif args.budget_count is not None:
        budget = BudgetSpec("fixed_per_class", args.budget_count)
    else:
        budget = None
    if method in ("random", "kmeans", "kmeans_nearest") and budget is None:
        raise UsageError(f"method {method} requires --budget-frac or --budget-count")
    if method == "elm" and args.radius is None:
        raise UsageError("method elm requires --radius")
    return budget


def _method_params(args) -> dict:
    if args.method == "elm":
        return {"radius": args.radius}
    if args.method in ("kmeans", "kmeans_nearest"):
        return {
            "max_iters": args.max_iters,
            "tol": args.tol,
            "restarts": getattr(args, "restarts", 10),
        }
    return {}


def _decision_from_args(args) -> DecisionConfig:
    rule = "knn" if args.rule == "knn" else "winner_takes_all"
    transform = "exp_normalized" if args.scores else "raw_distance"
    return DecisionConfig(rule=rule, k=args.k, similarity_transform=transform)


def _aligned_test(dataset: EmbeddingDataset, pset: PrototypeSet) -> EmbeddingDataset:
    """Bring query vectors into the space the prototypes were fitted in."""
    want = pset.manifest_ref.get("normalization", "none")
    have = dataset.manifest.normalization
    if dataset.dim != pset.dim:
        raise UsageError(f"query dim {dataset.dim} != prototype dim {pset.dim}")
    if have == want:
        return dataset
    if have == "none" and pset.normalizer is not None:
        return pset.normalizer.apply_dataset(dataset)
    raise UsageError(
        f"queries are normalized with {have!r} but prototypes expect {want!r}"
    )


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text)


def cmd_import_csv(args) -> int:
    dataset = bundle_mod.import_csv(args.input, dataset_name=args.name, backbone_id=args.backbone_id)
    save_bundle(dataset, args.out)
    print(f"wrote {args.out}: {len(dataset)} records, dim {dataset.dim}")
    return 0


def cmd_fit(args) -> int:
    budget = _budget_from_args(args, args.method)
    train = load_bundle(args.train)
    normalizer = None
    if args.normalize != "none":
        train, normalizer = normalize(train, args.normalize)
    pset = fit_prototypes(
        train,
        args.method,
        params=_method_params(args),
        budget=budget,
        seed=args.seed,
        normalizer=normalizer,
        jobs=args.jobs,
    )
    save_prototypes(pset, args.out)
    print(f"wrote {args.out}: {pset.total_count()} prototypes over {len(pset.class_ids)} classes")
    return 0


def cmd_eval(args) -> int:
    test = load_bundle(args.test)
    config = _decision_from_args(args)
    if args.prototypes is not None:
        if args.train is not None:
            raise UsageError("--prototypes and --train are mutually exclusive")
        pset = load_prototypes(args.prototypes)
        result = evaluate(pset, config, _aligned_test(test, pset), seed=pset.seed)
        budget = None
        if "budget_mode" in pset.method_params:
            budget = BudgetSpec(
                pset.method_params["budget_mode"], pset.method_params["budget_value"]
            )
        aggregates = [aggregate_runs(pset.method, budget, [result])]
    else:
        if args.train is None:
            raise UsageError("eval needs --prototypes or --train")
        if args.method is None:
            raise UsageError("eval with --train requires --method")
        budget = _budget_from_args(args, args.method)
        train = load_bundle(args.train)
        if args.normalize != "none":
            train, normalizer = normalize(train, args.normalize)
            test_aligned = normalizer.apply_dataset(test)
        else:
            test_aligned = test
        aggregates = [
            repeat_runs(
                train,
                test_aligned,
                args.method,
                _method_params(args),
                budget,
                config,
                n_runs=args.runs,
                base_seed=args.seed,
                jobs=args.jobs,
            )
        ]
    _write_text(args.out, results_csv(aggregates, include_timings=args.timings))
    if args.json:
        _write_text(
            args.json,
            json.dumps(results_json_dict(aggregates, include_timings=args.timings), indent=2)
            + "\n",
        )
    agg = aggregates[0]
    print(f"accuracy {agg.accuracy_mean:.4f}  macro-F1 {agg.f1_mean:.4f}  ({agg.n_prototypes} prototypes)")
    return 0


def cmd_predict(args) -> int:
    pset = load_prototypes(args.prototypes)
    queries = _aligned_test(load_bundle(args.queries), pset)
    config = _decision_from_args(args)
    class_ids = pset.class_ids
    lines = ["index,label,predicted,distance" + ("".join(f",score_{c}" for c in class_ids) if args.scores else "")]
    for rec in queries:
        pred = predict(rec.vector, pset, config)
        row = f"{rec.index},{rec.label},{pred.class_id},{pred.distance!r}"
        if args.scores:
            row += "".join(f",{pred.scores[c]!r}" for c in class_ids)
        lines.append(row)
    _write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {args.out}: {len(queries)} predictions")
    return 0


def cmd_incremental(args) -> int:
    budget = _budget_from_args(args, args.method)
    train = load_bundle(args.train)
    test = load_bundle(args.test)
    if args.normalize != "none":
        train, normalizer = normalize(train, args.normalize)
        test = normalizer.apply_dataset(test)
    if args.class_order:
        order = tuple(int(c) for c in args.class_order.split(","))
    else:
        order = tuple(train.present_classes())
    plan = IncrementPlan(
        class_order=order,
        increment=args.increment,
        method=args.method,
        method_params=_method_params(args),
        budget=budget,
        seed=args.seed,
    )
    state = run_plan(train, test, plan, config=_decision_from_args(args), n_runs=args.runs)
    _write_text(args.out, step_metrics_csv(state.step_metrics, include_timings=args.timings))
    if args.prototypes_out:
        save_prototypes(state.to_prototype_set(), args.prototypes_out)
    last = state.step_metrics[-1]
    print(f"{len(state.step_metrics)} steps, final accuracy {last.accuracy_mean:.4f} over {last.n_classes} classes")
    return 0


def cmd_explain(args) -> int:
    pset = load_prototypes(args.prototypes)
    queries = _aligned_test(load_bundle(args.queries), pset)
    if not 0 <= args.query < len(queries):
        raise UsageError(f"--query {args.query} out of range [0, {len(queries)})")
    rec = queries.record(args.query)
    report = explain(
        rec.vector,
        pset,
        k_top=args.top,
        k_bottom=args.bottom,
        query_index=rec.index,
        ground_truth=rec.label,
    )
    class_names = queries.manifest.class_names
    _write_text(args.out, json.dumps(report.to_json_dict(class_names), indent=2) + "\n")
    if args.md:
        _write_text(args.md, report_to_markdown(report, class_names))
    print(f"query {rec.index}: predicted class {report.predicted_class} "
          f"({class_names[report.predicted_class]}), nearest distance {report.ranking[0].distance:.3f}")
    return 0


def cmd_rules(args) -> int:
    pset = load_prototypes(args.prototypes)
    ruleset = emit_rules(pset, max_antecedents=args.max_antecedents)
    names = None
    if args.class_names:
        names = tuple(args.class_names.split(","))
    _write_text(args.out, ruleset.render_text(names))
    if args.json:
        _write_text(args.json, json.dumps(ruleset.to_json_dict(names), indent=2) + "\n")
    print(f"wrote {args.out}: {len(ruleset.rules)} rules")
    return 0


def cmd_sweep(args) -> int:
    budgets = []
    if args.budget_counts:
        budgets += [BudgetSpec("fixed_per_class", int(v)) for v in args.budget_counts.split(",")]
    if args.budget_fracs:
        budgets += [BudgetSpec("fraction_of_class", float(v)) for v in args.budget_fracs.split(",")]
    if not budgets:
        raise UsageError("sweep needs --budget-counts and/or --budget-fracs")
    train = load_bundle(args.train)
    test = load_bundle(args.test)
    if args.normalize != "none":
        train, normalizer = normalize(train, args.normalize)
        test = normalizer.apply_dataset(test)
    aggregates = sensitivity_sweep(
        train,
        test,
        budgets,
        args.method,
        _method_params(args),
        _decision_from_args(args),
        n_runs=args.runs,
        base_seed=args.seed,
        jobs=args.jobs,
    )
    _write_text(args.out, results_csv(aggregates, include_timings=args.timings))
    if args.json:
        _write_text(
            args.json,
            json.dumps(results_json_dict(aggregates, include_timings=args.timings), indent=2)
            + "\n",
        )
    print(f"wrote {args.out}: {len(aggregates)} budgets")
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.input)
    head = path.read_bytes()[:8]
    if head == bundle_mod.MAGIC:
        dataset = load_bundle(path)
        m = dataset.manifest
        print(f"embedding bundle: {path}")
        print(f"  dataset_name:  {m.dataset_name}")
        print(f"  backbone_id:   {m.backbone_id}")
        print(f"  records:       {m.record_count}")
        print(f"  dim:           {m.dim}")
        print(f"  normalization: {m.normalization}")
        print(f"  classes:       {len(m.class_names)}")
        counts = np.bincount(dataset.labels, minlength=len(m.class_names))
        for cid, name in enumerate(m.class_names):
            print(f"    [{cid}] {name}: {int(counts[cid])} records")
        return 0
    from .selection import PROTO_MAGIC

    if head == PROTO_MAGIC:
        pset = load_prototypes(path)
        print(f"prototype file: {path}")
        print(f"  method: {pset.method}")
        print(f"  seed:   {pset.seed}")
        print(f"  dim:    {pset.dim}")
        print(f"  params: {json.dumps(pset.method_params, sort_keys=True)}")
        print(f"  total:  {pset.total_count()} prototypes")
        for cid, protos in pset.per_class.items():
            kinds = sum(1 for p in protos if p.kind == "exemplar")
            print(f"    class {cid}: {len(protos)} prototypes ({kinds} exemplars)")
        return 0
    raise UsageError(f"{path}: unrecognized magic {head!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoclass",
        description="Prototype-based classification over embedding bundles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import-csv", help="convert label,v1,...,vd rows to a bundle")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default=None, help="dataset name for the manifest")
    p.add_argument("--backbone-id", default="csv-import")
    p.set_defaults(func=cmd_import_csv)

    p = sub.add_parser("fit", help="select prototypes and write a prototype file")
    p.add_argument("--train", required=True)
    _add_method_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", choices=["none", "unit_l2", "zscore"], default="none")
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="accuracy/macro-F1 over a test bundle")
    p.add_argument("--test", required=True)
    p.add_argument("--prototypes", help="evaluate an existing prototype file")
    p.add_argument("--train", help="or fit internally over --runs seeds")
    p.add_argument("--method", choices=["random", "kmeans", "kmeans_nearest", "xdnn", "elm"])
    _add_budget_flags(p)
    p.add_argument("--radius", type=float)
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--normalize", choices=["none", "unit_l2", "zscore"], default="none")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    _add_decision_flags(p)
    p.add_argument("--timings", action="store_true", help="include wall-clock columns (non-reproducible)")
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--json", help="optional JSON mirror with confusion matrices")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="per-record predictions CSV")
    p.add_argument("--prototypes", required=True)
    p.add_argument("--queries", required=True)
    _add_decision_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("incremental", help="class-incremental protocol, step metrics CSV")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    _add_method_flags(p)
    p.add_argument("--increment", type=int, required=True, help="classes per step")
    p.add_argument("--class-order", help="comma-separated class ids (default: ascending)")
    p.add_argument("--normalize", choices=["none", "unit_l2", "zscore"], default="none")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_decision_flags(p)
    p.add_argument("--timings", action="store_true")
    p.add_argument("--out", required=True, help="step metrics CSV path")
    p.add_argument("--prototypes-out", help="also write the final prototype file")
    p.set_defaults(func=cmd_incremental)

    p = sub.add_parser("explain", help="ranked-prototype report for one query")
    p.add_argument("--prototypes", required=True)
    p.add_argument("--queries", required=True, help="bundle holding the query records")
    p.add_argument("--query", type=int, required=True, help="record index into --queries")
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--bottom", type=int, default=3)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--md", help="optional Markdown rendering")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("rules", help="symbolic decision rules from exemplar prototypes")
    p.add_argument("--prototypes", required=True)
    p.add_argument("--max-antecedents", type=int, default=3)
    p.add_argument("--class-names", help="comma-separated names for rendering")
    p.add_argument("--out", required=True, help="rules text path")
    p.add_argument("--json", help="optional JSON mirror")
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("sweep", help="accuracy across prototype budgets")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument(
        "--method",
        required=True,
        choices=["random", "kmeans", "kmeans_nearest"],
        help="budgeted methods only",
    )
    p.add_argument("--budget-counts", help="comma-separated fixed per-class counts")
    p.add_argument("--budget-fracs", help="comma-separated per-class fractions")
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--normalize", choices=["none", "unit_l2", "zscore"], default="none")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    _add_decision_flags(p)
    p.add_argument("--timings", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect", help="human summary of a bundle or prototype file")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProtoclassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
