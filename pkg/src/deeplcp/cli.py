"""Command-line entry point.

Machine-readable results go to stdout as `key=value` lines; progress and
human-readable diagnostics go to stderr. Exit codes: 0 success, 1 usage
error, 2 data/validation error. Option values resolve as flags >
DEEPLCP_* environment variables > --config file.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pipeline_mod
from . import synth as synth_mod
from .baselines import (AnnConfig, ForestParams, KnnIndex, TreeParams,
                        ann_fit, ann_predict, featurize, forest_fit,
                        forest_predict, knn_predict, tree_fit, tree_predict)
from .defaults import (default_cleaning, default_ruleset, default_schema)
from .errors import DeepLcpError
from .ingest import (_read_blocks, clean_record, load_cleaning, load_schema,
                     parse_records, serialize_records)
from .metrics import evaluate as evaluate_scores
from .metrics import split
from .nn import (TrainConfig, load_model, predict_batch, save_model, train)
from .rules import load_ruleset, parse_ruleset
from .semantic import build_plan, dump_matrix, transform
from .pipeline import report_lines, run_benchmark

ENV_PREFIX = "DEEPLCP_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _log(msg):
    print(msg, file=sys.stderr)


def _load_config_file(path):
    """Config files reuse the schema dialect: one `options { k: v }` block."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for _kind, _name, body, _line in _read_blocks(fh.read()):
            for key, (value, _l) in body.items():
                values[key] = value
    return values


def _resolve(args, key, cast=str, default=None):
    """flags > DEEPLCP_<KEY> env var > config file > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    env = os.environ.get(ENV_PREFIX + key.upper())
    if env is not None:
        return cast(env)
    cfg = getattr(args, "_config_values", {})
    if key in cfg:
        return cast(cfg[key])
    return default


def _load_context(args):
    schema_path = _resolve(args, "schema")
    rules_path = _resolve(args, "rules")
    schema = load_schema(schema_path) if schema_path else default_schema()
    rules = (load_ruleset(rules_path, schema) if rules_path
             else default_ruleset(schema))
    return schema, rules, build_plan(schema, rules)


def _add_common(p):
    p.add_argument("--schema", help="schema file (default: shipped schema)")
    p.add_argument("--rules", help="rule-DSL file (default: shipped rules)")
    p.add_argument("--config", help="config file with default option values")
    p.add_argument("--seed", type=int)


def _build_parser():
    parser = _Parser(prog="deeplcp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, clean, and re-emit records")
    _add_common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--clean", help="cleaning config (default: shipped)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("rules", help="rule-DSL tools")
    rsub = p.add_subparsers(dest="rules_command", required=True)
    rc = rsub.add_parser("check", help="validate a rules file")
    _add_common(rc)

    p = sub.add_parser("transform", help="records -> reduced matrices")
    _add_common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--clean")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate synthetic labeled records")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the CNN on labeled records")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--clean")
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--optimizer", choices=("adam", "sgd"))

    p = sub.add_parser("predict", help="probabilities for record rows")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--record", required=True, help="CSV of records")
    p.add_argument("--clean")

    p = sub.add_parser("evaluate", help="evaluate a model on labeled data")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--clean")
    p.add_argument("--roc-out", dest="roc_out",
                   help="write ROC points as two-column text")

    p = sub.add_parser("baseline", help="fit and evaluate one baseline")
    _add_common(p)
    p.add_argument("--algo", required=True,
                   choices=("knn", "tree", "forest", "ann"))
    p.add_argument("--data", required=True)
    p.add_argument("--clean")
    p.add_argument("--k", type=int)
    p.add_argument("--train-frac", dest="train_frac", type=float)

    p = sub.add_parser("pipeline",
                       help="synth -> train -> evaluate benchmark run")
    _add_common(p)
    p.add_argument("--out", help="also write the report to this file")
    return parser


def _read_labeled(args, schema, need_label=True):
    cleaning_path = _resolve(args, "clean")
    cleaning = (load_cleaning(cleaning_path, schema) if cleaning_path
                else default_cleaning(schema))
    path = (getattr(args, "data", None) or getattr(args, "record", None)
            or args.infile)
    records, issues = parse_records(path, schema)
    for issue in issues:
        _log(f"{path}:{issue.line}: {issue.message}")
    cleaned = [clean_record(r, cleaning, schema) for r in records]
    if need_label and any(r.label is None for r in cleaned):
        raise DeepLcpError(f"{path}: every record needs a label")
    return cleaned


def _cmd_ingest(args):
    schema_path = _resolve(args, "schema")
    schema = load_schema(schema_path) if schema_path else default_schema()
    cleaning_path = _resolve(args, "clean")
    cleaning = (load_cleaning(cleaning_path, schema) if cleaning_path
                else default_cleaning(schema))
    records, issues = parse_records(args.infile, schema)
    for issue in issues:
        _log(f"{args.infile}:{issue.line}: {issue.message}")
    cleaned = [clean_record(r, cleaning, schema) for r in records]
    Path(args.out).write_text(serialize_records(cleaned, schema),
                              encoding="utf-8")
    print(f"records={len(cleaned)}")
    print(f"issues={len(issues)}")
    return 0


def _cmd_rules_check(args):
    schema_path = _resolve(args, "schema")
    schema = load_schema(schema_path) if schema_path else default_schema()
    rules_path = _resolve(args, "rules")
    if rules_path:
        text = Path(rules_path).read_text(encoding="utf-8")
    else:
        from .defaults import default_rules_text
        text = default_rules_text()
    result = parse_ruleset(text, schema)
    for diag in result.diagnostics:
        _log(str(diag))
    print(f"diagnostics={len(result.diagnostics)}")
    print(f"ok={'true' if result.ok else 'false'}")
    return 0 if result.ok else 2


def _cmd_transform(args):
    schema, rules, plan = _load_context(args)
    records = _read_labeled(args, schema, need_label=False)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_lines = []
    for i, record in enumerate(records):
        matrix = transform(record, rules, schema, plan)
        name = f"matrix_{i:05d}.txt"
        (out_dir / name).write_text(dump_matrix(matrix), encoding="utf-8")
        index_lines.append(f"{i},{name},{record.label or ''}")
    (out_dir / "index.csv").write_text(
        "row,file,label\n" + "\n".join(index_lines) + "\n", encoding="utf-8")
    print(f"matrices={len(records)}")
    return 0


def _parse_synth_config(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for kind, _name, body, line in _read_blocks(fh.read()):
            if kind != "synth":
                raise DeepLcpError(f"line {line}: expected a 'synth' block")
            for key, (value, _l) in body.items():
                values[key] = value
    return values


def _cmd_synth(args):
    schema, rules, plan = _load_context(args)
    seed = _resolve(args, "seed", int, 0)
    cfg = synth_mod.paper_scale(seed=seed)
    overrides = {}
    if args.config and Path(args.config).exists():
        overrides = _parse_synth_config(args.config)
    n = _resolve(args, "n", int)
    kwargs = dict(n=n or int(overrides.get("n", cfg.n)),
                  prevalence=float(overrides.get("prevalence",
                                                 cfg.prevalence)),
                  sigma=float(overrides.get("sigma", cfg.sigma)),
                  seed=seed,
                  intercept=float(overrides.get("intercept", cfg.intercept)),
                  coefficients=cfg.coefficients)
    if "coefficients" in overrides:
        kwargs["coefficients"] = np.array(
            [float(x) for x in overrides["coefficients"].split(",")])
    cfg = synth_mod.SynthConfig(**kwargs)
    records = synth_mod.generate(cfg, schema, rules, plan)
    Path(args.out).write_text(serialize_records(records, schema),
                              encoding="utf-8")
    affected = sum(1 for r in records if r.label == "affected")
    print(f"records={len(records)}")
    print(f"affected={affected}")
    return 0


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        lr=_resolve(args, "lr", float, 1e-3),
        epochs=_resolve(args, "epochs", int, 200),
        batch_size=_resolve(args, "batch", int, 16),
        optimizer=_resolve(args, "optimizer", str, "adam"),
        seed=_resolve(args, "seed", int, 0))


def _cmd_train(args):
    schema, rules, plan = _load_context(args)
    records = _read_labeled(args, schema)
    data = [(transform(r, rules, schema, plan), r.label) for r in records]
    config = _train_config(args)
    _log(f"training on {len(data)} records, {config.epochs} epochs")
    model, history = train(data, None, config)
    save_model(model, args.out)
    print(f"trained={len(data)}")
    print(f"final_train_loss={history.train_loss[-1]:.6f}")
    print(f"final_train_accuracy={history.train_accuracy[-1]:.6f}")
    print(f"model={args.out}")
    return 0


def _cmd_predict(args):
    schema, rules, plan = _load_context(args)
    model = load_model(args.model)
    records = _read_labeled(args, schema, need_label=False)
    matrices = [transform(r, rules, schema, plan) for r in records]
    scores = predict_batch(model, matrices)
    for i, p in enumerate(scores):
        print(f"row={i} p_affected={p:.6f} p_unaffected={1 - p:.6f}")
    return 0


def _report(rep, prefix=""):
    print(f"{prefix}accuracy={rep.accuracy:.6f}")
    print(f"{prefix}error_rate={rep.error_rate:.6f}")
    print(f"{prefix}loss={rep.mean_loss:.6f}")
    print(f"{prefix}auc={rep.auc:.6f}")
    print(f"{prefix}confusion_tp={rep.tp}")
    print(f"{prefix}confusion_fp={rep.fp}")
    print(f"{prefix}confusion_tn={rep.tn}")
    print(f"{prefix}confusion_fn={rep.fn}")


def _cmd_evaluate(args):
    schema, rules, plan = _load_context(args)
    model = load_model(args.model)
    records = _read_labeled(args, schema)
    matrices = [transform(r, rules, schema, plan) for r in records]
    scores = predict_batch(model, matrices)
    rep = evaluate_scores(scores, [r.label for r in records])
    _report(rep)
    if args.roc_out:
        Path(args.roc_out).write_text(
            "\n".join(f"{fpr:.6f} {tpr:.6f}" for fpr, tpr in rep.roc) + "\n",
            encoding="utf-8")
    return 0


def _cmd_baseline(args):
    schema, rules, plan = _load_context(args)
    records = _read_labeled(args, schema)
    seed = _resolve(args, "seed", int, 0)
    frac = _resolve(args, "train_frac", float, pipeline_mod.TRAIN_FRAC)
    train_recs, test_recs = split(records, seed=seed, train_frac=frac)
    feats_train = [(featurize(transform(r, rules, schema, plan)), r.label)
                   for r in train_recs]
    feats_test = [(featurize(transform(r, rules, schema, plan)), r.label)
                  for r in test_recs]
    labels = [lab for _, lab in feats_test]
    queries = [q for q, _ in feats_test]
    if args.algo == "knn":
        k = _resolve(args, "k", int, 5)
        index = KnnIndex.fit(feats_train)
        scores = [knn_predict(index, q, k)[1] for q in queries]
    elif args.algo == "tree":
        tree = tree_fit(feats_train, TreeParams())
        scores = [tree_predict(tree, q)[1] for q in queries]
    elif args.algo == "forest":
        forest = forest_fit(feats_train, ForestParams(seed=seed))
        scores = [forest_predict(forest, q)[1] for q in queries]
    else:
        ann = ann_fit(feats_train, AnnConfig(seed=seed))
        scores = [ann_predict(ann, q).p_affected for q in queries]
    print(f"algo={args.algo}")
    print(f"n_train={len(train_recs)}")
    print(f"n_test={len(test_recs)}")
    _report(evaluate_scores(scores, labels))
    return 0


def _cmd_pipeline(args):
    seed = _resolve(args, "seed", int, 0)
    schema, rules, plan = _load_context(args)
    result = run_benchmark(seed, schema, rules, plan, log=_log)
    lines = report_lines(result)
    out = "\n".join(lines) + "\n"
    sys.stdout.write(out)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "transform": _cmd_transform,
    "synth": _cmd_synth,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "baseline": _cmd_baseline,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        parser.print_usage(sys.stderr)
        return 1
    config_path = getattr(args, "config", None)
    args._config_values = {}
    if config_path and args.command != "synth" and Path(config_path).exists():
        try:
            args._config_values = _load_config_file(config_path)
        except DeepLcpError as exc:
            _log(f"error: {exc}")
            return 2
    try:
        if args.command == "rules":
            return _cmd_rules_check(args)
        return _HANDLERS[args.command](args)
    except (DeepLcpError, OSError) as exc:
        _log(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
