"""Paper-scale synthetic benchmark: generate, split, train the CNN and
the four baselines, and evaluate everything on the held-out test set."""

from __future__ import annotations

from dataclasses import dataclass

from . import synth
from .baselines import (AnnConfig, ForestParams, KnnIndex, TreeParams,
                        ann_fit, ann_predict, featurize, forest_fit,
                        forest_predict, knn_predict, tree_fit, tree_predict)
from .defaults import default_ruleset, default_schema
from .metrics import EvalReport, evaluate, split
from .nn import TrainConfig, benchmark_config, predict_batch, train
from .semantic import build_plan, transform

# The source study's headline numbers. They were measured on a private
# hospital/survey dataset we cannot access, so they are NOT reproducible
# here; they appear in reports as reference constants only.
REFERENCE_CONSTANTS = {
    "ref_validation_accuracy": 0.9459,
    "ref_train_accuracy": 0.9388,
    "ref_validation_loss": 0.1699,
    "ref_train_loss": 0.1773,
    "ref_auc": 0.99,
    "ref_knn_accuracy": 0.8648,
    "ref_tree_accuracy": 0.9369,
    "ref_forest_accuracy": 0.9189,
    "ref_ann_accuracy": 0.8559,
}

TRAIN_FRAC = 490 / 601
BASELINE_KNN_K = 5


@dataclass
class BenchmarkResult:
    seed: int
    n_train: int
    n_test: int
    bayes: EvalReport          # ground-truth-probability scoring ceiling
    cnn: EvalReport
    cnn_train_accuracy: float
    cnn_train_loss: float
    baselines: dict            # name -> EvalReport


def run_benchmark(seed: int, schema=None, rules=None, plan=None,
                  train_config: TrainConfig | None = None,
                  log=None) -> BenchmarkResult:
    def say(msg):
        if log:
            log(msg)

    schema = schema or default_schema()
    rules = rules or default_ruleset(schema)
    plan = plan or build_plan(schema, rules)
    cfg = synth.paper_scale(seed=seed)

    say(f"seed {seed}: generating {cfg.n} synthetic records")
    records = synth.generate(cfg, schema, rules, plan)
    train_recs, test_recs = split(records, seed=seed, train_frac=TRAIN_FRAC)

    matrices_train = [(transform(x, rules, schema, plan), x.label)
                      for x in train_recs]
    matrices_test = [(transform(x, rules, schema, plan), x.label)
                     for x in test_recs]
    test_labels = [lab for _, lab in matrices_test]

    bayes_scores = [synth.ground_truth_prob(cfg, x, rules, schema, plan)
                    for x in test_recs]
    bayes = evaluate(bayes_scores, test_labels)

    say(f"seed {seed}: training CNN on {len(train_recs)} records")
    tc = train_config or benchmark_config(seed)
    model, history = train(matrices_train, None, tc)
    cnn_scores = predict_batch(model, [m for m, _ in matrices_test])
    cnn = evaluate(cnn_scores, test_labels)

    say(f"seed {seed}: fitting baselines")
    feats_train = [(featurize(m), lab) for m, lab in matrices_train]
    feats_test = [(featurize(m), lab) for m, lab in matrices_test]
    queries = [q for q, _ in feats_test]

    index = KnnIndex.fit(feats_train)
    knn = evaluate([knn_predict(index, q, BASELINE_KNN_K)[1]
                    for q in queries], test_labels)
    tree = tree_fit(feats_train, TreeParams())
    tree_rep = evaluate([tree_predict(tree, q)[1] for q in queries],
                        test_labels)
    forest = forest_fit(feats_train, ForestParams(seed=seed))
    forest_rep = evaluate([forest_predict(forest, q)[1] for q in queries],
                          test_labels)
    ann = ann_fit(feats_train, AnnConfig(seed=seed))
    ann_rep = evaluate([ann_predict(ann, q).p_affected for q in queries],
                       test_labels)

    return BenchmarkResult(
        seed=seed, n_train=len(train_recs), n_test=len(test_recs),
        bayes=bayes, cnn=cnn,
        cnn_train_accuracy=history.train_accuracy[-1],
        cnn_train_loss=history.train_loss[-1],
        baselines={"knn": knn, "tree": tree_rep, "forest": forest_rep,
                   "ann": ann_rep})


def report_lines(result: BenchmarkResult):
    """Machine-readable key=value lines, stable across identical runs."""
    lines = [f"{k}={v}" for k, v in REFERENCE_CONSTANTS.items()]
    lines.append("ref_note=reference constants from the source study's "
                 "private dataset; not reproducible here")
    lines.append(f"seed={result.seed}")
    lines.append(f"n_train={result.n_train}")
    lines.append(f"n_test={result.n_test}")
    lines.append(f"bayes_auc={result.bayes.auc:.6f}")
    lines.append(f"bayes_accuracy={result.bayes.accuracy:.6f}")
    lines.append(f"cnn_train_accuracy={result.cnn_train_accuracy:.6f}")
    lines.append(f"cnn_train_loss={result.cnn_train_loss:.6f}")

    def emit(name, rep):
        lines.append(f"{name}_accuracy={rep.accuracy:.6f}")
        lines.append(f"{name}_error_rate={rep.error_rate:.6f}")
        lines.append(f"{name}_loss={rep.mean_loss:.6f}")
        lines.append(f"{name}_auc={rep.auc:.6f}")
        lines.append(f"{name}_confusion={rep.tp},{rep.fp},{rep.tn},{rep.fn}")

    emit("cnn", result.cnn)
    for name in ("knn", "tree", "forest", "ann"):
        emit(name, result.baselines[name])
    return lines
