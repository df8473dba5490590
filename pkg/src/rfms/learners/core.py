"""Training, prediction, loss evaluation and cross validation for all learners."""

from __future__ import annotations

import numpy as np

from ..datamodel import Configuration, Dataset
from ..errors import InvalidInputError
from ..seeds import as_rng, derive_seed, rng_for
from .elastic_net import ElasticNetModel, fit_elastic_net
from .forest import RandomForestModel, fit_random_forest
from .kernel import KernelClassifierModel, fit_kernel_classifier

TrainedModel = ElasticNetModel | RandomForestModel | KernelClassifierModel

LEARNER_TAG = {
    ElasticNetModel: "elastic_net",
    RandomForestModel: "random_forest",
    KernelClassifierModel: "kernel_svm",
}


def learner_of(model: TrainedModel) -> str:
    return LEARNER_TAG[type(model)]


def fit_standardizer(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and scales; zero-variance columns get scale 1."""
    mean = features.mean(axis=0)
    sd = features.std(axis=0)
    scale = np.where(sd < 1e-12, 1.0, sd)
    return mean, scale


def train(dataset: Dataset, config: Configuration, seed: int = 0) -> TrainedModel:
    """Fit one model on the dataset; deterministic given the seed.

    Features are standardized with the training data's own statistics, which
    travel inside the model and are re-applied at prediction time.
    """
    if not dataset.has_both_classes():
        raise InvalidInputError("training requires both classes present")
    mean, scale = fit_standardizer(dataset.features)
    z = (dataset.features - mean) / scale
    y = dataset.labels.astype(np.float64)
    learner = config.space.learner
    if learner == "elastic_net":
        coef, intercept, _ = fit_elastic_net(z, y, alpha=config["alpha"], s=config["s"])
        return ElasticNetModel(coef, intercept, mean, scale)
    if learner == "kernel_svm":
        dual, intercept = fit_kernel_classifier(z, dataset.labels, cost=config["C"], sigma=config["sigma"])
        return KernelClassifierModel(z.copy(), dual, intercept, config["sigma"], mean, scale)
    if learner == "random_forest":
        trees = fit_random_forest(
            z,
            dataset.labels.astype(np.int64),
            num_trees=int(config["num.trees"]),
            min_node_size=int(config["min.node.size"]),
            sample_fraction=float(config["sample.fraction"]),
            seed=seed,
        )
        return RandomForestModel(trees, mean, scale)
    raise InvalidInputError(f"unknown learner {learner!r}")


def predict(model: TrainedModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, positive-class scores); probability exactly 0.5 predicts positive."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise InvalidInputError("features must be a 2-d matrix")
    if features.shape[1] != model.mean.shape[0]:
        raise InvalidInputError(
            f"model expects {model.mean.shape[0]} features, got {features.shape[1]}"
        )
    probs = model.predict_proba(features)
    return (probs >= 0.5).astype(np.int8), probs


def evaluate(model: TrainedModel, dataset: Dataset) -> float:
    """Mean misclassification error (1 - accuracy) on the dataset."""
    if dataset.n_rows == 0:
        raise InvalidInputError("cannot evaluate on an empty dataset")
    labels, _ = predict(model, dataset.features)
    return float(np.mean(labels != dataset.labels))


def stratified_folds(labels: np.ndarray, folds: int, rng) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    for cls in (0, 1):
        rows = np.flatnonzero(labels == cls)
        perm = rng.permutation(rows)
        assignment[perm] = np.arange(perm.size) % folds
    return assignment


def cross_validate(dataset: Dataset, config: Configuration, folds: int = 10, seed: int = 0) -> float:
    """Mean misclassification error over stratified CV folds.

    When the minority class has fewer members than the requested fold count,
    the count drops to the minority size, never below 2.
    """
    neg, pos = dataset.class_counts()
    if neg == 0 or pos == 0:
        raise InvalidInputError("cross validation requires both classes present")
    folds_eff = max(2, min(folds, neg, pos))
    rng = as_rng(seed if isinstance(seed, (int, np.integer)) else seed)
    assignment = stratified_folds(dataset.labels, folds_eff, rng)
    losses = []
    for k in range(folds_eff):
        test_rows = np.flatnonzero(assignment == k)
        train_rows = np.flatnonzero(assignment != k)
        model = train(dataset.subset(train_rows), config, seed=derive_seed(_seed_key(seed), "fold", k))
        losses.append(evaluate(model, dataset.subset(test_rows)))
    return float(np.mean(losses))


def _seed_key(seed) -> int:
    # Generators cannot be re-derived; fall back to a fixed key for fold seeds.
    return int(seed) if isinstance(seed, (int, np.integer)) else 0
