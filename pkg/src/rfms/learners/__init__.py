"""Three classifier families with a shared train/predict/evaluate surface."""

from .codec import MAGIC, deserialize_model, serialize_model
from .core import (
    TrainedModel,
    cross_validate,
    evaluate,
    fit_standardizer,
    learner_of,
    predict,
    train,
)
from .elastic_net import ElasticNetModel, fit_elastic_net, soft_threshold
from .forest import RandomForestModel, Tree
from .kernel import KernelClassifierModel, rbf_kernel

__all__ = [
    "MAGIC",
    "TrainedModel",
    "ElasticNetModel",
    "RandomForestModel",
    "KernelClassifierModel",
    "Tree",
    "cross_validate",
    "deserialize_model",
    "evaluate",
    "fit_elastic_net",
    "fit_standardizer",
    "learner_of",
    "predict",
    "rbf_kernel",
    "serialize_model",
    "soft_threshold",
    "train",
]
