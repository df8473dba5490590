"""RBF-kernel ridge classifier standing in for the kernel SVM family.

Same hyperparameters (cost C, kernel width sigma), closed-form deterministic
fit: solve (K + I/C) a = y - mean(y) on labels coded as -1/+1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


def rbf_kernel(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    """k(x, x') = exp(-sigma * ||x - x'||^2)."""
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-sigma * np.clip(sq, 0.0, None))


@dataclass(frozen=True)
class KernelClassifierModel:
    support: np.ndarray     # standardized training rows
    dual_coef: np.ndarray
    intercept: float        # mean of the -1/+1 training labels
    sigma: float
    mean: np.ndarray
    scale: np.ndarray

    def decision(self, features: np.ndarray) -> np.ndarray:
        z = (features - self.mean) / self.scale
        return rbf_kernel(z, self.support, self.sigma) @ self.dual_coef + self.intercept

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        # decision approximates E[y|x] on the -1/+1 scale; map back to [0, 1]
        return np.clip(0.5 * (self.decision(features) + 1.0), 0.0, 1.0)


def fit_kernel_classifier(z: np.ndarray, y01: np.ndarray, cost: float, sigma: float) -> tuple[np.ndarray, float]:
    """Returns (dual coefficients, intercept) for standardized features z."""
    y = 2.0 * y01.astype(np.float64) - 1.0
    gram = rbf_kernel(z, z, sigma)
    gram[np.diag_indices_from(gram)] += 1.0 / cost
    intercept = float(y.mean())
    dual = cho_solve(cho_factor(gram, lower=True), y - intercept)
    return dual, intercept
