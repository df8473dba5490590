"""Noise-adding answer mechanism that limits leakage from repeated queries.

Per query: draw eta; when the local and holdout losses disagree by more than
the current threshold plus eta, answer the holdout loss plus fresh noise and
refresh the threshold, otherwise echo the local loss back. Default parameters
are threshold 0.02, noise rate 0.03, Gaussian noise, and no threshold jitter
(gamma fixed at zero); the jitter and the Laplace family remain available as
switches, as does an optional query budget spent on over-threshold answers.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .seeds import as_rng

DEFAULT_THRESHOLD = 0.02
DEFAULT_SIGMA = 0.03


class ThresholdoutMechanism:
    """Stateful answer strategy for one curator; single writer per run."""

    def __init__(
        self,
        threshold: float = DEFAULT_THRESHOLD,
        sigma: float = DEFAULT_SIGMA,
        gamma_scale: float = 0.0,
        family: str = "gaussian",
        eta_per_query: bool = True,
        budget: int | None = None,
        seed: int | np.random.Generator = 0,
    ):
        if family not in ("gaussian", "laplace"):
            raise InvalidInputError(f"unknown noise family {family!r}")
        self.threshold = float(threshold)
        self.sigma = float(sigma)
        self.gamma_scale = float(gamma_scale)
        self.family = family
        self.eta_per_query = eta_per_query
        self.budget = budget
        self._rng = as_rng(seed)
        self.refresh_count = 0
        self.query_count = 0
        self.t_hat = self.threshold + self._draw(self.gamma_scale)
        self._eta = self._draw(4.0 * self.sigma)

    def _draw(self, scale: float) -> float:
        if self.family == "gaussian":
            return float(self._rng.normal(0.0, scale))
        return float(self._rng.laplace(0.0, scale))

    def answer(self, f_openbox: float, f_curator: float) -> float:
        """One perturbed answer; both inputs are losses in [0, 1]."""
        if not (0.0 <= f_openbox <= 1.0 and 0.0 <= f_curator <= 1.0):
            raise InvalidInputError("thresholdout inputs must lie in [0, 1]")
        self.query_count += 1
        eta = self._draw(4.0 * self.sigma) if self.eta_per_query else self._eta
        over = abs(f_openbox - f_curator) > self.t_hat + eta
        if over and self.budget is not None and self.budget <= 0:
            over = False
        if over:
            value = f_curator + self._draw(self.sigma)
            self.t_hat = self.threshold + self._draw(self.gamma_scale)
            if not self.eta_per_query:
                self._eta = self._draw(4.0 * self.sigma)
            self.refresh_count += 1
            if self.budget is not None:
                self.budget -= 1
        else:
            value = f_openbox
        return float(np.clip(value, 0.0, 1.0))


def thresholdout_answer(state: ThresholdoutMechanism, f_openbox: float, f_curator: float) -> float:
    return state.answer(f_openbox, f_curator)
