"""Gaussian-process surrogate and Expected Improvement proposals.

Matérn-5/2 kernel with per-dimension lengthscales, unit signal variance on the
standardized target scale, constant mean, fixed nugget. Kernel lengthscales
are chosen by log marginal likelihood over a seeded random grid, which keeps
fits exactly reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtr

from .datamodel import Configuration, HyperParamSpace
from .errors import GpFitError, InvalidInputError
from .seeds import as_rng

DEFAULT_NUGGET = 1e-6
MAX_NUGGET = 1e-2
N_GRID_STARTS = 64
GRID_SEED = 7
LENGTHSCALE_LOG10_RANGE = (-2.0, 1.0)

_SQRT5 = math.sqrt(5.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _matern52(r2: np.ndarray) -> np.ndarray:
    r = np.sqrt(np.clip(r2, 0.0, None))
    return (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-_SQRT5 * r)


def _scaled_sqdist(a: np.ndarray, b: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    sa = a / lengthscales
    sb = b / lengthscales
    sq = (
        np.sum(sa * sa, axis=1)[:, None]
        + np.sum(sb * sb, axis=1)[None, :]
        - 2.0 * (sa @ sb.T)
    )
    return np.clip(sq, 0.0, None)


@dataclass(frozen=True)
class GpModel:
    x_train: np.ndarray        # m x d, inside the unit box
    y_train: np.ndarray        # raw targets
    y_mean: float
    y_sd: float
    lengthscales: np.ndarray   # one per dimension
    nugget: float
    chol: np.ndarray           # lower Cholesky factor of K + nugget * I
    alpha: np.ndarray          # (K + nugget * I)^-1 y_std
    lml: float
    grid_lml: np.ndarray       # log marginal likelihood of every grid start

    @property
    def incumbent(self) -> float:
        return float(self.y_train.min())


def _lml(chol: np.ndarray, alpha: np.ndarray, ys: np.ndarray) -> float:
    m = ys.shape[0]
    return float(-0.5 * ys @ alpha - np.log(np.diag(chol)).sum() - 0.5 * m * math.log(2.0 * math.pi))


def _chol_with_escalation(k: np.ndarray, nugget: float) -> tuple[np.ndarray, float]:
    """Cholesky of k + nugget*I, escalating the nugget tenfold up to MAX_NUGGET."""
    nug = nugget
    while True:
        try:
            return np.linalg.cholesky(k + nug * np.eye(k.shape[0])), nug
        except np.linalg.LinAlgError:
            nug *= 10.0
            if nug > MAX_NUGGET * (1.0 + 1e-12):
                raise GpFitError("covariance not positive definite even at the maximum nugget") from None


def gp_fit(
    x: np.ndarray,
    y: np.ndarray,
    nugget: float = DEFAULT_NUGGET,
    n_starts: int = N_GRID_STARTS,
    grid_seed: int = GRID_SEED,
    standardize: bool = True,
) -> GpModel:
    """Fit the surrogate; lengthscales picked by best log marginal likelihood."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InvalidInputError("need at least two training rows")
    if y.shape != (x.shape[0],):
        raise InvalidInputError("one target per training row required")
    if x.min() < -1e-9 or x.max() > 1.0 + 1e-9:
        raise InvalidInputError("training inputs must lie in the unit box")
    m, d = x.shape

    if standardize:
        y_mean = float(y.mean())
        var = float(y.var())
        y_sd = math.sqrt(var) if var >= 1e-12 else 1.0
    else:
        y_mean, y_sd = 0.0, 1.0
    ys = (y - y_mean) / y_sd

    rng = as_rng(grid_seed)
    lo, hi = LENGTHSCALE_LOG10_RANGE
    grid = 10.0 ** rng.uniform(lo, hi, size=(n_starts, d))

    diffs = (x[:, None, :] - x[None, :, :]) ** 2  # m x m x d
    nug = nugget
    while True:
        lmls = np.full(n_starts, -np.inf)
        factors: list[tuple[np.ndarray, np.ndarray] | None] = [None] * n_starts
        for s in range(n_starts):
            r2 = diffs @ (1.0 / grid[s] ** 2)
            k = _matern52(r2)
            k[np.diag_indices_from(k)] += nug
            try:
                chol = np.linalg.cholesky(k)
            except np.linalg.LinAlgError:
                continue
            alpha = cho_solve((chol, True), ys)
            factors[s] = (chol, alpha)
            lmls[s] = _lml(chol, alpha, ys)
        if np.isfinite(lmls).any():
            break
        nug *= 10.0
        if nug > MAX_NUGGET * (1.0 + 1e-12):
            raise GpFitError("all lengthscale starts failed Cholesky at the maximum nugget")

    best = int(np.argmax(lmls))
    chol, alpha = factors[best]
    return GpModel(
        x_train=x.copy(),
        y_train=y.copy(),
        y_mean=y_mean,
        y_sd=y_sd,
        lengthscales=grid[best].copy(),
        nugget=nug,
        chol=chol,
        alpha=alpha,
        lml=float(lmls[best]),
        grid_lml=lmls,
    )


def _predict_batch(model: GpModel, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = _matern52(_scaled_sqdist(xq, model.x_train, model.lengthscales))
    mean_std = k @ model.alpha
    v = solve_triangular(model.chol, k.T, lower=True)
    var = np.clip(1.0 - np.sum(v * v, axis=0), 0.0, None)
    return model.y_mean + model.y_sd * mean_std, model.y_sd * np.sqrt(var)


def gp_predict(model: GpModel, x: np.ndarray) -> tuple[float, float]:
    """Posterior (mean, sd) at one point, on the original target scale."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != model.x_train.shape[1]:
        raise InvalidInputError("query dimension does not match the model")
    mean, sd = _predict_batch(model, x)
    return float(mean[0]), float(sd[0])


def ei_closed_form(mean, sd, incumbent):
    """EI for minimization; when sd vanishes this degenerates to max(0, f_min - mean)."""
    mean = np.asarray(mean, dtype=np.float64)
    sd = np.asarray(sd, dtype=np.float64)
    improve = incumbent - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 1e-12, improve / np.where(sd > 1e-12, sd, 1.0), 0.0)
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    ei = np.where(sd > 1e-12, improve * ndtr(z) + sd * pdf, np.maximum(improve, 0.0))
    return float(ei) if ei.ndim == 0 else ei


def expected_improvement(model: GpModel, x: np.ndarray, incumbent: float) -> float:
    mean, sd = gp_predict(model, x)
    return float(ei_closed_form(mean, sd, incumbent))


def propose(
    model: GpModel,
    space: HyperParamSpace,
    seed: int | np.random.Generator,
    n_candidates: int = 1000,
    refine_iters: int = 20,
    init_step: float = 0.1,
) -> Configuration:
    """Next configuration: EI argmax over random candidates plus local refinement.

    Candidate ties break toward the lowest index; each refinement round tries
    one step along every coordinate in both directions and halves the step
    when nothing improves. The result always lies in the unit box.
    """
    rng = as_rng(seed)
    d = space.n_dims
    if model.x_train.shape[1] != d:
        raise InvalidInputError("model dimension does not match the space")
    incumbent = model.incumbent
    candidates = rng.random((n_candidates, d))
    mean, sd = _predict_batch(model, candidates)
    ei = ei_closed_form(mean, sd, incumbent)
    best_idx = int(np.argmax(ei))
    x = candidates[best_idx].copy()
    best_ei = float(ei[best_idx])

    step = init_step
    for _ in range(refine_iters):
        moves = np.repeat(x[None, :], 2 * d, axis=0)
        for j in range(d):
            moves[2 * j, j] += step
            moves[2 * j + 1, j] -= step
        moves = np.clip(moves, 0.0, 1.0)
        m_mean, m_sd = _predict_batch(model, moves)
        m_ei = ei_closed_form(m_mean, m_sd, incumbent)
        k = int(np.argmax(m_ei))
        if m_ei[k] > best_ei:
            x = moves[k]
            best_ei = float(m_ei[k])
        else:
            step *= 0.5
    return Configuration.from_encoded(space, x)
