"""Semi-simulation of data sites from one dataset, plus a synthetic generator.

Two splitters turn a single dataset into 5 sites: a stratified random split
(SRS) buckets each class at random, while dimension-reduction-and-clustering
(DRC) projects onto principal components and clusters each class with a
shared-covariance mixture of Gaussians so that sites end up differently
distributed. Both pair the per-class buckets in reversed size order, which
balances site sizes and guarantees each site holds both classes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .datamodel import Dataset
from .errors import InvalidInputError
from .seeds import as_rng, rng_for

log = logging.getLogger(__name__)

N_SITES = 5
EM_MAX_ITER = 200
EM_TOL = 1e-8
COV_LOADING = 1e-6
REBALANCE_FLOOR = 0.10


def _pair_buckets(neg_buckets: list[np.ndarray], pos_buckets: list[np.ndarray]) -> list[np.ndarray]:
    """Combine per-class buckets in reversed size order: largest with smallest."""
    if len(neg_buckets) != len(pos_buckets):
        raise InvalidInputError("need one positive bucket per negative bucket")
    neg_sorted = sorted(neg_buckets, key=len)
    pos_sorted = sorted(pos_buckets, key=len)
    return [
        np.concatenate([neg_sorted[i], pos_sorted[len(pos_sorted) - 1 - i]])
        for i in range(len(neg_sorted))
    ]


def srs_split(dataset: Dataset, n_sites: int = N_SITES, seed: int | np.random.Generator = 0) -> list[Dataset]:
    """Stratified random split into ``n_sites`` datasets covering every row once."""
    rng = as_rng(seed)
    buckets: dict[int, list[np.ndarray]] = {}
    for cls in (0, 1):
        rows = np.flatnonzero(dataset.labels == cls)
        if rows.size < n_sites:
            raise InvalidInputError(f"class {cls} has {rows.size} rows; need at least {n_sites}")
        buckets[cls] = list(np.array_split(rng.permutation(rows), n_sites))
    sites = _pair_buckets(buckets[0], buckets[1])
    return [dataset.subset(np.sort(rows)) for rows in sites]


@dataclass(frozen=True)
class PcaBasis:
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray        # p x q, columns ordered by explained variance
    explained_variance: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        return ((features - self.mean) / self.scale) @ self.components


def principal_components(features: np.ndarray, variance_fraction: float) -> PcaBasis:
    """PCA of standardized features keeping the smallest component count whose
    cumulative explained variance reaches the requested fraction."""
    if not 0.0 < variance_fraction <= 1.0:
        raise InvalidInputError("variance_fraction must lie in (0, 1]")
    x = np.asarray(features, dtype=np.float64)
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    scale = np.where(sd < 1e-12, 1.0, sd)
    z = (x - mean) / scale
    denom = max(x.shape[0] - 1, 1)
    cov = (z.T @ z) / denom
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    eigvals[eigvals < 1e-12 * max(eigvals[0], 1e-300)] = 0.0
    total = eigvals.sum()
    if total <= 0:
        raise InvalidInputError("features carry no variance")
    cumulative = np.cumsum(eigvals) / total
    q = int(np.searchsorted(cumulative, variance_fraction - 1e-12) + 1)
    comp = eigvecs[:, :q]
    # deterministic sign: largest-magnitude loading positive
    flip = comp[np.abs(comp).argmax(axis=0), np.arange(q)] < 0
    comp = comp * np.where(flip, -1.0, 1.0)
    return PcaBasis(mean, scale, comp, eigvals[:q])


@dataclass(frozen=True)
class MogModel:
    """Mixture of Gaussians with one shared covariance matrix."""

    means: np.ndarray            # k x q
    covariance: np.ndarray       # q x q, diagonally loaded
    mixing: np.ndarray           # k, sums to 1
    log_likelihoods: tuple[float, ...]
    converged: bool

    @property
    def k(self) -> int:
        return self.means.shape[0]

    def log_responsibilities(self, points: np.ndarray) -> np.ndarray:
        q = self.covariance.shape[0]
        chol = np.linalg.cholesky(self.covariance)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        logp = np.empty((points.shape[0], self.k))
        for j in range(self.k):
            diff = points - self.means[j]
            sol = np.linalg.solve(chol, diff.T)
            maha = np.sum(sol * sol, axis=0)
            logp[:, j] = (
                np.log(max(self.mixing[j], 1e-300))
                - 0.5 * (maha + logdet + q * np.log(2.0 * np.pi))
            )
        return logp

    def responsibilities(self, points: np.ndarray) -> np.ndarray:
        logp = self.log_responsibilities(points)
        logp -= logp.max(axis=1, keepdims=True)
        p = np.exp(logp)
        return p / p.sum(axis=1, keepdims=True)

    def assign(self, points: np.ndarray) -> np.ndarray:
        return self.log_responsibilities(points).argmax(axis=1)


def _loaded(cov: np.ndarray) -> np.ndarray:
    q = cov.shape[0]
    load = max(COV_LOADING * np.trace(cov) / q, 1e-12)
    return cov + load * np.eye(q)


def pooled_covariance(points: np.ndarray, resp: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Responsibility-weighted scatter pooled over all components."""
    m, q = points.shape
    cov = np.zeros((q, q))
    for j in range(means.shape[0]):
        diff = points - means[j]
        cov += (resp[:, j][:, None] * diff).T @ diff
    return cov / m


def _farthest_point_means(points: np.ndarray, k: int, rng) -> np.ndarray:
    first = int(rng.integers(points.shape[0]))
    chosen = [first]
    dist = np.sum((points - points[first]) ** 2, axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[chosen].copy()


def mog_em(points: np.ndarray, k: int = N_SITES, seed: int | np.random.Generator = 0) -> MogModel:
    """Shared-covariance EM; farthest-point seeded, log-likelihood monotone."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError("points must form an m-by-q matrix")
    m, q = x.shape
    if m < 5 * k:
        raise InvalidInputError(f"need at least {5 * k} points for {k} components, got {m}")
    rng = as_rng(seed)
    means = _farthest_point_means(x, k, rng)
    centered = x - x.mean(axis=0)
    cov = _loaded((centered.T @ centered) / m)
    mixing = np.full(k, 1.0 / k)

    model = MogModel(means, cov, mixing, (), False)
    trace: list[float] = []
    best: tuple[float, MogModel] | None = None
    reseeded = False
    converged = False
    for _ in range(EM_MAX_ITER):
        logp = model.log_responsibilities(x)
        row_max = logp.max(axis=1, keepdims=True)
        ll = float(np.sum(row_max.ravel() + np.log(np.exp(logp - row_max).sum(axis=1))))
        trace.append(ll)
        if best is None or ll > best[0]:
            best = (ll, model)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < EM_TOL:
            converged = True
            break
        resp = np.exp(logp - row_max)
        resp /= resp.sum(axis=1, keepdims=True)
        weights = resp.sum(axis=0)
        if not reseeded and (weights < 1e-9 * m).any():
            # one rescue for starved components: park them on the worst-covered point
            reseeded = True
            worst = int(np.argmin(resp.max(axis=1)))
            means = model.means.copy()
            means[weights < 1e-9 * m] = x[worst]
            model = MogModel(means, model.covariance, model.mixing, (), False)
            continue
        weights = np.maximum(weights, 1e-12)
        means = (resp.T @ x) / weights[:, None]
        cov = _loaded(pooled_covariance(x, resp, means))
        mixing = weights / weights.sum()
        model = MogModel(means, cov, mixing, (), False)
    if not converged:
        log.warning("EM hit the iteration cap; keeping the best-likelihood iterate")
        model = best[1]
    return MogModel(model.means, model.covariance, model.mixing, tuple(trace), converged)


def _rebalance(assignment: np.ndarray, resp: np.ndarray, k: int, floor_fraction: float = REBALANCE_FLOOR) -> np.ndarray:
    """Move rows from the largest to the smallest cluster until the smallest
    holds at least ``floor_fraction`` of the rows; donors are the largest
    cluster's rows most responsible under the recipient's component."""
    assignment = assignment.copy()
    m = assignment.size
    floor = floor_fraction * m
    while True:
        sizes = np.bincount(assignment, minlength=k)
        smallest = int(np.argmin(sizes))
        if sizes[smallest] >= floor - 1e-9:
            return assignment
        largest = int(np.argmax(sizes))
        donors = np.flatnonzero(assignment == largest)
        mover = donors[int(np.argmax(resp[donors, smallest]))]
        assignment[mover] = smallest


def drc_split(
    dataset: Dataset,
    variance_fraction: float = 0.1,
    n_sites: int = N_SITES,
    seed: int | np.random.Generator = 0,
) -> list[Dataset]:
    """Dimension-reduction-and-clustering split into ``n_sites`` datasets."""
    rng = as_rng(seed)
    basis = principal_components(dataset.features, variance_fraction)
    scores = basis.transform(dataset.features)
    buckets: dict[int, list[np.ndarray]] = {}
    for cls in (0, 1):
        rows = np.flatnonzero(dataset.labels == cls)
        if rows.size < 5 * n_sites:
            raise InvalidInputError(f"class {cls} has {rows.size} rows; DRC needs at least {5 * n_sites}")
        model = mog_em(scores[rows], k=n_sites, seed=rng)
        resp = model.responsibilities(scores[rows])
        assignment = _rebalance(resp.argmax(axis=1), resp, n_sites)
        buckets[cls] = [rows[assignment == j] for j in range(n_sites)]
    sites = _pair_buckets(buckets[0], buckets[1])
    return [dataset.subset(np.sort(rows)) for rows in sites]


# Directions of the per-site mean shifts: a regular pentagon in the first two
# feature dimensions, so any two sites sit at least 2*sin(pi/5) apart per unit
# of shift scale.
_PENTAGON = [(np.cos(2.0 * np.pi * s / 5.0), np.sin(2.0 * np.pi * s / 5.0)) for s in range(5)]
_COEF_NORM = 2.0
_COEF_PERTURB = 0.15


def synth_shifted_sites(
    n_per_site: int,
    p: int,
    shift_scale: float,
    seed: int = 0,
) -> list[Dataset]:
    """Five synthetic sites with feature-mean shift and mild concept drift.

    Features are unit Gaussians around a site-specific mean of norm
    ``shift_scale``; labels follow a logistic model whose weights are shared
    up to a site perturbation proportional to the shift. Every site is
    guaranteed to contain both classes.
    """
    if n_per_site < 20:
        raise InvalidInputError("need at least 20 rows per site")
    if p < 2:
        raise InvalidInputError("need at least 2 features")
    base_rng = rng_for(seed, "synth", "base")
    weights = base_rng.normal(size=p)
    weights *= _COEF_NORM / np.linalg.norm(weights)
    names = tuple(f"f{i}" for i in range(p))
    sites = []
    for s in range(N_SITES):
        rng = rng_for(seed, "synth", "site", s)
        offset = np.zeros(p)
        offset[0], offset[1] = _PENTAGON[s]
        offset *= shift_scale
        drift = rng.normal(size=p)
        drift *= (_COEF_PERTURB * shift_scale) / np.linalg.norm(drift)
        site_weights = weights + drift
        features = rng.normal(size=(n_per_site, p)) + offset
        logits = (features - offset) @ site_weights
        probs = 1.0 / (1.0 + np.exp(-logits))
        labels = (rng.random(n_per_site) < probs).astype(np.int8)
        for _ in range(100):
            if 0 < labels.sum() < n_per_site:
                break
            labels = (rng.random(n_per_site) < probs).astype(np.int8)
        else:
            labels[0] = 1 - labels[0]
        sites.append(Dataset(features, labels, names))
    return sites
