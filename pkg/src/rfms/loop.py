"""The model-selection loop: evaluate, fit a surrogate, propose, repeat.

Each iteration measures a configuration twice — by local cross validation on
the openbox inbag and by querying every curator with the trained model — and
appends both losses to the history. How the next configuration is proposed is
what distinguishes the methods:

* ``lso`` / ``fso(alpha)``: one GP on the scalar objective, EI proposal.
* ``fmo``: a fresh random weight each iteration scalarizes the (local, remote)
  buffer ParEGO-style before the GP fit.
* ``rand_mo``: uniform random proposals, no surrogate.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curator import curator_evaluate
from .datamodel import Configuration, Dataset, EvalRecord, HyperParamSpace, SplitIndex, sample_configuration
from .errors import GpFitError, InvalidInputError
from .learners import cross_validate, evaluate, train
from .moo import ScalarizationWeight, non_dominated_mask, normalize_objectives, parego_scalarize, sample_weight
from .seeds import derive_seed, rng_for
from .surrogate import gp_fit, propose
from .thresholdout import ThresholdoutMechanism, thresholdout_answer  # re-exported for callers

log = logging.getLogger(__name__)

METHOD_KINDS = ("lso", "fso", "fmo", "rand_mo")
SCALAR_KINDS = ("lso", "fso")
_FSO_NAME = re.compile(r"^fso(\d+)$")


@dataclass(frozen=True)
class MethodSpec:
    """One model-selection strategy; fso carries its mixing coefficient."""

    kind: str
    alpha: float | None = None
    curator_mode: str = "honest"

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise InvalidInputError(f"unknown method kind {self.kind!r}")
        if self.kind == "fso":
            if self.alpha is None or not 0.0 <= self.alpha <= 1.0:
                raise InvalidInputError("fso needs alpha in [0, 1]")
        elif self.alpha is not None:
            raise InvalidInputError(f"{self.kind} does not take alpha")
        if self.curator_mode not in ("honest", "thresholdout"):
            raise InvalidInputError(f"unknown curator mode {self.curator_mode!r}")

    @property
    def name(self) -> str:
        if self.kind == "fso":
            scaled = self.alpha * 10.0
            text = f"{scaled:.10g}" if abs(scaled - round(scaled)) > 1e-9 else str(int(round(scaled)))
            return f"fso{text}"
        return self.kind

    @property
    def is_scalar(self) -> bool:
        return self.kind in SCALAR_KINDS

    @classmethod
    def parse(cls, name: str, curator_mode: str = "honest") -> "MethodSpec":
        name = name.strip()
        if name in ("lso", "fmo", "rand_mo"):
            return cls(name, curator_mode=curator_mode)
        m = _FSO_NAME.match(name)
        if m:
            alpha = int(m.group(1)) / 10.0
            if alpha > 1.0:
                raise InvalidInputError(f"{name}: alpha above 1")
            return cls("fso", alpha=alpha, curator_mode=curator_mode)
        raise InvalidInputError(f"cannot parse method name {name!r}")


def scalar_objective(method: MethodSpec, j_local: float, j_remote: float) -> float:
    """alpha * local + (1 - alpha) * remote; lso is the alpha = 1 endpoint."""
    if method.kind == "lso":
        return j_local
    if method.kind == "fso":
        return method.alpha * j_local + (1.0 - method.alpha) * j_remote
    raise InvalidInputError(f"{method.name} has no scalar objective")


def selected_iterations(method: MethodSpec, history: Sequence[EvalRecord]) -> list[int]:
    """Indices of the history rows the method selects at the end of a run."""
    if not history:
        raise InvalidInputError("empty history")
    if method.is_scalar:
        objs = [scalar_objective(method, r.j_local, r.j_remote) for r in history]
        return [int(np.argmin(objs))]
    points = np.array([[r.j_local, r.j_remote] for r in history])
    mask = non_dominated_mask(points, orientation="minimize")
    picked, seen = [], set()
    for i in np.flatnonzero(mask):
        key = (points[i, 0], points[i, 1])
        if key not in seen:
            picked.append(int(i))
            seen.add(key)
    return picked


def select_final(method: MethodSpec, history: Sequence[EvalRecord]) -> list[Configuration]:
    """Scalar methods: the argmin configuration (earliest on ties).
    Multi-objective methods: the Pareto set of (local, remote) losses."""
    return [history[i].config for i in selected_iterations(method, history)]


@dataclass(frozen=True)
class RunResult:
    method: MethodSpec
    history: tuple[EvalRecord, ...]
    selected_indices: tuple[int, ...]
    selected_configs: tuple[Configuration, ...]
    selected_models: tuple
    gp_fallbacks: tuple[int, ...]


def run_rfms(
    method: MethodSpec,
    openbox: Dataset,
    openbox_split: SplitIndex,
    curators: Sequence,
    space: HyperParamSpace,
    initial_design: Sequence[Configuration],
    n_bo: int = 40,
    seed: int = 0,
    cv_folds: int = 10,
) -> RunResult:
    """Run one model-selection loop and return its history and selection.

    The initial design must be shared verbatim across the methods of one
    experiment. All internal randomness derives from ``seed`` with streams
    that do not depend on the method, so methods whose objectives coincide
    (fso with alpha 1 versus lso) replay identical proposal sequences.
    """
    if not initial_design:
        raise InvalidInputError("initial design must not be empty")
    inbag = openbox.subset(openbox_split.inbag)
    sizes = [h.inbag_size for h in curators]
    history: list[EvalRecord] = []
    fallbacks: list[int] = []

    def run_one(config: Configuration, iteration: int, phase: str) -> EvalRecord:
        j_local = cross_validate(inbag, config, folds=cv_folds, seed=derive_seed(seed, "cv", iteration))
        model = train(inbag, config, seed=derive_seed(seed, "train", iteration))
        resub_loss = evaluate(model, inbag)
        per_curator = [curator_evaluate(h, model, aux_openbox_loss=resub_loss) for h in curators]
        return EvalRecord.from_parts(config, j_local, per_curator, sizes, iteration, phase)

    for i, config in enumerate(initial_design):
        history.append(run_one(config, i, "initial_design"))

    n_initial = len(initial_design)
    for i in range(n_initial, n_initial + n_bo):
        if method.kind == "rand_mo":
            config = sample_configuration(space, rng_for(seed, "propose", i))
        else:
            x = np.array([r.config.encoded() for r in history])
            if method.is_scalar:
                y = np.array([scalar_objective(method, r.j_local, r.j_remote) for r in history])
            else:
                weight = sample_weight(2, rng_for(seed, "weight", i))
                objectives = normalize_objectives(np.array([[r.j_local, r.j_remote] for r in history]))
                y = parego_scalarize(objectives, weight)
            try:
                model = gp_fit(x, y)
            except GpFitError as exc:
                log.warning("iteration %d: surrogate fit failed (%s); proposing uniformly", i, exc)
                fallbacks.append(i)
                config = sample_configuration(space, rng_for(seed, "fallback", i))
            else:
                config = propose(model, space, rng_for(seed, "propose", i))
        history.append(run_one(config, i, "bo"))

    picked = selected_iterations(method, history)
    models = tuple(train(inbag, history[i].config, seed=derive_seed(seed, "train", i)) for i in picked)
    return RunResult(
        method=method,
        history=tuple(history),
        selected_indices=tuple(picked),
        selected_configs=tuple(history[i].config for i in picked),
        selected_models=models,
        gp_fallbacks=tuple(fallbacks),
    )
