"""The ask-and-tell engine.

An :class:`Advisor` owns the history for one task, picks algorithms from the
task's characteristics, produces suggestions (single and batch), and ingests
observations. The selection rule lives in :func:`auto_select` so every
automatic decision is auditable in one place.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import evolution
from .acquisition import (
    AcquisitionContext,
    constrained_ei,
    ehvi,
    estimate_lipschitz,
    expected_improvement,
    local_penalization,
    maximize_acquisition,
)
from .errors import ExhaustedSpaceError, InsufficientDataError, SetupError
from .history import IMPUTE_WORST, History, Observation
from .space import (
    INDEX,
    ONE_HOT,
    Configuration,
    SearchSpace,
    encode_matrix,
    from_unit_vector,
    latin_hypercube,
    sample_random,
    to_unit_vector,
)
from .surrogate import fit_gp, fit_prf

GP = "GP"
PRF = "PRF"
NONE = "none"

EI = "EI"
EIC = "EIC"
EHVI = "EHVI"
EHVI_C = "EHVI_C"

DE = "DE"
NSGA2 = "NSGA2"
RANDOM = "random"

LOCAL_PENALIZATION = "local_penalization"
CONSTANT_LIAR_MEDIAN = "constant_liar_median"

_ALGORITHMS = ("auto", "gp", "prf", "ea", "random")
_INIT_DESIGNS = ("latin_hypercube", "random")

# surrogate switch thresholds from the automatic selection rule
_PRF_DIM_THRESHOLD = 10
_PRF_RUNS_THRESHOLD = 300

# inner-optimization budgets; the multi-objective path uses a smaller pool
# because every candidate costs a Monte Carlo EHVI evaluation
_N_CANDIDATES = 5000
_N_LOCAL_STARTS = 10
_N_CANDIDATES_MO = 600
_N_LOCAL_STARTS_MO = 5
_EHVI_MC_SAMPLES = 256

_FAILED_SENTINEL = 1e18


@dataclass
class TaskSpec:
    """Declarative description of one optimization task."""

    space: SearchSpace
    num_objectives: int = 1
    num_constraints: int = 0
    max_runs: int = 100
    batch_size: int = 1
    algorithm: str = "auto"
    init_design: str = "latin_hypercube"
    init_count: Optional[int] = None
    ref_point: Optional[tuple] = None
    seed: int = 0
    task_id: str = "task"

    def __post_init__(self):
        if self.num_objectives < 1:
            raise SetupError("num_objectives must be >= 1")
        if self.num_constraints < 0:
            raise SetupError("num_constraints must be >= 0")
        if self.max_runs < 1:
            raise SetupError("max_runs must be >= 1")
        if self.batch_size < 1:
            raise SetupError("batch_size must be >= 1")
        if self.algorithm not in _ALGORITHMS:
            raise SetupError(f"unknown algorithm {self.algorithm!r}; expected one of {_ALGORITHMS}")
        if self.init_design not in _INIT_DESIGNS:
            raise SetupError(f"unknown init_design {self.init_design!r}")
        if self.init_count is None:
            default = max(2 * self.space.dimensionality, 8)
            self.init_count = max(1, min(default, self.max_runs // 3))
        if self.init_count < 1:
            raise SetupError("init_count must be >= 1")
        if self.ref_point is not None and len(self.ref_point) != self.num_objectives:
            raise SetupError("ref_point length must equal num_objectives")


@dataclass(frozen=True)
class AlgorithmPlan:
    """Resolved choice of surrogate, acquisition, fallback, batch strategy."""

    surrogate_kind: str
    acquisition_kind: str
    fallback: str
    batch_strategy: str


def auto_select(task: TaskSpec) -> AlgorithmPlan:
    """Pick an algorithm plan from the task characteristics.

    Surrogate-based plans use PRF instead of GP when the space has more than
    ten parameters or the trial budget exceeds 300; the acquisition follows
    the (objectives, constraints) signature of the task.
    """
    m, p = task.num_objectives, task.num_constraints
    if m == 1:
        acquisition = EI if p == 0 else EIC
    else:
        acquisition = EHVI if p == 0 else EHVI_C

    if task.algorithm in ("ea", "random"):
        surrogate = NONE
        acquisition = NONE
    elif task.algorithm == "gp":
        surrogate = GP
    elif task.algorithm == "prf":
        surrogate = PRF
    else:
        big_space = task.space.dimensionality > _PRF_DIM_THRESHOLD
        many_runs = task.max_runs > _PRF_RUNS_THRESHOLD
        surrogate = PRF if (big_space or many_runs) else GP

    if task.algorithm == "ea":
        fallback = DE if m == 1 else NSGA2
    else:
        fallback = RANDOM

    if surrogate == GP and m == 1:
        batch_strategy = LOCAL_PENALIZATION
    else:
        batch_strategy = CONSTANT_LIAR_MEDIAN

    return AlgorithmPlan(surrogate, acquisition, fallback, batch_strategy)


class _EAState:
    """Generation-buffered evolutionary algorithm behind ask/tell."""

    def __init__(self, task: TaskSpec, kind: str, rng: np.random.Generator):
        self.kind = kind
        self.space = task.space
        self.rng = rng
        if kind == DE:
            self.pop_size = max(4, min(20, task.max_runs // 2))
        else:
            n = max(4, min(40, task.max_runs // 2))
            self.pop_size = n if n % 2 == 0 else n - 1
        self.parents: Optional[evolution.Population] = None
        # slots keep trial order stable even when tells arrive out of order
        self.queue: list[tuple[int, np.ndarray]] = []
        self.open: dict[Configuration, tuple[int, np.ndarray]] = {}
        self.collected: dict[int, evolution.Individual] = {}
        self.num_objectives = task.num_objectives

    def set_queue(self, genomes: Sequence[np.ndarray]) -> None:
        self.queue = list(enumerate(genomes))

    def config_of(self, genome: np.ndarray) -> Configuration:
        return from_unit_vector(self.space, genome, INDEX)

    def next_slot(self) -> Optional[tuple[int, np.ndarray]]:
        if self.queue:
            return self.queue.pop(0)
        return None

    def receive(self, config: Configuration, obs: Observation) -> None:
        entry = self.open.pop(config, None)
        if entry is None:
            return
        slot, genome = entry
        if obs.is_success:
            objectives = np.asarray(obs.objectives, dtype=float)
            violation = evolution.total_violation(obs.constraints)
        else:
            objectives = np.full(self.num_objectives, _FAILED_SENTINEL)
            violation = _FAILED_SENTINEL
        self.collected[slot] = evolution.Individual(
            genome=genome, objectives=objectives, constraint_violation=violation
        )

    def generation_complete(self) -> bool:
        return not self.queue and not self.open and len(self.collected) == self.pop_size

    def advance(self) -> None:
        """Fold the collected evaluations into the next set of trial genomes."""
        ordered = [self.collected[i] for i in range(self.pop_size)]
        if self.parents is None:
            self.parents = evolution.Population(ordered, generation=0)
        elif self.kind == DE:
            self.parents = evolution.de_select(self.parents, ordered)
        else:
            self.parents = evolution.nsga2_select(
                self.parents.individuals,
                ordered,
                self.pop_size,
                self.parents.generation + 1,
            )
        self.collected = {}
        if self.kind == DE:
            genomes = evolution.de_propose(self.parents, evolution.DE_F, evolution.DE_CR, self.rng)
        else:
            genomes = evolution.nsga2_propose(self.parents, self.rng)
        self.set_queue(genomes)


class Advisor:
    """Stateful ask-and-tell suggestion engine for one task."""

    def __init__(self, task: TaskSpec):
        self.task = task
        self.plan = auto_select(task)
        self._rng = np.random.default_rng(task.seed)
        self._history = History(
            task_id=task.task_id,
            num_objectives=task.num_objectives,
            num_constraints=task.num_constraints,
            ref_point=task.ref_point,
        )
        self._pending: list[Configuration] = []
        self._told: list[Configuration] = []
        self._told_set: set[Configuration] = set()
        self._stale = True
        self._objective_models: list = []
        self._constraint_models: list = []
        self._warm_hypers: dict = {}
        self._refit_count = 0
        self._encoding = ONE_HOT if self.plan.surrogate_kind == GP else INDEX
        self.last_ask_info: dict = {}

        if task.algorithm == "ea":
            self._ea = _EAState(task, self.plan.fallback, self._rng)
            self._init_points = self._initial_design(self._ea.pop_size)
            self._ea.set_queue([to_unit_vector(task.space, c, INDEX) for c in self._init_points])
        else:
            self._ea = None
            self._init_points = self._initial_design(task.init_count)
        self._init_served = 0

    # --- queries ---

    def get_history(self) -> History:
        """Immutable snapshot of the trace so far."""
        return self._history.snapshot()

    @property
    def num_told(self) -> int:
        return len(self._history)

    @property
    def num_pending(self) -> int:
        return len(self._pending)

    # --- ask ---

    def ask(self) -> Configuration:
        """Produce the next configuration to evaluate and mark it pending."""
        config = self._produce()
        self._pending.append(config)
        return config

    def ask_batch(self, q: Optional[int] = None) -> list[Configuration]:
        """Produce q mutually distinct pending configurations.

        The first point is a plain ask; later points are chosen under local
        penalization (GP, single objective) or a constant-liar refit at the
        median observed values.
        """
        if q is None:
            q = self.task.batch_size
        if q < 1:
            raise ValueError("batch size must be >= 1")
        batch = [self.ask()]
        for _ in range(q - 1):
            config = self._produce_batch_follower()
            self._pending.append(config)
            batch.append(config)
        return batch

    # --- tell ---

    def tell(self, obs: Observation, external: bool = False) -> None:
        """Ingest one observation; surrogates refit lazily at the next ask."""
        known = obs.config in self._pending
        if not known and not external:
            warnings.warn(
                "observation for a configuration this advisor never suggested; "
                "recording it anyway",
                stacklevel=2,
            )
        self._history.record(obs)  # raises on shape mismatch before state changes
        if known:
            self._pending.remove(obs.config)
        self._told.append(obs.config)
        self._told_set.add(obs.config)
        self._stale = True
        if self._ea is not None:
            self._ea.receive(obs.config, obs)

    # --- internals ---

    def _initial_design(self, count: int) -> list[Configuration]:
        if self.task.init_design == "latin_hypercube":
            return latin_hypercube(self.task.space, count, self._rng)
        return sample_random(self.task.space, count, self._rng)

    def _random_unseen(self) -> Configuration:
        excluded = self._told_set | set(self._pending)
        for _ in range(256):
            config = sample_random(self.task.space, 1, self._rng)[0]
            if config not in excluded:
                return config
        total = self.task.space.n_configurations()
        if total is not None and total <= 1_000_000:
            all_configs = list(self.task.space.all_configurations())
            order = self._rng.permutation(total)
            for i in order:
                if all_configs[i] not in excluded:
                    return all_configs[i]
        raise ExhaustedSpaceError("could not sample an unseen configuration")

    def _produce(self) -> Configuration:
        if self._ea is not None:
            return self._ea_produce()
        if self.num_told < self.task.init_count:
            config = self._next_init_point()
            if config is not None:
                self.last_ask_info = {"phase": "init"}
                return config
        if self.plan.surrogate_kind == NONE:
            self.last_ask_info = {"phase": "random"}
            return self._random_unseen()
        return self._model_based_ask()

    def _next_init_point(self) -> Optional[Configuration]:
        excluded = self._told_set | set(self._pending)
        while self._init_served < len(self._init_points):
            config = self._init_points[self._init_served]
            self._init_served += 1
            if config not in excluded:
                return config
        if self.num_told == 0 or len(self.successes()) == 0:
            # no data to model yet; keep the design going with random points
            return self._random_unseen()
        return None

    def successes(self):
        return self._history.successes()

    def _refit(self) -> None:
        X, Y, C = self._history.training_targets(
            self.task.space, self._encoding, IMPUTE_WORST
        )
        if X.shape[0] < 2:
            raise InsufficientDataError("need at least 2 rows to fit surrogates")
        self._refit_count += 1
        self._objective_models = [
            self._fit_one(X, Y[:, j], warm_key=("obj", j)) for j in range(Y.shape[1])
        ]
        self._constraint_models = [
            self._fit_one(X, C[:, j], warm_key=("con", j)) for j in range(C.shape[1])
        ]
        self._stale = False

    def _fit_one(self, X: np.ndarray, y: np.ndarray, warm_key=None):
        if self.plan.surrogate_kind == GP:
            warm = self._warm_hypers.get(warm_key) if warm_key is not None else None
            # warm starts converge in a few steps; run the full multi-start
            # search periodically to escape hyperparameter local optima
            deep = warm is None or self._refit_count % 10 == 1
            model = fit_gp(
                X,
                y,
                restarts=2 if deep else 0,
                rng=self._rng,
                extra_inits=(warm,) if warm is not None else (),
            )
            if warm_key is not None:
                self._warm_hypers[warm_key] = model.log_hypers
            return model
        return fit_prf(X, y, rng=self._rng)

    def _default_ref_point(self) -> np.ndarray:
        worst = self._history.success_objectives().max(axis=0)
        ref = worst + 0.1 * np.abs(worst)
        ref[worst == 0] += 0.1
        return ref

    def _build_context(self, pending_encoded: Sequence[np.ndarray] = ()) -> AcquisitionContext:
        m = self.task.num_objectives
        eta = None
        front = None
        ref = None
        if m == 1:
            best = self._history.incumbent()
            eta = float(best.objectives[0]) if best is not None else None
        else:
            ref = (
                np.asarray(self.task.ref_point, dtype=float)
                if self.task.ref_point is not None
                else self._default_ref_point()
            )
            pareto = self._history.pareto_front()
            if pareto:
                pts = np.array([o.objectives for o in pareto])
                inside = np.all(pts <= ref, axis=1) & np.any(pts < ref, axis=1)
                pts = pts[inside]
                front = pts if pts.shape[0] else None
        return AcquisitionContext(
            objective_models=self._objective_models,
            constraint_models=self._constraint_models,
            eta=eta,
            front=front,
            ref_point=ref,
            pending=list(pending_encoded),
        )

    def _score_function(self, ctx: AcquisitionContext):
        kind = self.plan.acquisition_kind
        if kind == EI:
            model = ctx.objective_models[0]
            eta = ctx.eta

            def score(X):
                mu, var = model.predict(X)
                return expected_improvement(mu, var, eta)

            return score
        if kind == EIC:
            return lambda X: constrained_ei(X, ctx)
        # EHVI / EHVI_C: freeze the Monte Carlo seed for this ask so every
        # batch of candidates is scored with common random numbers
        mc_seed = int(self._rng.integers(2**63))

        def score(X):
            values = ehvi(X, ctx, _EHVI_MC_SAMPLES, np.random.default_rng(mc_seed))
            values = np.atleast_1d(values)
            if kind == EHVI_C:
                values = values * ctx.feasibility_product(X)
            return values

        return score

    def _inner_budgets(self) -> tuple[int, int]:
        if self.task.num_objectives > 1:
            return _N_CANDIDATES_MO, _N_LOCAL_STARTS_MO
        return _N_CANDIDATES, _N_LOCAL_STARTS

    def _model_based_ask(self) -> Configuration:
        try:
            if self._stale:
                self._refit()
        except InsufficientDataError:
            self.last_ask_info = {"phase": "random"}
            return self._random_unseen()
        ctx = self._build_context()
        score_fn = self._score_function(ctx)
        n_candidates, n_local = self._inner_budgets()
        ranked = maximize_acquisition(
            score_fn,
            self.task.space,
            self._rng,
            n_candidates=n_candidates,
            n_local_starts=n_local,
            encoding=self._encoding,
            told=self._told,
            pending=self._pending,
        )
        config = ranked[0]
        self.last_ask_info = {
            "phase": "model",
            "score_fn": score_fn,
            "context": ctx,
            "config": config,
        }
        return config

    def _produce_batch_follower(self) -> Configuration:
        if self._ea is not None:
            return self._ea_produce()
        if self.num_told < self.task.init_count:
            config = self._next_init_point()
            if config is not None:
                return config
        if self.plan.surrogate_kind == NONE:
            return self._random_unseen()
        if self.plan.batch_strategy == LOCAL_PENALIZATION:
            return self._penalized_ask()
        return self._constant_liar_ask()

    def _penalized_ask(self) -> Configuration:
        try:
            if self._stale:
                self._refit()
        except InsufficientDataError:
            return self._random_unseen()
        pending_encoded = [
            to_unit_vector(self.task.space, c, self._encoding) for c in self._pending
        ]
        ctx = self._build_context(pending_encoded)
        base = self._score_function(ctx)
        model = ctx.objective_models[0]
        lipschitz = estimate_lipschitz(
            model, self.task.space.encoded_width(self._encoding), self._rng
        )
        observed = self._history.success_objectives()
        best_value = float(observed.min()) if observed is not None else 0.0

        def score(X):
            return local_penalization(
                base(X), X, pending_encoded, model, lipschitz, best_value
            )

        n_candidates, n_local = self._inner_budgets()
        ranked = maximize_acquisition(
            score,
            self.task.space,
            self._rng,
            n_candidates=n_candidates,
            n_local_starts=n_local,
            encoding=self._encoding,
            told=self._told,
            pending=self._pending,
        )
        return ranked[0]

    def _constant_liar_ask(self) -> Configuration:
        try:
            X, Y, C = self._history.training_targets(
                self.task.space, self._encoding, IMPUTE_WORST
            )
        except InsufficientDataError:
            return self._random_unseen()
        lie_obj = np.median(Y, axis=0)
        lie_con = np.median(C, axis=0) if C.shape[1] else np.empty(0)
        X_pend = encode_matrix(self.task.space, self._pending, self._encoding)
        X_aug = np.vstack([X, X_pend])
        Y_aug = np.vstack([Y, np.tile(lie_obj, (len(self._pending), 1))])
        C_aug = (
            np.vstack([C, np.tile(lie_con, (len(self._pending), 1))])
            if C.shape[1]
            else np.empty((X_aug.shape[0], 0))
        )
        objective_models = [self._fit_one(X_aug, Y_aug[:, j]) for j in range(Y_aug.shape[1])]
        constraint_models = [self._fit_one(X_aug, C_aug[:, j]) for j in range(C_aug.shape[1])]

        saved = (self._objective_models, self._constraint_models)
        self._objective_models = objective_models
        self._constraint_models = constraint_models
        try:
            ctx = self._build_context()
            score_fn = self._score_function(ctx)
        finally:
            self._objective_models, self._constraint_models = saved

        n_candidates, n_local = self._inner_budgets()
        ranked = maximize_acquisition(
            score_fn,
            self.task.space,
            self._rng,
            n_candidates=n_candidates,
            n_local_starts=n_local,
            encoding=self._encoding,
            told=self._told,
            pending=self._pending,
        )
        return ranked[0]

    # --- evolutionary mode ---

    def _ea_produce(self) -> Configuration:
        ea = self._ea
        if ea.generation_complete():
            ea.advance()
        slot = ea.next_slot()
        if slot is None:
            # generation still in flight; bridge with a random unseen config
            self.last_ask_info = {"phase": "random"}
            return self._random_unseen()
        slot_index, genome = slot
        config = ea.config_of(genome)
        excluded = self._told_set | set(self._pending)
        if config in excluded:
            config = self._random_unseen()
            genome = to_unit_vector(self.task.space, config, INDEX)
        ea.open[config] = (slot_index, genome)
        self.last_ask_info = {"phase": "ea"}
        return config
