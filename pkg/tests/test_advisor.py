"""Tests for algorithm auto-selection and the ask-and-tell advisor."""

import numpy as np
import pytest

from bbo.advisor import Advisor, AlgorithmPlan, TaskSpec, auto_select
from bbo.errors import ObservationShapeError, SetupError
from bbo.history import Observation, TrialState
from bbo.space import Configuration, ParameterSpec, SearchSpace


def float_space(d, seed=0):
    return SearchSpace(
        [ParameterSpec(f"x{i}", "float", low=0.0, high=1.0) for i in range(d)], seed=seed
    )


def quadratic(config):
    values = np.array([v for v in config.values.values()])
    return [float(np.sum((values - 0.5) ** 2))], []


def success(config, objectives, constraints=None):
    return Observation(
        config=config,
        objectives=objectives,
        constraints=constraints,
        trial_state=TrialState.SUCCESS,
    )


class TestAutoSelect:
    def test_high_dimension_switches_to_prf(self):
        task = TaskSpec(space=float_space(11), max_runs=100)
        plan = auto_select(task)
        assert plan == AlgorithmPlan("PRF", "EI", "random", "constant_liar_median")

    def test_many_runs_switch_to_prf(self):
        task = TaskSpec(space=float_space(5), max_runs=301)
        assert auto_select(task).surrogate_kind == "PRF"

    def test_default_is_gp(self):
        task = TaskSpec(space=float_space(5), max_runs=100)
        plan = auto_select(task)
        assert plan == AlgorithmPlan("GP", "EI", "random", "local_penalization")

    def test_boundary_cases_stay_gp(self):
        assert auto_select(TaskSpec(space=float_space(10), max_runs=300)).surrogate_kind == "GP"

    def test_acquisition_table(self):
        combos = {
            (1, 0): "EI",
            (1, 2): "EIC",
            (2, 0): "EHVI",
            (2, 2): "EHVI_C",
        }
        for (m, p), expected in combos.items():
            task = TaskSpec(space=float_space(3), num_objectives=m, num_constraints=p)
            assert auto_select(task).acquisition_kind == expected

    def test_ea_fallbacks(self):
        single = TaskSpec(space=float_space(3), algorithm="ea")
        multi = TaskSpec(space=float_space(3), num_objectives=2, algorithm="ea")
        assert auto_select(single).fallback == "DE"
        assert auto_select(multi).fallback == "NSGA2"
        assert auto_select(single).surrogate_kind == "none"

    def test_random_plan(self):
        plan = auto_select(TaskSpec(space=float_space(3), algorithm="random"))
        assert plan.surrogate_kind == "none" and plan.acquisition_kind == "none"

    def test_invalid_task(self):
        with pytest.raises(SetupError):
            TaskSpec(space=float_space(2), num_objectives=0)
        with pytest.raises(SetupError):
            TaskSpec(space=float_space(2), algorithm="annealing")


class TestAskTell:
    def test_init_design_served_in_order(self):
        task = TaskSpec(space=float_space(2), init_count=3, max_runs=30, seed=5)
        advisor = Advisor(task)
        first_three = []
        for _ in range(3):
            config = advisor.ask()
            first_three.append(config)
            advisor.tell(success(config, *quadratic(config)))
        assert first_three == advisor._init_points[:3]

    def test_ask_determinism_across_instances(self):
        task = TaskSpec(space=float_space(2), init_count=4, max_runs=40, seed=11)
        sequences = []
        for _ in range(2):
            advisor = Advisor(task)
            seq = []
            for _ in range(8):
                config = advisor.ask()
                seq.append(config)
                advisor.tell(success(config, *quadratic(config)))
            sequences.append(seq)
        assert sequences[0] == sequences[1]

    def test_tell_decrements_pending(self):
        task = TaskSpec(space=float_space(2), init_count=4, max_runs=40)
        advisor = Advisor(task)
        config = advisor.ask()
        assert advisor.num_pending == 1
        advisor.tell(success(config, *quadratic(config)))
        assert advisor.num_pending == 0

    def test_out_of_order_tells(self):
        task = TaskSpec(space=float_space(2), init_count=4, max_runs=40)
        advisor = Advisor(task)
        batch = [advisor.ask() for _ in range(3)]
        for config in reversed(batch):
            advisor.tell(success(config, *quadratic(config)))
        history = advisor.get_history()
        assert [o.config for o in history.observations] == list(reversed(batch))

    def test_wrong_shape_rejected(self):
        task = TaskSpec(space=float_space(2), init_count=2, max_runs=20)
        advisor = Advisor(task)
        config = advisor.ask()
        with pytest.raises(ObservationShapeError):
            advisor.tell(success(config, [1.0, 2.0]))

    def test_unknown_config_warns_but_records(self):
        task = TaskSpec(space=float_space(2), init_count=2, max_runs=20)
        advisor = Advisor(task)
        alien = Configuration({"x0": 0.5, "x1": 0.5})
        with pytest.warns(UserWarning):
            advisor.tell(success(alien, [1.0]))
        assert advisor.num_told == 1

    def test_external_tell_no_warning(self):
        task = TaskSpec(space=float_space(2), init_count=2, max_runs=20)
        advisor = Advisor(task)
        alien = Configuration({"x0": 0.5, "x1": 0.5})
        advisor.tell(success(alien, [1.0]), external=True)
        assert advisor.num_told == 1

    def test_history_snapshot_isolation(self):
        task = TaskSpec(space=float_space(2), init_count=2, max_runs=40)
        advisor = Advisor(task)
        assert len(advisor.get_history()) == 0
        for _ in range(3):
            config = advisor.ask()
            advisor.tell(success(config, *quadratic(config)))
        snap = advisor.get_history()
        for _ in range(5):
            config = advisor.ask()
            advisor.tell(success(config, *quadratic(config)))
        assert len(snap) == 3
        assert advisor.num_told == 8

    def test_model_ask_matches_dense_grid_argmax(self):
        space = SearchSpace([ParameterSpec("x", "float", low=0.0, high=1.0)])
        task = TaskSpec(space=space, init_count=2, max_runs=20, algorithm="gp", seed=3)
        advisor = Advisor(task)
        advisor.tell(success(Configuration({"x": 0.25}), [1.0]), external=True)
        advisor.tell(success(Configuration({"x": 0.75}), [1.0]), external=True)
        suggestion = advisor.ask()
        score_fn = advisor.last_ask_info["score_fn"]
        grid = np.linspace(0, 1, 2001).reshape(-1, 1)
        oracle = float(grid[np.argmax(score_fn(grid)), 0])
        assert abs(suggestion["x"] - oracle) <= 0.05

    def test_suggestion_beats_random_median_score(self):
        rng = np.random.default_rng(0)
        task = TaskSpec(space=float_space(2), init_count=6, max_runs=60, algorithm="gp", seed=7)
        advisor = Advisor(task)
        for _ in range(6):
            config = advisor.ask()
            advisor.tell(success(config, *quadratic(config)))
        suggestion = advisor.ask()
        info = advisor.last_ask_info
        assert info["phase"] == "model"
        from bbo.space import encode_matrix, sample_random

        candidates = sample_random(task.space, 100, rng)
        scores = info["score_fn"](encode_matrix(task.space, candidates, "one_hot"))
        own = info["score_fn"](encode_matrix(task.space, [suggestion], "one_hot"))
        assert float(own[0]) >= float(np.median(scores))

    def test_no_duplicate_suggestions_until_exhaustion(self):
        space = SearchSpace(
            [
                ParameterSpec("a", "int", low=0, high=3),
                ParameterSpec("b", "categorical", choices=("u", "v")),
            ]
        )
        task = TaskSpec(space=space, init_count=2, max_runs=8, algorithm="random", seed=1)
        advisor = Advisor(task)
        seen = []
        for _ in range(8):
            config = advisor.ask()
            assert config not in seen
            seen.append(config)
            advisor.tell(success(config, [0.0]))
        assert len(seen) == 8  # the whole 4 x 2 space, each exactly once


class TestAskBatch:
    def test_q1_equivalent_to_ask(self):
        task = TaskSpec(space=float_space(2), init_count=4, max_runs=40, seed=9)
        a = Advisor(task)
        b = Advisor(task)
        assert a.ask_batch(1) == [b.ask()]

    def test_batch_distinct(self):
        task = TaskSpec(space=float_space(2), init_count=4, max_runs=40, seed=2)
        advisor = Advisor(task)
        for _ in range(6):
            config = advisor.ask()
            advisor.tell(success(config, *quadratic(config)))
        batch = advisor.ask_batch(3)
        assert len(set(batch)) == 3
        assert advisor.num_pending == 3

    def test_batch_during_init_uses_design(self):
        task = TaskSpec(space=float_space(2), init_count=4, max_runs=40, seed=4)
        advisor = Advisor(task)
        batch = advisor.ask_batch(4)
        assert len(set(batch)) == 4

    def test_constant_liar_path_multiobjective(self):
        task = TaskSpec(
            space=float_space(2),
            num_objectives=2,
            init_count=5,
            max_runs=40,
            algorithm="gp",
            seed=6,
        )
        advisor = Advisor(task)
        for _ in range(5):
            config = advisor.ask()
            x = config["x0"]
            advisor.tell(success(config, [x, 1.0 - x]))
        batch = advisor.ask_batch(2)
        assert len(set(batch)) == 2


class TestEvolutionaryMode:
    def test_de_improves_over_initial(self):
        task = TaskSpec(space=float_space(3), algorithm="ea", max_runs=200, seed=0)
        advisor = Advisor(task)
        bests = []
        for _ in range(120):
            config = advisor.ask()
            obs = success(config, *quadratic(config))
            advisor.tell(obs)
            bests.append(advisor.get_history().incumbent().objectives[0])
        pop = advisor._ea.pop_size
        assert bests[-1] < bests[pop - 1]

    def test_nsga2_mode_produces_front(self):
        task = TaskSpec(
            space=float_space(2), num_objectives=2, algorithm="ea", max_runs=120, seed=0
        )
        advisor = Advisor(task)
        for _ in range(90):
            config = advisor.ask()
            x = config["x0"]
            y = config["x1"]
            advisor.tell(success(config, [x + 0.01 * y, (1 - x) + 0.01 * y]))
        front = advisor.get_history().pareto_front()
        assert len(front) >= 2

    def test_ea_handles_failures(self):
        task = TaskSpec(space=float_space(2), algorithm="ea", max_runs=100, seed=3)
        advisor = Advisor(task)
        for i in range(60):
            config = advisor.ask()
            if i % 3 == 0:
                advisor.tell(Observation(config=config, trial_state=TrialState.FAILED))
            else:
                advisor.tell(success(config, *quadratic(config)))
        assert advisor.get_history().incumbent() is not None
