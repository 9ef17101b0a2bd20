"""Tests for analysis series, Shapley importance, HTML and JSON artifacts."""

from html.parser import HTMLParser

import numpy as np
import pytest

from bbo.errors import HistoryParseError, InsufficientDataError, WrongTaskTypeError
from bbo.history import History, Observation, TrialState
from bbo.moo import hypervolume
from bbo.report import (
    convergence_curve,
    default_analyses,
    export_json,
    hv_over_time,
    import_json,
    importance_shapley,
    render_html,
)
from bbo.space import Configuration


def obs(values, objectives, constraints=None, state=TrialState.SUCCESS, extra=None):
    return Observation(
        config=Configuration(values),
        objectives=objectives if state == TrialState.SUCCESS else None,
        constraints=constraints if state == TrialState.SUCCESS else None,
        trial_state=state,
        extra=extra or {},
    )


def single_history(objs, constraints=None):
    p = 0 if constraints is None else len(constraints[0])
    h = History("t", num_objectives=1, num_constraints=p)
    for i, y in enumerate(objs):
        cons = constraints[i] if constraints is not None else None
        h.record(obs({"x": i / 10}, [y], cons))
    return h


class TestConvergenceCurve:
    def test_basic(self):
        h = single_history([3.0, 1.0, 2.0])
        assert convergence_curve(h) == [(1, 3.0), (2, 1.0), (3, 1.0)]

    def test_feasibility_gating(self):
        h = History("t", num_objectives=1, num_constraints=1)
        h.record(obs({"x": 0.1}, [1.0], [2.0]))
        h.record(obs({"x": 0.2}, [0.5], [0.5]))
        h.record(obs({"x": 0.3}, [5.0], [-1.0]))
        assert convergence_curve(h) == [(3, 5.0)]

    def test_matches_prefix_min_oracle(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=200)
        h = single_history(list(values))
        series = dict(convergence_curve(h))
        running = np.minimum.accumulate(values)
        for i in range(200):
            assert series[i + 1] == running[i]

    def test_nonincreasing(self):
        rng = np.random.default_rng(1)
        h = single_history(list(rng.uniform(size=100)))
        ys = [y for _, y in convergence_curve(h)]
        assert all(b <= a for a, b in zip(ys, ys[1:]))

    def test_wrong_task_type(self):
        h = History("t", num_objectives=2)
        with pytest.raises(WrongTaskTypeError):
            convergence_curve(h)


class TestHvOverTime:
    def test_single_feasible_point(self):
        h = History("t", num_objectives=2)
        h.record(obs({"x": 0.1}, [0.0, 0.0]))
        series = hv_over_time(h, (1.0, 1.0))
        assert series == [(1, 1.0)]

    def test_all_infeasible_all_zero(self):
        h = History("t", num_objectives=2, num_constraints=1)
        for i in range(4):
            h.record(obs({"x": i / 10}, [0.1, 0.1], [1.0]))
        series = hv_over_time(h, (1.0, 1.0))
        assert [v for _, v in series] == [0.0] * 4

    def test_matches_recomputation_oracle(self):
        rng = np.random.default_rng(2)
        h = History("t", num_objectives=2)
        pts = rng.uniform(size=(50, 2))
        for i, p in enumerate(pts):
            h.record(obs({"x": i / 50}, list(p)))
        ref = (1.5, 1.5)
        series = hv_over_time(h, ref)
        for i, value in series:
            feas = pts[:i]
            assert value == pytest.approx(hypervolume(feas, ref))

    def test_nondecreasing(self):
        rng = np.random.default_rng(3)
        h = History("t", num_objectives=2)
        for i in range(60):
            h.record(obs({"x": i / 60}, list(rng.uniform(size=2))))
        values = [v for _, v in hv_over_time(h, (2.0, 2.0))]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


class TestImportanceShapley:
    def make_history(self, fn, n=60, seed=0):
        rng = np.random.default_rng(seed)
        h = History("t", num_objectives=1)
        for _ in range(n):
            x1, x2 = rng.uniform(size=2)
            h.record(obs({"x1": float(x1), "x2": float(x2)}, [fn(x1, x2)]))
        return h

    def test_constant_target_null_game(self):
        h = self.make_history(lambda a, b: 1.0)
        result = importance_shapley(h, n_permutations=64, rng=np.random.default_rng(0))
        assert all(v <= 1e-9 for v in result.per_parameter.values())

    def test_dominant_parameter_detected(self):
        h = self.make_history(lambda a, b: float(a))
        result = importance_shapley(h, n_permutations=256, rng=np.random.default_rng(1))
        assert result.per_parameter["x1"] > 5 * result.per_parameter["x2"]

    def test_efficiency_within_tolerance(self):
        h = self.make_history(lambda a, b: float(a + 0.3 * b + a * b), n=80, seed=4)
        result = importance_shapley(h, n_permutations=128, rng=np.random.default_rng(2))
        assert np.all(result.row_residuals <= result.row_tolerances)

    def test_matches_exhaustive_two_player_shapley(self):
        h = self.make_history(lambda a, b: float(a), n=80, seed=5)
        rng = np.random.default_rng(3)
        result = importance_shapley(h, n_permutations=256, rng=rng)

        # exhaustive oracle for d=2: phi_1 = mean over (x, z) of
        # 0.5 [f(x1,z2) - f(z1,z2)] + 0.5 [f(x1,x2) - f(z1,x2)]
        from bbo.report import _design_matrix
        from bbo.surrogate import fit_prf

        X, names = _design_matrix(h, None)
        y = np.array([o.objectives[0] for o in h.successes()])
        model = fit_prf(X, y, rng=np.random.default_rng(3))
        phis = np.zeros(2)
        for x in X[:40]:
            for z in X[:20]:
                for j in (0, 1):
                    other = 1 - j
                    with_j = z.copy()
                    with_j[j] = x[j]
                    both = x.copy()
                    only_other = z.copy()
                    only_other[other] = x[other]
                    m1 = model.predict(with_j.reshape(1, -1))[0][0] - model.predict(
                        z.reshape(1, -1)
                    )[0][0]
                    m2 = model.predict(both.reshape(1, -1))[0][0] - model.predict(
                        only_other.reshape(1, -1)
                    )[0][0]
                    phis[j] += abs(0.5 * m1 + 0.5 * m2)
        phis /= 40 * 20
        # both routes agree that x1 dwarfs x2
        assert phis[0] > 5 * phis[1]
        assert result.per_parameter["x1"] > 5 * result.per_parameter["x2"]

    def test_insufficient_data(self):
        h = self.make_history(lambda a, b: float(a), n=3)
        with pytest.raises(InsufficientDataError):
            importance_shapley(h, rng=np.random.default_rng(0))


class TestJsonRoundTrip:
    def mixed_history(self):
        h = History("demo", num_objectives=2, num_constraints=1, ref_point=(5.0, 5.0))
        rng = np.random.default_rng(7)
        for i in range(100):
            state = TrialState.SUCCESS if i % 7 else TrialState.FAILED
            config = {"lr": float(rng.uniform()), "opt": ("adam", "sgd")[i % 2], "k": int(i)}
            if state == TrialState.SUCCESS:
                h.record(
                    obs(config, list(rng.normal(size=2)), [float(rng.normal())], extra={"note": str(i)})
                )
            else:
                h.record(
                    Observation(
                        config=Configuration(config),
                        trial_state=state,
                        elapsed_time=float(i),
                        extra={"error": "boom"},
                    )
                )
        return h

    def test_round_trip_equality(self):
        h = self.mixed_history()
        restored = import_json(export_json(h))
        assert restored.task_id == h.task_id
        assert restored.num_objectives == h.num_objectives
        assert restored.ref_point == h.ref_point
        assert len(restored) == len(h)
        for a, b in zip(h.observations, restored.observations):
            assert a.config == b.config
            assert a.objectives == b.objectives
            assert a.constraints == b.constraints
            assert a.trial_state == b.trial_state
            assert a.elapsed_time == b.elapsed_time
            assert a.extra == b.extra

    def test_export_stable_bytes(self):
        h = self.mixed_history()
        assert export_json(h) == export_json(h)
        assert export_json(h) == export_json(import_json(export_json(h)))

    def test_truncated_file_is_parse_error(self):
        text = export_json(self.mixed_history())
        with pytest.raises(HistoryParseError):
            import_json(text[: len(text) // 2])

    def test_wrong_version(self):
        text = export_json(single_history([1.0])).replace('"version": "1"', '"version": "9"')
        with pytest.raises(HistoryParseError):
            import_json(text)

    def test_missing_field_context(self):
        with pytest.raises(HistoryParseError) as err:
            import_json('{"version": "1", "task_id": "x"}')
        assert "num_objectives" in str(err.value)


class _StrictChecker(HTMLParser):
    VOID = {"meta", "br", "hr", "img", "input", "link", "circle", "rect", "line", "polyline"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.stack = []
        self.errors = []

    def handle_starttag(self, tag, attrs):
        if tag not in self.VOID:
            self.stack.append(tag)

    def handle_startendtag(self, tag, attrs):
        pass

    def handle_endtag(self, tag):
        if tag in self.VOID:
            return
        if not self.stack or self.stack[-1] != tag:
            self.errors.append(f"mismatched </{tag}> at {self.getpos()}")
        else:
            self.stack.pop()


def check_html(text):
    checker = _StrictChecker()
    checker.feed(text)
    checker.close()
    assert not checker.errors, checker.errors
    assert not checker.stack, f"unclosed tags: {checker.stack}"


class TestRenderHtml:
    def test_contains_table_rows(self):
        h = single_history([3.0, 1.0, 2.0])
        html_text = render_html(h, {})
        assert html_text.count("<tr>") == 1 + 3  # header + one row per observation

    def test_byte_determinism(self):
        h = single_history([3.0, 1.0, 2.0])
        analyses = default_analyses(h)
        assert render_html(h, analyses) == render_html(h, analyses)

    def test_well_formed(self):
        h = single_history(list(np.random.default_rng(0).uniform(size=10)))
        check_html(render_html(h, default_analyses(h)))

    def test_data_island_is_exact_export(self):
        h = self.make_mo_history()
        html_text = render_html(h, default_analyses(h))
        start = html_text.index('id="history-data">') + len('id="history-data">')
        end = html_text.index("</script>", start)
        island = html_text[start:end].strip()
        assert island == export_json(h)

    def make_mo_history(self):
        h = History("mo", num_objectives=2)
        rng = np.random.default_rng(1)
        for i in range(12):
            h.record(obs({"x": float(rng.uniform())}, list(rng.uniform(size=2))))
        return h

    def test_multiobjective_sections(self):
        h = self.make_mo_history()
        text = render_html(h, default_analyses(h))
        assert "Pareto front" in text
        assert "Hypervolume" in text
        check_html(text)

    def test_convergence_section_single_objective(self):
        h = single_history(list(np.random.default_rng(2).uniform(size=8)))
        text = render_html(h, default_analyses(h))
        assert "Convergence" in text
