"""Trial-and-error learning loop: target, forward pass, steps, traces."""

import math
from dataclasses import replace

import numpy as np
import pytest

from popsim.config import config_from_dict, default_config
from popsim.csvio import read_csv
from popsim.learning import (
    LearningConfig,
    RunTrace,
    SystemState,
    build_system,
    evaluate_error,
    forward,
    learning_step,
    run_learning,
    steady_state_stats,
    target,
    write_trace_csv,
)
from popsim.population import linear_population
from popsim.weights import weights_from_values


def small_config(**run_overrides):
    run = {"steps": 200, "eval_every": 50, "instances": 2, "seed": 42}
    run.update(run_overrides)
    return config_from_dict({"population": {"n_in": 30, "n_out": 30}, "run": run})


def make_state(n=20, values=None, analog=True, **learn_kwargs):
    pop_in = linear_population(n)
    pop_out = linear_population(n)
    if values is None:
        values = np.zeros((n, n))
    w = weights_from_values(values, analog=analog)
    return SystemState(pop_in, pop_out, w, LearningConfig(**learn_kwargs))


class TestTarget:
    def test_odd_at_zero(self):
        assert target(0.0, LearningConfig()) == 0.0

    def test_quarter_period_peak(self):
        assert target(0.05, LearningConfig()) == pytest.approx(0.1, rel=1e-12)

    def test_full_period_endpoint(self):
        assert abs(target(0.1, LearningConfig())) < 1e-15

    def test_literal_convention(self):
        cfg = LearningConfig(target_convention="literal")
        assert target(0.05, cfg) == pytest.approx(0.1 * math.sin(0.05 / (0.1 * math.pi)), rel=1e-12)
        # the literal reading is nearly linear over the whole input range
        assert abs(target(0.1, cfg) - 0.1 * math.sin(1 / math.pi)) < 1e-15

    def test_custom_function_pluggable(self):
        cfg = LearningConfig(target_fn=lambda v: 0.5 * v)
        assert target(0.08, cfg) == pytest.approx(0.04)


class TestForward:
    def test_all_dead_is_degenerate(self):
        state = make_state(10)
        state.input_pop.alive[:] = False
        res = forward(state, 0.0, np.random.default_rng(0))
        assert res.degenerate
        assert res.v_out == pytest.approx(state.output_pop.bias_midpoint)

    def test_deterministic_given_seed(self):
        state_vals = np.random.default_rng(1).uniform(-1, 1, (20, 20))
        a = forward(make_state(20, state_vals), 0.03, np.random.default_rng(5))
        b = forward(make_state(20, state_vals), 0.03, np.random.default_rng(5))
        assert a.v_out == b.v_out
        assert np.array_equal(a.r_in, b.r_in)

    def test_identity_weights_roundtrip(self):
        state = make_state(50, np.eye(50))
        rng = np.random.default_rng(2)
        outs = np.array([forward(state, 0.04, rng).v_out for _ in range(80)])
        se = outs.std() / math.sqrt(len(outs))
        assert abs(outs.mean() - 0.04) < 4 * se


class TestLearningStep:
    def test_hit_leaves_weights_alone(self):
        # equal positive weights decode to the grid center; a zero target
        # lands inside the window on every step
        state = make_state(30, np.full((30, 30), 0.5), target_fn=lambda v: 0.0)
        rng = np.random.default_rng(3)
        before = state.weights.codes.copy()
        for _ in range(20):
            rec = learning_step(state, rng)
            assert not rec.updated
            assert rec.loss_count == 0
        assert np.array_equal(state.weights.codes, before)

    def test_miss_updates_weights(self):
        state = make_state(30, np.full((30, 30), 0.5))  # sine target misses
        rng = np.random.default_rng(4)
        hits = [learning_step(state, rng).updated for _ in range(30)]
        assert any(hits)

    def test_degenerate_counts_as_miss(self):
        state = make_state(20)  # zero weights: no output rate at all
        rng = np.random.default_rng(5)
        rec = learning_step(state, rng)
        assert rec.degenerate
        assert rec.updated

    def test_records_are_consistent(self):
        state = make_state(25, np.random.default_rng(6).uniform(-1, 1, (25, 25)))
        rng = np.random.default_rng(7)
        rec = learning_step(state, rng)
        assert -0.1 <= rec.v_in <= 0.1
        assert abs(rec.v_target - target(rec.v_in, state.learn)) < 1e-15
        assert -0.15 <= rec.v_out <= 0.15


class TestEvaluateError:
    def test_perfect_outputs_zero_error(self):
        # zero weights decode to the midpoint 0; a zero target matches exactly
        state = make_state(20, target_fn=lambda v: 0.0)
        assert evaluate_error(state, np.random.default_rng(8)) == 0.0

    def test_flat_output_against_sine(self):
        # zero weights pin v_out at 0, so the error is the grid mean of the
        # target magnitude over the output range (oracle evaluated inline)
        state = make_state(20)
        grid = np.linspace(-0.1, 0.1, 50)
        oracle = np.abs(0.1 * np.sin(np.pi * grid / 0.1)).mean() / 0.2 * 100.0
        err = evaluate_error(state, np.random.default_rng(9))
        assert err == pytest.approx(oracle, rel=1e-12)
        assert err == pytest.approx(31.1836824245613, rel=1e-10)

    def test_never_mutates_weights(self):
        state = make_state(25, np.random.default_rng(10).uniform(-1, 1, (25, 25)), analog=False)
        before = state.weights.codes.copy()
        evaluate_error(state, np.random.default_rng(11))
        assert np.array_equal(state.weights.codes, before)

    def test_fresh_random_weights_near_thirty_percent(self):
        cfg = default_config()
        state = build_system(cfg, np.random.default_rng(12))
        err = evaluate_error(state, np.random.default_rng(13))
        assert 25.0 <= err <= 35.0


class TestRunLearning:
    def test_same_seed_identical_traces(self):
        cfg = small_config()
        traces = []
        for _ in range(2):
            rng = np.random.default_rng(99)
            state = build_system(cfg, rng)
            traces.append(run_learning(state, 150, 50, rng))
        a, b = traces
        assert np.array_equal(a.v_in, b.v_in)
        assert np.array_equal(a.v_out, b.v_out)
        assert np.array_equal(a.updated, b.updated)
        assert np.array_equal(a.eval_error, b.eval_error)

    def test_vanishing_learning_rate_freezes_codes(self):
        cfg = config_from_dict({
            "population": {"n_in": 30, "n_out": 30},
            "learning": {"alpha": 1e-12},
            "run": {"seed": 1},
        })
        rng = np.random.default_rng(14)
        state = build_system(cfg, rng)
        before = state.weights.codes.copy()
        run_learning(state, 150, 150, rng)
        assert np.array_equal(state.weights.codes, before)

    def test_error_drops_with_training(self):
        cfg = small_config()
        rng = np.random.default_rng(15)
        state = build_system(cfg, rng)
        trace = run_learning(state, 800, 100, rng)
        assert trace.eval_error[-1] < trace.eval_error[0] / 2

    def test_output_stays_in_bias_range(self):
        cfg = small_config()
        rng = np.random.default_rng(16)
        state = build_system(cfg, rng)
        trace = run_learning(state, 300, 100, rng)
        assert np.all(trace.v_out >= -0.15) and np.all(trace.v_out <= 0.15)

    def test_evaluation_schedule(self):
        cfg = small_config()
        rng = np.random.default_rng(17)
        state = build_system(cfg, rng)
        trace = run_learning(state, 130, 50, rng)
        assert list(trace.eval_steps) == [0, 50, 100, 130]

    def test_rejects_bad_arguments(self):
        cfg = small_config()
        rng = np.random.default_rng(18)
        state = build_system(cfg, rng)
        with pytest.raises(ValueError):
            run_learning(state, 0, 50, rng)
        with pytest.raises(ValueError):
            run_learning(state, 10, 0, rng)


def synthetic_trace(updated, eval_steps, eval_error):
    n = len(updated)
    return RunTrace(
        steps=np.arange(1, n + 1),
        v_in=np.zeros(n),
        v_out=np.zeros(n),
        v_target=np.zeros(n),
        updated=np.asarray(updated, dtype=bool),
        loss_count=np.zeros(n, dtype=np.int64),
        eval_steps=np.asarray(eval_steps),
        eval_error=np.asarray(eval_error, dtype=float),
    )


class TestSteadyStateStats:
    def test_all_missed(self):
        trace = synthetic_trace([True] * 10, [0, 10], [5.0, 5.0])
        assert steady_state_stats(trace).r_update == 1.0

    def test_none_missed(self):
        trace = synthetic_trace([False] * 10, [0, 10], [5.0, 5.0])
        assert steady_state_stats(trace).r_update == 0.0

    def test_alternating_tail(self):
        trace = synthetic_trace([True, False] * 5, [0, 10], [5.0, 4.0])
        stats = steady_state_stats(trace, tail_fraction=1.0)
        assert stats.r_update == 0.5

    def test_tail_mean_error(self):
        trace = synthetic_trace([False] * 100, [0, 50, 90, 100], [30.0, 10.0, 4.0, 2.0])
        stats = steady_state_stats(trace, tail_fraction=0.2)
        assert stats.mean_error == pytest.approx(3.0)

    def test_empty_tail_rejected(self):
        trace = synthetic_trace([False] * 100, [0, 10], [30.0, 10.0])
        with pytest.raises(ValueError):
            steady_state_stats(trace, tail_fraction=0.2)


class TestBuildSystem:
    def test_defaults_resolve(self):
        cfg = default_config()
        state = build_system(cfg, np.random.default_rng(19))
        assert state.learn.f0 == pytest.approx(2478752.17666636, rel=1e-10)
        assert state.learn.output_range == pytest.approx(0.2)
        assert state.learn.window == pytest.approx(0.01)
        assert state.input_pop.size == 100
        assert state.p_loss == 0.0

    def test_finite_barrier_enables_loss(self):
        cfg = config_from_dict({"weights": {"delta_e_weight_kt": 15}})
        state = build_system(cfg, np.random.default_rng(20))
        assert state.p_loss == pytest.approx(0.0241751695160676, rel=1e-9)

    def test_mismatched_shapes_rejected(self):
        pop = linear_population(5)
        w = weights_from_values(np.zeros((4, 5)))
        with pytest.raises(ValueError):
            SystemState(pop, pop, w, LearningConfig())


class TestTraceCsv:
    def test_roundtrip(self, tmp_path):
        cfg = small_config()
        rng = np.random.default_rng(21)
        state = build_system(cfg, rng)
        trace = run_learning(state, 60, 30, rng)
        steps_path = tmp_path / "steps.csv"
        eval_path = tmp_path / "eval.csv"
        write_trace_csv(trace, steps_path, eval_path)
        cols, rows = read_csv(steps_path)
        assert cols == ["step", "v_in", "v_out", "v_target", "missed", "loss_count"]
        assert len(rows) == 60
        assert [r[0] for r in rows] == list(range(1, 61))
        vals = np.array(rows)
        assert np.allclose(vals[:, 1], trace.v_in)
        assert np.allclose(vals[:, 4], trace.updated.astype(float))
        cols, rows = read_csv(eval_path)
        assert cols == ["step", "error_pct"]
        assert np.allclose([r[1] for r in rows], trace.eval_error)
