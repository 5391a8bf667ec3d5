"""Continuous trial-and-error learning of a nonlinear transform.

Each learning step presents a random input, measures the input population,
evaluates the linear rate transform digitally, decodes the output value,
and compares it to the target. A hit leaves the weights alone; a miss
nudges every output column toward the target side and rewrites the codes
with stochastic rounding. Volatile weights then lose information with a
fixed per-step probability. Learning never stops, which is what lets the
system ride out neuron death and weight corruption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .config import ExperimentConfig
from .csvio import write_csv
from .device import JunctionParams
from .seeding import spawn_rng
from .population import Population, decode, linear_population, measure_rates
from .weights import (
    LossParams,
    WeightMatrix,
    apply_weight_loss,
    random_weights,
    transform,
    update_weights,
    weight_loss_probability,
)

__all__ = [
    "LearningConfig",
    "SystemState",
    "RunTrace",
    "StepResult",
    "ForwardResult",
    "target",
    "forward",
    "learning_step",
    "evaluate_error",
    "run_learning",
    "steady_state_stats",
    "build_system",
    "run_instance",
    "aggregate_eval_curves",
    "write_trace_csv",
]


@dataclass
class LearningConfig:
    """Knobs of the trial-and-error loop.

    `f0` normalizes measured rates so the per-entry update magnitude is at
    most about `alpha`; the default used by :func:`build_system` is the peak
    mean neuron rate. The accept window is `window_fraction` of the output
    range, and the output range defaults to the width of the target codomain
    (twice v_max).
    """

    alpha: float = 0.001
    window_fraction: float = 0.05
    step_duration: float = 1e-5
    f0: float = 1e9 * math.exp(-6.0)
    v_max: float = 0.1
    output_range: float = 0.2
    target_convention: str = "full-period"
    eval_points: int = 50
    target_fn: Callable[[float], float] | None = None

    @property
    def window(self) -> float:
        return self.window_fraction * self.output_range


@dataclass
class SystemState:
    """One learning instance: two populations, the weights between them, knobs."""

    input_pop: Population
    output_pop: Population
    weights: WeightMatrix
    learn: LearningConfig
    loss: LossParams | None = None

    def __post_init__(self):
        n_in, n_out = self.weights.shape
        if n_in != self.input_pop.size or n_out != self.output_pop.size:
            raise ValueError(
                f"weight shape {self.weights.shape} does not match populations "
                f"({self.input_pop.size}, {self.output_pop.size})"
            )

    @property
    def p_loss(self) -> float:
        return 0.0 if self.loss is None else weight_loss_probability(self.loss)


@dataclass
class RunTrace:
    """Per-step records of one learning run plus its periodic error evaluations."""

    steps: np.ndarray
    v_in: np.ndarray
    v_out: np.ndarray
    v_target: np.ndarray
    updated: np.ndarray
    loss_count: np.ndarray
    eval_steps: np.ndarray
    eval_error: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.steps.size


class ForwardResult(NamedTuple):
    v_out: float
    r_in: np.ndarray
    degenerate: bool


class StepResult(NamedTuple):
    v_in: float
    v_out: float
    v_target: float
    updated: bool
    loss_count: int
    degenerate: bool


def target(v_in: float, cfg: LearningConfig) -> float:
    """Desired output voltage for a given input voltage.

    The default convention sweeps one full sine period across the input
    range, v_max * sin(pi * v_in / v_max), which is nonlinear and
    non-monotonic. The "literal" convention v_max * sin(v_in / (v_max * pi))
    stays within a third of a radian and is almost linear; it is kept
    selectable for comparison. A custom callable overrides both.
    """
    if cfg.target_fn is not None:
        return cfg.target_fn(v_in)
    if cfg.target_convention == "full-period":
        return cfg.v_max * math.sin(math.pi * v_in / cfg.v_max)
    if cfg.target_convention == "literal":
        return cfg.v_max * math.sin(v_in / (cfg.v_max * math.pi))
    raise ValueError(f"unknown target convention {cfg.target_convention!r}")


def forward(state: SystemState, v_in: float, rng: np.random.Generator) -> ForwardResult:
    """Measure the input population, transform, and decode the output value.

    The input rates come from one stochastic observation window per neuron;
    the transform itself is evaluated digitally. A degenerate decode (no
    output rate at all) reports the bias-range midpoint with the flag set.
    """
    r_in = measure_rates(state.input_pop, v_in, rng)
    r_out = transform(state.weights, r_in, state.output_pop.alive)
    v_out, degenerate = decode(state.output_pop.bias_voltages, r_out)
    return ForwardResult(v_out, r_in, degenerate)


def learning_step(state: SystemState, rng: np.random.Generator) -> StepResult:
    """Run one trial-and-error step, updating state.weights in place.

    Draws a uniform input, forwards it, and updates the weights when the
    output misses the accept window. A degenerate forward always counts as
    a miss so learning pressure persists even with no output signal. Weight
    loss is applied after the update phase.
    """
    cfg = state.learn
    v_in = rng.uniform(-cfg.v_max, cfg.v_max)
    res = forward(state, v_in, rng)
    v_tgt = target(v_in, cfg)
    updated = False
    if res.degenerate:
        # force the update: pass a window no distance can satisfy
        state.weights, updated = update_weights(
            state.weights, res.r_in, res.v_out, v_tgt,
            state.output_pop.bias_voltages, cfg.alpha, cfg.f0, rng, window=-1.0,
        )
    elif abs(res.v_out - v_tgt) > cfg.window:
        state.weights, updated = update_weights(
            state.weights, res.r_in, res.v_out, v_tgt,
            state.output_pop.bias_voltages, cfg.alpha, cfg.f0, rng, window=cfg.window,
        )
    n_lost = 0
    p_loss = state.p_loss
    if p_loss > 0.0:
        state.weights, n_lost = apply_weight_loss(state.weights, p_loss, rng)
    return StepResult(v_in, res.v_out, v_tgt, updated, n_lost, res.degenerate)


def evaluate_error(state: SystemState, rng: np.random.Generator) -> float:
    """Mean output error over an even input grid, in percent of the output range.

    Every grid point gets a fresh stochastic measurement; the weights are
    never touched, so evaluation can be interleaved with training freely.
    """
    cfg = state.learn
    grid = np.linspace(-cfg.v_max, cfg.v_max, cfg.eval_points)
    err = 0.0
    for v_in in grid:
        res = forward(state, v_in, rng)
        err += abs(res.v_out - target(v_in, cfg))
    return err / grid.size / cfg.output_range * 100.0


def run_learning(
    state: SystemState,
    n_steps: int,
    eval_every: int,
    rng: np.random.Generator,
) -> RunTrace:
    """Train for n_steps, evaluating the error every eval_every steps.

    The error is evaluated before the first step (the untrained baseline),
    after every eval_every-th step, and after the last step. Deterministic
    for a given rng stream.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if eval_every < 1:
        raise ValueError(f"eval_every must be >= 1, got {eval_every}")
    v_in = np.empty(n_steps)
    v_out = np.empty(n_steps)
    v_tgt = np.empty(n_steps)
    updated = np.zeros(n_steps, dtype=bool)
    loss_count = np.zeros(n_steps, dtype=np.int64)
    eval_steps = [0]
    eval_error = [evaluate_error(state, rng)]
    for i in range(n_steps):
        rec = learning_step(state, rng)
        v_in[i] = rec.v_in
        v_out[i] = rec.v_out
        v_tgt[i] = rec.v_target
        updated[i] = rec.updated
        loss_count[i] = rec.loss_count
        step = i + 1
        if step % eval_every == 0 or step == n_steps:
            eval_steps.append(step)
            eval_error.append(evaluate_error(state, rng))
    return RunTrace(
        steps=np.arange(1, n_steps + 1),
        v_in=v_in,
        v_out=v_out,
        v_target=v_tgt,
        updated=updated,
        loss_count=loss_count,
        eval_steps=np.asarray(eval_steps),
        eval_error=np.asarray(eval_error),
    )


class SteadyStats(NamedTuple):
    mean_error: float
    r_update: float


def steady_state_stats(trace: RunTrace, tail_fraction: float = 0.2) -> SteadyStats:
    """Mean evaluated error and update rate over the final stretch of a run.

    The tail covers the last tail_fraction of steps and must contain at
    least one error evaluation; it should sit well past the learning
    transient for the numbers to mean anything.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"tail_fraction must be in (0, 1], got {tail_fraction}")
    cutoff = trace.n_steps * (1.0 - tail_fraction)
    in_tail = trace.eval_steps > cutoff
    if not np.any(in_tail):
        raise ValueError("tail window contains no error evaluations")
    r_update = float(trace.updated[trace.steps > cutoff].mean())
    return SteadyStats(float(trace.eval_error[in_tail].mean()), r_update)


def build_system(cfg: ExperimentConfig, rng: np.random.Generator) -> SystemState:
    """Assemble a fresh learning instance from a resolved configuration.

    Weights start uniformly random over all codes; populations start fully
    alive. The rate normalization f0 defaults to the peak mean neuron rate
    so measured rates land in roughly [0, 1] after scaling.
    """
    junction = JunctionParams(
        attempt_frequency=cfg.device.phi0_hz,
        barrier=cfg.device.delta_e_neuron_kt,
        critical_voltage=cfg.device.v_c_volts,
    )
    input_pop = linear_population(
        cfg.population.n_in, cfg.population.bias_min_v, cfg.population.bias_max_v,
        junction, cfg.population.t_obs_s,
    )
    output_pop = linear_population(
        cfg.population.n_out, cfg.population.bias_min_v, cfg.population.bias_max_v,
        junction, cfg.population.t_obs_s,
    )
    weights = random_weights(
        cfg.population.n_in, cfg.population.n_out, rng,
        n_bits=cfg.weights.n_bits, w_min=cfg.weights.w_min, w_max=cfg.weights.w_max,
        analog=cfg.weights.analog_mode,
    )
    learn = LearningConfig(
        alpha=cfg.learning.alpha,
        window_fraction=cfg.learning.window_fraction,
        step_duration=cfg.learning.step_dt_s,
        f0=cfg.resolved_f0(),
        v_max=cfg.learning.v_max,
        output_range=cfg.resolved_output_range(),
        target_convention=cfg.learning.target_convention,
        eval_points=cfg.learning.eval_points,
    )
    loss = None
    if math.isfinite(cfg.weights.delta_e_weight_kt):
        loss = LossParams(
            weight_barrier=cfg.weights.delta_e_weight_kt,
            step_duration=cfg.learning.step_dt_s,
            n_bits=cfg.weights.n_bits,
            attempt_frequency=cfg.device.phi0_hz,
        )
    return SystemState(input_pop, output_pop, weights, learn, loss)


def run_instance(
    cfg: ExperimentConfig, n_steps: int, eval_every: int, seed_keys: tuple
) -> RunTrace:
    """Build and train one instance on its own derived rng stream."""
    rng = spawn_rng(cfg.run.seed, *seed_keys)
    state = build_system(cfg, rng)
    return run_learning(state, n_steps, eval_every, rng)


def aggregate_eval_curves(traces: list[RunTrace]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack the evaluated-error curves of same-shape runs; returns (steps, mean, std)."""
    steps = traces[0].eval_steps
    for t in traces[1:]:
        if not np.array_equal(t.eval_steps, steps):
            raise ValueError("traces have mismatched evaluation schedules")
    curves = np.stack([t.eval_error for t in traces])
    return steps, curves.mean(axis=0), curves.std(axis=0)


def write_trace_csv(trace: RunTrace, steps_path, eval_path) -> None:
    """Serialize a trace: per-step records and the evaluated-error curve."""
    write_csv(
        steps_path,
        ["step", "v_in", "v_out", "v_target", "missed", "loss_count"],
        zip(trace.steps, trace.v_in, trace.v_out, trace.v_target,
            trace.updated, trace.loss_count),
    )
    write_csv(eval_path, ["step", "error_pct"], zip(trace.eval_steps, trace.eval_error))
