"""Fault-injection experiments and the power versus precision sweep.

Neuron loss kills a random fixed fraction of both populations at once;
the weights are untouched, only the alive masks change, so injection
commutes with weight updates. Recovery runs compare continued training
after a loss against training that starts from the already-reduced
system. The sweep trains a grid of (population size, weight barrier)
cells to steady state, converts the steady update rate into a relative
write-power figure, and extracts the minimum-power frontier per error bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .learning import (
    SystemState,
    aggregate_eval_curves,
    build_system,
    run_learning,
    steady_state_stats,
)
from .parallel import parallel_map
from .seeding import STREAM_BARRIER, STREAM_FRESH, STREAM_RECOVERY, STREAM_SWEEP, spawn_rng
from .weights import LossParams, weight_loss_probability

__all__ = [
    "NeuronLossEvent",
    "kill_neurons",
    "inject_neuron_loss",
    "RecoveryResult",
    "run_loss_recovery",
    "steps_to_reach",
    "BarrierResult",
    "scan_weight_barriers",
    "measured_loss_threshold",
    "PowerPoint",
    "FrontierPoint",
    "SweepResult",
    "normalized_power",
    "pareto_frontier",
    "pareto_sweep",
    "REFERENCE_N",
    "REFERENCE_BARRIER",
]

REFERENCE_N = 100
REFERENCE_BARRIER = 20.0


@dataclass(frozen=True)
class NeuronLossEvent:
    """A catastrophic loss of a fraction of the neurons in each population."""

    step: int
    loss_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.loss_fraction < 1.0:
            raise ValueError(f"loss_fraction must be in [0, 1), got {self.loss_fraction}")
        if self.step < 0:
            raise ValueError(f"step must be >= 0, got {self.step}")


def kill_neurons(pop, victims: np.ndarray) -> None:
    """Clear the alive flags of the given neuron indices (idempotent)."""
    pop.alive[np.asarray(victims, dtype=int)] = False


def inject_neuron_loss(
    state: SystemState, event: NeuronLossEvent, rng: np.random.Generator
) -> SystemState:
    """Kill round(fraction * N) neurons in both populations, chosen uniformly.

    Victims are drawn without replacement from the still-alive neurons of
    each population independently. Weights are untouched. Raises if either
    population has fewer alive neurons than the requested count.
    """
    for pop in (state.input_pop, state.output_pop):
        n_victims = int(round(event.loss_fraction * pop.size))
        alive_idx = np.flatnonzero(pop.alive)
        if n_victims > alive_idx.size:
            raise ValueError(
                f"cannot kill {n_victims} neurons, only {alive_idx.size} alive"
            )
        if n_victims:
            kill_neurons(pop, rng.choice(alive_idx, size=n_victims, replace=False))
    return state


@dataclass
class RecoveryResult:
    """Aggregated curves for one loss fraction: recovery arm vs fresh-reduced arm."""

    fraction: float
    pretrain_steps: int
    pre_steps: np.ndarray
    pre_error: np.ndarray
    pre_std: np.ndarray
    recovery_steps: np.ndarray  # counted from the injection
    recovery_error: np.ndarray
    recovery_std: np.ndarray
    fresh_steps: np.ndarray
    fresh_error: np.ndarray
    fresh_std: np.ndarray

    @property
    def initial_error(self) -> float:
        """Untrained full-system error."""
        return float(self.pre_error[0])

    @property
    def post_loss_error(self) -> float:
        """Error right after the loss, before any retraining."""
        return float(self.recovery_error[0])

    def recovery_steady(self, tail_fraction: float = 0.2) -> float:
        cut = self.recovery_steps[-1] * (1 - tail_fraction)
        return float(self.recovery_error[self.recovery_steps > cut].mean())

    def fresh_steady(self, tail_fraction: float = 0.2) -> float:
        cut = self.fresh_steps[-1] * (1 - tail_fraction)
        return float(self.fresh_error[self.fresh_steps > cut].mean())


def _recovery_job(args):
    cfg, fraction, pretrain, recovery, eval_every, fidx, inst = args
    rng = spawn_rng(cfg.run.seed, STREAM_RECOVERY, fidx, inst)
    state = build_system(cfg, rng)
    pre = run_learning(state, pretrain, eval_every, rng)
    inject_neuron_loss(state, NeuronLossEvent(pretrain, fraction), rng)
    rec = run_learning(state, recovery, eval_every, rng)
    return pre, rec


def _fresh_job(args):
    cfg, fraction, steps, eval_every, fidx, inst = args
    rng = spawn_rng(cfg.run.seed, STREAM_FRESH, fidx, inst)
    state = build_system(cfg, rng)
    inject_neuron_loss(state, NeuronLossEvent(0, fraction), rng)
    return run_learning(state, steps, eval_every, rng)


def run_loss_recovery(
    cfg: ExperimentConfig,
    loss_fractions=(0.2, 0.4, 0.6, 0.8),
    pretrain_steps: int = 4000,
    recovery_steps: int = 3000,
    baseline_steps: int | None = None,
    instances: int | None = None,
    eval_every: int | None = None,
    workers: int = 1,
) -> list[RecoveryResult]:
    """Loss and recovery experiment for each fraction.

    Recovery arm: train the full system for pretrain_steps, kill the given
    fraction of both populations, keep training for recovery_steps. Fresh
    arm: inject the same loss before any training and train for
    baseline_steps. Both arms are averaged over the instances, each on its
    own derived rng stream.
    """
    instances = cfg.run.instances if instances is None else instances
    eval_every = cfg.run.eval_every if eval_every is None else eval_every
    baseline_steps = cfg.run.steps if baseline_steps is None else baseline_steps
    results = []
    for fidx, fraction in enumerate(loss_fractions):
        pairs = parallel_map(
            _recovery_job,
            [
                (cfg, fraction, pretrain_steps, recovery_steps, eval_every, fidx, inst)
                for inst in range(instances)
            ],
            workers,
        )
        fresh = parallel_map(
            _fresh_job,
            [
                (cfg, fraction, baseline_steps, eval_every, fidx, inst)
                for inst in range(instances)
            ],
            workers,
        )
        pre_steps, pre_mean, pre_std = aggregate_eval_curves([p for p, _ in pairs])
        rec_steps, rec_mean, rec_std = aggregate_eval_curves([r for _, r in pairs])
        f_steps, f_mean, f_std = aggregate_eval_curves(fresh)
        results.append(
            RecoveryResult(
                fraction=fraction,
                pretrain_steps=pretrain_steps,
                pre_steps=pre_steps,
                pre_error=pre_mean,
                pre_std=pre_std,
                recovery_steps=rec_steps,
                recovery_error=rec_mean,
                recovery_std=rec_std,
                fresh_steps=f_steps,
                fresh_error=f_mean,
                fresh_std=f_std,
            )
        )
    return results


def steps_to_reach(steps: np.ndarray, error_curve: np.ndarray, level: float):
    """First step at which the curve is at or below the level, or None."""
    hit = np.flatnonzero(np.asarray(error_curve) <= level)
    return int(steps[hit[0]]) if hit.size else None


@dataclass
class BarrierResult:
    """Aggregated outcome of training with one weight-barrier setting."""

    barrier: float
    p_loss: float
    eval_steps: np.ndarray
    error_mean: np.ndarray
    error_std: np.ndarray
    steady_errors: np.ndarray  # per instance
    r_updates: np.ndarray  # per instance

    @property
    def initial_error(self) -> float:
        return float(self.error_mean[0])

    @property
    def steady_error(self) -> float:
        return float(self.steady_errors.mean())


def _barrier_job(args):
    cfg, barrier, steps, eval_every, bidx, inst = args
    run_cfg = replace(cfg, weights=replace(cfg.weights, delta_e_weight_kt=barrier))
    rng = spawn_rng(cfg.run.seed, STREAM_BARRIER, bidx, inst)
    state = build_system(run_cfg, rng)
    trace = run_learning(state, steps, eval_every, rng)
    stats = steady_state_stats(trace, cfg.run.tail_fraction)
    return trace.eval_steps, trace.eval_error, stats.mean_error, stats.r_update


def scan_weight_barriers(
    cfg: ExperimentConfig,
    barriers,
    instances: int | None = None,
    steps: int | None = None,
    eval_every: int | None = None,
    workers: int = 1,
) -> list[BarrierResult]:
    """Train instances for every weight barrier and aggregate their error curves.

    Barriers may include infinity for the no-loss reference. Results come
    back sorted by barrier, each with the instance-averaged error curve and
    the per-instance steady errors and update rates.
    """
    barriers = sorted(float(b) for b in barriers)
    if not barriers:
        raise ValueError("need at least one barrier")
    if any(b <= 0 for b in barriers):
        raise ValueError("barriers must be > 0")
    instances = cfg.run.instances if instances is None else instances
    steps = cfg.run.steps if steps is None else steps
    eval_every = cfg.run.eval_every if eval_every is None else eval_every
    jobs = [
        (cfg, b, steps, eval_every, bidx, inst)
        for bidx, b in enumerate(barriers)
        for inst in range(instances)
    ]
    outcomes = parallel_map(_barrier_job, jobs, workers)
    results = []
    for bidx, b in enumerate(barriers):
        chunk = outcomes[bidx * instances:(bidx + 1) * instances]
        curves = np.stack([c[1] for c in chunk])
        p_loss = 0.0 if math.isinf(b) else weight_loss_probability(
            LossParams(
                weight_barrier=b,
                step_duration=cfg.learning.step_dt_s,
                n_bits=cfg.weights.n_bits,
                attempt_frequency=cfg.device.phi0_hz,
            )
        )
        results.append(
            BarrierResult(
                barrier=b,
                p_loss=p_loss,
                eval_steps=chunk[0][0],
                error_mean=curves.mean(axis=0),
                error_std=curves.std(axis=0),
                steady_errors=np.array([c[2] for c in chunk]),
                r_updates=np.array([c[3] for c in chunk]),
            )
        )
    return results


def _indistinguishable(a: np.ndarray, b: np.ndarray, z_crit: float = 2.576) -> bool:
    """Two-sample z-test on the means at the 1 percent level (large samples)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    if se == 0.0:
        return bool(a.mean() == b.mean())
    return abs(a.mean() - b.mean()) / se <= z_crit


def measured_loss_threshold(
    steady_by_barrier: dict[float, np.ndarray], no_loss: np.ndarray
):
    """Smallest barrier from which on the steady error matches the no-loss mode.

    `steady_by_barrier` maps each finite barrier to its per-instance steady
    errors; `no_loss` holds the per-instance steady errors of the reliable
    reference. Returns None if even the largest barrier is distinguishable.
    """
    threshold = None
    for barrier in sorted(steady_by_barrier, reverse=True):
        if _indistinguishable(steady_by_barrier[barrier], no_loss):
            threshold = barrier
        else:
            break
    return threshold


@dataclass
class PowerPoint:
    """Steady-state summary of one (population size, weight barrier) cell."""

    n_neurons: int
    weight_barrier: float
    error_pct: float
    error_std: float
    r_update: float
    power_norm: float = math.nan

    def __post_init__(self):
        if self.n_neurons < 2:
            raise ValueError(f"n_neurons must be >= 2, got {self.n_neurons}")
        if not self.weight_barrier > 0:
            raise ValueError(f"weight_barrier must be > 0, got {self.weight_barrier}")


def normalized_power(point: PowerPoint, reference: PowerPoint) -> float:
    """Write power of a cell relative to the reference cell.

    Power scales as r_update * N^2 * barrier^2: the update rate times the
    number of weights times the squared write energy per weight. The
    reference maps to exactly 1.
    """
    if not reference.r_update > 0:
        raise ValueError("reference r_update must be > 0")
    raw = point.r_update * point.n_neurons**2 * point.weight_barrier**2
    ref = reference.r_update * reference.n_neurons**2 * reference.weight_barrier**2
    return raw / ref


@dataclass(frozen=True)
class FrontierPoint:
    error_bin: float  # bin center, percent of output range
    power_min: float
    n_opt: int
    delta_e_w_opt: float
    error_std: float


def pareto_frontier(points: list[PowerPoint], bin_width: float = 0.25) -> list[FrontierPoint]:
    """Minimum normalized power per error bin, pruned to the non-dominated set.

    Points are binned by steady error; each bin keeps its cheapest point,
    and bins that cost at least as much as a lower-error bin are dropped, so
    the frontier power is non-increasing in error by construction.
    """
    if not points:
        return []
    if not bin_width > 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    best: dict[int, PowerPoint] = {}
    for p in points:
        b = int(p.error_pct / bin_width)
        if b not in best or p.power_norm < best[b].power_norm:
            best[b] = p
    frontier = []
    running = math.inf
    for b in sorted(best):
        p = best[b]
        if p.power_norm < running:
            running = p.power_norm
            frontier.append(
                FrontierPoint(
                    error_bin=(b + 0.5) * bin_width,
                    power_min=p.power_norm,
                    n_opt=p.n_neurons,
                    delta_e_w_opt=p.weight_barrier,
                    error_std=p.error_std,
                )
            )
    return frontier


@dataclass
class SweepResult:
    points: list[PowerPoint]
    frontier: list[FrontierPoint]
    reference: PowerPoint


def _sweep_job(args):
    cfg, n, barrier, steps, eval_every, cell_idx, inst = args
    cell_cfg = replace(
        cfg,
        population=replace(cfg.population, n_in=n, n_out=n),
        weights=replace(cfg.weights, delta_e_weight_kt=barrier),
    )
    rng = spawn_rng(cfg.run.seed, STREAM_SWEEP, cell_idx, inst)
    state = build_system(cell_cfg, rng)
    trace = run_learning(state, steps, eval_every, rng)
    stats = steady_state_stats(trace, cfg.run.tail_fraction)
    return stats.mean_error, stats.r_update


def pareto_sweep(
    cfg: ExperimentConfig,
    n_list=None,
    delta_e_list=None,
    instances: int | None = None,
    workers: int = 1,
) -> SweepResult:
    """Train every (N, barrier) cell to steady state and extract the frontier.

    Each cell is averaged over the instances; the error std is the standard
    deviation of the per-instance steady errors. Power is normalized by the
    (100 neurons, 20 thermal units) cell, which is simulated alongside the
    grid if it is not already part of it. Cells run as independent jobs on
    derived streams, so results do not depend on the worker count.
    """
    n_list = list(cfg.sweep.n_list if n_list is None else n_list)
    delta_e_list = list(cfg.sweep.delta_e_list if delta_e_list is None else delta_e_list)
    if not n_list or not delta_e_list:
        raise ValueError("sweep grid must be non-empty")
    instances = cfg.run.instances if instances is None else instances
    steps, eval_every = cfg.sweep.steps, cfg.sweep.eval_every

    cells = [(n, float(b)) for n in n_list for b in delta_e_list]
    ref_cell = (REFERENCE_N, REFERENCE_BARRIER)
    if ref_cell not in cells:
        cells.append(ref_cell)

    jobs = [
        (cfg, n, b, steps, eval_every, cell_idx, inst)
        for cell_idx, (n, b) in enumerate(cells)
        for inst in range(instances)
    ]
    outcomes = parallel_map(_sweep_job, jobs, workers)

    points = []
    for cell_idx, (n, b) in enumerate(cells):
        errs = np.array([outcomes[cell_idx * instances + i][0] for i in range(instances)])
        rups = np.array([outcomes[cell_idx * instances + i][1] for i in range(instances)])
        points.append(
            PowerPoint(
                n_neurons=n,
                weight_barrier=b,
                error_pct=float(errs.mean()),
                error_std=float(errs.std()),
                r_update=float(rups.mean()),
            )
        )
    reference = next(
        p for p in points if (p.n_neurons, p.weight_barrier) == ref_cell
    )
    for p in points:
        p.power_norm = normalized_power(p, reference)
    grid_points = points[: len(n_list) * len(delta_e_list)]
    frontier = pareto_frontier(grid_points, cfg.sweep.bin_width)
    return SweepResult(points=grid_points, frontier=frontier, reference=reference)
