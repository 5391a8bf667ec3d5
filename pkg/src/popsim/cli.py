"""Command-line harness: popsim <command> --config <file> --out <dir>.

Commands cover the device tuning-curve diagnostic, the basic learning
experiment, neuron-loss recovery, weight-volatility scans, the power
versus precision sweep, and configuration validation. Every command
writes gnuplot-ready CSVs plus a manifest.json; rerunning a command with
the manifest as its config reproduces the CSVs bit-exactly. Exit codes:
0 success, 2 configuration error, 3 runtime or degenerate-data error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    ExperimentConfig,
    config_to_dict,
    default_config,
    load_config,
)
from .csvio import write_csv, write_manifest
from .device import JunctionParams, mean_transition_rate, sample_switch_counts
from .learning import (
    aggregate_eval_curves,
    build_system,
    forward,
    run_learning,
    steady_state_stats,
    target,
    write_trace_csv,
)
from .parallel import parallel_map
from .reliability import (
    measured_loss_threshold,
    pareto_sweep,
    run_loss_recovery,
    scan_weight_barriers,
    steps_to_reach,
)
from .seeding import STREAM_LEARN, STREAM_TUNING, spawn_rng
from .weights import LossParams, weight_loss_probability

# values quoted for the 3 percent design point, reported for comparison only
DESIGN_POINT_ERROR = 3.0
DESIGN_POINT_N = 54
DESIGN_POINT_BARRIER = 12.0
LOSS_THRESHOLD_REFERENCE = 15.0


def _junction(cfg: ExperimentConfig) -> JunctionParams:
    return JunctionParams(
        attempt_frequency=cfg.device.phi0_hz,
        barrier=cfg.device.delta_e_neuron_kt,
        critical_voltage=cfg.device.v_c_volts,
    )


def cmd_tuning(cfg: ExperimentConfig, out_dir: Path, n_windows: int = 20000,
               n_points: int = 25, span: float = 0.15) -> None:
    """Measured vs analytic mean switching rate across net voltage."""
    if n_windows < 1:
        raise ConfigError(f"--windows must be >= 1, got {n_windows}")
    if n_points < 1:
        raise ConfigError(f"--points must be >= 1, got {n_points}")
    if not span > 0:
        raise ConfigError(f"--span must be > 0, got {span}")
    junction = _junction(cfg)
    t_obs = cfg.population.t_obs_s
    rng = spawn_rng(cfg.run.seed, STREAM_TUNING)
    rows = []
    for v in np.linspace(-span, span, n_points):
        counts = sample_switch_counts(junction, np.full(n_windows, v), t_obs, rng)
        rows.append((float(v), counts.mean() / t_obs, mean_transition_rate(junction, v), n_windows))
    write_csv(out_dir / "tuning.csv", ["v_net", "rate_measured", "rate_analytic", "n_windows"], rows)


def _learn_job(args):
    cfg, inst = args
    rng = spawn_rng(cfg.run.seed, STREAM_LEARN, inst)
    state = build_system(cfg, rng)
    trace = run_learning(state, cfg.run.steps, cfg.run.eval_every, rng)
    # final transfer sweep for this trained instance
    grid = np.linspace(-state.learn.v_max, state.learn.v_max, state.learn.eval_points)
    v_outs = np.array([forward(state, v, rng).v_out for v in grid])
    return trace, v_outs


def cmd_learn(cfg: ExperimentConfig, out_dir: Path, workers: int = 1) -> None:
    """Error versus learning steps, averaged over instances, plus per-instance traces."""
    results = parallel_map(_learn_job, [(cfg, i) for i in range(cfg.run.instances)], workers)
    traces = [t for t, _ in results]
    steps, mean, std = aggregate_eval_curves(traces)
    sem = std / math.sqrt(len(traces))
    write_csv(
        out_dir / "error_vs_steps.csv",
        ["step", "error_pct", "error_std", "error_sem"],
        zip(steps, mean, std, sem),
    )
    for i, trace in enumerate(traces):
        write_trace_csv(trace, out_dir / f"trace_{i:03d}_steps.csv", out_dir / f"trace_{i:03d}_eval.csv")
    state = build_system(cfg, spawn_rng(cfg.run.seed, STREAM_LEARN, 0))
    grid = np.linspace(-state.learn.v_max, state.learn.v_max, state.learn.eval_points)
    sweeps = np.stack([v for _, v in results])
    write_csv(
        out_dir / "response.csv",
        ["v_in", "v_out_mean", "v_out_std", "v_target"],
        zip(grid, sweeps.mean(axis=0), sweeps.std(axis=0),
            (target(v, state.learn) for v in grid)),
    )
    stats = [steady_state_stats(t, cfg.run.tail_fraction) for t in traces]
    write_csv(
        out_dir / "summary.csv",
        ["initial_error_pct", "final_error_pct", "steady_error_pct", "r_update"],
        [(
            mean[0],
            mean[-1],
            float(np.mean([s.mean_error for s in stats])),
            float(np.mean([s.r_update for s in stats])),
        )],
    )


def cmd_neuron_loss(cfg: ExperimentConfig, loss_fractions, out_dir: Path,
                    pretrain_steps: int = 4000, recovery_steps: int = 3000,
                    workers: int = 1) -> None:
    """Loss-and-recovery curves paired with fresh-reduced baselines."""
    for f in loss_fractions:
        if not 0.0 <= f < 1.0:
            raise ConfigError(f"loss fractions must be in [0, 1), got {f}")
    results = run_loss_recovery(
        cfg, loss_fractions, pretrain_steps=pretrain_steps,
        recovery_steps=recovery_steps, workers=workers,
    )
    summary = []
    for res in results:
        tag = f"{res.fraction:g}".replace(".", "p")
        write_csv(out_dir / f"pretrain_f{tag}.csv", ["step", "error_pct", "error_std"],
                  zip(res.pre_steps, res.pre_error, res.pre_std))
        write_csv(out_dir / f"recovery_f{tag}.csv", ["step", "error_pct", "error_std"],
                  zip(res.recovery_steps, res.recovery_error, res.recovery_std))
        write_csv(out_dir / f"fresh_f{tag}.csv", ["step", "error_pct", "error_std"],
                  zip(res.fresh_steps, res.fresh_error, res.fresh_std))
        fresh_steady = res.fresh_steady()
        level = fresh_steady + 1.0
        t_rec = steps_to_reach(res.recovery_steps, res.recovery_error, level)
        t_fresh = steps_to_reach(res.fresh_steps, res.fresh_error, level)
        summary.append((
            res.fraction, res.initial_error, res.post_loss_error,
            res.recovery_steady(), fresh_steady,
            -1 if t_rec is None else t_rec,
            -1 if t_fresh is None else t_fresh,
        ))
    write_csv(
        out_dir / "summary.csv",
        ["fraction", "initial_error_pct", "post_loss_error_pct",
         "recovery_steady_pct", "fresh_steady_pct",
         "recovery_steps_to_level", "fresh_steps_to_level"],
        summary,
    )


def cmd_weight_loss(cfg: ExperimentConfig, barrier_list, out_dir: Path,
                    workers: int = 1) -> None:
    """Error curves per weight barrier, including the no-loss reference."""
    barriers = [float(b) for b in barrier_list]
    if not barriers:
        raise ConfigError("need at least one barrier")
    if any(b <= 0 for b in barriers):
        raise ConfigError("barriers must be > 0")
    if not any(math.isinf(b) for b in barriers):
        barriers.append(math.inf)
    results = scan_weight_barriers(cfg, barriers, workers=workers)
    summary = []
    for res in results:
        label = "inf" if math.isinf(res.barrier) else f"{res.barrier:g}"
        write_csv(out_dir / f"barrier_{label}.csv", ["step", "error_pct", "error_std"],
                  zip(res.eval_steps, res.error_mean, res.error_std))
        summary.append((
            res.barrier, res.p_loss, res.initial_error, res.steady_error,
            float(res.steady_errors.std()), float(res.r_updates.mean()),
        ))
    write_csv(
        out_dir / "summary.csv",
        ["barrier_kt", "p_loss", "initial_error_pct", "steady_error_pct",
         "steady_std_pct", "r_update"],
        summary,
    )
    finite = {r.barrier: r.steady_errors for r in results if math.isfinite(r.barrier)}
    no_loss = next(r.steady_errors for r in results if math.isinf(r.barrier))
    threshold = measured_loss_threshold(finite, no_loss)
    write_csv(
        out_dir / "threshold.csv",
        ["threshold_measured_kt", "threshold_reference_kt"],
        [(math.nan if threshold is None else threshold, LOSS_THRESHOLD_REFERENCE)],
    )
    shown = "none found" if threshold is None else f"{threshold:g} kT"
    print(f"measured no-loss-equivalent barrier threshold: {shown} "
          f"(reference value: {LOSS_THRESHOLD_REFERENCE:g} kT)")


def cmd_pareto(cfg: ExperimentConfig, out_dir: Path, workers: int = 1) -> None:
    """Power versus precision sweep with frontier extraction."""
    result = pareto_sweep(cfg, workers=workers)
    write_csv(
        out_dir / "sweep.csv",
        ["n", "delta_e_w_kt", "error_pct", "error_std", "r_update", "power_norm"],
        [(p.n_neurons, p.weight_barrier, p.error_pct, p.error_std, p.r_update, p.power_norm)
         for p in result.points],
    )
    write_csv(
        out_dir / "frontier.csv",
        ["error_bin", "power_min", "n_opt", "delta_e_w_opt"],
        [(f.error_bin, f.power_min, f.n_opt, f.delta_e_w_opt) for f in result.frontier],
    )
    match = min(result.frontier, key=lambda f: abs(f.error_bin - DESIGN_POINT_ERROR), default=None)
    if match is not None:
        write_csv(
            out_dir / "design_point.csv",
            ["error_bin", "n_opt", "delta_e_w_opt", "n_reference", "delta_e_w_reference"],
            [(match.error_bin, match.n_opt, match.delta_e_w_opt,
              DESIGN_POINT_N, DESIGN_POINT_BARRIER)],
        )
        print(f"frontier near {DESIGN_POINT_ERROR:g}% error: N={match.n_opt}, "
              f"barrier={match.delta_e_w_opt:g} kT "
              f"(reference design point: N={DESIGN_POINT_N}, barrier={DESIGN_POINT_BARRIER:g} kT)")


def cmd_validate(cfg: ExperimentConfig) -> None:
    """Echo the resolved configuration and the derived quantities."""
    print(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True))
    f0 = cfg.resolved_f0()
    peak_count = cfg.population.t_obs_s * f0
    print(f"derived f0_hz: {f0!r}")
    print(f"derived output_range_v: {cfg.resolved_output_range()!r}")
    print(f"expected peak count per window: {peak_count:.4f}")
    barriers = sorted({cfg.weights.delta_e_weight_kt, *cfg.sweep.delta_e_list})
    for b in barriers:
        if math.isinf(b):
            print("p_loss(barrier=inf): 0.0")
            continue
        p = weight_loss_probability(LossParams(
            weight_barrier=b, step_duration=cfg.learning.step_dt_s,
            n_bits=cfg.weights.n_bits, attempt_frequency=cfg.device.phi0_hz))
        print(f"p_loss(barrier={b:g} kT): {p:.6g}")


def _parse_float_list(text: str, what: str) -> list[float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok.lower() in ("inf", "infinity"):
            out.append(math.inf)
            continue
        try:
            out.append(float(tok))
        except ValueError:
            raise ConfigError(f"bad {what} value: {tok!r}") from None
    if not out:
        raise ConfigError(f"empty {what} list")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popsim",
        description="Population-coding junction simulator: experiments and diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"popsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config file or a manifest.json from a previous run")
        if needs_out:
            p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--instances", type=int, default=None, help="override run.instances")
        p.add_argument("--steps", type=int, default=None, help="override run.steps")
        p.add_argument("--workers", type=int, default=1, help="worker processes")

    p = sub.add_parser("tuning", help="measured vs analytic tuning curve")
    common(p)
    p.add_argument("--windows", type=int, default=20000, help="observation windows per voltage")
    p.add_argument("--points", type=int, default=25, help="voltage grid points")
    p.add_argument("--span", type=float, default=0.15, help="half-width of the voltage grid")

    p = sub.add_parser("learn", help="basic learning experiment")
    common(p)

    p = sub.add_parser("neuron-loss", help="neuron loss and recovery experiment")
    common(p)
    p.add_argument("--fractions", default="0.2,0.4,0.6,0.8",
                   help="comma-separated loss fractions")
    p.add_argument("--pretrain-steps", type=int, default=4000)
    p.add_argument("--recovery-steps", type=int, default=3000)

    p = sub.add_parser("weight-loss", help="weight volatility experiment")
    common(p)
    p.add_argument("--barriers", default="8,10,12,14,16,20,25,inf",
                   help="comma-separated weight barriers in thermal units ('inf' = no loss)")

    p = sub.add_parser("pareto", help="power versus precision sweep")
    common(p)

    p = sub.add_parser("validate", help="check a config and echo derived quantities")
    common(p, needs_out=False)
    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = default_config() if args.config is None else load_config(args.config)
    run = cfg.run
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    if getattr(args, "instances", None) is not None:
        run = replace(run, instances=args.instances)
    if getattr(args, "steps", None) is not None:
        run = replace(run, steps=args.steps)
    return replace(cfg, run=run)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "validate":
            cmd_validate(cfg)
            return 0
        out_dir = args.out
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "tuning":
            cmd_tuning(cfg, out_dir, n_windows=args.windows, n_points=args.points,
                       span=args.span)
        elif args.command == "learn":
            cmd_learn(cfg, out_dir, workers=args.workers)
        elif args.command == "neuron-loss":
            fractions = _parse_float_list(args.fractions, "fraction")
            cmd_neuron_loss(cfg, fractions, out_dir,
                            pretrain_steps=args.pretrain_steps,
                            recovery_steps=args.recovery_steps, workers=args.workers)
        elif args.command == "weight-loss":
            barriers = _parse_float_list(args.barriers, "barrier")
            cmd_weight_loss(cfg, barriers, out_dir, workers=args.workers)
        elif args.command == "pareto":
            cmd_pareto(cfg, out_dir, workers=args.workers)
        write_manifest(out_dir, args.command, config_to_dict(cfg), cfg.run.seed, __version__)
        return 0
    except ConfigError as exc:
        print(f"popsim: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"popsim: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
