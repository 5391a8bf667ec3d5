"""Telegraph dynamics of a single stochastic bistable junction.

A low-barrier magnetic tunnel junction hops spontaneously between its two
magnetic configurations, parallel (P) and antiparallel (AP). Each hop is a
thermally activated Poisson escape whose rate depends exponentially on the
barrier height and on the voltage applied across the junction, so the
telegraph switching rate can be tuned by voltage. This module provides the
escape-rate model, the fixed-interval switching probability, exact
event-driven sampling of switch counts over an observation window, and the
analytic stationary mean transition rate used as an oracle in tests.

All energies are dimensionless (energy barrier divided by thermal energy);
temperature never appears on its own.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "JunctionParams",
    "JunctionState",
    "escape_rate",
    "switch_probability",
    "stationary_p_probability",
    "simulate_window",
    "sample_switch_counts",
    "mean_transition_rate",
]


class JunctionState(enum.Enum):
    """The two magnetic configurations of a bistable junction."""

    PARALLEL = "P"
    ANTIPARALLEL = "AP"


@dataclass(frozen=True)
class JunctionParams:
    """Physical parameters governing the escape rates of one junction.

    attempt_frequency : float
        Prefactor of the escape rate, in 1/s.
    barrier : float
        Energy barrier between the two states, in units of thermal energy.
    critical_voltage : float
        Voltage scale of the spin-torque modulation, in volts.
    """

    attempt_frequency: float = 1e9
    barrier: float = 6.0
    critical_voltage: float = 0.1

    def __post_init__(self):
        if not self.attempt_frequency > 0:
            raise ValueError(f"attempt_frequency must be > 0, got {self.attempt_frequency}")
        if not self.barrier > 0:
            raise ValueError(f"barrier must be > 0, got {self.barrier}")
        if not self.critical_voltage > 0:
            raise ValueError(f"critical_voltage must be > 0, got {self.critical_voltage}")


def escape_rate(params: JunctionParams, state: JunctionState, v: float) -> float:
    """Poisson escape rate out of `state` under an applied voltage, in 1/s.

    rate = f_a * exp(-barrier * (1 + v/v_c)) for the P state and
    rate = f_a * exp(-barrier * (1 - v/v_c)) for the AP state, so a positive
    voltage lengthens P dwell times and shortens AP dwell times. The formula
    is applied as is, with no capping at the attempt frequency.
    """
    if not math.isfinite(v):
        raise ValueError(f"voltage must be finite, got {v}")
    sign = 1.0 if state is JunctionState.PARALLEL else -1.0
    u = v / params.critical_voltage
    return params.attempt_frequency * math.exp(-params.barrier * (1.0 + sign * u))


def switch_probability(rate: float, dt: float) -> float:
    """Probability that a junction with the given escape rate switches within dt.

    Equals 1 - exp(-rate * dt), the first-escape probability of a Poisson
    process observed for a fixed interval.
    """
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    return -math.expm1(-rate * dt)


def stationary_p_probability(params: JunctionParams, v: float) -> float:
    """Stationary probability of finding the junction in the P state.

    For the two-state process this is rate_ap / (rate_p + rate_ap), which
    reduces to a logistic function of the reduced voltage.
    """
    if not math.isfinite(v):
        raise ValueError(f"voltage must be finite, got {v}")
    u = v / params.critical_voltage
    # rate_ap / (rate_p + rate_ap) with the common prefactor cancelled
    return 1.0 / (1.0 + math.exp(-2.0 * params.barrier * u))


def mean_transition_rate(params: JunctionParams, v: float) -> float:
    """Stationary mean switching rate of the telegraph signal, in 1/s.

    2 * rate_p * rate_ap / (rate_p + rate_ap), which simplifies to
    f_a * exp(-barrier) / cosh(barrier * v / v_c): a bell-shaped tuning
    curve peaked at zero net voltage.
    """
    if not math.isfinite(v):
        raise ValueError(f"voltage must be finite, got {v}")
    u = v / params.critical_voltage
    return params.attempt_frequency * math.exp(-params.barrier) / math.cosh(params.barrier * u)


def _escape_rate_pair(params: JunctionParams, v):
    """Escape rates (out of P, out of AP) for scalar or array voltage."""
    u = np.asarray(v, dtype=float) / params.critical_voltage
    rate_p = params.attempt_frequency * np.exp(-params.barrier * (1.0 + u))
    rate_ap = params.attempt_frequency * np.exp(-params.barrier * (1.0 - u))
    return rate_p, rate_ap


def simulate_window(
    params: JunctionParams, v: float, t_obs: float, rng: np.random.Generator
) -> int:
    """Count telegraph switches of one junction over an observation window.

    The initial state is drawn from the stationary distribution, then
    exponential dwell times are drawn with the current state's escape rate;
    every flip whose cumulative time falls within `t_obs` is counted. Exact
    for arbitrarily disparate rates and deterministic given the rng stream.
    """
    if not t_obs > 0:
        raise ValueError(f"t_obs must be > 0, got {t_obs}")
    rate_p = escape_rate(params, JunctionState.PARALLEL, v)
    rate_ap = escape_rate(params, JunctionState.ANTIPARALLEL, v)
    in_p = rng.random() < stationary_p_probability(params, v)
    t = 0.0
    count = 0
    while True:
        rate = rate_p if in_p else rate_ap
        if rate <= 0.0:
            return count
        t += rng.standard_exponential() / rate
        if t > t_obs:
            return count
        count += 1
        in_p = not in_p


def sample_switch_counts(
    params: JunctionParams,
    v: np.ndarray,
    t_obs: float,
    rng: np.random.Generator,
    block: int = 32,
) -> np.ndarray:
    """Vectorized switch counting for a batch of independent junctions.

    `v` holds the net voltage across each junction; one window of length
    `t_obs` is sampled per entry. Statistically identical to calling
    :func:`simulate_window` per junction (initial states from the stationary
    distribution, exponential dwell sampling). The first pass draws a single
    dwell per junction, which already finishes the off-peak junctions that
    never flip; survivors get dwell times in blocks of `block`.
    """
    if not t_obs > 0:
        raise ValueError(f"t_obs must be > 0, got {t_obs}")
    if block < 2 or block % 2:
        raise ValueError("block must be an even integer >= 2")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.all(np.isfinite(v)):
        raise ValueError("voltages must be finite")

    rate_p, rate_ap = _escape_rate_pair(params, v)
    p_stat = rate_ap / (rate_p + rate_ap)
    in_p = rng.random(v.shape) < p_stat
    # rate of the current state and of the state reached after one flip
    rate_cur = np.where(in_p, rate_p, rate_ap)
    rate_next = np.where(in_p, rate_ap, rate_p)

    counts = np.zeros(v.shape, dtype=np.int64)

    # first dwell only: junctions that do not flip at all are done here
    with np.errstate(divide="ignore"):
        first = rng.standard_exponential(v.shape) / rate_cur
    idx = np.flatnonzero(first <= t_obs)
    counts[idx] = 1
    remaining = t_obs - first[idx]
    # one flip happened, so the dwell-rate order is swapped from here on
    cur = rate_next[idx]
    nxt = rate_cur[idx]

    parity = np.arange(block) % 2 == 0
    while idx.size:
        dwell = rng.standard_exponential((idx.size, block))
        with np.errstate(divide="ignore"):
            dwell /= np.where(parity, cur[:, None], nxt[:, None])
        elapsed = np.cumsum(dwell, axis=1)
        counts[idx] += (elapsed <= remaining[:, None]).sum(axis=1)
        # a junction whose whole block fits in the window may flip again;
        # block length is even, so the dwell-rate order carries over
        cont = elapsed[:, -1] <= remaining
        idx = idx[cont]
        remaining = remaining[cont] - elapsed[cont, -1]
        cur = cur[cont]
        nxt = nxt[cont]
    return counts
