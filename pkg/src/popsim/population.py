"""Populations of junction neurons and rate-vector decoding.

A population is a row of identical junctions, each offset by its own bias
voltage on an evenly spaced grid. Presenting an input voltage gives every
junction a net voltage equal to the input minus its bias, so each neuron's
switching rate peaks when the input matches its bias: the bias grid is the
set of preferred values. Rates are measured by counting telegraph switches
over a fixed observation window, and the encoded value is read back as the
rate-weighted mean of the bias voltages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .device import JunctionParams, sample_switch_counts

__all__ = [
    "Population",
    "DecodeResult",
    "linear_population",
    "measure_rates",
    "decode",
    "encode_check",
]


@dataclass
class Population:
    """An ordered population of junction neurons sharing one device model.

    `bias_voltages` must be strictly increasing and evenly spaced; `alive`
    marks which neurons still respond (dead ones always report rate zero).
    """

    bias_voltages: np.ndarray
    junction: JunctionParams
    t_obs: float = 1e-5
    alive: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.bias_voltages = np.asarray(self.bias_voltages, dtype=float)
        if self.bias_voltages.ndim != 1 or self.bias_voltages.size < 2:
            raise ValueError("bias_voltages must be a 1-D grid of at least 2 values")
        spacing = np.diff(self.bias_voltages)
        if not np.all(spacing > 0):
            raise ValueError("bias_voltages must be strictly increasing")
        if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
            raise ValueError("bias_voltages must be evenly spaced")
        if not self.t_obs > 0:
            raise ValueError(f"t_obs must be > 0, got {self.t_obs}")
        if self.alive is None:
            self.alive = np.ones(self.bias_voltages.size, dtype=bool)
        else:
            self.alive = np.asarray(self.alive, dtype=bool)
            if self.alive.shape != self.bias_voltages.shape:
                raise ValueError("alive mask length must match bias_voltages")

    @property
    def size(self) -> int:
        return self.bias_voltages.size

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())

    @property
    def bias_midpoint(self) -> float:
        return 0.5 * (self.bias_voltages[0] + self.bias_voltages[-1])


def linear_population(
    n: int,
    bias_min: float = -0.15,
    bias_max: float = 0.15,
    junction: JunctionParams | None = None,
    t_obs: float = 1e-5,
) -> Population:
    """Build a population with `n` biases evenly spanning [bias_min, bias_max]."""
    if n < 2:
        raise ValueError(f"population needs at least 2 neurons, got {n}")
    if not bias_min < bias_max:
        raise ValueError("bias_min must be below bias_max")
    return Population(
        bias_voltages=np.linspace(bias_min, bias_max, n),
        junction=junction if junction is not None else JunctionParams(),
        t_obs=t_obs,
    )


class DecodeResult(NamedTuple):
    voltage: float
    degenerate: bool


def measure_rates(pop: Population, v_in: float, rng: np.random.Generator) -> np.ndarray:
    """Measure the switching rate of every neuron for one input voltage.

    Each alive neuron sees the net voltage v_in - bias and its rate is the
    number of switches counted over the observation window divided by the
    window length. Dead neurons report exactly zero.
    """
    if not math.isfinite(v_in):
        raise ValueError(f"v_in must be finite, got {v_in}")
    rates = np.zeros(pop.size)
    idx = np.flatnonzero(pop.alive)
    if idx.size:
        counts = sample_switch_counts(
            pop.junction, v_in - pop.bias_voltages[idx], pop.t_obs, rng
        )
        rates[idx] = counts / pop.t_obs
    return rates


def decode(bias_voltages: np.ndarray, rates: np.ndarray) -> DecodeResult:
    """Read the encoded value back as the rate-weighted mean of the biases.

    A convex combination of the biases, so the result always lies inside the
    bias range. When every rate is zero the value is undefined; the midpoint
    of the bias range is returned with the degenerate flag set instead of
    raising, so callers in the learning loop stay total.
    """
    bias_voltages = np.asarray(bias_voltages, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if bias_voltages.shape != rates.shape:
        raise ValueError("bias_voltages and rates must have the same length")
    if np.any(rates < 0):
        raise ValueError("rates must be non-negative")
    total = rates.sum()
    if total == 0.0:
        midpoint = 0.5 * (bias_voltages.min() + bias_voltages.max())
        return DecodeResult(midpoint, True)
    return DecodeResult(float(np.dot(bias_voltages, rates) / total), False)


def encode_check(pop: Population, v_in: float, rng: np.random.Generator) -> DecodeResult:
    """Round-trip diagnostic: measure one population, then decode it.

    For a healthy population the decoded value tracks v_in up to the
    counting noise of the finite observation window.
    """
    return decode(pop.bias_voltages, measure_rates(pop, v_in, rng))
