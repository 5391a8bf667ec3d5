"""Quantized volatile weight store connecting two populations.

Weights live as unsigned integer codes on an evenly spaced grid between
w_min and w_max, mimicking a register of binary junctions per weight. The
linear rate transform, the trial-and-error update rule, and the per-step
information-loss model all operate here. Updates are computed in real-value
space and written back with stochastic rounding: the typical update is much
smaller than one quantization step, so deterministic rounding would freeze
learning while stochastic rounding preserves it in expectation. An analog
mode stores raw floats instead, for A/B comparisons against quantization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "WeightMatrix",
    "LossParams",
    "random_weights",
    "weights_from_values",
    "transform",
    "update_weights",
    "weight_loss_probability",
    "apply_weight_loss",
    "quantize_roundtrip",
    "write_weights_csv",
]


@dataclass
class WeightMatrix:
    """An n_in x n_out grid of synaptic weights.

    In quantized mode `codes` holds integers in [0, 2**n_bits - 1] and the
    decoded weight is w_min + code * lsb. In analog mode `codes` holds the
    real values directly.
    """

    codes: np.ndarray
    n_bits: int = 8
    w_min: float = -1.0
    w_max: float = 1.0
    analog: bool = False

    def __post_init__(self):
        if self.n_bits < 1 or self.n_bits > 24:
            raise ValueError(f"n_bits must be in [1, 24], got {self.n_bits}")
        if not self.w_min < self.w_max:
            raise ValueError("w_min must be below w_max")
        self.codes = np.asarray(self.codes)
        if self.codes.ndim != 2:
            raise ValueError("codes must be a 2-D array")
        if self.analog:
            self.codes = self.codes.astype(float)
            if np.any(self.codes < self.w_min) or np.any(self.codes > self.w_max):
                raise ValueError("analog weights must lie in [w_min, w_max]")
        else:
            if np.any(self.codes < 0) or np.any(self.codes >= self.levels):
                raise ValueError("codes must lie in [0, 2**n_bits - 1]")
            self.codes = self.codes.astype(np.int64)

    @property
    def levels(self) -> int:
        return 1 << self.n_bits

    @property
    def lsb(self) -> float:
        return (self.w_max - self.w_min) / (self.levels - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape

    @property
    def values(self) -> np.ndarray:
        """Decoded real-valued weights."""
        if self.analog:
            return self.codes
        return self.w_min + self.codes * self.lsb


@dataclass(frozen=True)
class LossParams:
    """Constants of the per-step weight information-loss model."""

    weight_barrier: float
    step_duration: float = 1e-5
    n_bits: int = 8
    attempt_frequency: float = 1e9

    def __post_init__(self):
        if not self.weight_barrier > 0:
            raise ValueError(f"weight_barrier must be > 0, got {self.weight_barrier}")
        if not self.step_duration > 0:
            raise ValueError(f"step_duration must be > 0, got {self.step_duration}")
        if self.n_bits < 1:
            raise ValueError(f"n_bits must be >= 1, got {self.n_bits}")
        if not self.attempt_frequency > 0:
            raise ValueError(f"attempt_frequency must be > 0, got {self.attempt_frequency}")


def random_weights(
    n_in: int,
    n_out: int,
    rng: np.random.Generator,
    n_bits: int = 8,
    w_min: float = -1.0,
    w_max: float = 1.0,
    analog: bool = False,
) -> WeightMatrix:
    """Fresh weight matrix with every entry drawn uniformly over its range."""
    if analog:
        codes = rng.uniform(w_min, w_max, size=(n_in, n_out))
    else:
        codes = rng.integers(0, 1 << n_bits, size=(n_in, n_out))
    return WeightMatrix(codes, n_bits=n_bits, w_min=w_min, w_max=w_max, analog=analog)


def weights_from_values(
    values: np.ndarray,
    n_bits: int = 8,
    w_min: float = -1.0,
    w_max: float = 1.0,
    analog: bool = False,
) -> WeightMatrix:
    """Build a weight matrix from real values, nearest-code rounded."""
    values = np.clip(np.asarray(values, dtype=float), w_min, w_max)
    if analog:
        return WeightMatrix(values, n_bits=n_bits, w_min=w_min, w_max=w_max, analog=True)
    lsb = (w_max - w_min) / ((1 << n_bits) - 1)
    codes = np.rint((values - w_min) / lsb).astype(np.int64)
    return WeightMatrix(codes, n_bits=n_bits, w_min=w_min, w_max=w_max)


def _write_values(w: WeightMatrix, values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Clamp real values to range and convert to stored form (stochastic rounding)."""
    values = np.clip(values, w.w_min, w.w_max)
    if w.analog:
        return values
    x = (values - w.w_min) / w.lsb
    lo = np.floor(x)
    codes = lo.astype(np.int64) + (rng.random(x.shape) < (x - lo))
    return np.clip(codes, 0, w.levels - 1)


def transform(w: WeightMatrix, r_in: np.ndarray, output_alive: np.ndarray) -> np.ndarray:
    """Linear rate transform: each output rate is the weighted sum of input rates.

    Negative weighted sums clamp to zero since physical rates cannot be
    negative, and dead output neurons report exactly zero.
    """
    r_in = np.asarray(r_in, dtype=float)
    output_alive = np.asarray(output_alive, dtype=bool)
    n_in, n_out = w.shape
    if r_in.shape != (n_in,):
        raise ValueError(f"r_in must have length {n_in}, got {r_in.shape}")
    if output_alive.shape != (n_out,):
        raise ValueError(f"output_alive must have length {n_out}, got {output_alive.shape}")
    r_out = np.maximum(r_in @ w.values, 0.0)
    r_out[~output_alive] = 0.0
    return r_out


def update_weights(
    w: WeightMatrix,
    r_in: np.ndarray,
    v_out: float,
    v_target: float,
    output_biases: np.ndarray,
    alpha: float,
    f0: float,
    rng: np.random.Generator,
    window: float = 0.0,
) -> tuple[WeightMatrix, bool]:
    """One trial-and-error weight update; returns the matrix and whether it was written.

    If the output already matches the target within `window`, nothing is
    touched and the same matrix is returned with the flag False. Otherwise
    every output column whose bias differs from v_out is nudged: when the
    output overshoots the target, columns with biases above v_out lose weight
    and columns below gain it, which shifts output rate mass downward; the
    directions reverse when the output undershoots. Each touched entry moves
    as (w + direction * alpha * r_in / f0) / (1 + alpha) in real-value space,
    clamps to range, and is written back with stochastic rounding.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not f0 > 0:
        raise ValueError(f"f0 must be > 0, got {f0}")
    if abs(v_out - v_target) <= window:
        return w, False
    output_biases = np.asarray(output_biases, dtype=float)
    r_in = np.asarray(r_in, dtype=float)
    direction = np.sign(output_biases - v_out)
    if v_out > v_target:
        direction = -direction
    touched = direction != 0.0
    vals = w.values.copy()
    kick = np.outer(r_in * (alpha / f0), direction[touched])
    vals[:, touched] = (vals[:, touched] + kick) / (1.0 + alpha)
    new_codes = _write_values(w, vals, rng)
    if not w.analog:
        new_codes[:, ~touched] = w.codes[:, ~touched]
    return replace(w, codes=new_codes), True


def weight_loss_probability(p: LossParams) -> float:
    """Probability that one weight loses its information during one step.

    1 - exp(-n_bits * dt * f_a * exp(-barrier)): any of the n_bits junctions
    holding the weight reversing within the step corrupts the stored value.
    """
    return -math.expm1(
        -p.n_bits * p.step_duration * p.attempt_frequency * math.exp(-p.weight_barrier)
    )


def apply_weight_loss(
    w: WeightMatrix, p_loss: float, rng: np.random.Generator
) -> tuple[WeightMatrix, int]:
    """Randomize each weight independently with probability p_loss.

    A corrupted weight takes a uniformly random value over its full range,
    the worst-case corruption model. Returns the matrix and the number of
    weights that were randomized.
    """
    if not 0.0 <= p_loss <= 1.0:
        raise ValueError(f"p_loss must be in [0, 1], got {p_loss}")
    if p_loss == 0.0:
        return w, 0
    lost = rng.random(w.shape) < p_loss
    count = int(lost.sum())
    if count == 0:
        return w, 0
    codes = w.codes.copy()
    if w.analog:
        codes[lost] = rng.uniform(w.w_min, w.w_max, size=count)
    else:
        codes[lost] = rng.integers(0, w.levels, size=count)
    return replace(w, codes=codes), count


def quantize_roundtrip(
    value,
    n_bits: int = 8,
    w_min: float = -1.0,
    w_max: float = 1.0,
    mode: str = "nearest",
    rng: np.random.Generator | None = None,
):
    """Map real weight values to codes and back; returns (values, clipped).

    Nearest rounding lands within half a quantization step of the input;
    stochastic rounding (mode="stochastic", needs an rng) is unbiased in
    expectation. Out-of-range inputs are clamped and reported via the flag.
    """
    values = np.asarray(value, dtype=float)
    clipped = bool(np.any(values < w_min) or np.any(values > w_max))
    values = np.clip(values, w_min, w_max)
    levels = 1 << n_bits
    lsb = (w_max - w_min) / (levels - 1)
    x = (values - w_min) / lsb
    if mode == "nearest":
        codes = np.rint(x).astype(np.int64)
    elif mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic rounding needs an rng")
        lo = np.floor(x)
        codes = lo.astype(np.int64) + (rng.random(x.shape) < (x - lo))
    else:
        raise ValueError(f"unknown rounding mode {mode!r}")
    codes = np.clip(codes, 0, levels - 1)
    back = w_min + codes * lsb
    if np.isscalar(value) or np.ndim(value) == 0:
        return float(back), clipped
    return back, clipped


def write_weights_csv(w: WeightMatrix, path) -> None:
    """Export decoded weights as CSV: row = input index, column = output index."""
    values = w.values
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + ",".join(f"out{j}" for j in range(values.shape[1])) + "\n")
        for row in values:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
