"""Event-driven Monte Carlo simulator of a population-coding computing system.

Stochastic bistable junctions act as rate-coded neurons, quantized volatile
memories store the synaptic weights, and a continuous trial-and-error loop
keeps the system learning through neuron death and weight corruption. The
package also sweeps the write-power versus precision tradeoff and extracts
its Pareto frontier.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, default_config, load_config
from .device import (
    JunctionParams,
    JunctionState,
    escape_rate,
    mean_transition_rate,
    sample_switch_counts,
    simulate_window,
    stationary_p_probability,
    switch_probability,
)
from .learning import (
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
)
from .population import (
    DecodeResult,
    Population,
    decode,
    encode_check,
    linear_population,
    measure_rates,
)
from .reliability import (
    NeuronLossEvent,
    PowerPoint,
    inject_neuron_loss,
    normalized_power,
    pareto_frontier,
    pareto_sweep,
    run_loss_recovery,
)
from .seeding import spawn_rng
from .weights import (
    LossParams,
    WeightMatrix,
    apply_weight_loss,
    quantize_roundtrip,
    random_weights,
    transform,
    update_weights,
    weight_loss_probability,
    weights_from_values,
)
