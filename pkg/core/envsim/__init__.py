from .environment import (
    EnvProtocolError,
    QubitEnvironment,
    apply_action,
    default_n_actions,
    evolve,
    measure,
    prepare,
    run_episode,
)
from .markov import rate_matrix, sample_path, stationary_distribution, transition_probabilities
from .traces import (
    MeanTraceError,
    MeanTraceModel,
    load_mean_traces_csv,
    save_mean_traces_csv,
    weak_snr,
)

__all__ = [
    "QubitEnvironment",
    "EnvProtocolError",
    "prepare",
    "evolve",
    "measure",
    "apply_action",
    "run_episode",
    "default_n_actions",
    "rate_matrix",
    "sample_path",
    "stationary_distribution",
    "transition_probabilities",
    "MeanTraceModel",
    "MeanTraceError",
    "load_mean_traces_csv",
    "save_mean_traces_csv",
    "weak_snr",
]
