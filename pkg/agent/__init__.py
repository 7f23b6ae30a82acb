from .baseline import (
    ThresholdAgent,
    ThresholdFrontierPoint,
    ThresholdPolicy,
    accept_threshold_grid,
    default_threshold_policy,
    threshold_decide,
    threshold_frontier,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .evaluation import ValidationMetrics, evaluate_policy, run_validation_episodes, summarize_episodes
from .latency import LatencyLedger, ceil_log4, dense_layer_latency, latency_report
from .network import (
    LowLatencyPolicy,
    ObservationWindow,
    PolicyParams,
    ShapeMismatchError,
    boxcar,
    build_window,
    forward_flat,
    forward_stream,
)
from .param_store import ParamStore
from .policy import DecisionRecord, NetworkPolicy, OraclePolicy
from .quantize import FixedPointScheme, quantize
from .sampling import greedy_action, gumbel_argmax, sample_action

__all__ = [
    # network
    "PolicyParams",
    "ObservationWindow",
    "LowLatencyPolicy",
    "ShapeMismatchError",
    "boxcar",
    "build_window",
    "forward_stream",
    "forward_flat",
    "FixedPointScheme",
    "quantize",
    "gumbel_argmax",
    "sample_action",
    "greedy_action",
    "LatencyLedger",
    "latency_report",
    "dense_layer_latency",
    "ceil_log4",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
    "ParamStore",
    # policies and evaluation
    "NetworkPolicy",
    "OraclePolicy",
    "DecisionRecord",
    "ValidationMetrics",
    "evaluate_policy",
    "run_validation_episodes",
    "summarize_episodes",
    # baseline
    "ThresholdPolicy",
    "ThresholdAgent",
    "ThresholdFrontierPoint",
    "threshold_decide",
    "default_threshold_policy",
    "accept_threshold_grid",
    "threshold_frontier",
]
