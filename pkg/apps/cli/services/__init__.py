from .discrimination_service import labeled_traces, run_discrimination
from .eval_service import POLICY_KINDS, evaluate, load_policy, map_axes_for
from .readout_service import calibration_summary, fit_readout, simulate_traces
from .sweep_service import baseline_points, run_lambda_point, sweep_lambda
from .train_service import plan_training, run_training

__all__ = [
    "plan_training",
    "run_training",
    "evaluate",
    "load_policy",
    "map_axes_for",
    "POLICY_KINDS",
    "sweep_lambda",
    "run_lambda_point",
    "baseline_points",
    "run_discrimination",
    "labeled_traces",
    "simulate_traces",
    "fit_readout",
    "calibration_summary",
]
