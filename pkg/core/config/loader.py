import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

import toml

from core.models.config import (
    DiscriminationConfig,
    EnvConfig,
    ExperimentConfig,
    GlobalConfig,
    LatencyConfig,
    NetTopology,
    PpoHyperparams,
    ReadoutConfig,
    RewardConfig,
    WeakReadoutConfig,
)

from .scenarios import SCENARIOS, get_scenario
from .utils import (
    create_default_config,
    get_config_summary,
    validate_config_file_exists,
)

logger = logging.getLogger(__name__)

_config: Optional[GlobalConfig] = None

PREPARATIONS = (
    "equilibrium",
    "inverted",
    "qutrit_mixed",
    "qubit_mixed",
    "ground",
    "excited",
    "second_excited",
)


class ConfigValidationError(Exception):
    """Raised when configuration validation fails.

    `field` is the dotted path of the offending key, e.g. ``env.p_therm``.
    """

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


@dataclass
class ConfigPaths:
    """Configuration file paths for different environments"""

    dev: str = "config.toml"
    prod: str = "/app/config.toml"
    test: str = "config.toml"


def get_config_path() -> str:
    """Get the appropriate config file path based on environment"""
    env = os.getenv("ENV", "dev").lower()
    paths = ConfigPaths()

    if env == "prod":
        return paths.prod
    elif env == "test":
        return paths.test
    else:
        return paths.dev


def _require(condition: bool, field: str, message: str) -> None:
    if not condition:
        raise ConfigValidationError(message, field=field)


def validate_env_config(cfg: EnvConfig) -> None:
    _require(cfg.t1_e > 0, "env.t1_e", f"must be > 0, got {cfg.t1_e}")
    _require(cfg.t1_f > 0, "env.t1_f", f"must be > 0, got {cfg.t1_f}")
    _require(0 <= cfg.p_therm < 0.5, "env.p_therm", f"must be in [0, 0.5), got {cfg.p_therm}")
    _require(cfg.snr > 0, "env.snr", f"must be > 0, got {cfg.snr}")
    _require(cfg.readout_len > 0, "env.readout_len", f"must be > 0, got {cfg.readout_len}")
    _require(cfg.sample_rate > 0, "env.sample_rate", f"must be > 0, got {cfg.sample_rate}")
    _require(cfg.cycle_time > 0, "env.cycle_time", f"must be > 0, got {cfg.cycle_time}")
    _require(cfg.verify_delay >= 0, "env.verify_delay", f"must be >= 0, got {cfg.verify_delay}")
    _require(
        0 <= cfg.flip_error < 1, "env.flip_error", f"must be in [0, 1), got {cfg.flip_error}"
    )
    _require(cfg.levels in (2, 3), "env.levels", f"must be 2 or 3, got {cfg.levels}")
    _require(cfg.max_cycles >= 1, "env.max_cycles", f"must be >= 1, got {cfg.max_cycles}")
    _require(cfg.ring_up_time > 0, "env.ring_up_time", f"must be > 0, got {cfg.ring_up_time}")
    if cfg.weak.snr is not None:
        _require(cfg.weak.snr > 0, "env.weak.snr", f"must be > 0, got {cfg.weak.snr}")
    else:
        _require(
            0 < cfg.weak.overlap < 1,
            "env.weak.overlap",
            f"must be in (0, 1), got {cfg.weak.overlap}",
        )
    if cfg.mean_traces is not None:
        shape = getattr(cfg.mean_traces, "shape", ())
        _require(
            len(shape) == 3 and shape[2] == 2,
            "env.mean_traces",
            f"must have shape (levels, samples, 2), got {shape}",
        )
        _require(
            shape[0] >= cfg.levels,
            "env.mean_traces",
            f"holds {shape[0]} levels, {cfg.levels} required",
        )
        _require(
            shape[1] >= cfg.readout_len,
            "env.mean_traces",
            f"holds {shape[1]} samples, readout_len is {cfg.readout_len}",
        )


def validate_topology(net: NetTopology) -> None:
    _require(net.n_hidden_layers >= 1, "network.n_hidden_layers", "must be >= 1")
    _require(net.hidden_width >= 1, "network.hidden_width", "must be >= 1")
    _require(
        net.inputs_per_layer >= 2 and net.inputs_per_layer % 2 == 0,
        "network.inputs_per_layer",
        f"must be a positive even number (I and Q halves), got {net.inputs_per_layer}",
    )
    _require(net.preproc_layers >= 1, "network.preproc_layers", "must be >= 1")
    _require(net.preproc_width >= 1, "network.preproc_width", "must be >= 1")
    _require(
        net.memory_depth in (0, 1, 2),
        "network.memory_depth",
        f"must be 0, 1 or 2, got {net.memory_depth}",
    )
    _require(
        net.n_actions in (2, 3, 4),
        "network.n_actions",
        f"must be 2 (classifier), 3 or 4, got {net.n_actions}",
    )
    _require(net.boxcar_width >= 1, "network.boxcar_width", "must be >= 1")
    _require(net.memory_boxcar_width >= 1, "network.memory_boxcar_width", "must be >= 1")
    _require(net.readout_len >= 1, "network.readout_len", "must be >= 1")


def validate_reward_config(rc: RewardConfig) -> None:
    _require(
        rc.lambda_penalty >= 0,
        "reward.lambda_penalty",
        f"must be >= 0, got {rc.lambda_penalty}",
    )
    if rc.u_g is not None and rc.u_e is not None:
        _require(rc.u_g != rc.u_e, "reward.u_e", "u_g and u_e must differ")


def validate_ppo_config(hp: PpoHyperparams) -> None:
    _require(0 < hp.gamma <= 1, "ppo.gamma", f"must be in (0, 1], got {hp.gamma}")
    _require(
        0 < hp.gae_lambda <= 1, "ppo.gae_lambda", f"must be in (0, 1], got {hp.gae_lambda}"
    )
    _require(hp.cliprange > 0, "ppo.cliprange", f"must be > 0, got {hp.cliprange}")
    _require(hp.epochs >= 1, "ppo.epochs", f"must be >= 1, got {hp.epochs}")
    _require(hp.minibatches >= 1, "ppo.minibatches", f"must be >= 1, got {hp.minibatches}")
    _require(hp.adam_lr > 0, "ppo.adam_lr", f"must be > 0, got {hp.adam_lr}")
    _require(0 <= hp.adam_beta1 < 1, "ppo.adam_beta1", "must be in [0, 1)")
    _require(0 <= hp.adam_beta2 < 1, "ppo.adam_beta2", "must be in [0, 1)")
    _require(hp.grad_clip > 0, "ppo.grad_clip", f"must be > 0, got {hp.grad_clip}")
    _require(
        hp.batch_measurements >= 1,
        "ppo.batch_measurements",
        f"must be >= 1, got {hp.batch_measurements}",
    )
    _require(hp.training_steps >= 0, "ppo.training_steps", "must be >= 0")
    _require(hp.validation_episodes >= 1, "ppo.validation_episodes", "must be >= 1")


def validate_discrimination_config(dc: DiscriminationConfig) -> None:
    _require(dc.n_traces >= 4, "discrimination.n_traces", f"must be >= 4, got {dc.n_traces}")
    _require(dc.trace_duration > 0, "discrimination.trace_duration", "must be > 0")
    _require(len(dc.taus) > 0, "discrimination.taus", "must not be empty")
    for tau in dc.taus:
        _require(
            0 < tau <= dc.trace_duration,
            "discrimination.taus",
            f"values must lie in (0, trace_duration], got {tau}",
        )
    _require(dc.epochs >= 1, "discrimination.epochs", "must be >= 1")
    _require(dc.restarts >= 1, "discrimination.restarts", "must be >= 1")
    _require(dc.batch_size >= 1, "discrimination.batch_size", "must be >= 1")
    _require(dc.patience >= 1, "discrimination.patience", "must be >= 1")


def validate_experiment(cfg: GlobalConfig) -> None:
    """Cross-section consistency of the configured scenario."""
    exp = cfg.experiment
    scenario = get_scenario(exp.scenario)
    _require(len(exp.lambdas) > 0, "experiment.lambdas", "must not be empty")
    for lam in exp.lambdas:
        _require(lam >= 0, "experiment.lambdas", f"values must be >= 0, got {lam}")
    _require(len(exp.seeds) > 0, "experiment.seeds", "must not be empty")
    _require(exp.validation_size >= 1, "experiment.validation_size", "must be >= 1")
    _require(exp.threads >= 1, "experiment.threads", f"must be >= 1, got {exp.threads}")
    _require(
        exp.strength in ("strong", "weak"),
        "experiment.strength",
        f"must be 'strong' or 'weak', got {exp.strength}",
    )
    if exp.prep is not None:
        _require(
            exp.prep in PREPARATIONS,
            "experiment.prep",
            f"must be one of {list(PREPARATIONS)}, got {exp.prep}",
        )
        if exp.prep in ("qutrit_mixed", "second_excited"):
            _require(cfg.env.levels == 3, "env.levels", f"prep '{exp.prep}' requires 3 levels")

    _require(
        cfg.env.levels == scenario.levels,
        "env.levels",
        f"scenario {scenario.name} requires {scenario.levels} levels",
    )
    _require(
        cfg.network.n_actions == scenario.n_actions,
        "network.n_actions",
        f"scenario {scenario.name} requires {scenario.n_actions} actions",
    )
    _require(
        cfg.network.memory_depth == scenario.memory_depth,
        "network.memory_depth",
        f"scenario {scenario.name} requires memory depth {scenario.memory_depth}",
    )
    _require(
        exp.strength == scenario.strength,
        "experiment.strength",
        f"scenario {scenario.name} uses {scenario.strength} readout",
    )
    _require(
        cfg.network.readout_len == cfg.env.readout_len,
        "network.readout_len",
        "must equal env.readout_len",
    )


def validate_global_config(cfg: GlobalConfig) -> None:
    validate_env_config(cfg.env)
    validate_topology(cfg.network)
    validate_reward_config(cfg.reward)
    validate_ppo_config(cfg.ppo)
    validate_discrimination_config(cfg.discrimination)
    validate_experiment(cfg)


def _to_env_config(config: dict, base_dir: str = "") -> EnvConfig:
    """Convert the [env] section to EnvConfig, loading tabulated traces if named."""
    d = EnvConfig()
    weak = config.get("weak", {})
    weak_snr = weak.get("snr")
    csv_path = config.get("mean_traces_csv")
    mean_traces = None
    if csv_path:
        from core.envsim.traces import MeanTraceError, load_mean_traces_csv

        if not os.path.isabs(csv_path) and base_dir:
            csv_path = os.path.join(base_dir, csv_path)
        try:
            mean_traces = load_mean_traces_csv(csv_path)
        except (OSError, MeanTraceError, ValueError) as e:
            raise ConfigValidationError(str(e), field="env.mean_traces_csv")

    return EnvConfig(
        t1_e=float(config.get("t1_e", d.t1_e)),
        t1_f=float(config.get("t1_f", d.t1_f)),
        p_therm=float(config.get("p_therm", d.p_therm)),
        readout_len=int(config.get("readout_len", d.readout_len)),
        sample_rate=float(config.get("sample_rate", d.sample_rate)),
        cycle_time=float(config.get("cycle_time", d.cycle_time)),
        verify_delay=float(config.get("verify_delay", d.verify_delay)),
        snr=float(config.get("snr", d.snr)),
        flip_error=float(config.get("flip_error", d.flip_error)),
        levels=int(config.get("levels", d.levels)),
        max_cycles=int(config.get("max_cycles", d.max_cycles)),
        ring_up_time=float(config.get("ring_up_time", d.ring_up_time)),
        steady_g=tuple(float(x) for x in config.get("steady_g", d.steady_g)),
        steady_e=tuple(float(x) for x in config.get("steady_e", d.steady_e)),
        steady_f=tuple(float(x) for x in config.get("steady_f", d.steady_f)),
        mean_traces=mean_traces,
        mean_traces_csv=csv_path or None,
        weak=WeakReadoutConfig(
            overlap=float(weak.get("overlap", d.weak.overlap)),
            snr=float(weak_snr) if weak_snr is not None else None,
        ),
    )


def _to_network_config(config: dict) -> NetTopology:
    d = NetTopology()
    return NetTopology(**{k: int(config.get(k, v)) for k, v in d.to_dict().items()})


def _to_latency_config(config: dict) -> LatencyConfig:
    d = LatencyConfig()
    return LatencyConfig(
        clock_ns=float(config.get("clock_ns", d.clock_ns)),
        adc_ns=float(config.get("adc_ns", d.adc_ns)),
        awg_ns=float(config.get("awg_ns", d.awg_ns)),
        fpga_ns=float(config.get("fpga_ns", d.fpga_ns)),
        propagation_ns=float(config.get("propagation_ns", d.propagation_ns)),
        preprocessing_overhead_ns=float(
            config.get("preprocessing_overhead_ns", d.preprocessing_overhead_ns)
        ),
        eg_pulse_ns=float(config.get("eg_pulse_ns", d.eg_pulse_ns)),
        gf_pulse_ns=float(config.get("gf_pulse_ns", d.gf_pulse_ns)),
    )


def _to_ppo_config(config: dict) -> PpoHyperparams:
    """Convert the [ppo] section; names mirror the training hyperparameter table."""
    d = PpoHyperparams()
    max_episodes = config.get("max_training_episodes")
    return PpoHyperparams(
        adam_lr=float(config.get("adam_lr", d.adam_lr)),
        adam_beta1=float(config.get("adam_beta1", d.adam_beta1)),
        adam_beta2=float(config.get("adam_beta2", d.adam_beta2)),
        gamma=float(config.get("gamma", d.gamma)),
        entropy_coef=float(config.get("entropy_coef", d.entropy_coef)),
        cliprange=float(config.get("cliprange", d.cliprange)),
        gae_lambda=float(config.get("gae_lambda", d.gae_lambda)),
        minibatches=int(config.get("minibatches", d.minibatches)),
        epochs=int(config.get("epochs", d.epochs)),
        grad_clip=float(config.get("grad_clip", d.grad_clip)),
        batch_measurements=int(config.get("batch_measurements", d.batch_measurements)),
        training_steps=int(config.get("training_steps", d.training_steps)),
        value_coef=float(config.get("value_coef", d.value_coef)),
        normalize_advantages=bool(config.get("normalize_advantages", d.normalize_advantages)),
        critic_width=int(config.get("critic_width", d.critic_width)),
        critic_layers=int(config.get("critic_layers", d.critic_layers)),
        validation_episodes=int(config.get("validation_episodes", d.validation_episodes)),
        validate_every=int(config.get("validate_every", d.validate_every)),
        checkpoint_every=int(config.get("checkpoint_every", d.checkpoint_every)),
        max_training_episodes=int(max_episodes) if max_episodes is not None else None,
        stochastic_validation=bool(
            config.get("stochastic_validation", d.stochastic_validation)
        ),
    )


def _to_reward_config(config: dict) -> RewardConfig:
    u_g, u_e = config.get("u_g"), config.get("u_e")
    return RewardConfig(
        lambda_penalty=float(config.get("lambda_penalty", RewardConfig.lambda_penalty)),
        u_g=float(u_g) if u_g is not None else None,
        u_e=float(u_e) if u_e is not None else None,
    )


def _to_readout_config(config: dict) -> ReadoutConfig:
    d = ReadoutConfig()
    return ReadoutConfig(
        calibration_shots=int(config.get("calibration_shots", d.calibration_shots)),
        min_bins=int(config.get("min_bins", d.min_bins)),
        max_iter=int(config.get("max_iter", d.max_iter)),
        tol=float(config.get("tol", d.tol)),
        bootstrap_resamples=int(config.get("bootstrap_resamples", d.bootstrap_resamples)),
    )


def _to_discrimination_config(config: dict) -> DiscriminationConfig:
    d = DiscriminationConfig()
    return DiscriminationConfig(
        n_traces=int(config.get("n_traces", d.n_traces)),
        trace_duration=float(config.get("trace_duration", d.trace_duration)),
        taus=sorted(float(t) for t in config.get("taus", d.taus)),
        epochs=int(config.get("epochs", d.epochs)),
        restarts=int(config.get("restarts", d.restarts)),
        batch_size=int(config.get("batch_size", d.batch_size)),
        heralded=bool(config.get("heralded", d.heralded)),
        tol=float(config.get("tol", d.tol)),
        patience=int(config.get("patience", d.patience)),
    )


def _to_experiment_config(config: dict) -> ExperimentConfig:
    d = ExperimentConfig()
    return ExperimentConfig(
        scenario=str(config.get("scenario", d.scenario)),
        lambdas=[float(x) for x in config.get("lambdas", d.lambdas)],
        seeds=[int(x) for x in config.get("seeds", d.seeds)],
        validation_size=int(config.get("validation_size", d.validation_size)),
        prep=config.get("prep", d.prep),
        strength=str(config.get("strength", d.strength)),
        threads=int(config.get("threads", d.threads)),
    )


def _apply_scenario_defaults(config: dict) -> dict:
    """Fill the fields a scenario pins down; explicit conflicting values are errors."""
    name = config.get("experiment", {}).get("scenario", ExperimentConfig.scenario)
    if name not in SCENARIOS:
        raise ConfigValidationError(
            f"Unknown scenario '{name}'. Must be one of: {sorted(SCENARIOS)}",
            field="experiment.scenario",
        )
    scenario = SCENARIOS[name]
    pinned = {
        ("env", "levels"): scenario.levels,
        ("network", "n_actions"): scenario.n_actions,
        ("network", "memory_depth"): scenario.memory_depth,
        ("experiment", "strength"): scenario.strength,
    }
    for (section, key), value in pinned.items():
        current = config.setdefault(section, {}).get(key)
        if current is None:
            config[section][key] = value
        elif current != value:
            raise ConfigValidationError(
                f"scenario {name} requires {value}, got {current}", field=f"{section}.{key}"
            )
    if scenario.prep and not config["experiment"].get("prep"):
        config["experiment"]["prep"] = scenario.prep
    return config


def build_config(file_config: dict, base_dir: str = "") -> GlobalConfig:
    """Build and validate a GlobalConfig from a parsed TOML dict."""
    file_config = _apply_scenario_defaults(file_config)
    global_cfg = GlobalConfig(
        env=_to_env_config(file_config.get("env", {}), base_dir),
        network=_to_network_config(file_config.get("network", {})),
        latency=_to_latency_config(file_config.get("latency", {})),
        ppo=_to_ppo_config(file_config.get("ppo", {})),
        reward=_to_reward_config(file_config.get("reward", {})),
        readout=_to_readout_config(file_config.get("readout", {})),
        discrimination=_to_discrimination_config(file_config.get("discrimination", {})),
        experiment=_to_experiment_config(file_config.get("experiment", {})),
    )
    validate_global_config(global_cfg)
    return global_cfg


def load_config(
    reload: bool = False,
    use_env_overrides: bool = True,
    path: Optional[str] = None,
    scenario: Optional[str] = None,
) -> GlobalConfig:
    """Load configuration with caching, validation, and environment overrides.

    `scenario` replaces the configured scenario, after the environment overrides.
    """
    global _config

    if _config and not reload:
        return _config

    if not path:
        config_path = get_config_path()
    else:
        config_path = path

    if not os.path.exists(config_path):
        try:
            default_config = create_default_config()
            directory = os.path.dirname(config_path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(config_path, "w", encoding="utf-8") as f:
                toml.dump(default_config, f)
            logger.info("Created default configuration at %s", config_path)
        except Exception as e:
            raise ConfigValidationError(
                f"Failed to create default configuration at {config_path}: {e}"
            )

    if not validate_config_file_exists(config_path):
        raise ConfigValidationError(f"Configuration file not found: {config_path}")

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            file_config = toml.load(f)

        if use_env_overrides:
            file_config = _apply_env_overrides(file_config)

        if scenario:
            file_config.setdefault("experiment", {})["scenario"] = scenario

        summary = get_config_summary(file_config)
        logger.info(f"Configuration summary: {summary}")

    except toml.TomlDecodeError as e:
        raise ConfigValidationError(f"Invalid TOML configuration: {e}")
    except ConfigValidationError:
        raise
    except Exception as e:
        raise ConfigValidationError(f"Error reading configuration file: {e}")

    try:
        global_cfg = build_config(file_config, os.path.dirname(os.path.abspath(config_path)))
    except (TypeError, ValueError) as e:
        raise ConfigValidationError(f"Invalid configuration value: {e}")

    _config = global_cfg
    logger.info(
        "Configuration loaded successfully. Scenario: %s (levels=%d, l=%d)",
        global_cfg.experiment.scenario,
        global_cfg.env.levels,
        global_cfg.network.memory_depth,
    )

    return _config


def _apply_env_overrides(config: dict) -> dict:
    """Apply FASTRESET_* environment variable overrides to a raw configuration."""
    experiment = config.setdefault("experiment", {})

    if seed := os.getenv("FASTRESET_SEED"):
        experiment["seeds"] = [int(seed)]
        logger.debug("Overriding seeds from FASTRESET_SEED environment variable")

    if scenario := os.getenv("FASTRESET_SCENARIO"):
        experiment["scenario"] = scenario
        logger.debug("Overriding scenario from FASTRESET_SCENARIO environment variable")

    if threads := os.getenv("FASTRESET_THREADS"):
        experiment["threads"] = int(threads)
        logger.debug("Overriding threads from FASTRESET_THREADS environment variable")

    if lam := os.getenv("FASTRESET_LAMBDA"):
        config.setdefault("reward", {})["lambda_penalty"] = float(lam)
        experiment["lambdas"] = [float(lam)]
        logger.debug("Overriding lambda from FASTRESET_LAMBDA environment variable")

    return config


def get_config() -> GlobalConfig:
    """Get the current configuration, loading it if necessary"""
    return load_config()


def reload_config() -> GlobalConfig:
    """Force reload the configuration"""
    return load_config(reload=True)


def validate_config(path: Optional[str] = None) -> bool:
    """Validate the configuration file without keeping it"""
    try:
        load_config(reload=True, path=path)
        return True
    except ConfigValidationError as e:
        logger.error(f"Configuration validation failed: {e}")
        return False
    except Exception as e:
        logger.error(f"Unexpected error during configuration validation: {e}")
        return False
