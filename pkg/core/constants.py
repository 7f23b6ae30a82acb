"""Device and protocol defaults for the simulated transmon reset loop."""

# Measured device parameters (seconds / probabilities)
T1_E = 13e-6
T1_F = 6e-6
P_THERM = 0.014

# Readout chain
SAMPLE_RATE = 1e9
READOUT_LEN = 256
CYCLE_TIME = 856e-9
RING_UP_TIME = 25e-9

# p_therm * verify_delay / t1_e ~= 0.07 % rethermalization floor
VERIFY_DELAY = 650e-9

# Both calibrated so the thresholded two-level infidelity, T1 decay included,
# lands near 1.95 % (strong) and 13.9 % (weak)
STRONG_SNR = 4.35
WEAK_OVERLAP = 0.273

FLIP_ERROR = 0.001
MAX_CYCLES = 10

# Steady-state IQ response per level (arbitrary units)
STEADY_G = (1.0, 0.0)
STEADY_E = (-1.0, 0.0)
STEADY_F = (-1.0, 1.0)

# FPGA timing (nanoseconds)
CLOCK_NS = 8.0
ADC_NS = 160.0
AWG_NS = 107.0
FPGA_NS = 144.0
PROPAGATION_NS = 40.0
PREPROCESSING_OVERHEAD_NS = 88.0
EG_PULSE_NS = 60.0
GF_PULSE_NS = 112.0

# Validation / evaluation
VALIDATION_EPISODES = 20_000
BOOTSTRAP_RESAMPLES = 200
POLICY_MAP_BINS = 41
MIN_HISTOGRAM_BINS = 64

# Discrimination study
DISCRIMINATION_TRACES = 8192
