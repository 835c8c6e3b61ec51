"""Numeric defaults and documented reference literals."""

# Verdict band width in standard errors
VERDICT_SIGMAS = 3.0

# Relative slack for an estimate that matches its bound up to rounding
VERDICT_ROUNDING = 1e-9

# Grid cells per axis of the default occupancy statistic
OCCUPANCY_GRID_CELLS = 4

# Burn-in multiplier: burn_in = BURN_IN_FACTOR * n * (1 + lambda)
BURN_IN_FACTOR = 10

# SSM scans use exact rejection sampling while lambda * |Lambda_Int| stays below this
EXACT_SAMPLING_MAX_MEAN = 30.0

# Rejection sampling also requires the expected number of overlapping proposal
# pairs to keep the log acceptance rate above this
EXACT_SAMPLING_MIN_LOG_ACCEPTANCE = -8.0

# Stationarity checks pass when the empirical TV to the oracle is at most this
STATIONARITY_TV_TOLERANCE = 0.02

# Position bins per axis used by the stationarity statistic
STATIONARITY_POSITION_BINS = 2

# Root finding tolerances and iteration caps
JJP_RELATIVE_TOLERANCE = 1e-10
JJP_MAX_BISECTIONS = 200
LAMBERT_W_TOLERANCE = 1e-12
LAMBERT_W_MAX_ITERATIONS = 100

# Snapshot format version
SNAPSHOT_FORMAT_VERSION = 1

# Literature constants echoed in `bounds` output footnotes (d = 2 unless noted)
REFERENCE_LITERALS = {
    "cluster_expansion_d2_fugacity": 0.1277,
    "disagreement_percolation_d2_fugacity": 0.1367,
    "high_confidence_percolation_d2_fugacity": 0.28175,
    "partial_rejection_sampling_d2_fugacity": 0.21027,
    "improved_partial_rejection_d2_fugacity": 0.2344,
    "canonical_moves_d2_density": 0.154,
}

# Batches per replica for batch-means standard errors
BATCH_MEANS_BATCHES = 10

# Stream ids of different experiment points are spaced by this stride
STREAM_STRIDE = 1 << 20
