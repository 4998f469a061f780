## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import re
import json


# Published setup: 1000 nodes conditioned in a 500 m square.
NODE_COUNT = 1000
REGION_SIDE = 500.0
PATH_LOSS = 4.0
GAIN_THRESHOLD = 1e-6
SNR_DB = 60.0

# Message bits, and the SINR thresholds used for simulation and for bounds.
MESSAGE_BITS = 5
SIMULATED_THRESHOLD = 0.5
BOUND_THRESHOLD = 3.5

# Decoder constants.
TAU_INIT = 1e6
ITERATIONS = 100
TOLERANCE = 1e-6
TAU_STABILITY = 1e-3
TABLE_POINTS = 256
TABLE_WIDTH = 8.0
# Decoder tables are built at τ snapped to this many levels per octave.
TABLE_LEVELS = 32
TABLE_CACHE = 2048

# Prior tabulation: core is linear up to CORE_WIDTH·√θ, tail is geometric.
TAIL_EPSILON = 1e-6
CORE_WIDTH = 4.0
CORE_POINTS = 401
TAIL_POINTS = 600
PRIOR_TOLERANCE = 1e-3
# Posterior quadrature: most nodes a chunk may share before falling back to
# per-observation nodes.
SHARED_NODES = 4096

# Largest codebook, in ternary entries, that a single node may hold.
CODEBOOK_BUDGET = 2 ** 28
# Total entries cached per trial by a codebook store.
STORE_BUDGET = 2 ** 27

# Quadrature: integrand envelope below which the tail is dropped.
ENVELOPE_CUTOFF = 1e-12
IMAGINARY_TOLERANCE = 1e-6

# Sweeps.
TRIALS = 200
WORKERS = 1

# Plain number, or a number followed by a decibel suffix.
RE_DECIBEL = re.compile(r"^\s*([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)\s*dB\s*$", re.I)


def parse_quantity(value) -> float:
    """
    Convert a configuration value into a linear quantity, where strings with
    a `dB` suffix are interpreted as power ratios.
    """
    if isinstance(value, (int, float)):
        return float(value)

    match = RE_DECIBEL.match(str(value))
    if match:
        return 10.0 ** (float(match.group(1)) / 10.0)
    return float(value)


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
