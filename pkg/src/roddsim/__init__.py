## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

__version__ = "dev"

from .types import Status, Scheme, InterferenceMode, SnrWiring, SweepAxis, RoddError
from .session import Session
from .geometry import NetworkParams, generate_network, mean_neighbor_count, nonneighbor_interference_variance
from .phy import RoddParams, generate_codebook, simulate_frame, system_load
from .denoiser import build_prior, conditional_mean_var, build_interp_tables
from .decoder import DecoderOptions, decode
from .baselines import RaParams, aloha_error_lower_bound, csma_error_lower_bound, csma_capture_probability, \
    simulate_aloha, simulate_csma
from .harness import SweepConfig, run_sweep, emit_csv
