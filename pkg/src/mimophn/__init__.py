"""Link-level simulator and receiver library for coded MIMO systems with
per-antenna oscillator phase noise.

The receiver alternates between an iterative soft detector over a
bit-interleaved LDPC-coded QAM frame and a soft-decision-directed extended
Kalman filter-smoother that tracks the reduced per-antenna phase state.
"""

__version__ = "0.1.0"

from .bicm import (Constellation, FrameLayout, Interleaver, TxFrame,
                   bpsk_constellation, build_frame, default_pilot_book,
                   deinterleave, interleave, make_constellation,
                   make_interleaver, make_layout)
from .channel import (ChannelConfig, PhnConfig, PhnTrajectories,
                      ReceivedFrame, ReducedPhnTrajectory, apply_channel,
                      effective_channels, effective_channels_reduced,
                      generate_phn, generate_rician_channel, reduce_ambiguity)
from .detector import (DetectorConfig, DetectorResult, SoftSymbolStats,
                       channel_likelihoods, demapper_extrinsic,
                       equalizer_extrinsic, posterior_mapper, run_detector,
                       symbol_priors_from_bits)
from .ekfs import EkfsConfig, EkfsTrajectory, run_ekfs
from .em import (EmConfig, EmRunResult, MapOracleConfig, disjoint_receiver,
                 evaluate_q, init_pilot_phn, map_oracle, run_em)
from .errors import (ConfigurationError, ConstructionError, FramingError,
                     MimophnError, ModelError)
from .harness import (ComplexityParams, ComplexityReport, ErrorStats,
                      PointResult, ScenarioConfig, complexity_ekfs,
                      complexity_map, emit_results, noise_var_for_ebn0,
                      noise_var_uncoded, run_monte_carlo)
from .ldpc import (BitBeliefs, LdpcCode, construct_regular, decode_spa,
                   encode, from_parity_matrix, read_alist, write_alist)
