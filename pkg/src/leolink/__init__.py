"""Link-level Monte Carlo simulator for uplink massive-MIMO LEO channels."""

from .airlink import (
    Constellation,
    FrameLayout,
    FrameSignals,
    FrameTiming,
    build_frame,
    build_pilot_matrix,
    calibrate_sigma2,
    map_symbols,
    symbol_times,
    synthesize_rx,
    zadoff_chu,
)
from .channel import (
    ArrayConfig,
    ChannelState,
    FadingState,
    ScenarioConfig,
    ScenarioError,
    UserGeometry,
    array_response,
    channel_matrix,
    path_loss_db,
    reference_channel,
    sample_scenario,
    scalar_channel,
    slant_range_m,
    upa_axis_vector,
)
from .estimators import (
    ChannelEstimate,
    DetectionResult,
    average_and_tile,
    ddsb_estimate,
    detect,
    genie_detect,
    mddsb_run,
    pbound_estimate,
    pls_estimate,
    zf_equalize,
)
from .harness import (
    CampaignError,
    ConfigError,
    SystemConfig,
    TrialResult,
    parse_config,
    parse_config_text,
    run_campaign,
    run_trial,
    trial_rng,
    write_csv,
)
from .metrics import MetricRecord, empirical_snr, nmse, ser
from .numerics import (
    DegenerateDivisorError,
    RankDeficiencyError,
    ShapeError,
    hadamard_div,
    hadamard_mul,
    kronecker,
    matmul,
    right_pinv,
)

__version__ = "0.1.0"
