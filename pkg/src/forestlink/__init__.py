"""Body-to-UAV LoRa channel toolkit for forested terrain.

Fits log-distance air-ground path-loss models with an altitude term from
measured signal logs, decomposes losses into mean / shadow / small-scale
components, fits fading distributions, and runs Monte Carlo link simulations
predicting RSSI, SNR, packet delivery, and radio range.
"""

from .antenna import (
    AngularSamples,
    DEFAULT_TX_POLARIZATION,
    EffectiveLinkTerms,
    ccdf_guaranteed_value,
    effective_link_terms,
    polarization_loss,
)
from .campaign import (
    DegenerateFitError,
    FitResult,
    LogFormatError,
    PathLossSamples,
    PLSample,
    RawLogRecord,
    compare_models,
    decompose_path_loss,
    fit_path_loss_model,
    path_loss_from_signal,
    read_log,
    rse_table,
    rse_value,
    samples_from_records,
    separate_small_scale,
)
from .channel import (
    CorrectionInputs,
    LinkGeometry,
    PathLossModel,
    RadioConfig,
    builtin_models,
    corrected_mean_path_loss,
    corrective_factor,
    find_model,
    instantaneous_path_loss,
    load_models,
    mean_path_loss,
    mean_path_loss_array,
)
from .fading import (
    DegenerateDataError,
    FadeDepthReport,
    FadingFit,
    Family,
    best_fit,
    empirical_cdf,
    fade_depth,
    fit_family,
    is_worse_than_rayleigh,
    log_likelihood,
    quantile_nearest_rank,
    sample_envelope,
)
from .geometry import compose_d3d, haversine_distance_m
from .simulate import (
    MissionSpec,
    SimTrace,
    SweepResult,
    packet_delivery_ratio,
    pdr_by_distance,
    radio_range,
    sweep_heights,
    synthesize_trace,
    write_trace_csv,
)

__version__ = "0.1.0"
