"""Energy-efficiency resource allocation simulator for semi-grant-free NOMA uplinks."""

from ._sgnoma import (  # noqa: F401
    AllocationState,
    ChannelRealization,
    ExperimentSpec,
    NetworkConfig,
    ScenarioParams,
    bandwidth_of,
    build_network,
    check_constraints,
    db_to_linear,
    dbm_to_watt,
    dinkelbach_allocate,
    ee_factor,
    generate_channels,
    inverse_q,
    load_config,
    noise_power,
    rate_embb,
    rate_mmtc,
    rate_urllc,
    run_experiment,
    run_training,
    sinr_chain,
    target_snr,
)

__all__ = [
    "AllocationState",
    "ChannelRealization",
    "ExperimentSpec",
    "NetworkConfig",
    "ScenarioParams",
    "bandwidth_of",
    "build_network",
    "check_constraints",
    "db_to_linear",
    "dbm_to_watt",
    "dinkelbach_allocate",
    "ee_factor",
    "generate_channels",
    "inverse_q",
    "load_config",
    "noise_power",
    "rate_embb",
    "rate_mmtc",
    "rate_urllc",
    "run_experiment",
    "run_training",
    "sinr_chain",
    "target_snr",
]
