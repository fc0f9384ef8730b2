"""Python access to the v2vkey core: channel traces, turbo reconciliation and sessions."""

from ._core import (
    ConfigError,
    IoError,
    bmr,
    channel_trace,
    dump_config,
    entropy_per_bit,
    max_doppler,
    mismatch_prob,
    reconcile_block,
    run_session,
    secret_bit_rate,
    simulate_csv,
)

__all__ = [
    "ConfigError",
    "IoError",
    "bmr",
    "channel_trace",
    "dump_config",
    "entropy_per_bit",
    "max_doppler",
    "mismatch_prob",
    "reconcile_block",
    "run_session",
    "secret_bit_rate",
    "simulate_csv",
]
