"""Seeded experiment runner, bound verifiers and command-line interface."""

from .config import ConfigError, ExperimentConfig, load_config_file, parse_config_text
from .runner import (
    CSV_COLUMNS,
    RunRecord,
    Stat,
    Summary,
    describe,
    read_csv,
    run_experiment,
    run_single,
    summarize,
    write_csv,
)
from .verify import VerifyReport, verify_chi2, verify_claim1, verify_claim2, verify_claim3

__all__ = [
    "CSV_COLUMNS", "ConfigError", "ExperimentConfig", "RunRecord", "Stat", "Summary",
    "VerifyReport", "describe", "load_config_file", "parse_config_text", "read_csv",
    "run_experiment", "run_single", "summarize", "verify_chi2", "verify_claim1",
    "verify_claim2", "verify_claim3", "write_csv",
]
