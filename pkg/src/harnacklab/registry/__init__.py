"""Inequality checks, their configuration and the campaign runner."""

from .campaign import (
    Campaign,
    ConfigError,
    default_config_path,
    load_campaign,
    parse_campaign,
    refinement_campaign,
    reports_csv,
    reports_json,
    run_campaign,
    write_reports,
)
from .checks import CHECKS
from .core import CheckConfig, CheckReport, refinement_study, reevaluate, run_check

__all__ = [
    "CHECKS",
    "Campaign",
    "CheckConfig",
    "CheckReport",
    "ConfigError",
    "default_config_path",
    "load_campaign",
    "parse_campaign",
    "reevaluate",
    "refinement_campaign",
    "refinement_study",
    "reports_csv",
    "reports_json",
    "run_campaign",
    "run_check",
    "write_reports",
]
