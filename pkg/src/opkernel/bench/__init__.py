"""Scenario family, blind forward replay under the six conditions, and scoring."""

from .metrics import MetricsReport, format_report, score
from .replay import CONDITIONS, ReplayResult, replay, run_family
from .scenarios import Scenario, build_scenarios
