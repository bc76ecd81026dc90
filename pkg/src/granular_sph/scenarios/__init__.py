"""Scenario configuration, validation runs, benchmarks and output files."""
from .config import ScenarioConfig, load_config, parse_config
from .io import read_snapshot, write_reports, write_snapshot
from .metrics import compute_slip, empirical_depth, fit_cratering_slope, measure_rtf
from .runner import RunReport, bench_matrix, run_scenario

__all__ = [
    "RunReport", "ScenarioConfig", "bench_matrix", "compute_slip", "empirical_depth",
    "fit_cratering_slope", "load_config", "measure_rtf", "parse_config", "read_snapshot",
    "run_scenario", "write_reports", "write_snapshot",
]
