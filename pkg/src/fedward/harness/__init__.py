from .config import ConfigError, DatasetConfig, ExperimentConfig, load_config
from .experiment import RoundReport, RunSummary, compute_aer, run_experiment, write_reports
from .sweep import SWEEP_COLUMNS, make_grid, rows_to_csv, sweep
