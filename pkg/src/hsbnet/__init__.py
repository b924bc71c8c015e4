"""Resource management for hybrid semantic/bit communication networks.

Queue models for semantic and conventional links, per-link bandwidth
thresholds, a dual-decomposition association and mode solver, per-BS
bandwidth allocation, baseline schemes and experiment drivers.
"""
from .b2m import B2MSurrogateParams, Mode, bitcom_rate, link_rate, semantic_rate
from .ba_solver import BAUser, solve_ba_for_bs
from .dual_solver import Assignment, DualState, solve_ua_ms
from .experiments import audit, rate_cdf, run, sweep, validate_queue
from .queueing import LinkParams, link_metrics, link_model, scq_delay
from .scenario import (NetworkScenario, ScenarioConfig, generate_scenario, load_config,
                       validate_config)
from .thresholds import ThresholdTable, all_thresholds, link_thresholds

__version__ = "0.1.0"
