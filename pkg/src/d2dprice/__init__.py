"""Distributed, price-based resource allocation for D2D pairs underlaying an
uplink cellular network: instance generation, the pricing game, QoS-driven
price updates, comparison baselines, brute-force oracles and a sweep harness.
"""
from .baselines import (ALGORITHMS, get_algorithm, run_3step, run_densecell, run_scheme1,
                        run_scheme2)
from .dsera import DseraConfig, RunOutcome, run_dsera, run_scheme3
from .game import PriceVector, closed_form_power, game_sweep, utility
from .harness import ExperimentSpec, RunReport, average_rate, emit_plot_data, run_experiment
from .model import Allocation, NotAdmittedError, qos_satisfied, sum_rate
from .netgen import GenParams, NetworkInstance, generate
from .pricing import PricingParams, step_update, whole_update

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "Allocation", "DseraConfig", "ExperimentSpec", "GenParams", "NetworkInstance",
    "NotAdmittedError", "PriceVector", "PricingParams", "RunOutcome", "RunReport",
    "average_rate", "closed_form_power", "emit_plot_data", "game_sweep", "generate",
    "get_algorithm", "qos_satisfied", "run_3step", "run_densecell", "run_dsera",
    "run_experiment", "run_scheme1", "run_scheme2", "run_scheme3", "step_update", "sum_rate",
    "utility", "whole_update",
]
