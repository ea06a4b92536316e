"""Propagation of stochastic and deterministic power injections to bus and
centre-of-inertia frequencies, with CLT diagnostics."""

__version__ = "0.1.0"

from .aggregation import SubnetSpec, aggregation_experiment
from .coi import CoIWeights, build_divider, coi_estimate, coi_estimate_simplified, coi_weights, weights_for
from .diagnostics import StatsReport, WeightedSource, dominance_analysis, lindeberg_ratio, normality_report
from .dynsim import Event, Trajectory, compare_estimators, parse_event, simulate
from .errors import FreqFluxError, InputError, NumericalError, SingularMatrix
from .netmodel import Branch, Bus, Machine, Network, ieee14, load_case
from .powerflow import OperatingPoint, solve_power_flow
from .sensitivity import SensitivitySet, bus_frequencies, sensitivities_at, simplified_at
from .stochastic import NoiseModel, Scenario, load_scenario, monte_carlo, propagation_map

__all__ = [
    "Branch", "Bus", "CoIWeights", "Event", "FreqFluxError", "InputError", "Machine", "Network",
    "NoiseModel", "NumericalError", "OperatingPoint", "Scenario", "SensitivitySet", "SingularMatrix",
    "StatsReport", "SubnetSpec", "Trajectory", "WeightedSource", "aggregation_experiment",
    "build_divider", "bus_frequencies", "coi_estimate", "coi_estimate_simplified", "coi_weights",
    "compare_estimators", "dominance_analysis", "ieee14", "lindeberg_ratio", "load_case",
    "load_scenario", "monte_carlo", "normality_report", "parse_event", "propagation_map",
    "sensitivities_at", "simplified_at", "simulate", "solve_power_flow", "weights_for",
]
