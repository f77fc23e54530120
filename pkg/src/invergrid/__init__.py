"""Quasi-static simulation of heterogeneous smart-inverter modes on a radial LV feeder."""

from .inverter import (Aggregator, ConstantPowerFactor, InverterUnit, VoltVarCurve, VoltWattCurve,
                       aggregate_injection, step_unit)
from .network import NetworkModel, build_cigre_lv_residential, to_inductive_variant, validate
from .powerflow import ComplexPower, SolverOptions, VoltagePhasor, solve
from .scenario import (ScenarioSpec, ScenarioTimeline, Variant, default_timeline, experiment_matrix,
                       run, run_matrix, summarize_window)

__version__ = "0.1.0"
