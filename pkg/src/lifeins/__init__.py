"""Optimal life insurance and annuity demand under loaded pricing."""

from .loads import LoadSchedule, annuity_epv, implied_load_by_age, insurance_epv, solve_kappa_ann, solve_kappa_ins
from .mortality import GompertzParams, calibrate
from .preferences import Preferences
from .scenario import ScenarioConfig, preset, solve
from .solver import Model, SolverConfig, backward_induction, forward_simulate, participation_report

__version__ = "0.1.0"
