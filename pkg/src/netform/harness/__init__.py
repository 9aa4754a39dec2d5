"""Scenario-driven refinement studies and the command line front end."""
from .scenario import Scenario, ScenarioError, load_scenario, scenario_from_dict
from .studies import (StudyResult, gamma_recovery_check, minimizer_convergence_study,
                      refinement_study, weak_strong_check)
