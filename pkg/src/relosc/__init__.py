"""Periodic solutions of relativistic oscillators: discrete action minimization,
hypothesis checks, multiplicity detection and certification."""

__version__ = "0.1.0"

from .model import PRESETS, ProblemInstance, preset
from .path import PeriodicPath, path_distance, project_feasible, random_feasible
from .functional import eval_energy, gradient, total_energy
from .optimizer import MinimizeOptions, Minimum, cluster_minima, minimize, multistart
from .hypotheses import check_all
from .multiplicity import (ScanOptions, detect_unbounded, find_two_minima, lambda_scan,
                           theorem32_driver)
from .verify import certify, el_residual, shoot, solve_by_shooting

__all__ = ["PRESETS", "ProblemInstance", "preset", "PeriodicPath", "path_distance",
           "project_feasible", "random_feasible", "eval_energy", "gradient", "total_energy",
           "MinimizeOptions", "Minimum", "cluster_minima", "minimize", "multistart",
           "check_all", "ScanOptions", "detect_unbounded", "find_two_minima", "lambda_scan",
           "theorem32_driver", "certify", "el_residual", "shoot", "solve_by_shooting"]
