"""
Configuration constants for the GUR mixedness witness.

Every tolerance, default and output setting used across the package lives here
so that the algebra, state, uncertainty and detection modules agree on one set
of numbers.
"""

import os
from pathlib import Path

# =============================================================================
# CONFIGURATION
# =============================================================================

# Base directory of the project
BASE_DIR = Path(__file__).resolve().parent.parent

# Default destination for concordance reports and grid dumps.
# Created by the writers on demand, never at import time.
OUTPUT_DIR = BASE_DIR / "output"

# Status lines go to stderr; GUR_VERBOSE=0 silences them
VERBOSE = os.getenv("GUR_VERBOSE", "1") != "0"

# Qubit, qutrit, qubit pair, qutrit pair
ALLOWED_DIMS = (2, 3, 4, 9)

# =============================================================================
# NUMERICAL TOLERANCES
# =============================================================================

HERMITIAN_TOL = 1e-12
ALGEBRA_TOL = 1e-12
UNITARY_TOL = 1e-10
POSITIVITY_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-10
PURITY_TOL = 1e-10
MEMBERSHIP_TOL = 1e-10
EXPECTATION_IMAG_TOL = 1e-10
VARIANCE_FLOOR = -1e-12

# Coefficients below this magnitude do not count as a required expectation
COEFFICIENT_TOL = 1e-10

# =============================================================================
# DETECTION DEFAULTS
# =============================================================================

DEFAULT_EPSILON = 1e-7
DEFAULT_FIXED_A = 3
DEFAULT_PAIR_SEQUENCE = ((7, 6), (5, 4), (1, 2))

# Angular neighbourhood around degenerate two-qutrit settings (A proportional to B)
DEGENERATE_ANGLE_GAP = 1e-3

# =============================================================================
# OPTIMIZER DEFAULTS
# =============================================================================

DEFAULT_GRID = 16
MIN_GRID = 8
DEFAULT_REFINE_ROUNDS = 2
GOLDEN_TOL = 1e-10
BISECTION_TOL = 1e-10
BISECTION_MAX_ITER = 200

# Blind-spot bisection runs the settings optimizer at every step
BLIND_SPOT_GRID = 8

# =============================================================================
# CONCORDANCE
# =============================================================================

EXACT_MATCH_TOL = 1e-9
RATIO_SPREAD_TOL = 1e-6
RATIO_FLOOR = 1e-8
CONCORDANCE_SEED = 20240617
CONCORDANCE_OPT_GRID = 8
DEFAULT_CONCORDANCE_GRID = 24

# =============================================================================
# OUTPUT
# =============================================================================

FLOAT_DIGITS = 17
