from enum import Enum

#####################
# NUMERIC TOLERANCES #
#####################

CONSTRUCTION_TOL = 1e-12  # probability vectors on construction
ARITHMETIC_TOL = 1e-10  # probability vectors after arithmetic
CERTIFICATE_TOL = 1e-9  # LP duality and gap witnesses
TIE_TOL = 1e-12  # actions within this of the best Q-value count as ties, lowest index wins
PIVOT_TOL = 1e-12  # simplex pivot threshold, relative to the magnitude of the row or column
RECOMMENDATION_TOL = ARITHMETIC_TOL  # policies with device marginal at or below this are not recommended

###################
# DYNAMIC PROGRAM #
###################

VALUE_ITERATION_SPAN = 1e-10
VALUE_ITERATION_MAX_SWEEPS = 100_000
DISCOUNT_TRUNCATION = 1e-8  # default S_eff is chosen so that gamma ** S_eff < DISCOUNT_TRUNCATION

##########
# REGRET #
##########

POWER_ITERATION_TOL = 1e-10
POWER_ITERATION_MAX_STEPS = 100_000
DEVICE_ATOM_CUTOFF = 1e-15  # compressed weights at or below this are dropped from the device
SIMPLEX_REFACTORIZATIONS = 8  # tableau rebuilds from the original constraints before the solver gives up
CCE_COMPRESS_EVERY = 1
CE_COMPRESS_EVERY = 10

######################
# BLACK-BOX SEARCH   #
######################

SEARCH_POPULATION = 64
SEARCH_ELITE_FRACTION = 0.125
SEARCH_ITERATIONS = 200
SEARCH_TOLERANCE = 1e-6
SEARCH_MIN_ALPHA = 1e-2  # smallest Dirichlet concentration per coordinate
SEARCH_MAX_CONCENTRATION = 1e14
SEARCH_SMOOTHING = 0.7  # weight of the refitted Dirichlet against the previous one
WARM_START_MASS = 1e-3

#########
# GAMES #
#########

CROWD_MOVE_COST = 0.1
CROWD_ACTIONS = ("left", "stay", "right")
RPS_ACTIONS = ("A", "B", "C")

###########
# METRICS #
###########

DIFF_AFFINE_TRIALS = 1000
DIFF_AFFINE_TOL = 1e-8
MONOTONICITY_PAIRS = 500
MONOTONICITY_TOL = 1e-10

########
# PSRO #
########

RHO_TOL = 1e-2
RHO_LIM = 1e-6  # each halving below rho_tol costs up to one more regret loop of t_max steps
PSRO_MAX_ITERATIONS = 50
REGRET_T_MAX = 5000

###########
# HARNESS #
###########

CURVE_COLUMNS = ["iteration", "wall_time_s", "gap", "algorithm", "seed"]
COMPRESSION_COLUMNS = ["step", "uniform_gap", "compressed_gap", "sparsity"]
SUMMARY_COLUMNS = ["algorithm", "final_gap", "iterations", "wall_time_s"]
OMD_LEARNING_RATES = (0.01, 0.1, 1.0)


class ConfigurationError(ValueError):
    """Raised when a game, policy or experiment configuration is inconsistent."""


class HorizonMode(str, Enum):
    """Horizon modes a game can be played in."""

    FINITE = "finite"
    DISCOUNTED = "discounted"


class GapKind(str, Enum):
    """Kinds of equilibrium gaps reported by the metrics package."""

    NASH = "nash"
    CCE = "cce"
    CE = "ce"
