import math

DEFAULT_SEED: int = 42  # seed of every randomized check and initial condition
DEFAULT_LENGTH: float = 2 * math.pi  # period of each grid axis when spacings are not given
MIN_GRID_SIZE: int = 4  # minimum number of nodes per axis
BAND_FRACTION: int = 6  # random fields keep wavenumbers |m| <= size // BAND_FRACTION (lowest third of the modes)
DENSITY_THRESHOLD: float = 1e-8  # smallest admissible value of the scalar density *rho

NEWTON_TOL: float = 1e-12  # implicit solver tolerance, relative to the state max-norm
NEWTON_MAX_ITER: int = 50  # fixed-point iterations before falling back to Newton-Krylov

FLUID_GAMMA: float = 1.4  # adiabatic index of the default isentropic ideal gas
FLUID_GAS_CONSTANT: float = 1.0  # K_g of the default internal energy

EXACT_TOL: float = 1e-13  # relative tolerance of identities exact up to rounding
ADJOINT_TOL: float = 1e-12  # relative tolerance of summation-by-parts identities
COMPOSITION_TOL: float = 1e-10  # tolerance of the fluid composition and adjointness identities
EFFORT_TOL: float = 1e-6  # gap between efforts and central-difference functional derivatives
EFFORT_STEP: float = 1e-5  # step of the central-difference functional derivatives
CONVERGENCE_ORDER: float = 1.9  # minimal observed order of the convergent (non exact) identities

TRACE_HEADER = ("t", "H", "conserved", "drift")
TRACE_FILE: str = "energy.csv"  # energy trace written by every simulation
SNAPSHOT_PATTERN: str = "{step:06d}_{field}.json"  # file name of a single form snapshot
OUTPUT_ENV: str = "SDLAB_OUT"  # environment variable with the default output directory
DEFAULT_OUTPUT: str = "sdlab-out"

PAYLOAD_SNIPPET_SIZE: int = 100  # size of the string defining a snippet of a check item payload
DEFAULT_JOBS: int = 1  # checks evaluated concurrently by the check pipeline

CHECK_SUITES = ("dec", "dirac", "reduction", "fluid", "systems")
TELEGRAPHER_DRIFT_TOL: float = 1e-10  # relative energy drift of 1000 midpoint steps of the telegrapher line
MAXWELL_DRIFT_TOL: float = 1e-9  # relative energy drift of 200 midpoint steps of the Maxwell system
PHASE_VELOCITY_TOL: float = 0.02  # relative error of the estimated telegrapher wave speed
RK4_DECAY_FACTOR: float = 0.9048375  # one RK4 step of x' = -x with dt = 0.1
