from enum import Enum

# Validation tolerances
STOCHASTIC_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-12
DETERMINANT_TOLERANCE = 1e-10
MIN_ABS_DETERMINANT = 1e-12
SL_TOLERANCE = 1e-12

# Numerical products
RENORMALIZE_EVERY = 32  # multiplications between rescalings
ZERO_EXPONENT_TOLERANCE = 1e-8
EXTENSION_RESIDUAL_TOLERANCE = 1e-6
QUASICONFORMAL_SLOPE_TOLERANCE = 1e-6
BUNCHING_TOLERANCE = 1e-12  # slack on witness <= theta

# Iterative solvers on conformal structures
KARCHER_TOLERANCE = 1e-12
KARCHER_MAX_ITER = 10_000
ELLIPTIC_TOLERANCE = 1e-12
ELLIPTIC_MAX_ITER = 10_000
ELLIPTIC_POWER_CHECK = 256
ELLIPTIC_DISTORTION_BOUND = 1e6

# Search limits
MAX_TUNING_B = 1_000_000
MAX_SHADOW_CONSTANT = 1e12  # largest admissible constant in the shadowing norm bound
ITERATE_THRESHOLD_SCAN = 10_000
MAX_WINDOW_WORDS = 4096  # cap on exact window-word enumeration
MAX_SUBSPACE_DIMENSION = 6
DEFAULT_PERIODIC_SEARCH = 8
DEFAULT_LOOP_PERIOD = 3
DEFAULT_BUNCHING_GRID = (1, 2, 3, 4)

# Config file format
CONFIG_FORMAT_VERSION = 1
CSV_FLOAT_FORMAT = "%.17g"


class Command(Enum):
    LYAPUNOV = 'lyapunov'
    CERTIFY = 'certify'
    HOLONOMY = 'holonomy'
    EXTEND = 'extend'
    VERIFY = 'verify'
    CONSTRUCT = 'construct'
    SHADOW = 'shadow'
    IRREDUCIBLE = 'irreducible'
    QUASICONFORMAL = 'quasiconformal'

COMMAND_NAMES = [command.value for command in Command]


class BunchingScope(Enum):
    POINT = 'point'      # exact check along one eventually periodic orbit
    UNIFORM = 'uniform'  # maximum mean cycle over the block graph


class ObstructionKind(Enum):
    POSITIVE_EXPONENT = 'PositiveExponent'
    NO_BUNCHING_CERTIFICATE = 'NoBunchingCertificate'
    INCONSISTENT_EXTENSION = 'InconsistentExtension'


class HolonomyKind(Enum):
    STABLE = 'stable'
    UNSTABLE = 'unstable'


class MeasureKind(Enum):
    PARRY = 'parry'
    EXPLICIT = 'explicit'


class ExitCode(Enum):
    SUCCESS = 0
    OBSTRUCTION = 1
    ERROR = 2
