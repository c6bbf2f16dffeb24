"""
settings.py
-----------
metallic-lab: Unified Configuration Authority

Every tunable of the engine lives here:

• directory contract for scenario inputs and provenance reports
• numerical tolerances, grouped by the tier they guard
• sampling defaults and the seed override
• exit codes (the CLI's sentinel contract)
• report / CSV formatting

Modules import this file directly (`import settings`); nothing else holds
configuration.
"""
import os
from pathlib import Path

ENGINE_VERSION = "1.0.0"

# -------------------------------
# DIRECTORY STRUCTURE (I/O Contract)
# -------------------------------
BASE_DIR = Path(os.getcwd())
CONFIG_DIR = BASE_DIR / "input_configs"
PROVENANCE_DIR = BASE_DIR / "provenance_reports"

# Shipped sample scenarios live next to this file, not in the cwd.
PACKAGE_CONFIG_DIR = Path(__file__).resolve().parent / "input_configs"

# -------------------------------
# SAMPLING DEFAULTS
# -------------------------------
SEED_ENV_VAR = "METALLIC_LAB_SEED"
DEFAULT_SEED = int(os.environ.get(SEED_ENV_VAR, "7"))
DEFAULT_SAMPLES = 200
# Extra random directions per sample point when testing angle constancy.
SLANT_DIRECTIONS_PER_SAMPLE = 3
# Sample points used by angle-sweep for each grid value.
SWEEP_POINTS = 5

# -------------------------------
# LINEAR ALGEBRA TOLERANCES
# -------------------------------
RANK_TOL = 1e-10              # relative to the largest input norm
SYMMETRY_TOL = 1e-12
COMPLEMENT_PIVOT_TOL = 1e-6   # minimum residual for a canonical seed vector

# -------------------------------
# STRUCTURE TOLERANCES
# -------------------------------
STRUCTURE_TOL = 1e-10         # verify_structure verdict
STRUCTURE_BUILD_TOL = 1e-12   # invariant check when a StructureOp is built
PRODUCT_TOL = 1e-9            # F^2 = I for product structures

# -------------------------------
# GEOMETRY TOLERANCES
# -------------------------------
NORMAL_FIELD_TOL = 1e-8
IN_DISTRIBUTION_TOL = 1e-9
ORTHOGONALITY_TOL = 1e-9
ANTI_INVARIANT_TOL = 1e-9
ANGLE_TOL = 1e-8              # constancy of theta across samples/directions
RIGHT_ANGLE_SNAP = 1e-8       # theta within this of 0 or pi/2 snaps
LAMBDA_TOL = 1e-8
SPLIT_TOL = 1e-10             # normal_split orthogonality / mu invariance

# -------------------------------
# CHECK TIERS
# -------------------------------
ALGEBRAIC_TOL = 1e-10         # pointwise algebraic identities
CONNECTION_TOL = 1e-8         # identities one jet-composition deep
MEMBERSHIP_TOL = 1e-8         # "in Gamma(D)" claims, relative
MEMBERSHIP_FLOOR = 1e-13      # vectors shorter than this count as zero
PARALLEL_TOL = 1e-10          # hypothesis "(nabla N) = 0" and friends
EQUIVALENCE_TOL = 1e-9        # identity side of an if-and-only-if check
GEODESIC_TOL = 1e-12          # "h vanishes at this sample"
TOTALLY_GEODESIC_TOL = 1e-9   # connection derivatives when h = 0

# -------------------------------
# EXIT CODES (CLI sentinel contract)
# -------------------------------
EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1
EXIT_INPUT_ERROR = 2

# -------------------------------
# REPORT FORMATTING
# -------------------------------
CSV_FLOAT_FORMAT = "%.17g"
REPORT_FORMATS = ("text", "json", "csv")
LOG_FORMAT = "%(asctime)s - [MetallicLab] - %(message)s"

# Report status keys
STATUS_PASS = "pass"
STATUS_FAIL = "fail"
STATUS_SKIPPED = "skipped"
STATUS_NOT_APPLICABLE = "not-applicable"


# -------------------------------
# HELPER: Resolve the provenance path for a scenario fingerprint
# -------------------------------
def provenance_path(fingerprint: str) -> Path:
    return PROVENANCE_DIR / f"provenance_{fingerprint[:16]}.json"
