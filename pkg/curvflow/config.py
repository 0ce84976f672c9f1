import os
from pathlib import Path
from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parents[1]
load_dotenv(BASE_DIR / ".env")

# Load environment variables from a .env file if present (for development)
load_dotenv(override=True)


def _get_env_int(name: str, default: int | None = None) -> int | None:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw.strip())
    except ValueError:
        raise RuntimeError(f"{name} environment variable must be an integer, got {raw!r}.")
    if value < 1:
        raise RuntimeError(f"{name} environment variable must be positive, got {value}.")
    return value


# --- Runtime ---
# Worker cap for `validate` (default: all cores)
THREADS = _get_env_int("CURVFLOW_THREADS", default=os.cpu_count() or 1)

LOG_LEVEL = os.getenv("CURVFLOW_LOG_LEVEL", "WARNING").upper()

# Artifacts land under OUTPUT_DIR unless a config names its own output_dir
OUTPUT_DIR = Path(os.getenv("CURVFLOW_OUTPUT_DIR", "output"))
DATA_DIR = Path(os.getenv("CURVFLOW_DATA_DIR", str(BASE_DIR / "data")))
CONFIGS_DIR = DATA_DIR / "configs"

# --- Flow policy ---
DEFAULT_DT_SAFETY = 0.2
# dt below this fraction of the time scale is a numerical failure
DT_UNDERFLOW_RATIO = 1e-12
# min rho above BLOWUP_FACTOR * (initial max rho) declares blow-up
BLOWUP_FACTOR = 1e3
# T* regression window, in units of initial max rho
BLOWUP_FIT_WINDOW = (10.0, 1e3)
HISTORY_MAX_ROWS = 10_000
# min Q(0) >= PRESCALE_MARGIN * eta before the sigma_k normalized flow
PRESCALE_MARGIN = 1.05
DEFAULT_MAX_STEPS = 200_000

# --- Geometry ---
# Chunk size for the brute-force support maximization
SUPPORT_MAX_CHUNK = 512

# --- Curvature audit ---
AUDIT_HOMOGENEITY_TOL = 1e-10
AUDIT_CONCAVITY_SLACK = 1e-8
AUDIT_MIN_SAMPLES = 100
AUDIT_DEFAULT_SAMPLES = 400

# --- Minkowski solver ---
DEFAULT_SOLVE_RESIDUAL_TOL = 1e-3
RESIDUAL_CHECK_STRIDE = 10
