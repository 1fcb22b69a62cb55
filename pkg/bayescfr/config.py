"""Project-wide configuration constants for the bayescfr toolkit."""

from __future__ import annotations

FORMAT_VERSION_TUPLE = (0, 1, 0)
TABLE_MAGIC = b"BCFRTAB1"
TABLE_HEADER_STRUCT = "<8sBBB32sIII"
NETWORK_MAGIC = b"BCFRNET1"
NETWORK_HEADER_STRUCT = "<8sBBBI"
METADATA_SUFFIX = ".json"
TABLE_SUFFIX = ".ckpt"
NETWORK_SUFFIX = ".net"
METRICS_FILENAME = "metrics.csv"

LOG_ENV_VAR = "BAYES_CFR_LOG"
DEFAULT_LOG_LEVEL = "error"

# Exact posterior sums are used up to this many types; sampling above it.
EXACT_SUM_TYPE_LIMIT = 8
# Brute-force deviation enumeration is refused above this many pure strategies.
BRUTE_FORCE_LIMIT = 1 << 16

DEFAULT_KERNEL_WIDTH = 1.0
DEFAULT_TYPE_KERNEL_WIDTH = 0.5
DEFAULT_REFERENCES_PER_TYPE = 2000
DEFAULT_OBSERVATION_WINDOW = 500

DEFAULT_HIDDEN_LAYERS = (64, 64)
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_BATCH_SIZE = 512
DEFAULT_TRAINING_STEPS = 200
DEFAULT_MEMORY_CAPACITY = 1 << 15
GRADIENT_CLIP_NORM = 10.0

BASELINE_ALGORITHMS = ("cfr", "cfr+", "mccfr-ext")
BAYESIAN_ALGORITHMS = ("bcfr", "bcfr+", "deep-bcfr", "bcfr-no-posterior")
ALGORITHMS = BASELINE_ALGORITHMS + BAYESIAN_ALGORITHMS + ("cig",)

GAMES = ("kuhn", "leduc")
PURE_TYPE_MODELS = ("pure-n", "pure-c", "pure-a")
MIXED_TYPE_MODELS = tuple(f"mixed-{index}" for index in range(1, 10))
TYPE_MODELS = PURE_TYPE_MODELS + MIXED_TYPE_MODELS

# Mixture weights in percent, ordered (Normal, Conservative, Aggressive).
MIXTURE_PERCENTAGES = {
    "mixed-1": (10, 80, 10),
    "mixed-2": (20, 60, 20),
    "mixed-3": (30, 40, 30),
    "mixed-4": (80, 10, 10),
    "mixed-5": (60, 20, 20),
    "mixed-6": (40, 30, 30),
    "mixed-7": (10, 10, 80),
    "mixed-8": (20, 20, 60),
    "mixed-9": (30, 30, 40),
}

GRID_LAYOUTS = {
    "table1": {
        "algorithms": ("bcfr", "bcfr+", "deep-bcfr", "cfr", "cfr+", "mccfr-ext"),
        "type_models": PURE_TYPE_MODELS + ("mixed-1", "mixed-2", "mixed-3"),
    },
    "table2": {
        "algorithms": ("cig", "bcfr", "bcfr-no-posterior", "cfr"),
        "type_models": TYPE_MODELS,
    },
}


def algorithm_is_baseline(name: str) -> bool:
    """Return ``True`` when *name* solves the type-collapsed game."""

    return name in BASELINE_ALGORITHMS
