PROJECT_NAME = "SlideKit"
CLI_NAME = "slidekit"

DEFAULT_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# Exit codes
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

INTERCEPT = "Intercept"

WELDING_FIXTURE = "welding"

# Highest per-factor exponent accepted in RSM monomials
MAX_RSM_DEGREE = 3

# RSM term presets as (parent exponent, slid exponent) pairs
WELDING_TERMS = ((1, 0), (0, 1), (0, 2), (1, 1), (1, 2))
SECOND_ORDER_TERMS = ((1, 0), (0, 1), (2, 0), (0, 2), (1, 1))
EXPANDED_TERMS = SECOND_ORDER_TERMS + ((2, 1), (1, 2), (2, 2))

RSM_TERM_PRESETS = {
    "welding": WELDING_TERMS,
    "second_order": SECOND_ORDER_TERMS,
    "expanded": EXPANDED_TERMS,
}
