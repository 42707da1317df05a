VERSION: str = "v1.2"

# Exit codes of the cli, also stored on the exception classes in errors.py
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_CERTIFICATE = 4
EXIT_NO_CONVERGENCE = 5

SCENARIO_NAMES = [
    "sine",
    "sharpness",
    "pq_counterexample",
    "2d_minimal",
    "unbounded_residual",
]

# Keys of the certificate JSON record, in the order they are documented
CERTIFICATE_KEYS = [
    "p",
    "q",
    "r",
    "epsilon",
    "L",
    "deviation",
    "kappa",
    "iterations",
    "residual_check",
    "converged",
]

GAP_REPORT_KEYS = [
    "upper",
    "lower",
    "ratio",
    "argmax_u",
    "argmax_gamma",
    "delta_star",
]

