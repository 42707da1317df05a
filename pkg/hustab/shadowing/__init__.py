from .problem import SemilinearProblem, PseudoSolution, residual, sineNonlinearity
from .operators import ShadowingOperator, applyT1, applyT2, contractionRatio
from .solver import HusCertificate, picardSolve, uniquenessCheck

__all__ = [
    "SemilinearProblem",
    "PseudoSolution",
    "residual",
    "sineNonlinearity",
    "ShadowingOperator",
    "applyT1",
    "applyT2",
    "contractionRatio",
    "HusCertificate",
    "picardSolve",
    "uniquenessCheck",
]
