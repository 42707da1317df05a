from .classes import Exponent, ExpTerm, DichotomyKind, KernelSide, VectorNorm, SweepAxis, OutputFormat
from .numerics import NumericSettings, NUMERICS
from .grid_function import GridFunction
from .exponents_norms import ConjugateTriple, ExpKernel, conjugateExponent, lpNorm, convolve, youngCheck
from .linear_evolution import (
    LinearSystem,
    DichotomySpec,
    jordanDecompose,
    evolutionOperator,
    spectralProjection,
    fitDichotomy,
    verifyDichotomy,
)
from .hus_bounds import upperHusConstant, corollary2dConstant, lowerBound, lowerBoundSweep, constantGap
from .shadowing import SemilinearProblem, PseudoSolution, picardSolve, uniquenessCheck
from .scenarios import ScenarioReport, runScenario
from .config import RunConfig, loadConfig
from .errors import HusError

__all__ = [
    "Exponent",
    "ExpTerm",
    "DichotomyKind",
    "KernelSide",
    "VectorNorm",
    "SweepAxis",
    "OutputFormat",
    "NumericSettings",
    "NUMERICS",
    "GridFunction",
    "ConjugateTriple",
    "ExpKernel",
    "conjugateExponent",
    "lpNorm",
    "convolve",
    "youngCheck",
    "LinearSystem",
    "DichotomySpec",
    "jordanDecompose",
    "evolutionOperator",
    "spectralProjection",
    "fitDichotomy",
    "verifyDichotomy",
    "upperHusConstant",
    "corollary2dConstant",
    "lowerBound",
    "lowerBoundSweep",
    "constantGap",
    "SemilinearProblem",
    "PseudoSolution",
    "picardSolve",
    "uniquenessCheck",
    "ScenarioReport",
    "runScenario",
    "RunConfig",
    "loadConfig",
    "HusError",
]
