from __future__ import annotations
from typing import List, Optional, Tuple
import logging

import numpy as np
from scipy.integrate import solve_ivp
from tqdm import tqdm

from ..classes import DichotomyKind, DerivativeSource, JsonDict
from ..errors import CertificateFailure, NoConvergence, NotExpansion, SmallnessViolation
from ..exponents_norms import GAUSS_THETA, GAUSS_WEIGHTS, ConjugateTriple, lpNorm
from ..grid_function import GridFunction, pointNorms
from ..hus_bounds import UpperConstantQuery, upperHusConstant
from ..numerics import NumericSettings, NUMERICS
from .operators import ShadowingOperator
from .problem import PseudoSolution, SemilinearProblem

logger = logging.getLogger(__name__)


class HusCertificate():
    """
    Outcome of a shadowing run: x = y + z solves the problem and ‖x − y‖_{L^p} ≤ Lε
    """
    def __init__(
        self,
        triple: ConjugateTriple,
        epsilon: float,
        epsilonMeasured: float,
        L: float,
        deviation: float,
        kappa: float,
        iterations: int,
        finalUpdate: float,
        residualCheck: float,
        converged: bool,
        trace: List[float],
        derivativeSource: Optional[DerivativeSource],
    ):
        self.triple = triple
        self.epsilon = epsilon
        self.epsilonMeasured = epsilonMeasured
        self.L = L
        self.deviation = deviation
        self.kappa = kappa
        self.iterations = iterations
        self.finalUpdate = finalUpdate
        self.residualCheck = residualCheck
        self.converged = converged
        self.trace = trace
        self.derivativeSource = derivativeSource

    def __repr__(self) -> str:
        return (
            f"HusCertificate({self.triple}, ε: {self.epsilon:.6g}, L: {self.L:.6g}, "
            f"deviation: {self.deviation:.6g}, iterations: {self.iterations})"
        )

    @property
    def ratio(self) -> float:
        """
        deviation / ε, the constant this run actually needed
        """
        if self.epsilon == 0:
            return 0.0
        return self.deviation / self.epsilon

    @property
    def updateRatios(self) -> List[float]:
        return [b / a for a, b in zip(self.trace, self.trace[1:]) if a > 0]

    def toJson(self) -> JsonDict:
        return {
            "p": self.triple.p.toJson(),
            "q": self.triple.q.toJson(),
            "r": self.triple.r.toJson(),
            "epsilon": self.epsilon,
            "epsilon_measured": self.epsilonMeasured,
            "L": self.L,
            "deviation": self.deviation,
            "ratio": self.ratio,
            "kappa": self.kappa,
            "iterations": self.iterations,
            "final_update": self.finalUpdate,
            "residual_check": self.residualCheck,
            "converged": self.converged,
            "trace": self.trace,
            "derivative_source": None if self.derivativeSource is None else self.derivativeSource.value,
        }


def odeDefect(operator: ShadowingOperator, z: GridFunction) -> float:
    """
    How far z is from solving z' = A(t)z + g_z, relative to the size of the right side:
    max over intervals of |z(t_{k+1}) − z(t_k) − ∫ (Az + g_z)| / h_k
    """
    prob = operator.prob
    matrices = prob.linear.matricesAt(z.grid)
    g = operator.integrand(z)
    rhs = GridFunction(z.grid, np.einsum("kab,kb->ka", matrices, z.values) + g.values)
    integrals = np.einsum("j,kjd->kd", GAUSS_WEIGHTS, rhs.sampleIntervals(GAUSS_THETA, operator.settings))
    defect = np.diff(z.values, axis=0) / z.steps[:, None] - integrals
    scale = max(1.0, float(pointNorms(rhs.values, operator.settings.POINT_NORM).max()))
    return float(pointNorms(defect, operator.settings.POINT_NORM).max()) / scale

def picardSolve(
    pseudo: PseudoSolution,
    prob: SemilinearProblem,
    triple: ConjugateTriple,
    tol: Optional[float] = None,
    settings: NumericSettings = NUMERICS,
) -> Tuple[GridFunction, HusCertificate]:
    """
    Iterates z_{k+1} = T1 z_k + T2 z_k from z_0 = 0 until the update is below
    tol·(1 − κ)/κ (one iteration when κ = 0), then certifies x = y + z:
    the integral form of the ODE holds within ODE_CHECK_FACTOR·QUADRATURE_TOL
    and ‖x − y‖_{L^p} ≤ Lε + CERTIFICATION_TOL.

    ε is the declared bound of the pseudosolution when it covers the measured
    residual norm, the measured norm otherwise.

    Raises SmallnessViolation, NoConvergence, or CertificateFailure.
    """
    tol = settings.PICARD_TOL if tol is None else tol
    spec = prob.dichotomy
    kappa = prob.kappa
    if kappa >= 1:
        raise SmallnessViolation(f"κ = {kappa:g} ≥ 1: the shadowing operator is not a contraction")
    L = upperHusConstant(UpperConstantQuery(spec, prob.c, triple))

    operator = ShadowingOperator(prob, pseudo, settings)
    measured = lpNorm(operator.w, triple.q, settings)
    epsilon = measured
    if pseudo.epsilon is not None:
        if pseudo.epsilon + settings.CERTIFICATION_TOL < measured:
            raise CertificateFailure(
                f"The declared ε = {pseudo.epsilon:.6g} is below the measured residual norm {measured:.6g}"
            )
        epsilon = pseudo.epsilon
    if pseudo.y.derivativeSource == DerivativeSource.FINITE_DIFFERENCE:
        logger.warning("The pseudosolution derivative comes from finite differences")

    threshold = tol * (1 - kappa) / kappa if kappa > 0 else np.inf
    z = GridFunction.zeros(pseudo.y.grid, prob.dimension)
    trace: List[float] = []
    converged = False
    for iteration in tqdm(
        range(1, settings.PICARD_MAX_ITER + 1),
        desc="Picard iteration: ",
        unit="iteration",
        disable=not settings.SHOW_PROGRESS,
    ):
        update = operator.apply(z)
        step = lpNorm(update - z, triple.p, settings)
        trace.append(step)
        z = update
        logger.debug("Iteration %d: update %.3e", iteration, step)
        if step <= threshold:
            converged = True
            break
    if not converged:
        raise NoConvergence(
            f"No convergence after {settings.PICARD_MAX_ITER} iterations "
            f"(last update {trace[-1]:.3e}, threshold {threshold:.3e})"
        )

    residualCheck = odeDefect(operator, z)
    if residualCheck > settings.ODE_CHECK_FACTOR * settings.QUADRATURE_TOL:
        raise CertificateFailure(
            f"x does not solve the equation within tolerance (defect {residualCheck:.3e})"
        )
    deviation = lpNorm(z, triple.p, settings)
    certificate = HusCertificate(
        triple=triple,
        epsilon=epsilon,
        epsilonMeasured=measured,
        L=L,
        deviation=deviation,
        kappa=kappa,
        iterations=len(trace),
        finalUpdate=trace[-1],
        residualCheck=residualCheck,
        converged=True,
        trace=trace,
        derivativeSource=pseudo.y.derivativeSource,
    )
    if deviation > L * epsilon + settings.CERTIFICATION_TOL:
        raise CertificateFailure(
            f"Deviation {deviation:.9g} exceeds L·ε = {L * epsilon:.9g}"
        )
    logger.info("Certified %s", certificate)
    return pseudo.y + z, certificate


def uniquenessCheck(
    prob: SemilinearProblem,
    pseudo: PseudoSolution,
    x: GridFunction,
    triple: ConjugateTriple,
    deviation: Optional[float] = None,
    perturbation: float = 0.1,
    horizon: float = 10.0,
    settings: NumericSettings = NUMERICS,
) -> bool:
    """
    For expansions, a solution starting away from x(0) cannot stay close to y.

    Checks that ‖x̃ − y‖_{L^p([0, horizon])} exceeds ten times the certified deviation,
    for x̃(0) = x(0) + perturbation·e_1, both from the growth bound
    |x̃(t) − x(t)| ≥ e^{(λ − cD)t}|x̃(0) − x(0)|/D and by integrating x̃.
    A zero perturbation is trivially consistent.
    """
    spec = prob.dichotomy
    if spec.kind != DichotomyKind.EXPANSION:
        raise NotExpansion("The uniqueness check needs an expansion")
    if perturbation == 0:
        return True
    y = pseudo.y
    if deviation is None:
        deviation = lpNorm(x - y, triple.p, settings)
    target = 10 * deviation

    growth = spec.lam - prob.c * spec.D
    start = abs(perturbation) / spec.D
    if triple.p.isInfinite:
        envelope = start * np.exp(growth * horizon)
    else:
        pValue = float(triple.p.value)
        envelope = start * ((np.exp(pValue * growth * horizon) - 1) / (pValue * growth)) ** (1 / pValue)
    boundOk = envelope - deviation > target

    times = np.linspace(0, horizon, 2001)
    initial = x.values[0].astype(complex if x.isComplex else float)
    initial[0] += perturbation
    def rhs(t: float, state: np.ndarray) -> np.ndarray:
        A = prob.linear.matrix(t)
        return A @ state + prob.nonlinearity(np.array([t]), state[None, :])[0]
    solution = solve_ivp(
        rhs, (0, horizon), initial, method="DOP853", t_eval=times,
        rtol=settings.EVOLUTION_RTOL, atol=settings.EVOLUTION_ATOL,
    )
    if not solution.success:
        logger.warning("Integration of the alternative solution failed: %s", solution.message)
        return False
    alternative = GridFunction(times, solution.y.T - y.evaluate(times, settings))
    simulated = lpNorm(alternative, triple.p, settings, truncate=True)
    logger.info(
        "Uniqueness check: envelope %.6g, simulated %.6g, ten times the deviation %.6g",
        envelope, simulated, target,
    )
    return bool(boundOk and simulated > target)
