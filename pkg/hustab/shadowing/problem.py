from __future__ import annotations
from typing import Callable, Optional
import logging

import numpy as np

from ..classes import ExpTerm, JsonDict
from ..errors import PreconditionError, SmallnessViolation
from ..grid_function import GridFunction, mergeTerms, pointNorms
from ..hus_bounds import contractionFactor
from ..linear_evolution import DichotomySpec, LinearSystem
from ..numerics import NumericSettings, NUMERICS

logger = logging.getLogger(__name__)

# f(t, x) -> d-vector, or f(times, X) -> (n, d) when vectorized
Nonlinearity = Callable[[np.ndarray, np.ndarray], np.ndarray]

def sineNonlinearity(b: float) -> Nonlinearity:
    """
    f(t, x) = b·sin(x), componentwise. Works on single points and on stacks.
    """
    def f(t: np.ndarray, x: np.ndarray) -> np.ndarray:
        return b * np.sin(x)
    return f


class SemilinearProblem():
    """
    x' = A(t)x + f(t, x), with |f(t, v1) − f(t, v2)| ≤ c|v1 − v2|
    and a dichotomy of the linear part.

    linearPart is the Jacobian F of f at 0, when known (b for b·sin x):
    with it, residual tails follow from the tail of the pseudosolution.

    Construction checks the smallness condition and estimates the Lipschitz
    constant of f on LIPSCHITZ_SAMPLES seeded random pairs.
    """
    def __init__(
        self,
        linear: LinearSystem,
        dichotomy: DichotomySpec,
        f: Optional[Nonlinearity] = None,
        c: float = 0.0,
        linearPart: Optional[np.ndarray] = None,
        vectorized: bool = False,
        settings: NumericSettings = NUMERICS,
        seed: int = 0,
    ):
        self.linear: LinearSystem = linear
        self.dichotomy: DichotomySpec = dichotomy
        self.f: Optional[Nonlinearity] = f
        self.c: float = float(c)
        self.vectorized: bool = vectorized
        self.linearPart: Optional[np.ndarray] = None
        if linearPart is not None:
            self.linearPart = np.atleast_2d(np.asarray(linearPart))
            if self.linearPart.shape == (1, 1) and linear.dimension > 1:
                self.linearPart = self.linearPart[0, 0] * np.eye(linear.dimension)

        if dichotomy.dimension != linear.dimension:
            raise PreconditionError(
                f"The projection is {dichotomy.dimension}-dimensional, the system {linear.dimension}-dimensional"
            )
        if self.c < 0:
            raise PreconditionError(f"The Lipschitz constant must be nonnegative, got {c}")
        if self.kappa >= 1:
            bound = dichotomy.lam / dichotomy.contractionCoefficient
            raise SmallnessViolation(
                f"c = {self.c:g} violates the smallness condition of {dichotomy} (c < {bound:g})"
            )

        self.lipschitzEstimate: float = 0.0
        if f is not None:
            self.lipschitzEstimate = self._estimateLipschitz(settings, seed)
            if self.lipschitzEstimate > self.c + settings.LIPSCHITZ_TOL * max(1.0, self.c):
                raise PreconditionError(
                    f"f has Lipschitz constant at least {self.lipschitzEstimate:.6g} > c = {self.c:g}"
                )

    def __repr__(self) -> str:
        return f"SemilinearProblem(d: {self.dimension}, c: {self.c:g}, {self.dichotomy})"

    @property
    def dimension(self) -> int:
        return self.linear.dimension

    @property
    def kappa(self) -> float:
        return contractionFactor(self.dichotomy, self.c)

    @property
    def hasExactTails(self) -> bool:
        return self.linear.isAutonomous and (self.f is None or self.linearPart is not None)

    def nonlinearity(self, times: np.ndarray, X: np.ndarray) -> np.ndarray:
        """
        f at every (times[i], X[i]), shape (n, d)
        """
        times = np.asarray(times, dtype=float)
        if self.f is None:
            return np.zeros_like(X)
        if self.vectorized:
            return np.asarray(self.f(times, X)).reshape(X.shape)
        return np.stack([np.asarray(self.f(t, x)).reshape(-1) for t, x in zip(times, X)])

    def _estimateLipschitz(self, settings: NumericSettings, seed: int) -> float:
        rng = np.random.default_rng(seed)
        n, d = settings.LIPSCHITZ_SAMPLES, self.dimension
        times = rng.uniform(0, settings.TAIL_HORIZON, n)
        first = rng.normal(size=(n, d))
        # Half far apart pairs, half close ones for the local slope
        offsets = rng.normal(size=(n, d))
        offsets[n // 2:] *= 1e-4
        second = first + offsets
        if self.linear.isComplex:
            first = first + 1j * rng.normal(size=(n, d))
            second = second + 1j * rng.normal(size=(n, d)) * np.abs(offsets)
        difference = pointNorms(self.nonlinearity(times, first) - self.nonlinearity(times, second), settings.POINT_NORM)
        distance = pointNorms(first - second, settings.POINT_NORM)
        estimate = float(np.max(difference / distance))
        logger.debug("Empirical Lipschitz constant %.6g (declared %.6g)", estimate, self.c)
        return estimate

    def toJson(self) -> JsonDict:
        return {
            "dimension": self.dimension,
            "linear": self.linear.toJson(),
            "dichotomy": self.dichotomy.toJson(),
            "c": self.c,
            "lipschitz_estimate": self.lipschitzEstimate,
        }


class PseudoSolution():
    """
    A differentiable y with a declared bound ε on the L^q norm of its residual.
    Without a derivative, y is differentiated as a cubic spline.
    The bound is checked against the measured residual, never trusted.
    """
    def __init__(self, y: GridFunction, epsilon: Optional[float] = None):
        self.y: GridFunction = y.withDerivative()
        self.epsilon: Optional[float] = None if epsilon is None else float(epsilon)

    def __repr__(self) -> str:
        return f"PseudoSolution({self.y}, ε: {self.epsilon})"


def residual(
    pseudo: PseudoSolution,
    prob: SemilinearProblem,
    settings: NumericSettings = NUMERICS,
) -> GridFunction:
    """
    w(t) = y'(t) − A(t)y(t) − f(t, y(t)) on the grid.

    For autonomous problems with f ≡ 0 or a known linear part F, the tail of w is
    derived from the tail of y (derivative terms minus (A + F) times y's terms);
    otherwise it is left unknown.
    """
    y = pseudo.y
    grid = y.grid
    if y.dimension != prob.dimension:
        raise PreconditionError(f"y is {y.dimension}-dimensional, the problem {prob.dimension}-dimensional")
    matrices = prob.linear.matricesAt(grid)
    Ay = np.einsum("kab,kb->ka", matrices, y.values)
    values = y.derivative - Ay - prob.nonlinearity(grid, y.values)  # type: ignore

    tail = None
    if prob.hasExactTails and y.tail is not None:
        B = prob.linear.constant
        if prob.linearPart is not None:
            B = B + prob.linearPart
        terms = []
        for term in y.tail:
            v, k = np.asarray(term.coefficient), term.power
            terms.append(ExpTerm(-term.rate * v - B @ v, term.rate, k))
            if k > 0:
                terms.append(ExpTerm(k * v, term.rate, k - 1))
        tail = mergeTerms(terms)
    return GridFunction(grid, values, tail=tail)
