from __future__ import annotations
from math import factorial
from typing import Optional
import logging

import numpy as np

from ..classes import DichotomyKind, ExpTerm
from ..exponents_norms import GAUSS_THETA, GAUSS_WEIGHTS, ExponentLike, lpNorm
from ..grid_function import GridFunction, ZERO_TAIL, mergeTerms
from ..linear_evolution import propagators
from ..numerics import NumericSettings, NUMERICS
from .problem import PseudoSolution, SemilinearProblem, residual

logger = logging.getLogger(__name__)


def _matrixRecurrence(
    matrices: np.ndarray,
    increments: np.ndarray,
    start: np.ndarray,
    reverse: bool = False,
) -> np.ndarray:
    """
    u_{k+1} = M_k u_k + I_k from u_0 = start, or u_k = M_k u_{k+1} + I_k from u_N = start
    """
    steps = len(increments)
    dtype = np.result_type(matrices, increments, start)
    out = np.zeros((steps + 1, increments.shape[1]), dtype=dtype)
    if reverse:
        out[steps] = start
        for k in range(steps - 1, -1, -1):
            out[k] = matrices[k] @ out[k + 1] + increments[k]
    else:
        out[0] = start
        for k in range(steps):
            out[k + 1] = matrices[k] @ out[k] + increments[k]
    return out

def _realIfPossible(values: np.ndarray, keepComplex: bool) -> np.ndarray:
    if not keepComplex and np.iscomplexobj(values):
        return values.real
    return values


class ShadowingOperator():
    """
    The operators of the shadowing construction for a pseudosolution y:

        T1 z(t) =  ∫_0^t T(t,s)P(s) g_z(s) ds
        T2 z(t) = −∫_t^∞ T(t,s)(I − P(s)) g_z(s) ds

    with g_z = f(·, y + z) − f(·, y) − w and w the residual of y.
    A fixed point z of T1 + T2 makes x = y + z a solution.

    Propagators over every grid interval and towards every Gauss node
    are computed once, so repeated applications only cost the recurrences.
    """
    def __init__(
        self,
        prob: SemilinearProblem,
        pseudo: PseudoSolution,
        settings: NumericSettings = NUMERICS,
    ):
        self.prob: SemilinearProblem = prob
        self.y: GridFunction = pseudo.y
        self.settings: NumericSettings = settings
        self.w: GridFunction = residual(pseudo, prob, settings)
        self.grid: np.ndarray = self.y.grid
        self._fy: np.ndarray = prob.nonlinearity(self.grid, self.y.values)

        spec = prob.dichotomy
        d = prob.dimension
        h = np.diff(self.grid)
        steps = len(h)
        identity = np.eye(d)
        self.hasStable: bool = spec.kind != DichotomyKind.EXPANSION
        self.hasUnstable: bool = spec.kind != DichotomyKind.CONTRACTION

        nodes = self.grid[:-1, None] + GAUSS_THETA[None, :] * h[:, None]
        projections = spec.projectionsAt(self.grid)
        gaussProjections = spec.projectionsAt(nodes)
        weights = GAUSS_WEIGHTS[None, :, None, None] * h[:, None, None, None]

        uniform = prob.linear.isAutonomous and self.y.isUniform
        def evolve(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
            if uniform:
                # Lags repeat on a uniform grid: one exponential per distinct lag
                lags = (ends - starts)[0]
                single = propagators(prob.linear, np.zeros(lags.size), lags.ravel())
                return np.broadcast_to(single.reshape(lags.shape + (d, d)), starts.shape + (d, d))
            shape = starts.shape
            return propagators(prob.linear, starts.ravel(), ends.ravel()).reshape(shape + (d, d))

        if self.hasStable:
            forward = evolve(self.grid[:-1, None], self.grid[1:, None])[:, 0]
            towardsEnd = evolve(nodes, np.broadcast_to(self.grid[1:, None], nodes.shape))
            self._forwardSteps = projections[1:] @ forward
            self._forwardWeights = projections[1:, None] @ towardsEnd @ gaussProjections * weights
        if self.hasUnstable:
            complements = identity - projections
            backward = evolve(self.grid[1:, None], self.grid[:-1, None])[:, 0]
            towardsStart = evolve(nodes, np.broadcast_to(self.grid[:-1, None], nodes.shape))
            self._backwardSteps = complements[:-1] @ backward
            self._backwardWeights = complements[:-1, None] @ towardsStart @ (identity - gaussProjections) * weights
            self._endMatrix = prob.linear.matrix(self.grid[-1])
            self._endComplement = complements[-1]
        logger.debug("Prepared shadowing operators on %d intervals", steps)

    def integrand(self, z: GridFunction) -> GridFunction:
        """
        g_z = f(·, y + z) − f(·, y) − w, with its tail when it can be derived
        """
        values = self.prob.nonlinearity(self.grid, self.y.values + z.values) - self._fy - self.w.values
        tail = None
        if self.w.tail is not None:
            if self.prob.f is None:
                tail = tuple(t.scaled(-1) for t in self.w.tail)
            elif self.prob.linearPart is not None and z.tail is not None:
                tail = mergeTerms(
                    [t.mapped(self.prob.linearPart) for t in z.tail]
                    + [t.scaled(-1) for t in self.w.tail]
                )
        return GridFunction(self.grid, values, tail=tail)

    def _zero(self) -> GridFunction:
        return GridFunction.zeros(self.grid, self.prob.dimension)

    def applyT1(self, z: GridFunction, g: Optional[GridFunction] = None) -> GridFunction:
        if not self.hasStable:
            return self._zero()
        g = self.integrand(z) if g is None else g
        samples = g.sampleIntervals(GAUSS_THETA, self.settings)
        increments = np.einsum("kjab,kjb->ka", self._forwardWeights, samples)
        values = _matrixRecurrence(self._forwardSteps, increments, np.zeros(self.prob.dimension))

        # One exponential at the slowest of the rates involved
        terms = g.resolvedTail(self.settings)
        rate = min([self.prob.dichotomy.lam] + [t.decay for t in terms])
        end = values[-1]
        tail = (ExpTerm(end.copy(), rate, 0),) if np.any(end != 0) else ZERO_TAIL
        keepComplex = g.isComplex or np.iscomplexobj(self._forwardSteps)
        return GridFunction(self.grid, _realIfPossible(values, keepComplex), tail=tail)

    def applyT2(self, z: GridFunction, g: Optional[GridFunction] = None) -> GridFunction:
        if not self.hasUnstable:
            return self._zero()
        g = self.integrand(z) if g is None else g
        samples = g.sampleIntervals(GAUSS_THETA, self.settings)
        increments = -np.einsum("kjab,kjb->ka", self._backwardWeights, samples)

        # Closed form of the improper integral beyond T_max, A frozen at A(T_max)
        terms = g.resolvedTail(self.settings)
        d = self.prob.dimension
        Q = self._endComplement
        start = np.zeros(d, dtype=complex)
        tail = []
        for term in terms:
            B = (self._endMatrix + term.rate * np.eye(d)) @ Q + (np.eye(d) - Q)
            inverse = np.linalg.inv(B)
            powers = [np.eye(d)]
            for _ in range(term.power + 1):
                powers.append(powers[-1] @ inverse)
            projected = Q @ term.coefficient
            k = term.power
            start = start - factorial(k) * powers[k + 1] @ projected
            for j in range(k + 1):
                tail.append(ExpTerm(-factorial(k) / factorial(j) * powers[k + 1 - j] @ projected, term.rate, j))

        keepComplex = (
            g.isComplex
            or np.iscomplexobj(self._backwardSteps)
            or any(complex(t.rate).imag != 0 for t in terms)
        )
        values = _matrixRecurrence(self._backwardSteps, increments, _realIfPossible(start, keepComplex), reverse=True)
        if not keepComplex:
            tail = [ExpTerm(np.real(t.coefficient), t.rate, t.power) for t in tail]
        return GridFunction(self.grid, _realIfPossible(values, keepComplex), tail=mergeTerms(tail))

    def apply(self, z: GridFunction) -> GridFunction:
        """
        𝒯z = T1 z + T2 z
        """
        g = self.integrand(z)
        return self.applyT1(z, g) + self.applyT2(z, g)


def applyT1(
    z: GridFunction,
    pseudo: PseudoSolution,
    prob: SemilinearProblem,
    settings: NumericSettings = NUMERICS,
) -> GridFunction:
    return ShadowingOperator(prob, pseudo, settings).applyT1(z)

def applyT2(
    z: GridFunction,
    pseudo: PseudoSolution,
    prob: SemilinearProblem,
    settings: NumericSettings = NUMERICS,
) -> GridFunction:
    return ShadowingOperator(prob, pseudo, settings).applyT2(z)

def contractionRatio(
    z1: GridFunction,
    z2: GridFunction,
    operator: ShadowingOperator,
    p: ExponentLike,
) -> float:
    """
    ‖𝒯z1 − 𝒯z2‖_{L^p} / ‖z1 − z2‖_{L^p}, at most κ for a contraction
    """
    numerator = lpNorm(operator.apply(z1) - operator.apply(z2), p, operator.settings)
    denominator = lpNorm(z1 - z2, p, operator.settings)
    if denominator == 0:
        return 0.0
    return numerator / denominator
