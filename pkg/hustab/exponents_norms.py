from __future__ import annotations
from fractions import Fraction
from math import factorial
from typing import NamedTuple, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy.integrate import quad, simpson, trapezoid
from scipy.special import gamma as gammaFunction

from .classes import Exponent, ExpTerm, JsonDict, KernelSide, Number, VectorNorm
from .errors import PrecedenceError, PreconditionError
from .grid_function import GridFunction, ZERO_TAIL, mergeTerms, pointNorms
from .numerics import NumericSettings, NUMERICS

logger = logging.getLogger(__name__)

ExponentLike = Union[Exponent, Number, str]

# 4-point Gauss-Legendre rule mapped to [0, 1]
_nodes, _weights = np.polynomial.legendre.leggauss(4)
GAUSS_THETA: np.ndarray = (1 + _nodes) / 2
GAUSS_WEIGHTS: np.ndarray = _weights / 2


def conjugateExponent(p: ExponentLike, q: ExponentLike) -> Exponent:
    """
    The r in [1, ∞] with 1/p + 1 = 1/q + 1/r, computed on exact fractions.

    Raises PrecedenceError if p < q, since then 1/r would exceed 1.
    """
    p, q = Exponent(p), Exponent(q)
    if p < q:
        raise PrecedenceError(f"No conjugate exponent for p = {p} < q = {q}")
    inverse: Fraction = p.reciprocal() + 1 - q.reciprocal()
    if inverse == 0:
        return Exponent.infinity()
    return Exponent(1 / inverse)


class ConjugateTriple(NamedTuple):
    """
    Exponents (p, q, r) with p ≥ q and 1/p + 1 = 1/q + 1/r.
    Build it with fromPQ, which computes r.
    """
    p: Exponent
    q: Exponent
    r: Exponent

    @classmethod
    def fromPQ(cls, p: ExponentLike, q: ExponentLike) -> ConjugateTriple:
        p, q = Exponent(p), Exponent(q)
        return ConjugateTriple(p, q, conjugateExponent(p, q))

    def __str__(self) -> str:
        return f"(p={self.p}, q={self.q}, r={self.r})"

    def toJson(self) -> JsonDict:
        return {"p": self.p.toJson(), "q": self.q.toJson(), "r": self.r.toJson()}


class ExpKernel():
    """
    b(t) = e^{−λt} on t ≥ 0 (causal) or b̄(t) = e^{λt} on t < 0 (anticausal)
    """
    def __init__(self, rate: float, side: KernelSide = KernelSide.CAUSAL):
        if not rate > 0:
            raise PreconditionError(f"Kernel rates must be positive, got {rate}")
        self.rate: float = float(rate)
        self.side: KernelSide = KernelSide(side)

    def __repr__(self) -> str:
        return f"ExpKernel({self.rate}, {self.side.value})"


class YoungReport(NamedTuple):
    lhs: float
    rhs: float
    holds: bool

    def toJson(self) -> JsonDict:
        return self._asdict()


def holdsWithin(lhs: float, rhs: float, settings: NumericSettings = NUMERICS) -> bool:
    """
    lhs ≤ rhs up to the absolute and relative comparison tolerances
    """
    return lhs <= rhs + settings.HOLDS_ABS_TOL + settings.HOLDS_REL_TOL * abs(rhs)

def kernelNorm(kernel: ExpKernel, r: ExponentLike) -> float:
    """
    ‖b‖_{L^r} = (1/(λr))^{1/r}, and 1 for r = ∞
    """
    r = Exponent(r)
    if r.isInfinite:
        return 1.0
    rValue = float(r.value)
    return (1 / (kernel.rate * rValue)) ** (1 / rValue)


def _termNorm(term: ExpTerm, norm: VectorNorm) -> float:
    return float(pointNorms(np.asarray(term.coefficient)[None, :], norm)[0])

def tailIntegral(terms: Sequence[ExpTerm], p: float, norm: VectorNorm = VectorNorm.MAX) -> float:
    """
    ∫_0^∞ |Σ v·τ^k·e^{−κτ}|^p dτ: closed form for one term, adaptive quadrature otherwise
    """
    if len(terms) == 0:
        return 0.0
    if len(terms) == 1:
        term = terms[0]
        k = term.power
        return _termNorm(term, norm) ** p * float(gammaFunction(k * p + 1)) / (p * term.decay) ** (k * p + 1)

    def integrand(tau: float) -> float:
        value = sum(t.at(np.array([tau]))[0] for t in terms)
        return float(pointNorms(np.asarray(value)[None, :], norm)[0]) ** p

    value, error = quad(integrand, 0, np.inf, limit=200)
    logger.debug("Tail quadrature over %d terms: %.6g ± %.1g", len(terms), value, error)
    return float(value)

def tailSup(terms: Sequence[ExpTerm], norm: VectorNorm = VectorNorm.MAX) -> float:
    if len(terms) == 0:
        return 0.0
    if len(terms) == 1:
        term = terms[0]
        k = term.power
        if k == 0:
            return _termNorm(term, norm)
        peak = k / term.decay
        return _termNorm(term, norm) * peak ** k * np.exp(-k)
    horizon = 50 / min(t.decay for t in terms)
    tau = np.linspace(0, horizon, 4001)
    values = sum(t.at(tau) for t in terms)
    return float(pointNorms(values, norm).max())

def lpNorm(
    g: GridFunction,
    p: ExponentLike,
    settings: NumericSettings = NUMERICS,
    truncate: bool = False,
    norm: Optional[VectorNorm] = None,
) -> float:
    """
    ‖g‖_{L^p([0, ∞))}: quadrature on the grid (Simpson on uniform grids,
    trapezoid otherwise) plus the integral of the tail.

    With truncate=True the norm is taken on [0, T_max] only.
    Raises DivergentNorm if the tail is unknown and the grid end is not decaying.
    """
    p = Exponent(p)
    norm = norm or settings.POINT_NORM
    norms = g.pointNorms(norm)
    tail = ZERO_TAIL if truncate else g.resolvedTail(settings)

    if p.isInfinite:
        return float(max(norms.max(), tailSup(tail, norm)))

    pValue = float(p.value)
    integrand = norms ** pValue
    if g.isUniform:
        body = simpson(integrand, x=g.grid)
    else:
        body = trapezoid(integrand, x=g.grid)
    total = max(float(body), 0.0) + tailIntegral(tail, pValue, norm)
    return total ** (1 / pValue)


def _causalTail(rate: float, end: np.ndarray, terms: Sequence[ExpTerm]) -> Tuple[ExpTerm, ...]:
    # a(T+τ) = e^{−λτ}a(T) + ∫_0^τ e^{−λ(τ−σ)} c(T+σ) dσ, term by term
    out = [ExpTerm(end.copy(), rate, 0)]
    for term in terms:
        v, k = term.coefficient, term.power
        beta = complex(term.rate) - rate
        if beta.imag == 0:
            beta = beta.real
        if abs(beta) < 1e-12 * max(1.0, rate):
            out.append(ExpTerm(v / (k + 1), rate, k + 1))
            continue
        out.append(ExpTerm(v * factorial(k) / beta ** (k + 1), rate, 0))
        for j in range(k + 1):
            out.append(ExpTerm(-v * factorial(k) / (factorial(j) * beta ** (k + 1 - j)), term.rate, j))
    return mergeTerms(out)

def _anticausalStart(rate: float, terms: Sequence[ExpTerm], dimension: int) -> np.ndarray:
    # ∫_0^∞ e^{−λσ} c(T+σ) dσ
    start = np.zeros(dimension, dtype=complex)
    for term in terms:
        alpha = rate + complex(term.rate)
        start = start + term.coefficient * factorial(term.power) / alpha ** (term.power + 1)
    return start

def _anticausalTail(rate: float, terms: Sequence[ExpTerm]) -> Tuple[ExpTerm, ...]:
    out = []
    for term in terms:
        v, k = term.coefficient, term.power
        alpha = rate + complex(term.rate)
        if alpha.imag == 0:
            alpha = alpha.real
        for i in range(k + 1):
            out.append(ExpTerm(v * factorial(k) / (factorial(i) * alpha ** (k + 1 - i)), term.rate, i))
    return mergeTerms(out)

def linearRecurrence(
    decay: np.ndarray,
    increments: np.ndarray,
    start: np.ndarray,
    reverse: bool = False,
) -> np.ndarray:
    """
    u_{k+1} = decay_k·u_k + increments_k from u_0 = start,
    or with reverse=True u_k = decay_k·u_{k+1} + increments_k from u_N = start.
    decay has shape (N,), increments (N, d); returns (N+1, d).
    """
    steps = len(increments)
    dtype = np.result_type(decay, increments, start)
    out = np.zeros((steps + 1, increments.shape[1]), dtype=dtype)
    if reverse:
        out[steps] = start
        for k in range(steps - 1, -1, -1):
            out[k] = decay[k] * out[k + 1] + increments[k]
    else:
        out[0] = start
        for k in range(steps):
            out[k + 1] = decay[k] * out[k] + increments[k]
    return out

def _realIfPossible(values: np.ndarray, reference: bool) -> np.ndarray:
    if not reference and np.iscomplexobj(values):
        return values.real
    return values

def convolve(
    kernel: ExpKernel,
    c: GridFunction,
    settings: NumericSettings = NUMERICS,
) -> GridFunction:
    """
    Causal:     a(t) = ∫_0^t e^{−λ(t−s)} c(s) ds
    Anticausal: a(t) = ∫_t^∞ e^{−λ(s−t)} c(s) ds

    Product integration of the interpolant of c with the 4-point Gauss rule on each
    interval, propagated by the exact step factor e^{−λh}. The improper part of the
    anticausal integral and both result tails come from the tail of c in closed form.
    """
    lam = kernel.rate
    h = c.steps
    samples = c.sampleIntervals(GAUSS_THETA, settings)
    terms = c.resolvedTail(settings)
    decay = np.exp(-lam * h)
    isComplex = c.isComplex or any(complex(t.rate).imag != 0 for t in terms)

    if kernel.side == KernelSide.CAUSAL:
        factors = np.exp(-lam * h[:, None] * (1 - GAUSS_THETA)[None, :]) * GAUSS_WEIGHTS[None, :] * h[:, None]
        increments = np.einsum("kj,kjd->kd", factors, samples)
        values = linearRecurrence(decay, increments, np.zeros(c.dimension))
        tail = _causalTail(lam, values[-1], terms)
        derivative = -lam * values + c.values
    else:
        factors = np.exp(-lam * h[:, None] * GAUSS_THETA[None, :]) * GAUSS_WEIGHTS[None, :] * h[:, None]
        increments = np.einsum("kj,kjd->kd", factors, samples)
        start = _realIfPossible(_anticausalStart(lam, terms, c.dimension), isComplex)
        values = linearRecurrence(decay, increments, start, reverse=True)
        tail = _anticausalTail(lam, terms)
        derivative = lam * values - c.values

    if not isComplex:
        tail = tuple(ExpTerm(np.real(t.coefficient), t.rate, t.power) for t in tail)
    return GridFunction(
        c.grid,
        _realIfPossible(values, isComplex),
        derivative=_realIfPossible(derivative, isComplex),
        tail=tail,
    )


def youngCheck(
    kernel: ExpKernel,
    c: GridFunction,
    triple: ConjugateTriple,
    settings: NumericSettings = NUMERICS,
) -> YoungReport:
    """
    Compares ‖b ∗ c‖_{L^p} with ‖b‖_{L^r}·‖c‖_{L^q}
    """
    lhs = lpNorm(convolve(kernel, c, settings), triple.p, settings)
    rhs = kernelNorm(kernel, triple.r) * lpNorm(c, triple.q, settings)
    return YoungReport(lhs=lhs, rhs=rhs, holds=holdsWithin(lhs, rhs, settings))
