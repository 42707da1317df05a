from __future__ import annotations
from typing import List, NamedTuple, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from tqdm import tqdm

from .classes import Exponent, JordanCase, JsonDict, SweepAxis, complexPairs
from .errors import NotExpansion, PreconditionError, SingularMatrix, SmallnessViolation
from .exponents_norms import ConjugateTriple, ExpKernel, ExponentLike, kernelNorm
from .linear_evolution import DichotomySpec, JordanForm, jordanDecompose, maxVectorNorm, opNormInf
from .numerics import NumericSettings, NUMERICS

logger = logging.getLogger(__name__)

INVPHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INVPHI2 = (3 - math.sqrt(5)) / 2  # 1 / phi^2


class UpperConstantQuery(NamedTuple):
    spec: DichotomySpec
    c: float
    triple: ConjugateTriple

class LowerBoundQuery(NamedTuple):
    """
    A invertible 2×2 expansion matrix, u with |u|_∞ = 1, γ > 0
    """
    A: np.ndarray
    u: np.ndarray
    gamma: float
    triple: ConjugateTriple

class DeltaSearch(NamedTuple):
    """
    Search for the δ of the Jordan-block bound on (0, min{1, Re ν} − deltaMargin]
    """
    nu: complex
    r: Exponent
    cond: float = 1.0
    deltaMargin: float = 1e-9

    @property
    def bounds(self) -> Tuple[float, float]:
        return self.deltaMargin, min(1.0, complex(self.nu).real) - self.deltaMargin

class GapReport(NamedTuple):
    upper: float
    lower: float
    ratio: float
    argmaxU: np.ndarray
    argmaxGamma: float
    deltaStar: Optional[float]
    inverseNorm: float
    case: JordanCase

    def toJson(self) -> JsonDict:
        return {
            "upper": self.upper,
            "lower": self.lower,
            "ratio": self.ratio,
            "argmax_u": complexPairs(self.argmaxU),
            "argmax_gamma": self.argmaxGamma,
            "delta_star": self.deltaStar,
            "inverse_norm": self.inverseNorm,
            "case": self.case.value,
        }


def contractionFactor(spec: DichotomySpec, c: float) -> float:
    """
    κ = 2cD/λ for general dichotomies, cD/λ for contractions and expansions
    """
    return c * spec.contractionCoefficient / spec.lam

def upperHusConstant(query: UpperConstantQuery) -> float:
    """
    L = 2D(1/(λr))^{1/r} / (1 − 2cD/λ)   general dichotomy
    L = D(1/(λr))^{1/r} / (1 − cD/λ)      contraction or expansion

    Raises SmallnessViolation when the denominator is not positive.
    """
    spec, c, triple = query
    if c < 0:
        raise PreconditionError(f"The Lipschitz constant must be nonnegative, got {c}")
    kappa = contractionFactor(spec, c)
    if kappa >= 1:
        raise SmallnessViolation(
            f"c = {c:g} is too large for {spec}: need c < {spec.lam / spec.contractionCoefficient:g}"
        )
    return spec.contractionCoefficient * kernelNorm(ExpKernel(spec.lam), triple.r) / (1 - kappa)

def linearHusConstant(spec: DichotomySpec, triple: ConjugateTriple) -> float:
    """
    The constant for f ≡ 0
    """
    return upperHusConstant(UpperConstantQuery(spec, 0.0, triple))


def jordanFactor(delta: float, nu: complex, r: ExponentLike) -> float:
    """
    g(δ) = (e^{δ−1}/δ)·(1/(r(Re ν − δ)))^{1/r}
    """
    r = Exponent(r)
    factor = math.exp(delta - 1) / delta
    if r.isInfinite:
        return factor
    rValue = float(r.value)
    return factor * (1 / (rValue * (complex(nu).real - delta))) ** (1 / rValue)

def optimizeDelta(search: DeltaSearch, settings: NumericSettings = NUMERICS) -> Tuple[float, float]:
    """
    Golden-section minimization of jordanFactor over the closed search domain.
    The endpoints are compared too, since the infimum may sit on the boundary.
    Returns (δ*, g(δ*)).
    """
    a, b = search.bounds
    if b < a:
        raise PreconditionError(f"Empty δ search domain for Re ν = {complex(search.nu).real:g}")

    def g(delta: float) -> float:
        return jordanFactor(delta, search.nu, search.r)

    lower, upper = a, b
    h = upper - lower
    c = lower + INVPHI2 * h
    d = lower + INVPHI * h
    yc, yd = g(c), g(d)
    while h > settings.GOLDEN_TOL:
        if yc < yd:
            upper, d, yd = d, c, yc
            h = INVPHI * h
            c = lower + INVPHI2 * h
            yc = g(c)
        else:
            lower, c, yc = c, d, yd
            h = INVPHI * h
            d = lower + INVPHI * h
            yd = g(d)

    candidates = [(yc, c), (yd, d), (g(a), a), (g(b), b)]
    value, delta = min(candidates)
    logger.debug("δ* = %.12g, g(δ*) = %.12g", delta, value)
    return delta, value


def _checkExpansion(A: np.ndarray, settings: NumericSettings) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.shape != (2, 2):
        raise PreconditionError(f"Expected a 2×2 matrix, got shape {A.shape}")
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(det) <= settings.SINGULAR_TOL * opNormInf(A) ** 2:
        raise SingularMatrix(f"A is singular (|det A| = {abs(det):.3g})")
    eigenvalues = np.linalg.eigvals(A)
    if np.any(eigenvalues.real <= 0):
        raise NotExpansion(f"A has eigenvalues with nonpositive real part: {eigenvalues}")
    return A

def _corollary(
    A: np.ndarray,
    triple: ConjugateTriple,
    delta: Optional[float],
    settings: NumericSettings,
) -> Tuple[float, JordanForm, Optional[float]]:
    form = jordanDecompose(A, settings)
    if any(complex(m).real <= 0 for m in form.eigenvalues):
        raise NotExpansion(f"A has eigenvalues with nonpositive real part: {form.eigenvalues}")

    if form.case == JordanCase.DIAGONAL:
        slowest = min(complex(m).real for m in form.eigenvalues)
        return form.conditioning * kernelNorm(ExpKernel(slowest), triple.r), form, None

    search = DeltaSearch(form.nu, triple.r, form.conditioning, settings.DELTA_MARGIN)
    if delta is None:
        delta, factor = optimizeDelta(search, settings)
    else:
        if not 0 < delta < min(1.0, form.nu.real):
            raise PreconditionError(f"δ must lie in (0, {min(1.0, form.nu.real):g}), got {delta}")
        factor = jordanFactor(delta, form.nu, triple.r)
    return form.conditioning * factor, form, delta

def corollary2dConstant(
    A: np.ndarray,
    triple: ConjugateTriple,
    delta: Optional[float] = None,
    settings: NumericSettings = NUMERICS,
) -> float:
    """
    HUS constant of an autonomous 2×2 expansion x' = Ax, from its Jordan form:
        diagonal:      ‖M‖‖M⁻¹‖·(1/(r·min Re μ))^{1/r}
        jordan block:  ‖M‖‖M⁻¹‖·(e^{δ−1}/δ)·(1/(r(Re ν − δ)))^{1/r}
    with δ optimized when not given.

    Raises NotExpansion if an eigenvalue has nonpositive real part.
    """
    return _corollary(A, triple, delta, settings)[0]


def _gammaFactor(p: Exponent, gamma: float) -> float:
    # (pγ)^{1/p}, read as 1 for p = ∞
    if p.isInfinite:
        return 1.0
    pValue = float(p.value)
    return (pValue * gamma) ** (1 / pValue)

def _lowerBoundValues(
    inverse: np.ndarray,
    us: np.ndarray,
    gamma: float,
    triple: ConjugateTriple,
) -> np.ndarray:
    # One value per row of us
    numerator = np.max(np.abs(us @ inverse.T), axis=-1) * _gammaFactor(triple.q, gamma)
    shifted = gamma * inverse + np.eye(2)
    denominator = np.max(np.abs(us @ shifted.T), axis=-1) * _gammaFactor(triple.p, gamma)
    return numerator / denominator

def lowerBound(query: LowerBoundQuery, settings: NumericSettings = NUMERICS) -> float:
    """
    Any HUS constant of the expansion x' = Ax is at least
        |A⁻¹u|(qγ)^{1/q} / (|(γA⁻¹ + I)u|(pγ)^{1/p})
    with the factors of infinite exponents read as 1.
    """
    A = _checkExpansion(query.A, settings)
    u = np.asarray(query.u, dtype=complex)
    if abs(maxVectorNorm(u) - 1) > settings.UNIT_TOL:
        raise PreconditionError(f"u must be a unit vector in the maximum norm, |u| = {maxVectorNorm(u)}")
    if not query.gamma > 0:
        raise PreconditionError(f"γ must be positive, got {query.gamma}")
    inverse = np.linalg.inv(A)
    return float(_lowerBoundValues(inverse, u[None, :], query.gamma, query.triple)[0])


def defaultGammaGrid(settings: NumericSettings = NUMERICS) -> np.ndarray:
    low, high, count = settings.GAMMA_SWEEP
    return np.geomspace(low, high, int(count))

def unitSphereGrid(A: np.ndarray, settings: NumericSettings = NUMERICS) -> np.ndarray:
    """
    Points of the max-norm unit sphere of C²: one coordinate equal to 1, the other
    ρe^{iθ} with ρ ≤ 1. Real matrices only need the real directions (θ ∈ {0, π}).
    """
    phases = [0.0, math.pi] if not np.iscomplexobj(A) or np.all(np.imag(A) == 0) else \
        list(np.linspace(0, 2 * math.pi, settings.U_PHASES, endpoint=False))
    radii = np.linspace(0, 1, settings.U_RADII)
    points: List[Tuple[complex, complex]] = []
    for fixed in (0, 1):
        for rho in radii:
            for theta in (phases if rho > 0 else phases[:1]):
                other = rho * complex(math.cos(theta), math.sin(theta))
                points.append((1, other) if fixed == 0 else (other, 1))
    return np.array(points, dtype=complex)

def lowerBoundSweep(
    A: np.ndarray,
    triple: ConjugateTriple,
    gammaGrid: Optional[Sequence[float]] = None,
    uGrid: Optional[np.ndarray] = None,
    settings: NumericSettings = NUMERICS,
) -> Tuple[float, LowerBoundQuery]:
    """
    The largest lower bound over a grid of γ and u.
    The γ grid is refined REFINE_PASSES times around the best value,
    staying inside the original grid range; single-point grids are not refined.
    """
    A = _checkExpansion(A, settings)
    gammas = defaultGammaGrid(settings) if gammaGrid is None else np.asarray(gammaGrid, dtype=float)
    us = unitSphereGrid(A, settings) if uGrid is None else np.atleast_2d(np.asarray(uGrid, dtype=complex))
    if np.any(gammas <= 0):
        raise PreconditionError("γ values must be positive")
    if np.any(np.abs(np.max(np.abs(us), axis=-1) - 1) > settings.UNIT_TOL):
        raise PreconditionError("Every u must be a unit vector in the maximum norm")
    inverse = np.linalg.inv(A)

    def scan(grid: np.ndarray, description: str) -> Tuple[float, int, int]:
        best, bestGamma, bestU = -np.inf, 0, 0
        for i, gamma in enumerate(tqdm(
            grid,
            desc=description,
            unit="γ",
            disable=not settings.SHOW_PROGRESS,
        )):
            values = _lowerBoundValues(inverse, us, float(gamma), triple)
            j = int(np.argmax(values))
            if values[j] > best:
                best, bestGamma, bestU = float(values[j]), i, j
        return best, bestGamma, bestU

    best, i, j = scan(gammas, "Sweeping γ: ")
    bestGamma = float(gammas[i])
    grid = gammas
    if len(gammas) > 1:
        for n in range(settings.REFINE_PASSES):
            low = grid[max(i - 1, 0)]
            high = grid[min(i + 1, len(grid) - 1)]
            grid = np.geomspace(low, high, 11)
            value, i, jRefined = scan(grid, f"Refining γ ({n + 1}): ")
            if value > best:
                best, bestGamma, j = value, float(grid[i]), jRefined
            else:
                i = int(np.argmin(np.abs(grid - bestGamma)))

    query = LowerBoundQuery(np.asarray(A), us[j], bestGamma, triple)
    return best, query


def constantGap(
    A: np.ndarray,
    triple: ConjugateTriple,
    gammaGrid: Optional[Sequence[float]] = None,
    uGrid: Optional[np.ndarray] = None,
    delta: Optional[float] = None,
    settings: NumericSettings = NUMERICS,
) -> GapReport:
    """
    Compares the upper constant of the 2×2 expansion with the best lower bound.
    ratio = lower / upper, 1 when the upper constant is minimal.
    """
    upper, form, deltaStar = _corollary(A, triple, delta, settings)
    lower, query = lowerBoundSweep(A, triple, gammaGrid, uGrid, settings)
    if lower > upper * (1 + settings.HOLDS_REL_TOL) + settings.HOLDS_ABS_TOL:
        logger.warning("Lower bound %.9g exceeds the upper constant %.9g", lower, upper)
    inverseNorm = opNormInf(np.linalg.inv(np.asarray(A, dtype=complex)))
    return GapReport(
        upper=upper,
        lower=lower,
        ratio=lower / upper,
        argmaxU=query.u,
        argmaxGamma=query.gamma,
        deltaStar=deltaStar,
        inverseNorm=float(inverseNorm),
        case=form.case,
    )


def sweepTable(
    axis: SweepAxis,
    A: np.ndarray,
    triple: ConjugateTriple,
    values: Optional[Sequence] = None,
    settings: NumericSettings = NUMERICS,
) -> List[JsonDict]:
    """
    Rows of a parameter sweep:
    - gamma: best lower bound over u, per γ;
    - delta: the Jordan-block constant per δ (jordan_block matrices only);
    - u: lower bound per direction, maximized over γ;
    - pq: upper, lower and ratio per (p, q) pair, values being pairs.
    """
    axis = SweepAxis(axis)
    rows: List[JsonDict] = []

    if axis == SweepAxis.GAMMA:
        A = _checkExpansion(A, settings)
        inverse = np.linalg.inv(A)
        us = unitSphereGrid(A, settings)
        gammas = defaultGammaGrid(settings) if values is None else values
        for gamma in tqdm(gammas, desc="Sweep over γ: ", unit="γ", disable=not settings.SHOW_PROGRESS):
            bounds = _lowerBoundValues(inverse, us, float(gamma), triple)
            rows.append({"gamma": float(gamma), "lower": float(bounds.max())})

    elif axis == SweepAxis.DELTA:
        form = jordanDecompose(A, settings)
        if form.case != JordanCase.JORDAN_BLOCK:
            raise PreconditionError("The δ sweep needs a matrix with a Jordan block")
        low, high = DeltaSearch(form.nu, triple.r, form.conditioning, settings.DELTA_MARGIN).bounds
        deltas = np.linspace(low, high, 101) if values is None else values
        for delta in tqdm(deltas, desc="Sweep over δ: ", unit="δ", disable=not settings.SHOW_PROGRESS):
            factor = jordanFactor(float(delta), form.nu, triple.r)
            rows.append({"delta": float(delta), "factor": factor, "upper": form.conditioning * factor})

    elif axis == SweepAxis.U:
        us = unitSphereGrid(A, settings) if values is None else np.asarray(values, dtype=complex)
        for u in tqdm(us, desc="Sweep over u: ", unit="u", disable=not settings.SHOW_PROGRESS):
            value, query = lowerBoundSweep(A, triple, uGrid=u[None, :], settings=settings)
            rows.append({
                "u1_re": u[0].real, "u1_im": u[0].imag,
                "u2_re": u[1].real, "u2_im": u[1].imag,
                "lower": value, "gamma": query.gamma,
            })

    else:
        pairs = values if values is not None else [
            (p, q) for p in ("1", "2", "4", "inf") for q in ("1", "2", "4", "inf")
            if Exponent(p) >= Exponent(q)
        ]
        for p, q in tqdm(pairs, desc="Sweep over (p, q): ", unit="pair", disable=not settings.SHOW_PROGRESS):
            gap = constantGap(A, ConjugateTriple.fromPQ(p, q), settings=settings)
            rows.append({
                "p": Exponent(p).toJson(), "q": Exponent(q).toJson(),
                "upper": gap.upper, "lower": gap.lower, "ratio": gap.ratio,
            })

    return rows
