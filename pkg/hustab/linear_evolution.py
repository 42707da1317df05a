from __future__ import annotations
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union
import cmath
import logging
import warnings

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import interp1d
from scipy.linalg import expm, schur, solve_sylvester
from tqdm import tqdm

from .classes import DichotomyKind, JordanCase, JsonDict, complexPairs
from .errors import IllConditionedWarning, NoDichotomy, PreconditionError, SingularMatrix
from .numerics import NumericSettings, NUMERICS

logger = logging.getLogger(__name__)

MatrixFunction = Callable[[float], np.ndarray]
Projection = Union[np.ndarray, MatrixFunction]


def maxVectorNorm(v: np.ndarray) -> float:
    """
    |v| = max |v_i|
    """
    v = np.asarray(v)
    if v.size == 0:
        return 0.0
    return float(np.max(np.abs(v)))

def opNormInf(matrix: np.ndarray) -> Union[float, np.ndarray]:
    """
    Operator norm induced by the maximum norm: the largest row sum of moduli.
    Works on stacks of matrices too, returning one norm per matrix.
    """
    norms = np.max(np.sum(np.abs(np.asarray(matrix)), axis=-1), axis=-1)
    if np.ndim(norms) == 0:
        return float(norms)
    return norms


class LinearSystem():
    """
    x' = A(t)x, with A either a constant d×d matrix (autonomous)
    or a callable t → A(t)
    """
    def __init__(self, coefficient: Union[np.ndarray, Sequence, MatrixFunction]):
        self._function: Optional[MatrixFunction] = None
        self._constant: Optional[np.ndarray] = None
        if callable(coefficient):
            self._function = coefficient
            sample = np.atleast_2d(np.asarray(coefficient(0.0)))
        else:
            self._constant = np.atleast_2d(np.asarray(coefficient))
            if not np.iscomplexobj(self._constant):
                self._constant = self._constant.astype(float)
            sample = self._constant
        if sample.ndim != 2 or sample.shape[0] != sample.shape[1]:
            raise PreconditionError(f"A must be a square matrix, got shape {sample.shape}")
        if not np.all(np.isfinite(sample)):
            raise PreconditionError("A has non-finite entries")
        self.dimension: int = sample.shape[0]

    @classmethod
    def fromSamples(cls, times: Sequence[float], matrices: Sequence[np.ndarray]) -> LinearSystem:
        """
        Time-dependent system linearly interpolated between sampled matrices,
        constant outside the sampled range
        """
        times = np.asarray(times, dtype=float)
        matrices = np.asarray(matrices)
        interpolated = interp1d(
            times, matrices, axis=0, bounds_error=False,
            fill_value=(matrices[0], matrices[-1]),  # type: ignore
        )
        return cls(lambda t: interpolated(t))

    def __repr__(self) -> str:
        if self._constant is not None:
            return f"LinearSystem(A = {self._constant.tolist()})"
        return f"LinearSystem(d: {self.dimension}, time-dependent)"

    @property
    def isAutonomous(self) -> bool:
        return self._constant is not None

    @property
    def isComplex(self) -> bool:
        return np.iscomplexobj(self.matrix(0.0))

    @property
    def constant(self) -> np.ndarray:
        if self._constant is None:
            raise PreconditionError("This system is time-dependent: A has no constant value")
        return self._constant

    def matrix(self, t: float = 0.0) -> np.ndarray:
        if self._constant is not None:
            return self._constant
        return np.atleast_2d(np.asarray(self._function(float(t))))  # type: ignore

    def matricesAt(self, times: np.ndarray) -> np.ndarray:
        """
        A at every time, shape (len(times), d, d)
        """
        times = np.asarray(times, dtype=float)
        if self._constant is not None:
            return np.broadcast_to(self._constant, times.shape + self._constant.shape)
        return np.stack([self.matrix(t) for t in times.ravel()]).reshape(
            times.shape + (self.dimension, self.dimension)
        )

    def toJson(self) -> JsonDict:
        if self._constant is None:
            return {"A": None, "time_dependent": True}
        return {"A": complexPairs(self._constant), "time_dependent": False}


class JordanForm():
    """
    M⁻¹AM = diag(μ1, μ2) (diagonal case) or [[ν, 1], [0, ν]] (jordan_block case)
    """
    def __init__(
        self,
        case: JordanCase,
        M: np.ndarray,
        eigenvalues: Tuple[complex, ...],
        conditioning: float,
    ):
        self.case: JordanCase = case
        self.M: np.ndarray = M
        self.eigenvalues: Tuple[complex, ...] = eigenvalues
        self.conditioning: float = conditioning

    def __repr__(self) -> str:
        return f"JordanForm({self.case.value}, eigenvalues: {self.eigenvalues}, conditioning: {self.conditioning:.3g})"

    @property
    def nu(self) -> complex:
        if self.case != JordanCase.JORDAN_BLOCK:
            raise AttributeError("Only the jordan_block case has a single eigenvalue ν")
        return self.eigenvalues[0]

    @property
    def canonical(self) -> np.ndarray:
        if self.case == JordanCase.DIAGONAL:
            return np.diag(np.array(self.eigenvalues, dtype=complex))
        return np.array([[self.nu, 1], [0, self.nu]], dtype=complex)

    @property
    def inverseM(self) -> np.ndarray:
        return np.linalg.inv(self.M)

    def toJson(self) -> JsonDict:
        return {
            "case": self.case.value,
            "M": complexPairs(self.M),
            "eigenvalues": [[complex(m).real, complex(m).imag] for m in self.eigenvalues],
            "conditioning": self.conditioning,
        }


def _eigenvector(A: np.ndarray, mu: complex) -> np.ndarray:
    # Both formulas solve (A − μI)v = 0 for a 2×2 matrix; take the longer one
    first = np.array([A[0, 1], mu - A[0, 0]], dtype=complex)
    second = np.array([mu - A[1, 1], A[1, 0]], dtype=complex)
    v = first if maxVectorNorm(first) >= maxVectorNorm(second) else second
    return v / maxVectorNorm(v)

def jordanDecompose(A: np.ndarray, settings: NumericSettings = NUMERICS) -> JordanForm:
    """
    Jordan form of an invertible 2×2 matrix, with eigenvalues in closed form.

    Triangular matrices keep the order of their diagonal, diagonal ones get M = I.
    Nearly equal eigenvalues (|μ1 − μ2| < EIGEN_CLUSTER_TOL·‖A‖) with A − νI of rank one
    give the jordan_block case.

    Raises SingularMatrix if |det A| ≤ SINGULAR_TOL·‖A‖².
    Warns IllConditionedWarning when ‖M‖‖M⁻¹‖ exceeds ILL_CONDITIONED.
    """
    A = np.asarray(A, dtype=complex)
    if A.shape != (2, 2):
        raise PreconditionError(f"jordanDecompose works on 2×2 matrices, got shape {A.shape}")
    scale = opNormInf(A)
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(det) <= settings.SINGULAR_TOL * scale ** 2:
        raise SingularMatrix(f"A is singular (|det A| = {abs(det):.3g})")

    identity = np.eye(2, dtype=complex)
    half = (A[0, 0] + A[1, 1]) / 2
    if A[0, 1] == 0 or A[1, 0] == 0:
        mu1, mu2 = A[0, 0], A[1, 1]
    else:
        s = cmath.sqrt((A[0, 0] - A[1, 1]) ** 2 / 4 + A[0, 1] * A[1, 0])
        mu1, mu2 = half + s, half - s

    if A[0, 1] == 0 and A[1, 0] == 0:
        case, M, eigenvalues = JordanCase.DIAGONAL, identity, (mu1, mu2)
    elif abs(mu1 - mu2) < settings.EIGEN_CLUSTER_TOL * scale:
        nu = (mu1 + mu2) / 2
        N = A - nu * identity
        if opNormInf(N) <= settings.EIGEN_CLUSTER_TOL * scale:
            case, M, eigenvalues = JordanCase.DIAGONAL, identity, (mu1, mu2)
        else:
            m2 = identity[:, 0] if maxVectorNorm(N[:, 0]) > settings.EIGEN_CLUSTER_TOL * scale else identity[:, 1]
            m1 = N @ m2
            case, M, eigenvalues = JordanCase.JORDAN_BLOCK, np.column_stack([m1, m2]), (nu,)
    else:
        M = np.column_stack([_eigenvector(A, mu1), _eigenvector(A, mu2)])
        case, eigenvalues = JordanCase.DIAGONAL, (mu1, mu2)

    conditioning = opNormInf(M) * opNormInf(np.linalg.inv(M))
    if conditioning > settings.ILL_CONDITIONED:
        warnings.warn(
            f"The Jordan basis is ill-conditioned (‖M‖‖M⁻¹‖ = {conditioning:.3g})",
            IllConditionedWarning,
        )
    return JordanForm(case, M, tuple(complex(m) for m in eigenvalues), float(conditioning))


def _magnusPropagators(system: LinearSystem, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    # Fourth order Magnus step from each start to the matching end
    h = ends - starts
    c1, c2 = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
    A1 = system.matricesAt(starts + c1 * h)
    A2 = system.matricesAt(starts + c2 * h)
    commutator = A2 @ A1 - A1 @ A2
    omega = h[:, None, None] / 2 * (A1 + A2) + np.sqrt(3) / 12 * (h ** 2)[:, None, None] * commutator
    return expm(omega)

def propagators(
    system: LinearSystem,
    starts: np.ndarray,
    ends: np.ndarray,
) -> np.ndarray:
    """
    T(ends[i], starts[i]) for every i, shape (n, d, d).
    Matrix exponentials for autonomous systems, one Magnus step otherwise,
    so intervals should be short for time-dependent A.
    """
    starts = np.asarray(starts, dtype=float).ravel()
    ends = np.asarray(ends, dtype=float).ravel()
    if system.isAutonomous:
        return expm(system.constant[None, :, :] * (ends - starts)[:, None, None])
    return _magnusPropagators(system, starts, ends)

def evolutionOperator(
    system: LinearSystem,
    t: float,
    s: float,
    settings: NumericSettings = NUMERICS,
) -> np.ndarray:
    """
    T(t, s), the evolution family of x' = A(t)x.

    Autonomous 2×2 systems use the Jordan form in closed form,
    other autonomous systems the matrix exponential, and time-dependent ones
    integrate X' = A(t)X from s to t (DOP853).
    """
    if t < 0 or s < 0:
        raise PreconditionError(f"Times must be nonnegative, got t = {t}, s = {s}")
    d = system.dimension
    if t == s:
        return np.eye(d)

    if system.isAutonomous:
        A = system.constant
        tau = t - s
        if d != 2:
            return expm(A * tau)
        try:
            form = jordanDecompose(A, settings)
        except SingularMatrix:
            return expm(A * tau)
        M, inverse = form.M, form.inverseM
        if form.case == JordanCase.DIAGONAL:
            middle = np.diag(np.exp(np.array(form.eigenvalues) * tau))
        else:
            middle = np.exp(form.nu * tau) * np.array([[1, tau], [0, 1]])
        result = M @ middle @ inverse
        if not np.iscomplexobj(A):
            result = result.real
        return result

    isComplex = system.isComplex
    def rhs(time: float, flat: np.ndarray) -> np.ndarray:
        X = flat.reshape(d, d)
        return (system.matrix(time) @ X).ravel()
    start = np.eye(d, dtype=complex if isComplex else float).ravel()
    solution = solve_ivp(
        rhs, (s, t), start, method="DOP853",
        rtol=settings.EVOLUTION_RTOL, atol=settings.EVOLUTION_ATOL,
    )
    if not solution.success:
        raise PreconditionError(f"Integration of the evolution family failed: {solution.message}")
    return solution.y[:, -1].reshape(d, d)


def spectralProjection(A: np.ndarray, settings: NumericSettings = NUMERICS) -> np.ndarray:
    """
    The projection onto the generalized eigenspace of the eigenvalues with
    negative real part, along the remaining one. Autonomous systems only.

    Raises NoDichotomy if an eigenvalue lies on the imaginary axis.
    """
    A = np.atleast_2d(np.asarray(A))
    eigenvalues = np.linalg.eigvals(A)
    scale = max(opNormInf(A), 1.0)
    if np.any(np.abs(eigenvalues.real) <= settings.EIGEN_CLUSTER_TOL * scale):
        raise NoDichotomy(f"A has eigenvalues on the imaginary axis: {eigenvalues}")

    T, Q, stable = schur(A.astype(complex), output="complex", sort="lhp")
    d = A.shape[0]
    P = np.zeros((d, d), dtype=complex)
    if stable > 0:
        P[:stable, :stable] = np.eye(stable)
        if stable < d:
            # T11 X − X T22 = T12 makes the projection commute with T
            X = solve_sylvester(T[:stable, :stable], -T[stable:, stable:], T[:stable, stable:])
            P[:stable, stable:] = X
    P = Q @ P @ Q.conj().T
    if not np.iscomplexobj(A):
        P = P.real
    return P


class DichotomySpec():
    """
    Constants of an exponential dichotomy:
        ‖T(t,s)P(s)‖ ≤ D e^{−λ(t−s)}        for t ≥ s
        ‖T(t,s)(I − P(s))‖ ≤ D e^{−λ(s−t)}  for t ≤ s

    The projection is a constant matrix or a callable t → P(t).
    kind is inferred for constant projections (I: contraction, 0: expansion)
    and must agree with P when given.
    validate=False skips the projection checks, to build a spec for verifyDichotomy to reject.
    """
    def __init__(
        self,
        D: float,
        lam: float,
        projection: Projection,
        kind: Optional[DichotomyKind] = None,
        validate: bool = True,
        settings: NumericSettings = NUMERICS,
    ):
        if not D > 0:
            raise PreconditionError(f"D must be positive, got {D}")
        if not lam > 0:
            raise PreconditionError(f"λ must be positive, got {lam}")
        self.D: float = float(D)
        self.lam: float = float(lam)

        self._function: Optional[MatrixFunction] = None
        self._constant: Optional[np.ndarray] = None
        if callable(projection):
            self._function = projection
            self.kind: DichotomyKind = DichotomyKind(kind) if kind is not None else DichotomyKind.GENERAL
            self.dimension: int = np.atleast_2d(projection(0.0)).shape[0]
            return

        P = np.atleast_2d(np.asarray(projection))
        if not np.iscomplexobj(P):
            P = P.astype(float)
        self._constant = P
        self.dimension = P.shape[0]
        inferred = projectionKind(P, settings)
        if validate and not isProjection(P, settings):
            raise PreconditionError("P is not a projection (P·P ≠ P)")
        if kind is not None and validate and DichotomyKind(kind) != inferred:
            raise PreconditionError(
                f"kind {DichotomyKind(kind).value} does not match the projection ({inferred.value})"
            )
        self.kind = DichotomyKind(kind) if kind is not None else inferred

    def __repr__(self) -> str:
        return f"DichotomySpec(D: {self.D:.6g}, λ: {self.lam:.6g}, kind: {self.kind.value})"

    @property
    def isConstantProjection(self) -> bool:
        return self._constant is not None

    @property
    def P(self) -> np.ndarray:
        if self._constant is None:
            raise PreconditionError("This dichotomy has a time-dependent projection")
        return self._constant

    def projectionAt(self, t: float) -> np.ndarray:
        if self._constant is not None:
            return self._constant
        return np.atleast_2d(np.asarray(self._function(float(t))))  # type: ignore

    def projectionsAt(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self._constant is not None:
            return np.broadcast_to(self._constant, times.shape + self._constant.shape)
        return np.stack([self.projectionAt(t) for t in times.ravel()]).reshape(
            times.shape + (self.dimension, self.dimension)
        )

    @property
    def contractionCoefficient(self) -> float:
        """
        2D for general dichotomies, D for contractions and expansions:
        the smallness condition reads c·contractionCoefficient < λ
        """
        if self.kind == DichotomyKind.GENERAL:
            return 2 * self.D
        return self.D

    def toJson(self) -> JsonDict:
        return {
            "D": self.D,
            "lambda": self.lam,
            "kind": self.kind.value,
            "P": None if self._constant is None else complexPairs(self._constant),
        }


def isProjection(P: np.ndarray, settings: NumericSettings = NUMERICS) -> bool:
    return bool(opNormInf(P @ P - P) <= settings.PROJECTION_TOL * max(1.0, opNormInf(P)))

def projectionKind(P: np.ndarray, settings: NumericSettings = NUMERICS) -> DichotomyKind:
    identity = np.eye(P.shape[0])
    if opNormInf(P - identity) <= settings.PROJECTION_TOL:
        return DichotomyKind.CONTRACTION
    if opNormInf(P) <= settings.PROJECTION_TOL:
        return DichotomyKind.EXPANSION
    return DichotomyKind.GENERAL


class EnvelopeSamples(NamedTuple):
    """
    Sampled norms: stable[i] = ‖T(t,s)P(s)‖ at lag stableLags[i] = t − s ≥ 0,
    unstable[i] = ‖T(s,t)(I − P(t))‖ at lag unstableLags[i] = t − s ≥ 0
    """
    stableLags: np.ndarray
    stable: np.ndarray
    unstableLags: np.ndarray
    unstable: np.ndarray
    commutationError: float

def _spectralBound(A: np.ndarray) -> float:
    return float(np.min(np.abs(np.linalg.eigvals(A).real)))

def _defaultLags(system: LinearSystem, settings: NumericSettings) -> np.ndarray:
    bound = _spectralBound(system.constant)
    if bound <= settings.LAMBDA_MIN:
        raise NoDichotomy("A has an eigenvalue on the imaginary axis")
    return np.linspace(0, settings.TAIL_HORIZON / bound, settings.FIT_SAMPLES)

def envelopeSamples(
    system: LinearSystem,
    projection: Projection,
    grid: Optional[np.ndarray] = None,
    settings: NumericSettings = NUMERICS,
) -> EnvelopeSamples:
    """
    Norms of the projected evolution on a sample grid.

    Autonomous systems with a constant projection only depend on the lag t − s,
    and the grid is read as lags. Otherwise the grid holds times and every pair
    t ≥ s is sampled.
    """
    d = system.dimension
    identity = np.eye(d)
    constantP = not callable(projection)

    if system.isAutonomous and constantP:
        A = system.constant
        P = np.atleast_2d(np.asarray(projection))
        lags = _defaultLags(system, settings) if grid is None else np.asarray(grid, dtype=float)
        forward = expm(A[None, :, :] * lags[:, None, None])
        backward = expm(-A[None, :, :] * lags[:, None, None])
        commutation = opNormInf(A @ P - P @ A) / max(1.0, opNormInf(A))
        return EnvelopeSamples(
            lags, opNormInf(forward @ P), lags, opNormInf(backward @ (identity - P)), float(commutation)
        )

    times = (
        np.linspace(0, settings.TAIL_HORIZON, settings.FIT_PAIR_NODES)
        if grid is None else np.asarray(grid, dtype=float)
    )
    projections = np.stack([
        np.atleast_2d(projection(t)) if not constantP else np.atleast_2d(projection)  # type: ignore
        for t in times
    ])
    steps = [np.eye(d)]
    for k in range(len(times) - 1):
        steps.append(evolutionOperator(system, times[k + 1], times[k], settings))

    lags: List[float] = []
    stable: List[float] = []
    unstable: List[float] = []
    commutation = 0.0
    for j in tqdm(
        range(len(times)),
        desc="Sampling evolution: ",
        unit="node",
        disable=not settings.SHOW_PROGRESS,
    ):
        T = np.eye(d)
        for i in range(j, len(times)):
            if i > j:
                T = steps[i] @ T
            lags.append(times[i] - times[j])
            stable.append(opNormInf(T @ projections[j]))
            unstable.append(opNormInf(np.linalg.solve(T, identity - projections[i])))
            error = opNormInf(T @ projections[j] - projections[i] @ T) / max(1.0, opNormInf(T))
            commutation = max(commutation, error)
    lagArray = np.array(lags)
    return EnvelopeSamples(lagArray, np.array(stable), lagArray, np.array(unstable), float(commutation))


def _envelope(samples: EnvelopeSamples, lam: float, settings: NumericSettings) -> Tuple[float, bool]:
    """
    D(λ) = max n(τ)e^{λτ} over both parts, and whether λ is admissible:
    the maximum must not be reached by growth in the final window of lags
    """
    D = 0.0
    admissible = True
    for lags, norms in (
        (samples.stableLags, samples.stable),
        (samples.unstableLags, samples.unstable),
    ):
        if len(norms) == 0 or np.all(norms == 0):
            continue
        values = norms * np.exp(lam * lags)
        window = lags >= (1 - settings.FIT_WINDOW) * lags.max()
        head = values[~window].max() if np.any(~window) else 0.0
        end = values[window].max()
        if end > head * (1 + 1e-9):
            admissible = False
        D = max(D, float(values.max()))
    return D, admissible

def fitDichotomy(
    system: LinearSystem,
    projection: Projection,
    grid: Optional[np.ndarray] = None,
    settings: NumericSettings = NUMERICS,
) -> DichotomySpec:
    """
    Fits dichotomy constants to the sampled evolution: the largest admissible λ
    on a log-spaced candidate grid (refined by bisection), then the smallest D for it.

    Raises PreconditionError if P is not a projection or does not commute with
    the evolution, NoDichotomy if no λ > LAMBDA_MIN fits.
    """
    if not callable(projection):
        P = np.atleast_2d(np.asarray(projection))
        if not isProjection(P, settings):
            raise PreconditionError("P is not a projection (P·P ≠ P)")
    samples = envelopeSamples(system, projection, grid, settings)
    if samples.commutationError > settings.COMMUTATION_TOL:
        raise PreconditionError(
            f"P does not commute with the evolution (error {samples.commutationError:.3g})"
        )

    if system.isAutonomous:
        upper = _spectralBound(system.constant)
    else:
        rates = []
        for lags, norms in ((samples.stableLags, samples.stable), (samples.unstableLags, samples.unstable)):
            positive = (lags > 0) & (norms > 0)
            if np.any(positive):
                rates.append(np.max(-np.log(norms[positive]) / lags[positive]))
        upper = min(rates) if rates else settings.LAMBDA_MIN
    upper = max(upper, settings.LAMBDA_MIN)

    candidates = np.geomspace(settings.LAMBDA_MIN, upper, settings.LAMBDA_CANDIDATES)
    best = -1
    for i, lam in enumerate(tqdm(
        candidates,
        desc="Fitting dichotomy: ",
        unit="λ",
        disable=not settings.SHOW_PROGRESS,
    )):
        if _envelope(samples, lam, settings)[1]:
            best = i
    if best < 0:
        raise NoDichotomy("No exponential envelope fits the sampled evolution")

    lam = float(candidates[best])
    if best < len(candidates) - 1:
        low, high = lam, float(candidates[best + 1])
        for _ in range(60):
            middle = (low + high) / 2
            if _envelope(samples, middle, settings)[1]:
                low = middle
            else:
                high = middle
            if high - low <= 1e-12 * high:
                break
        lam = low

    D, _ = _envelope(samples, lam, settings)
    if callable(projection):
        spec = DichotomySpec(D, lam, projection, kind=DichotomyKind.GENERAL, settings=settings)
    else:
        spec = DichotomySpec(D, lam, projection, settings=settings)
    logger.info("Fitted %s", spec)
    return spec


class DichotomyReport(NamedTuple):
    projectionOk: bool
    commutationOk: bool
    worstSlackStable: float
    worstSlackUnstable: float
    violations: List[str]

    @property
    def holds(self) -> bool:
        return len(self.violations) == 0

    def toJson(self) -> JsonDict:
        return {
            "projection_ok": self.projectionOk,
            "commutation_ok": self.commutationOk,
            "worst_slack_stable": self.worstSlackStable,
            "worst_slack_unstable": self.worstSlackUnstable,
            "violations": self.violations,
            "holds": self.holds,
        }

# Violations listed individually in a report, the rest are counted
MAX_LISTED_VIOLATIONS = 10

def verifyDichotomy(
    spec: DichotomySpec,
    system: LinearSystem,
    grid: Optional[np.ndarray] = None,
    settings: NumericSettings = NUMERICS,
) -> DichotomyReport:
    """
    Checks the projection, its commutation with the evolution and both envelope
    inequalities on the samples. Slack is n(τ) − De^{−λτ}: positive means violated.
    Never raises on a failed check, the report lists it.
    """
    violations: List[str] = []
    projection: Projection = spec.P if spec.isConstantProjection else spec.projectionAt

    projectionOk = True
    if spec.isConstantProjection:
        projectionOk = isProjection(spec.P, settings)
    else:
        times = np.linspace(0, settings.TAIL_HORIZON, settings.FIT_PAIR_NODES) if grid is None else grid
        projectionOk = all(isProjection(spec.projectionAt(t), settings) for t in times)
    if not projectionOk:
        violations.append("projection: P·P ≠ P")
        return DichotomyReport(False, False, float("nan"), float("nan"), violations)

    if grid is None and system.isAutonomous and spec.isConstantProjection:
        bound = _spectralBound(system.constant)
        horizon = settings.TAIL_HORIZON / (bound if bound > settings.LAMBDA_MIN else spec.lam)
        grid = np.linspace(0, horizon, settings.FIT_SAMPLES)
    samples = envelopeSamples(system, projection, grid, settings)
    commutationOk = samples.commutationError <= settings.COMMUTATION_TOL
    if not commutationOk:
        violations.append(f"commutation: error {samples.commutationError:.3g}")

    worst: List[float] = []
    count = 0
    for name, lags, norms in (
        ("ed1", samples.stableLags, samples.stable),
        ("ed2", samples.unstableLags, samples.unstable),
    ):
        bounds = spec.D * np.exp(-spec.lam * lags)
        slack = norms - bounds
        worst.append(float(slack.max()) if len(slack) else 0.0)
        failed = slack > settings.HOLDS_ABS_TOL + settings.HOLDS_REL_TOL * bounds
        for i in np.flatnonzero(failed):
            count += 1
            if count <= MAX_LISTED_VIOLATIONS:
                violations.append(f"{name}: lag {lags[i]:.6g}, norm {norms[i]:.6g} > bound {bounds[i]:.6g}")
    if count > MAX_LISTED_VIOLATIONS:
        violations.append(f"... {count - MAX_LISTED_VIOLATIONS} more envelope violations")

    return DichotomyReport(projectionOk, commutationOk, worst[0], worst[1], violations)
