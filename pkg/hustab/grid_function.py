from __future__ import annotations
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union
import csv
import io
import logging

import numpy as np
from scipy.interpolate import CubicSpline

from .classes import (
    DerivativeSource,
    ExpTerm,
    Interpolation,
    JsonDict,
    VectorNorm,
    complexPairs,
    fromComplexPairs,
)
from .errors import DivergentNorm, PreconditionError
from .numerics import NumericSettings, NUMERICS
from .other_constants import VERSION

logger = logging.getLogger(__name__)

# None means "unknown", the empty tuple means "exactly zero after T_max"
Tail = Optional[Tuple[ExpTerm, ...]]
ZERO_TAIL: Tuple[ExpTerm, ...] = ()

def pointNorms(values: np.ndarray, norm: VectorNorm = VectorNorm.MAX) -> np.ndarray:
    """
    Pointwise vector norms of an array of shape (..., d)
    """
    if norm == VectorNorm.MAX:
        return np.max(np.abs(values), axis=-1)
    return np.linalg.norm(values, axis=-1)

def mergeTerms(terms: Iterable[ExpTerm]) -> Tuple[ExpTerm, ...]:
    """
    Sums the coefficients of terms sharing rate and power,
    and drops terms whose coefficient is exactly zero.
    Keeps the order of first appearance.
    """
    merged: Dict[Tuple[float, float, int], ExpTerm] = {}
    for term in terms:
        rate = complex(term.rate)
        key = (round(rate.real, 12), round(rate.imag, 12), term.power)
        if key in merged:
            old = merged[key]
            merged[key] = ExpTerm(old.coefficient + term.coefficient, old.rate, old.power)
        else:
            merged[key] = ExpTerm(np.asarray(term.coefficient), term.rate, term.power)
    return tuple(t for t in merged.values() if np.any(t.coefficient != 0))

def horizonFor(rates: Iterable[float], settings: NumericSettings = NUMERICS) -> float:
    """
    The truncation time T_max: the configured one, or TAIL_HORIZON over the slowest rate
    """
    if settings.T_MAX is not None:
        return float(settings.T_MAX)
    slowest = min(float(r) for r in rates)
    if slowest <= 0:
        raise PreconditionError(f"Cannot choose a horizon for a non-decaying rate {slowest}")
    return settings.TAIL_HORIZON / slowest

def uniformGrid(tMax: float, nodes: int) -> np.ndarray:
    return np.linspace(0.0, tMax, nodes)


class GridFunction():
    """
    A vector valued function sampled on a grid 0 = t_0 < ... < t_N = T_max,
    with an optional description of what happens after T_max.

    - values has shape (N+1, d), real or complex;
    - derivative, when present, has the same shape;
    - tail is a tuple of ExpTerm (the function after T_max is their sum),
      the empty tuple for an exact zero, or None when unknown.

    Instances are never modified in place: every operation returns a new one.
    """
    def __init__(
        self,
        grid: Union[np.ndarray, Sequence[float]],
        values: Union[np.ndarray, Sequence[float]],
        derivative: Optional[np.ndarray] = None,
        tail: Tail = None,
        derivativeSource: Optional[DerivativeSource] = None,
    ):
        self.grid: np.ndarray = np.asarray(grid, dtype=float)
        values = np.asarray(values)
        if values.ndim == 1:
            values = values[:, None]
        if not np.iscomplexobj(values):
            values = values.astype(float)
        self.values: np.ndarray = values

        if self.grid.ndim != 1 or len(self.grid) < 2:
            raise PreconditionError("A grid needs at least two nodes")
        if self.grid[0] != 0:
            raise PreconditionError(f"Grids start at 0, this one starts at {self.grid[0]}")
        if not np.all(np.diff(self.grid) > 0):
            raise PreconditionError("Grid nodes must be strictly increasing")
        if self.values.ndim != 2 or len(self.values) != len(self.grid):
            raise PreconditionError(
                f"Expected {len(self.grid)} values, got an array of shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise PreconditionError("Grid function values must be finite")

        self.derivative: Optional[np.ndarray] = None
        self.derivativeSource: Optional[DerivativeSource] = None
        if derivative is not None:
            derivative = np.asarray(derivative)
            if derivative.ndim == 1:
                derivative = derivative[:, None]
            if derivative.shape != self.values.shape:
                raise PreconditionError("Derivative and values must have the same shape")
            self.derivative = derivative
            self.derivativeSource = derivativeSource or DerivativeSource.ANALYTIC

        if tail is not None:
            tail = tuple(tail)
            for term in tail:
                if term.decay <= 0:
                    raise PreconditionError(f"Tail rates need a positive real part, got {term.rate}")
                if np.shape(term.coefficient) != (self.dimension,):
                    raise PreconditionError("Tail coefficients must be d-vectors")
        self.tail: Tail = tail

    @classmethod
    def fromCallable(
        cls,
        function: Callable[[np.ndarray], np.ndarray],
        grid: np.ndarray,
        derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        tail: Tail = None,
    ) -> GridFunction:
        """
        Samples a vectorized function of time (returning shape (N+1,) or (N+1, d))
        """
        grid = np.asarray(grid, dtype=float)
        return GridFunction(
            grid,
            function(grid),
            derivative=None if derivative is None else derivative(grid),
            tail=tail,
        )

    @classmethod
    def zeros(cls, grid: np.ndarray, dimension: int = 1) -> GridFunction:
        grid = np.asarray(grid, dtype=float)
        return GridFunction(
            grid,
            np.zeros((len(grid), dimension)),
            derivative=np.zeros((len(grid), dimension)),
            tail=ZERO_TAIL,
        )

    def __repr__(self) -> str:
        tail = "unknown" if self.tail is None else f"{len(self.tail)} terms"
        return f"GridFunction(d: {self.dimension}, nodes: {len(self.grid)}, T_max: {self.tMax}, tail: {tail})"

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def tMax(self) -> float:
        return float(self.grid[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.grid)

    @property
    def isUniform(self) -> bool:
        steps = self.steps
        return bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0))

    @property
    def isComplex(self) -> bool:
        return np.iscomplexobj(self.values)

    def pointNorms(self, norm: VectorNorm = VectorNorm.MAX) -> np.ndarray:
        return pointNorms(self.values, norm)

    def sameGrid(self, other: GridFunction) -> bool:
        return self.grid is other.grid or np.array_equal(self.grid, other.grid)

    def _checkGrid(self, other: GridFunction) -> None:
        if not self.sameGrid(other):
            raise PreconditionError("Grid functions live on different grids")

    # Arithmetic

    def __add__(self, other: GridFunction) -> GridFunction:
        self._checkGrid(other)
        derivative = None
        if self.derivative is not None and other.derivative is not None:
            derivative = self.derivative + other.derivative
        tail = None
        if self.tail is not None and other.tail is not None:
            tail = mergeTerms(self.tail + other.tail)
        return GridFunction(
            self.grid,
            self.values + other.values,
            derivative=derivative,
            tail=tail,
            derivativeSource=self._combinedSource(other),
        )

    def __neg__(self) -> GridFunction:
        return self * -1.0

    def __sub__(self, other: GridFunction) -> GridFunction:
        return self + (-other)

    def __mul__(self, factor: complex) -> GridFunction:
        if not np.isscalar(factor):
            return NotImplemented
        return GridFunction(
            self.grid,
            self.values * factor,
            derivative=None if self.derivative is None else self.derivative * factor,
            tail=None if self.tail is None else mergeTerms(t.scaled(factor) for t in self.tail),
            derivativeSource=self.derivativeSource,
        )

    __rmul__ = __mul__

    def mapped(self, matrix: np.ndarray) -> GridFunction:
        """
        Pointwise product M·g(t) with a constant matrix
        """
        matrix = np.asarray(matrix)
        return GridFunction(
            self.grid,
            self.values @ matrix.T,
            derivative=None if self.derivative is None else self.derivative @ matrix.T,
            tail=None if self.tail is None else mergeTerms(t.mapped(matrix) for t in self.tail),
            derivativeSource=self.derivativeSource,
        )

    def _combinedSource(self, other: GridFunction) -> Optional[DerivativeSource]:
        sources = {self.derivativeSource, other.derivativeSource}
        for source in (DerivativeSource.FINITE_DIFFERENCE, DerivativeSource.SPLINE, DerivativeSource.ANALYTIC):
            if source in sources:
                return source
        return None

    def withTail(self, tail: Tail) -> GridFunction:
        return GridFunction(
            self.grid,
            self.values,
            derivative=self.derivative,
            tail=tail,
            derivativeSource=self.derivativeSource,
        )

    # Interpolation

    def _spline(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.isComplex:
            real = CubicSpline(self.grid, self.values.real, axis=0)
            imag = CubicSpline(self.grid, self.values.imag, axis=0)
            return lambda t: real(t) + 1j * imag(t)
        return CubicSpline(self.grid, self.values, axis=0)

    def interpolant(self, settings: NumericSettings = NUMERICS) -> Callable[[np.ndarray], np.ndarray]:
        """
        A callable returning the interpolated values, shape (len(t), d), for t in [0, T_max].
        Falls back to linear interpolation on grids with fewer than four nodes.
        """
        if settings.INTERPOLATION == Interpolation.CUBIC and len(self.grid) >= 4:
            return self._spline()
        grid, values = self.grid, self.values
        def linear(t: np.ndarray) -> np.ndarray:
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return np.stack([np.interp(t, grid, values[:, i]) for i in range(values.shape[1])], axis=-1)
        return linear

    def sampleIntervals(self, theta: np.ndarray, settings: NumericSettings = NUMERICS) -> np.ndarray:
        """
        Values at t_k + θ_j·(t_{k+1} − t_k) for every interval k and every θ_j in [0, 1].
        Returns shape (N, len(θ), d).
        """
        theta = np.asarray(theta, dtype=float)
        if settings.INTERPOLATION == Interpolation.LINEAR or len(self.grid) < 4:
            left = self.values[:-1, None, :]
            right = self.values[1:, None, :]
            return (1 - theta)[None, :, None] * left + theta[None, :, None] * right
        times = self.grid[:-1, None] + theta[None, :] * self.steps[:, None]
        sampled = self._spline()(times.ravel())
        return sampled.reshape(len(self.grid) - 1, len(theta), self.dimension)

    def tailValues(self, tau: np.ndarray, settings: NumericSettings = NUMERICS) -> np.ndarray:
        """
        Values at T_max + τ from the (possibly inferred) tail, shape (len(τ), d)
        """
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        terms = self.resolvedTail(settings)
        out = np.zeros((len(tau), self.dimension), dtype=self.values.dtype)
        for term in terms:
            value = term.at(tau)
            if np.iscomplexobj(value) and not np.iscomplexobj(out):
                out = out.astype(complex)
            out = out + value
        return out

    def evaluate(self, times: np.ndarray, settings: NumericSettings = NUMERICS) -> np.ndarray:
        """
        Values at arbitrary times t ≥ 0: interpolated inside the grid, from the tail after it
        """
        times = np.atleast_1d(np.asarray(times, dtype=float))
        inside = times <= self.tMax
        out = np.zeros((len(times), self.dimension), dtype=complex if self.isComplex else float)
        if np.any(inside):
            out[inside] = self.interpolant(settings)(times[inside])
        if np.any(~inside):
            tailValues = self.tailValues(times[~inside] - self.tMax, settings)
            if np.iscomplexobj(tailValues) and not np.iscomplexobj(out):
                out = out.astype(complex)
            out[~inside] = tailValues
        return out

    def restricted(self, tEnd: float, settings: NumericSettings = NUMERICS) -> GridFunction:
        """
        The function on [0, tEnd], with tEnd added as a node if needed.
        The tail of the result is unknown.
        """
        if tEnd >= self.tMax:
            return self.withTail(None)
        keep = self.grid < tEnd
        grid = np.append(self.grid[keep], tEnd)
        endValue = self.interpolant(settings)(np.array([tEnd]))
        values = np.concatenate([self.values[keep], endValue], axis=0)
        return GridFunction(grid, values, tail=None)

    # Tails and derivatives

    def resolvedTail(self, settings: NumericSettings = NUMERICS) -> Tuple[ExpTerm, ...]:
        """
        The tail if known, otherwise an exponential fitted on the end of the grid.

        Raises DivergentNorm if the end of the grid is not decaying.
        """
        if self.tail is not None:
            return self.tail
        return self._inferTail(settings)

    def _inferTail(self, settings: NumericSettings) -> Tuple[ExpTerm, ...]:
        norms = self.pointNorms(settings.POINT_NORM)
        peak = float(norms.max())
        if peak == 0 or norms[-1] <= settings.TAIL_NEGLIGIBLE * peak:
            return ZERO_TAIL

        start = int(np.searchsorted(self.grid, self.tMax * (1 - settings.TAIL_FIT_FRACTION)))
        start = min(start, len(self.grid) - 3)
        window = self.grid[start:]
        # Decreasing envelope, so that zero crossings do not break the log fit
        envelope = np.maximum.accumulate(norms[start:][::-1])[::-1]
        slope = np.polyfit(window - window[0], np.log(envelope), 1)[0]
        rate = -float(slope)
        if rate <= settings.LAMBDA_MIN:
            raise DivergentNorm(
                f"The function is not decaying at T_max = {self.tMax:g} "
                f"(fitted rate {rate:.3g}): give an explicit tail or a longer grid"
            )
        logger.debug("Inferred an exponential tail of rate %.6g at T_max = %g", rate, self.tMax)
        return (ExpTerm(self.values[-1].copy(), rate, 0),)

    def withDerivative(self) -> GridFunction:
        """
        Adds a derivative when missing: differentiated cubic spline,
        or finite differences on grids with fewer than four nodes
        """
        if self.derivative is not None:
            return self
        if len(self.grid) >= 4:
            values = CubicSpline(self.grid, self.values.real, axis=0).derivative()(self.grid)
            if self.isComplex:
                imag = CubicSpline(self.grid, self.values.imag, axis=0).derivative()
                values = values + 1j * imag(self.grid)
            source = DerivativeSource.SPLINE
        else:
            values = np.gradient(self.values, self.grid, axis=0)
            source = DerivativeSource.FINITE_DIFFERENCE
            logger.warning("Only %d nodes: differentiating by finite differences", len(self.grid))
        return GridFunction(
            self.grid, self.values, derivative=values, tail=self.tail, derivativeSource=source
        )

    # Serialization

    def toJson(self) -> JsonDict:
        def array(a: np.ndarray) -> object:
            return complexPairs(a) if np.iscomplexobj(a) else a.tolist()
        return {
            "version": VERSION,
            "grid": self.grid.tolist(),
            "values": array(self.values),
            "derivative": None if self.derivative is None else array(self.derivative),
            "derivative_source": None if self.derivativeSource is None else self.derivativeSource.value,
            "tail": None if self.tail is None else [t.toJson() for t in self.tail],
        }

    @classmethod
    def fromJson(cls, data: JsonDict) -> GridFunction:
        tail = data.get("tail")
        derivative = data.get("derivative")
        source = data.get("derivative_source")
        return GridFunction(
            data["grid"],
            fromComplexPairs(data["values"], ndim=2),
            derivative=None if derivative is None else fromComplexPairs(derivative, ndim=2),
            tail=None if tail is None else tuple(ExpTerm.fromJson(t) for t in tail),
            derivativeSource=None if source is None else DerivativeSource(source),
        )

    def csvHeader(self) -> List[str]:
        header = ["t"]
        for i in range(1, self.dimension + 1):
            header += [f"v{i}_re", f"v{i}_im"]
        return header

    def toCsv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.csvHeader())
        for t, row in zip(self.grid, self.values):
            line = [repr(float(t))]
            for x in row:
                line += [repr(float(np.real(x))), repr(float(np.imag(x)))]
            writer.writerow(line)
        return out.getvalue()

    @classmethod
    def fromCsv(cls, text: str, tail: Tail = None) -> GridFunction:
        """
        Reads the toCsv format. Columns without an "_im" partner are read as real.
        """
        reader = csv.reader(io.StringIO(text))
        header = [h.strip() for h in next(reader)]
        if not header or header[0] != "t":
            raise PreconditionError("The first csv column must be 't'")
        rows = np.array([[float(x) for x in row] for row in reader if row], dtype=float)
        grid = rows[:, 0]
        columns: List[np.ndarray] = []
        i = 1
        while i < len(header):
            if header[i].endswith("_re") and i + 1 < len(header) and header[i + 1].endswith("_im"):
                columns.append(rows[:, i] + 1j * rows[:, i + 1])
                i += 2
            else:
                columns.append(rows[:, i].astype(complex))
                i += 1
        values = np.stack(columns, axis=-1)
        if np.all(values.imag == 0):
            values = values.real
        return GridFunction(grid, values, tail=tail)
