from __future__ import annotations
from fractions import Fraction
from functools import total_ordering
from typing import (
    Any,
    Dict,
    Iterable,
    NamedTuple,
    Optional,
    Union,
)
from enum import Enum
import math

import numpy as np

from .errors import PreconditionError

JsonDict = Dict[str, Any]
Number = Union[int, float, Fraction]

class ValuedEnum(Enum):
    @classmethod
    def values(cls) -> Iterable[str]:
        for x in cls:
            yield x.value


class DichotomyKind(ValuedEnum):
    CONTRACTION = "contraction"
    EXPANSION = "expansion"
    GENERAL = "general"

class KernelSide(ValuedEnum):
    CAUSAL = "causal"
    ANTICAUSAL = "anticausal"

class VectorNorm(ValuedEnum):
    MAX = "max"
    EUCLIDEAN = "euclidean"

class Interpolation(ValuedEnum):
    CUBIC = "cubic"
    LINEAR = "linear"

class JordanCase(ValuedEnum):
    DIAGONAL = "diagonal"
    JORDAN_BLOCK = "jordan_block"

class DerivativeSource(ValuedEnum):
    ANALYTIC = "analytic"
    SPLINE = "spline"
    FINITE_DIFFERENCE = "finite-difference"

class OutputFormat(ValuedEnum):
    JSON = "json"
    CSV = "csv"

class SweepAxis(ValuedEnum):
    GAMMA = "gamma"
    DELTA = "delta"
    U = "u"
    PQ = "pq"

class ParameterKind(ValuedEnum):
    NUMBER = "number"
    POSITIVE = "positive"
    EXPONENT = "exponent"
    COUNT = "count"
    POSITIVE_LIST = "positive_list"


INFINITY_TOKENS = ("inf", "+inf", "infinity", "∞")

@total_ordering
class Exponent():
    """
    An extended real in [1, ∞] indexing an L^p space.

    Finite values are stored as exact fractions, so that the conjugate relation
    1/p + 1 = 1/q + 1/r is solved without rounding.
    Infinity is a separate variant (_finite is None), never a float sentinel:
    math.inf is only accepted as an input spelling.
    """

    def __init__(self, value: Union[Number, str, Exponent]):
        self._finite: Optional[Fraction]
        if isinstance(value, Exponent):
            self._finite = value._finite
        elif isinstance(value, str):
            token = value.strip().lower()
            if token in INFINITY_TOKENS:
                self._finite = None
            else:
                try:
                    self._finite = Fraction(token)
                except ValueError:
                    raise PreconditionError(f"Cannot read '{value}' as an exponent")
        elif isinstance(value, float):
            if math.isinf(value) and value > 0:
                self._finite = None
            elif math.isfinite(value):
                # Floats like 1.5 or 4/3 come back as the short fraction the user meant
                self._finite = Fraction(value).limit_denominator(1_000_000)
            else:
                raise PreconditionError(f"Cannot read {value} as an exponent")
        elif isinstance(value, (int, Fraction)) and not isinstance(value, bool):
            self._finite = Fraction(value)
        else:
            raise PreconditionError(f"Cannot read {value!r} as an exponent")

        if self._finite is not None and self._finite < 1:
            raise PreconditionError(f"Exponents must be at least 1, got {self._finite}")

    @classmethod
    def infinity(cls) -> Exponent:
        return cls("inf")

    @property
    def isInfinite(self) -> bool:
        return self._finite is None

    @property
    def value(self) -> Fraction:
        """
        The finite value. Raises AttributeError on infinity,
        so that callers have to branch explicitly.
        """
        if self._finite is None:
            raise AttributeError("The infinite exponent has no finite value")
        return self._finite

    def reciprocal(self) -> Fraction:
        """
        1/value, with 1/∞ := 0
        """
        if self._finite is None:
            return Fraction(0)
        return 1 / self._finite

    def __float__(self) -> float:
        if self._finite is None:
            return math.inf
        return float(self._finite)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Exponent):
            try:
                other = Exponent(other)  # type: ignore
            except PreconditionError:
                return NotImplemented
        return self._finite == other._finite

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, Exponent):
            other = Exponent(other)  # type: ignore
        # Ordering by reciprocals avoids a special case for infinity
        return self.reciprocal() > other.reciprocal()

    def __hash__(self) -> int:
        return hash(("Exponent", self._finite))

    def __str__(self) -> str:
        if self._finite is None:
            return "inf"
        return str(self._finite)

    def __repr__(self) -> str:
        return f"Exponent({self})"

    def toJson(self) -> Union[float, str]:
        if self._finite is None:
            return "inf"
        if self._finite.denominator == 1:
            return int(self._finite)
        return float(self._finite)


class ExpTerm(NamedTuple):
    """
    One term v·τ^k·e^{−κτ} of an analytic tail, with τ = t − T_max.

    The coefficient is a d-vector (real or complex), the rate κ may be complex
    but must have a positive real part.
    """
    coefficient: np.ndarray
    rate: complex
    power: int = 0

    def scaled(self, factor: complex) -> ExpTerm:
        return ExpTerm(self.coefficient * factor, self.rate, self.power)

    def mapped(self, matrix: np.ndarray) -> ExpTerm:
        return ExpTerm(matrix @ self.coefficient, self.rate, self.power)

    def at(self, tau: np.ndarray) -> np.ndarray:
        """
        Values of the term at the offsets tau, shape (len(tau), d)
        """
        tau = np.asarray(tau, dtype=float)
        rate = complex(self.rate)
        if rate.imag == 0:
            factor = tau ** self.power * np.exp(-rate.real * tau)
        else:
            factor = tau ** self.power * np.exp(-rate * tau)
        return factor[:, None] * self.coefficient[None, :]

    @property
    def decay(self) -> float:
        """
        Real part of the rate
        """
        return complex(self.rate).real

    def toJson(self) -> JsonDict:
        return {
            "coefficient": complexPairs(self.coefficient),
            "rate": [complex(self.rate).real, complex(self.rate).imag],
            "power": self.power,
        }

    @classmethod
    def fromJson(cls, data: JsonDict) -> ExpTerm:
        rate = data["rate"]
        return ExpTerm(
            coefficient=fromComplexPairs(data["coefficient"], ndim=1),
            rate=complex(rate[0], rate[1]) if isinstance(rate, list) else complex(rate),
            power=int(data.get("power", 0)),
        )


def complexPairs(array: np.ndarray) -> Any:
    """
    Nested lists of [re, im] pairs, row-major, for JSON output
    """
    array = np.asarray(array)
    if array.ndim == 0:
        value = complex(array)
        return [value.real, value.imag]
    return [complexPairs(x) for x in array]

def fromComplexPairs(data: Any, ndim: int = 1) -> np.ndarray:
    """
    Inverse of complexPairs for an array of ndim dimensions.
    Plain real entries (one dimension less of nesting) are accepted too.
    The result is real when every imaginary part is zero.

    Raises ValueError if the nesting does not match ndim.
    """
    raw = np.array(data, dtype=float)
    if raw.ndim == ndim + 1 and raw.shape[-1] == 2:
        array = raw[..., 0] + 1j * raw[..., 1]
    elif raw.ndim == ndim:
        array = raw.astype(complex)
    else:
        raise ValueError(f"Expected a {ndim}-dimensional array, optionally of [re, im] pairs")
    if np.all(array.imag == 0):
        return array.real
    return array
