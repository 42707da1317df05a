from __future__ import annotations
from copy import deepcopy
from pathlib import Path
from typing import Any, List, NamedTuple, Optional, Union
from typing_extensions import Self
import json
import logging

import numpy as np

from .classes import Exponent, ExpTerm, JsonDict, ParameterKind, SweepAxis, fromComplexPairs
from .errors import ConfigError, PreconditionError
from .exponents_norms import ConjugateTriple
from .grid_function import GridFunction, horizonFor, uniformGrid
from .linear_evolution import DichotomySpec, LinearSystem, fitDichotomy, spectralProjection
from .numerics import NumericSettings, NUMERICS
from .other_constants import SCENARIO_NAMES
from .scenarios import SCENARIO_PARAMETERS
from .shadowing import PseudoSolution, SemilinearProblem, sineNonlinearity

logger = logging.getLogger(__name__)

NONLINEARITY_TYPES = ["sine"]
PSEUDOSOLUTION_TYPES = ["exponential", "csv"]

# Every key a RunConfig file may contain, with its default.
# Printed by --print-defaults.
DEFAULT_CONFIG: JsonDict = {
    "problem": {
        "matrix": [[1.0]],
        "projection": None,
        "dichotomy": None,
        "c": None,
        "nonlinearity": None,
    },
    "p": 2,
    "q": 2,
    "pseudosolution": {
        "type": "exponential",
        "amplitude": 1.0,
        "gamma": 1.0,
        "path": None,
        "epsilon": None,
    },
    "gamma_grid": None,
    "u_grid": None,
    "delta": None,
    "sweep": {"axis": "gamma", "values": None},
    "scenario": {"name": "sharpness", "parameters": {}},
    "numerics": {},
    "seed": 0,
}


def _section(data: JsonDict, key: str) -> JsonDict:
    """
    A top-level object completed with its defaults
    """
    value = data.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError("Expected an object", field=key)
    unknown = set(value) - set(DEFAULT_CONFIG[key])
    if unknown:
        raise ConfigError(f"Unknown keys {sorted(unknown)}", field=key)
    return {**DEFAULT_CONFIG[key], **value}

def _get(data: JsonDict, key: str, path: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError("Expected an object", field=path)
    return data.get(key, None)

def _number(value: Any, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Expected a number, got {value!r}", field=path)
    if positive and not value > 0:
        raise ConfigError(f"Expected a positive number, got {value}", field=path)
    return float(value)

def _exponent(value: Any, path: str) -> Exponent:
    try:
        return Exponent(value)
    except PreconditionError as err:
        raise ConfigError(str(err), field=path)

def _array(value: Any, path: str, ndim: int, square: bool = True) -> np.ndarray:
    try:
        array = fromComplexPairs(value, ndim=ndim)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err), field=path)
    if ndim == 2 and square and array.shape[0] != array.shape[1]:
        raise ConfigError(f"Expected a square matrix, got shape {array.shape}", field=path)
    return array

def _numberList(value: Any, path: str) -> Optional[List[float]]:
    if value is None:
        return None
    if not isinstance(value, list) or len(value) == 0:
        raise ConfigError("Expected a non-empty list of numbers", field=path)
    return [_number(v, f"{path}[{i}]", positive=True) for i, v in enumerate(value)]

def _count(value: Any, path: str) -> int:
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"Expected a positive integer, got {value!r}", field=path)
    return value

def scenarioParameters(name: str, parameters: Any, path: str = "scenario.parameters") -> JsonDict:
    """
    Checks the parameters of a scenario against the kinds it takes.
    Numbers come back as floats, exponents and lists as given.
    """
    if not isinstance(parameters, dict):
        raise ConfigError("Expected an object", field=path)
    accepted = SCENARIO_PARAMETERS[name]
    out: JsonDict = {}
    for key, value in parameters.items():
        field = f"{path}.{key}"
        if key not in accepted:
            raise ConfigError(f"Scenario '{name}' has no parameter '{key}'", field=field)
        kind = accepted[key].kind
        if kind == ParameterKind.NUMBER:
            out[key] = _number(value, field)
        elif kind == ParameterKind.POSITIVE:
            out[key] = _number(value, field, positive=True)
        elif kind == ParameterKind.EXPONENT:
            _exponent(value, field)
            out[key] = value
        elif kind == ParameterKind.COUNT:
            out[key] = _count(value, field)
        else:
            out[key] = _numberList(value, field)
    return out

def sweepValues(axis: SweepAxis, values: Any, path: str = "sweep.values") -> Optional[List[Any]]:
    """
    Numbers for the gamma and delta axes, 2-vectors for u, [p, q] pairs for pq
    """
    if values is None:
        return None
    if not isinstance(values, list) or len(values) == 0:
        raise ConfigError("Expected a non-empty list", field=path)
    if axis in (SweepAxis.GAMMA, SweepAxis.DELTA):
        return _numberList(values, path)
    out: List[Any] = []
    for i, value in enumerate(values):
        field = f"{path}[{i}]"
        if axis == SweepAxis.U:
            u = _array(value, field, 1)
            if u.shape != (2,):
                raise ConfigError(f"Expected a vector of 2 entries, got shape {u.shape}", field=field)
            out.append(u)
        else:
            if not isinstance(value, list) or len(value) != 2:
                raise ConfigError(f"Expected a [p, q] pair, got {value!r}", field=field)
            out.append((_exponent(value[0], f"{field}[0]"), _exponent(value[1], f"{field}[1]")))
    return out


class NonlinearityConfig(NamedTuple):
    type: str
    b: float

class PseudoConfig(NamedTuple):
    """
    "exponential": y(t) = amplitude·e^{−γt}, "csv": samples read from path
    """
    type: str
    amplitude: Union[float, np.ndarray]
    gamma: float
    path: Optional[Path]
    epsilon: Optional[float]

class ScenarioConfig(NamedTuple):
    name: str
    parameters: JsonDict


class RunConfig():
    """
    A parsed and validated run configuration.
    Every field error is a ConfigError naming the field path ("problem.matrix").
    """
    def __init__(self, data: JsonDict):
        if not isinstance(data, dict):
            raise ConfigError("The configuration must be a JSON object")
        unknown = set(data) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"Unknown keys {sorted(unknown)}", field="(root)")
        self.raw: JsonDict = data

        problem = _section(data, "problem")
        matrix = _get(problem, "matrix", "problem")
        self.matrix: Optional[np.ndarray] = None if matrix is None else _array(matrix, "problem.matrix", 2)
        projection = _get(problem, "projection", "problem")
        self.projection: Optional[np.ndarray] = (
            None if projection is None else _array(projection, "problem.projection", 2)
        )
        if self.projection is not None and (self.matrix is None or self.projection.shape != self.matrix.shape):
            raise ConfigError("The projection must have the shape of the matrix", field="problem.projection")

        dichotomy = _get(problem, "dichotomy", "problem")
        self.D: Optional[float] = None
        self.lam: Optional[float] = None
        if dichotomy is not None:
            self.D = _number(_get(dichotomy, "D", "problem.dichotomy"), "problem.dichotomy.D", positive=True)
            self.lam = _number(_get(dichotomy, "lambda", "problem.dichotomy"), "problem.dichotomy.lambda", positive=True)

        self.nonlinearity: Optional[NonlinearityConfig] = None
        nonlinearity = _get(problem, "nonlinearity", "problem")
        if nonlinearity is not None:
            kind = _get(nonlinearity, "type", "problem.nonlinearity")
            if kind not in NONLINEARITY_TYPES:
                raise ConfigError(
                    f"Expected one of {NONLINEARITY_TYPES}, got {kind!r}", field="problem.nonlinearity.type"
                )
            b = _number(_get(nonlinearity, "b", "problem.nonlinearity"), "problem.nonlinearity.b")
            self.nonlinearity = NonlinearityConfig(kind, b)
        c = _get(problem, "c", "problem")
        if c is None:
            c = abs(self.nonlinearity.b) if self.nonlinearity is not None else 0.0
        self.c: float = _number(c, "problem.c")
        if self.c < 0:
            raise ConfigError("The Lipschitz constant must be nonnegative", field="problem.c")

        self.p: Exponent = _exponent(data.get("p", DEFAULT_CONFIG["p"]), "p")
        self.q: Exponent = _exponent(data.get("q", DEFAULT_CONFIG["q"]), "q")

        pseudo = _section(data, "pseudosolution")
        if pseudo["type"] not in PSEUDOSOLUTION_TYPES:
            raise ConfigError(f"Expected one of {PSEUDOSOLUTION_TYPES}, got {pseudo['type']!r}", field="pseudosolution.type")
        amplitude = pseudo["amplitude"]
        if not isinstance(amplitude, (int, float)) or isinstance(amplitude, bool):
            amplitude = _array(amplitude, "pseudosolution.amplitude", 1)
        if pseudo["type"] == "csv" and pseudo["path"] is None:
            raise ConfigError("A csv pseudosolution needs a path", field="pseudosolution.path")
        self.pseudo: PseudoConfig = PseudoConfig(
            type=pseudo["type"],
            amplitude=amplitude,
            gamma=_number(pseudo["gamma"], "pseudosolution.gamma", positive=True),
            path=None if pseudo["path"] is None else Path(pseudo["path"]),
            epsilon=None if pseudo["epsilon"] is None else _number(pseudo["epsilon"], "pseudosolution.epsilon"),
        )

        self.gammaGrid: Optional[List[float]] = _numberList(data.get("gamma_grid"), "gamma_grid")
        uGrid = data.get("u_grid")
        self.uGrid: Optional[np.ndarray] = None if uGrid is None else _array(uGrid, "u_grid", 2, square=False)
        delta = data.get("delta")
        self.delta: Optional[float] = None if delta is None else _number(delta, "delta", positive=True)

        sweep = _section(data, "sweep")
        try:
            self.sweepAxis: SweepAxis = SweepAxis(sweep["axis"])
        except ValueError:
            raise ConfigError(f"Expected one of {list(SweepAxis.values())}, got {sweep['axis']!r}", field="sweep.axis")
        self.sweepValues: Optional[List[Any]] = sweepValues(self.sweepAxis, sweep["values"])

        scenario = _section(data, "scenario")
        if scenario["name"] not in SCENARIO_NAMES:
            raise ConfigError(f"Expected one of {SCENARIO_NAMES}, got {scenario['name']!r}", field="scenario.name")
        self.scenario: ScenarioConfig = ScenarioConfig(
            scenario["name"], scenarioParameters(scenario["name"], scenario["parameters"])
        )

        numerics = data.get("numerics") or {}
        if not isinstance(numerics, dict):
            raise ConfigError("Expected an object", field="numerics")
        self.numerics: JsonDict = numerics
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError(f"Expected an integer, got {seed!r}", field="seed")
        self.seed: int = seed

    def __repr__(self) -> str:
        return f"RunConfig(p: {self.p}, q: {self.q}, c: {self.c:g}, scenario: {self.scenario.name})"

    @classmethod
    def fromText(cls, text: str) -> Self:
        """
        Parses JSON text, reporting syntax errors with their line and column
        """
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"Invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}")
        return cls(data)

    def settings(self, base: NumericSettings = NUMERICS) -> NumericSettings:
        return base.withOverrides(self.numerics)

    @property
    def triple(self) -> ConjugateTriple:
        return ConjugateTriple.fromPQ(self.p, self.q)

    def requireMatrix(self) -> np.ndarray:
        if self.matrix is None:
            raise ConfigError("This command needs a matrix", field="problem.matrix")
        return self.matrix

    def toJson(self) -> JsonDict:
        """
        The configuration as read, completed with the defaults
        """
        out = deepcopy(DEFAULT_CONFIG)
        for key, value in self.raw.items():
            if isinstance(value, dict) and isinstance(out.get(key), dict):
                out[key].update(value)
            else:
                out[key] = value
        return out


def loadConfig(path: Optional[Union[str, Path]]) -> RunConfig:
    """
    Reads a RunConfig file. No path means the defaults.
    """
    if path is None:
        return RunConfig(deepcopy(DEFAULT_CONFIG))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"The configuration file {path} does not exist")
    logger.info("Loading configuration from %s", path)
    return RunConfig.fromText(path.read_text(encoding="utf-8"))


def buildDichotomy(config: RunConfig, settings: NumericSettings = NUMERICS) -> DichotomySpec:
    """
    The dichotomy of x' = Ax: the configured constants, or constants fitted to
    the configured projection (the spectral projection when none is given)
    """
    A = config.requireMatrix()
    P = spectralProjection(A, settings) if config.projection is None else config.projection
    if config.D is not None and config.lam is not None:
        return DichotomySpec(config.D, config.lam, P, settings=settings)
    return fitDichotomy(LinearSystem(A), P, settings=settings)

def buildProblem(config: RunConfig, settings: NumericSettings = NUMERICS) -> SemilinearProblem:
    A = config.requireMatrix()
    spec = buildDichotomy(config, settings)
    if config.nonlinearity is None:
        return SemilinearProblem(LinearSystem(A), spec, c=config.c, settings=settings, seed=config.seed)
    b = config.nonlinearity.b
    return SemilinearProblem(
        LinearSystem(A),
        spec,
        f=sineNonlinearity(b),
        c=config.c,
        linearPart=[[b]],
        vectorized=True,
        settings=settings,
        seed=config.seed,
    )

def buildPseudoSolution(
    config: RunConfig,
    prob: SemilinearProblem,
    settings: NumericSettings = NUMERICS,
) -> PseudoSolution:
    """
    y(t) = v·e^{−γt} with its exact derivative and tail,
    or samples read from a csv file (differentiated as a spline, tail inferred)
    """
    pseudo = config.pseudo
    if pseudo.type == "csv":
        assert pseudo.path is not None
        if not pseudo.path.exists():
            raise ConfigError(f"The file {pseudo.path} does not exist", field="pseudosolution.path")
        y = GridFunction.fromCsv(pseudo.path.read_text(encoding="utf-8"))
        return PseudoSolution(y, pseudo.epsilon)

    v = np.broadcast_to(np.asarray(pseudo.amplitude), (prob.dimension,)).copy()
    gamma = pseudo.gamma
    grid = uniformGrid(horizonFor([gamma, prob.dichotomy.lam], settings), settings.NODES)
    decay = np.exp(-gamma * grid)[:, None]
    y = GridFunction(
        grid,
        decay * v[None, :],
        derivative=-gamma * decay * v[None, :],
        tail=(ExpTerm(v * np.exp(-gamma * grid[-1]), gamma, 0),),
    )
    return PseudoSolution(y, pseudo.epsilon)
