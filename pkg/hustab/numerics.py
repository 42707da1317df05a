from __future__ import annotations
from copy import deepcopy
from typing import Any, Dict, Optional, Tuple

from .classes import VectorNorm, Interpolation, JsonDict
from .errors import ConfigError

class NumericSettings():
    """
    Every numerical knob of the library, with its default.

    Operations take a `settings` argument defaulting to the NUMERICS singleton.
    To change a value, use withOverrides, which works on a copy:
    the singleton is never modified.
    """
    def __init__(
        self
    ):
        # Grid. T_MAX None means TAIL_HORIZON / (slowest decay rate)
        self.T_MAX: Optional[float] = None
        self.TAIL_HORIZON: float = 20.0
        self.NODES: int = 4096
        self.POINT_NORM: VectorNorm = VectorNorm.MAX
        self.INTERPOLATION: Interpolation = Interpolation.CUBIC
        # Fraction of the grid used to extrapolate an unknown tail
        self.TAIL_FIT_FRACTION: float = 0.05
        # |g(T_max)| below this (relative to max |g|) counts as an exact zero tail
        self.TAIL_NEGLIGIBLE: float = 1e-12

        # Comparisons
        self.HOLDS_ABS_TOL: float = 1e-9
        self.HOLDS_REL_TOL: float = 1e-7
        self.PROJECTION_TOL: float = 1e-12
        self.UNIT_TOL: float = 1e-12

        # Linear algebra
        self.SINGULAR_TOL: float = 1e-12
        self.EIGEN_CLUSTER_TOL: float = 1e-8
        self.ILL_CONDITIONED: float = 1e8
        self.EVOLUTION_RTOL: float = 1e-10
        self.EVOLUTION_ATOL: float = 1e-12

        # Dichotomy fitting
        self.LAMBDA_MIN: float = 1e-6
        self.LAMBDA_CANDIDATES: int = 200
        self.FIT_SAMPLES: int = 401
        self.FIT_WINDOW: float = 0.1
        # Nodes of the (t, s) sample grid for time-dependent systems
        self.FIT_PAIR_NODES: int = 41
        self.COMMUTATION_TOL: float = 1e-8

        # Bounds
        self.DELTA_MARGIN: float = 1e-9
        self.GOLDEN_TOL: float = 1e-12
        self.GAMMA_SWEEP: Tuple[float, float, int] = (1e-4, 1e2, 60)
        self.REFINE_PASSES: int = 2
        self.U_PHASES: int = 16
        self.U_RADII: int = 8

        # Shadowing solver
        self.PICARD_MAX_ITER: int = 200
        self.PICARD_TOL: float = 1e-10
        self.CERTIFICATION_TOL: float = 1e-6
        self.QUADRATURE_TOL: float = 1e-5
        self.ODE_CHECK_FACTOR: float = 10.0
        self.LIPSCHITZ_SAMPLES: int = 64
        self.LIPSCHITZ_TOL: float = 1e-9

        self.SHOW_PROGRESS: bool = False

    def __repr__(self) -> str:
        return f"NumericSettings(NODES: {self.NODES}, T_MAX: {self.T_MAX}, POINT_NORM: {self.POINT_NORM.value})"

    def withOverrides(self, overrides: Dict[str, Any]) -> NumericSettings:
        """
        Returns a copy with the given attributes replaced.
        Keys are matched case-insensitively ("nodes" sets NODES).
        """
        settings = deepcopy(self)
        for key, value in overrides.items():
            name = key.upper()
            if not hasattr(settings, name):
                raise ConfigError(f"Unknown numerical setting '{key}'", field=f"numerics.{key}")
            current = getattr(settings, name)
            try:
                if isinstance(current, VectorNorm):
                    value = VectorNorm(value)
                elif isinstance(current, Interpolation):
                    value = Interpolation(value)
                elif isinstance(current, bool):
                    value = bool(value)
                elif isinstance(current, int):
                    value = int(value)
                elif isinstance(current, tuple):
                    value = tuple(value)
                elif value is not None:
                    value = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"Invalid value {value!r}", field=f"numerics.{key}")
            setattr(settings, name, value)
        return settings

    def toJson(self) -> JsonDict:
        out: JsonDict = {}
        for name, value in vars(self).items():
            if isinstance(value, (VectorNorm, Interpolation)):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            out[name.lower()] = value
        return out

NUMERICS = NumericSettings()
