import pytest

from hustab.classes import Interpolation, VectorNorm
from hustab.errors import ConfigError
from hustab.numerics import NUMERICS


class TestOverrides:
    def test_copy_leaves_singleton_alone(self):
        changed = NUMERICS.withOverrides({"nodes": 128, "interpolation": "linear"})
        assert changed.NODES == 128
        assert changed.INTERPOLATION == Interpolation.LINEAR
        assert NUMERICS.NODES == 4096
        assert NUMERICS.INTERPOLATION == Interpolation.CUBIC

    def test_case_insensitive_and_converted(self):
        changed = NUMERICS.withOverrides({"POINT_NORM": "euclidean", "Picard_Tol": "1e-6", "t_max": 30})
        assert changed.POINT_NORM == VectorNorm.EUCLIDEAN
        assert changed.PICARD_TOL == 1e-6
        assert changed.T_MAX == 30

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            NUMERICS.withOverrides({"nodez": 3})
        assert info.value.field == "numerics.nodez"

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            NUMERICS.withOverrides({"point_norm": "taxicab"})

    def test_json_keys_are_lower_case(self):
        data = NUMERICS.toJson()
        assert data["nodes"] == 4096
        assert data["point_norm"] == "max"
        assert data["gamma_sweep"] == [1e-4, 1e2, 60]
