from fractions import Fraction
import math

import numpy as np
import pytest

from hustab.classes import Exponent, ExpTerm, complexPairs, fromComplexPairs
from hustab.errors import PreconditionError


class TestExponent:
    @pytest.mark.parametrize("value", ["inf", "Infinity", "∞", math.inf, " INF "])
    def test_infinity_spellings(self, value):
        assert Exponent(value).isInfinite

    def test_floats_become_short_fractions(self):
        assert Exponent(1.5).value == Fraction(3, 2)
        assert Exponent(4 / 3).value == Fraction(4, 3)

    def test_string_fractions(self):
        assert Exponent("4/3").value == Fraction(4, 3)

    @pytest.mark.parametrize("value", [0.5, 0, -2, "abc", math.nan, True, None])
    def test_rejects(self, value):
        with pytest.raises(PreconditionError):
            Exponent(value)

    def test_ordering(self):
        assert Exponent(1) < Exponent(2) < Exponent("inf")
        assert Exponent("inf") == Exponent(math.inf)
        assert Exponent(2) == 2
        assert max(Exponent(3), Exponent("inf"), Exponent(1)).isInfinite

    def test_infinite_value_is_an_error(self):
        with pytest.raises(AttributeError):
            Exponent("inf").value

    def test_reciprocal(self):
        assert Exponent("inf").reciprocal() == 0
        assert Exponent(4).reciprocal() == Fraction(1, 4)

    def test_json(self):
        assert Exponent("inf").toJson() == "inf"
        assert Exponent(2).toJson() == 2
        assert Exponent(1.5).toJson() == 1.5


class TestExpTerm:
    def test_values(self):
        term = ExpTerm(np.array([2.0]), 0.5, 1)
        tau = np.array([0.0, 1.0, 2.0])
        assert term.at(tau)[:, 0] == pytest.approx(2 * tau * np.exp(-0.5 * tau))

    def test_complex_rate(self):
        term = ExpTerm(np.array([1.0]), complex(1, 2), 0)
        assert term.decay == 1
        assert term.at(np.array([1.0]))[0, 0] == pytest.approx(np.exp(-complex(1, 2)))

    def test_json(self):
        term = ExpTerm(np.array([1.0, -2.0]), 3.0, 2)
        back = ExpTerm.fromJson(term.toJson())
        assert back.power == 2
        assert complex(back.rate) == 3
        assert back.coefficient == pytest.approx(term.coefficient)


class TestComplexPairs:
    def test_real_vectors_of_length_two(self):
        # a plain real 2-vector must not be read as one complex number
        assert fromComplexPairs([1.0, 2.0], ndim=1) == pytest.approx(np.array([1.0, 2.0]))

    def test_pairs(self):
        array = fromComplexPairs([[1.0, 2.0], [3.0, 0.0]], ndim=1)
        assert array == pytest.approx(np.array([1 + 2j, 3]))

    def test_real_when_imaginary_parts_vanish(self):
        array = fromComplexPairs(complexPairs(np.eye(2)), ndim=2)
        assert not np.iscomplexobj(array)
        assert array == pytest.approx(np.eye(2))

    def test_bad_nesting(self):
        with pytest.raises(ValueError):
            fromComplexPairs([[[[1.0]]]], ndim=1)
