import numpy as np
import pytest

from hustab.classes import DerivativeSource, ExpTerm
from hustab.errors import DivergentNorm, PreconditionError
from hustab.grid_function import GridFunction, ZERO_TAIL, mergeTerms, uniformGrid

TOL = 1e-9


def decaying(rate: float = 1.0, tMax: float = 20.0, nodes: int = 2001) -> GridFunction:
    grid = uniformGrid(tMax, nodes)
    return GridFunction(
        grid,
        np.exp(-rate * grid),
        derivative=-rate * np.exp(-rate * grid),
        tail=(ExpTerm(np.array([np.exp(-rate * tMax)]), rate, 0),),
    )


class TestConstruction:
    def test_vectors_become_columns(self):
        g = GridFunction([0, 1, 2], [1.0, 2.0, 3.0])
        assert g.values.shape == (3, 1)
        assert g.dimension == 1
        assert g.tMax == 2

    @pytest.mark.parametrize("grid, values", [
        ([0.0], [1.0]),
        ([1.0, 2.0], [1.0, 2.0]),
        ([0.0, 2.0, 1.0], [1.0, 2.0, 3.0]),
        ([0.0, 1.0], [1.0, 2.0, 3.0]),
        ([0.0, 1.0], [1.0, np.nan]),
    ])
    def test_invalid(self, grid, values):
        with pytest.raises(PreconditionError):
            GridFunction(grid, values)

    def test_tail_must_decay(self):
        with pytest.raises(PreconditionError):
            GridFunction([0, 1], [1.0, 1.0], tail=(ExpTerm(np.array([1.0]), -1.0, 0),))

    def test_uniformity(self):
        assert GridFunction(uniformGrid(3, 31), np.zeros(31)).isUniform
        assert not GridFunction([0, 1, 3], np.zeros(3)).isUniform


class TestArithmetic:
    def test_sum_keeps_derivative_and_tail(self):
        g = decaying()
        total = g + g
        assert total.values == pytest.approx(2 * g.values)
        assert total.derivative == pytest.approx(2 * g.derivative)
        assert len(total.tail) == 1
        assert total.tail[0].coefficient == pytest.approx(2 * g.tail[0].coefficient)

    def test_difference_with_itself_has_zero_tail(self):
        g = decaying()
        assert (g - g).tail == ZERO_TAIL

    def test_unknown_tail_propagates(self):
        g = decaying()
        assert (g + g.withTail(None)).tail is None

    def test_different_grids(self):
        with pytest.raises(PreconditionError):
            decaying(nodes=11) + decaying(nodes=21)

    def test_mapped(self):
        grid = uniformGrid(1, 5)
        g = GridFunction(grid, np.column_stack([grid, 2 * grid]), tail=ZERO_TAIL)
        swapped = g.mapped(np.array([[0, 1], [1, 0]]))
        assert swapped.values[:, 0] == pytest.approx(2 * grid)

    def test_merge_terms(self):
        terms = [ExpTerm(np.array([1.0]), 2.0, 0), ExpTerm(np.array([-1.0]), 2.0, 0), ExpTerm(np.array([3.0]), 2.0, 1)]
        merged = mergeTerms(terms)
        assert len(merged) == 1
        assert merged[0].power == 1


class TestEvaluation:
    def test_inside_and_after_grid(self, settings):
        g = decaying()
        times = np.array([0.37, 5.5, 25.0])
        assert g.evaluate(times, settings)[:, 0] == pytest.approx(np.exp(-times), rel=1e-6)

    def test_sample_intervals_shape(self, settings):
        g = decaying(nodes=101)
        samples = g.sampleIntervals(np.array([0.0, 0.5, 1.0]), settings)
        assert samples.shape == (100, 3, 1)
        assert samples[:, 0, 0] == pytest.approx(g.values[:-1, 0])

    def test_restricted_adds_end_node(self):
        g = decaying()
        part = g.restricted(3.05)
        assert part.tMax == 3.05
        assert part.tail is None
        assert part.values[-1, 0] == pytest.approx(np.exp(-3.05), rel=1e-8)

    def test_restricted_follows_the_interpolation(self, settings):
        grid = np.arange(5.0)
        g = GridFunction(grid, grid ** 2)
        assert g.restricted(1.5, settings).values[-1, 0] == pytest.approx(2.25)
        linear = settings.withOverrides({"interpolation": "linear"})
        assert g.restricted(1.5, linear).values[-1, 0] == pytest.approx(2.5)


class TestTails:
    def test_inferred_rate(self, settings):
        g = decaying(rate=0.7).withTail(None)
        tail = g.resolvedTail(settings)
        assert len(tail) == 1
        assert tail[0].rate == pytest.approx(0.7, rel=1e-6)

    def test_negligible_end_is_zero(self, settings):
        grid = uniformGrid(10, 101)
        g = GridFunction(grid, np.where(grid < 5, 1.0, 0.0))
        assert g.resolvedTail(settings) == ZERO_TAIL

    def test_growing_end_diverges(self, settings):
        grid = uniformGrid(10, 101)
        g = GridFunction(grid, np.exp(0.1 * grid))
        with pytest.raises(DivergentNorm):
            g.resolvedTail(settings)


class TestDerivatives:
    def test_spline(self):
        grid = uniformGrid(5, 501)
        g = GridFunction(grid, np.sin(grid)).withDerivative()
        assert g.derivativeSource == DerivativeSource.SPLINE
        assert g.derivative[5:-5, 0] == pytest.approx(np.cos(grid[5:-5]), abs=1e-6)

    def test_finite_differences_on_short_grids(self):
        g = GridFunction([0, 1, 2], [0.0, 1.0, 2.0]).withDerivative()
        assert g.derivativeSource == DerivativeSource.FINITE_DIFFERENCE
        assert g.derivative[:, 0] == pytest.approx([1.0, 1.0, 1.0])

    def test_given_derivative_is_kept(self):
        g = decaying()
        assert g.withDerivative() is g
        assert g.derivativeSource == DerivativeSource.ANALYTIC


class TestSerialization:
    def test_csv(self):
        grid = uniformGrid(1, 4)
        g = GridFunction(grid, np.column_stack([grid, 1j * grid]))
        back = GridFunction.fromCsv(g.toCsv())
        assert back.grid == pytest.approx(grid, abs=TOL)
        assert back.values == pytest.approx(g.values, abs=TOL)

    def test_csv_real_columns(self):
        back = GridFunction.fromCsv("t,x\n0,1\n1,2\n")
        assert not back.isComplex
        assert back.values[:, 0] == pytest.approx([1.0, 2.0])

    def test_json(self):
        g = decaying(nodes=11)
        back = GridFunction.fromJson(g.toJson())
        assert back.values == pytest.approx(g.values)
        assert back.derivativeSource == DerivativeSource.ANALYTIC
        assert back.tail[0].rate == g.tail[0].rate
