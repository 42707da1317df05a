from fractions import Fraction
import math

import numpy as np
import pytest

from hustab.classes import Exponent, ExpTerm, KernelSide, VectorNorm
from hustab.errors import PrecedenceError, PreconditionError
from hustab.exponents_norms import (
    ConjugateTriple,
    ExpKernel,
    conjugateExponent,
    convolve,
    kernelNorm,
    linearRecurrence,
    lpNorm,
    tailIntegral,
    tailSup,
    youngCheck,
)
from hustab.grid_function import GridFunction, ZERO_TAIL, uniformGrid


def exponential(rate: float, tMax: float = 20.0, nodes: int = 2001, scale: float = 1.0) -> GridFunction:
    grid = uniformGrid(tMax, nodes)
    return GridFunction(
        grid,
        scale * np.exp(-rate * grid),
        tail=(ExpTerm(np.array([scale * np.exp(-rate * tMax)]), rate, 0),),
    )

def randomFunction(rng, nodes: int = 2001) -> GridFunction:
    """
    Damped noise plus an exponential with a random rate and scale
    """
    grid = uniformGrid(20, nodes)
    values = rng.normal(size=nodes) * np.exp(-0.2 * grid)
    values[-1] = 0.0
    noise = GridFunction(grid, values, tail=ZERO_TAIL)
    return noise + exponential(float(rng.uniform(0.2, 2.0)), nodes=nodes, scale=float(rng.normal()))

def piecewiseLinear(grid: np.ndarray, levels: np.ndarray, support: float = 5.0) -> GridFunction:
    """
    Linear between every other node up to the support end, zero after it
    """
    breakpoints = grid[::2][grid[::2] <= support]
    levels = np.asarray(levels[:len(breakpoints)], dtype=float).copy()
    levels[-1] = 0.0
    return GridFunction(grid, np.interp(grid, breakpoints, levels, right=0.0), tail=ZERO_TAIL)


class TestConjugateExponent:
    @pytest.mark.parametrize("p, q, r", [
        (2, 2, 1),
        (2, 1, 2),
        ("inf", 1, "inf"),
        ("inf", "inf", 1),
        (4, 2, Fraction(4, 3)),
        (3, 1.5, 1.5),
    ])
    def test_values(self, p, q, r):
        assert conjugateExponent(p, q) == Exponent(r)

    def test_p_below_q(self):
        with pytest.raises(PrecedenceError):
            conjugateExponent(1, 2)

    def test_triple(self):
        triple = ConjugateTriple.fromPQ("inf", 2)
        assert triple.r == 2
        assert triple.toJson() == {"p": "inf", "q": 2, "r": 2}


class TestKernelNorm:
    @pytest.mark.parametrize("rate, r, expected", [
        (2.0, 1, 0.5),
        (1.0, 2, math.sqrt(0.5)),
        (0.3, "inf", 1.0),
        (1.0, 4, 0.25 ** 0.25),
    ])
    def test_closed_form(self, rate, r, expected):
        assert kernelNorm(ExpKernel(rate), r) == pytest.approx(expected, rel=1e-12)

    def test_rate_must_be_positive(self):
        with pytest.raises(PreconditionError):
            ExpKernel(0.0)


class TestTails:
    def test_single_term_closed_form(self):
        term = ExpTerm(np.array([1.0]), 1.0, 1)
        # ∫ τ² e^{−2τ} dτ = Γ(3)/2³
        assert tailIntegral((term,), 2.0) == pytest.approx(0.25)
        assert tailSup((term,)) == pytest.approx(math.exp(-1))

    def test_several_terms_by_quadrature(self):
        terms = (ExpTerm(np.array([1.0]), 1.0, 0), ExpTerm(np.array([1.0]), 3.0, 0))
        # ∫ (e^{−τ} + e^{−3τ})² = 1/2 + 2/4 + 1/6
        assert tailIntegral(terms, 2.0) == pytest.approx(0.5 + 0.5 + 1 / 6, rel=1e-8)
        assert tailSup(terms) == pytest.approx(2.0)

    def test_zero_tail(self):
        assert tailIntegral(ZERO_TAIL, 2.0) == 0
        assert tailSup(ZERO_TAIL) == 0


class TestLpNorm:
    @pytest.mark.parametrize("p, expected", [
        (1, 1.0),
        (2, math.sqrt(0.5)),
        (4, 0.25 ** 0.25),
        ("inf", 1.0),
    ])
    def test_exponential(self, p, expected):
        assert lpNorm(exponential(1.0), p) == pytest.approx(expected, rel=1e-8)

    def test_truncated(self):
        assert lpNorm(exponential(1.0), 1, truncate=True) == pytest.approx(1 - math.exp(-20), rel=1e-8)

    def test_nonuniform_grid(self):
        grid = np.expm1(np.linspace(0, math.log1p(20), 4001))
        g = GridFunction(grid, np.exp(-grid), tail=(ExpTerm(np.array([math.exp(-grid[-1])]), 1.0, 0),))
        assert lpNorm(g, 2) == pytest.approx(math.sqrt(0.5), rel=1e-5)

    def test_euclidean_point_norm(self):
        grid = uniformGrid(20, 2001)
        g = GridFunction(grid, np.column_stack([np.exp(-grid), np.exp(-grid)]), tail=ZERO_TAIL)
        assert lpNorm(g, "inf", norm=None) == pytest.approx(1.0)
        assert lpNorm(g, "inf", norm=VectorNorm.EUCLIDEAN) == pytest.approx(math.sqrt(2))

    @pytest.mark.parametrize("p", [1, 1.5, 2, 3, "inf"])
    def test_homogeneity(self, rng, p):
        for _ in range(20):
            g = randomFunction(rng)
            alpha = float(rng.normal(scale=5.0))
            assert lpNorm(g * alpha, p) == pytest.approx(abs(alpha) * lpNorm(g, p), rel=1e-10)

    @pytest.mark.parametrize("p", [1, 1.5, 2, 3, "inf"])
    def test_triangle_inequality(self, rng, p):
        for _ in range(20):
            f, g = randomFunction(rng), randomFunction(rng)
            assert lpNorm(f + g, p) <= lpNorm(f, p) + lpNorm(g, p) + 1e-9


class TestLinearRecurrence:
    def test_forward_and_reverse(self):
        decay = np.array([0.5, 0.5])
        increments = np.array([[1.0], [1.0]])
        forward = linearRecurrence(decay, increments, np.array([0.0]))
        assert forward[:, 0] == pytest.approx([0.0, 1.0, 1.5])
        backward = linearRecurrence(decay, increments, np.array([0.0]), reverse=True)
        assert backward[:, 0] == pytest.approx([1.5, 1.0, 0.0])


class TestConvolve:
    def test_causal_exponential(self, settings):
        c = exponential(2.0)
        a = convolve(ExpKernel(1.0), c, settings)
        grid = c.grid
        assert a.values[:, 0] == pytest.approx(np.exp(-grid) - np.exp(-2 * grid), abs=1e-8)
        after = np.array([21.0, 25.0])
        assert a.evaluate(after, settings)[:, 0] == pytest.approx(np.exp(-after) - np.exp(-2 * after), rel=1e-8)

    def test_anticausal_exponential(self, settings):
        c = exponential(2.0)
        a = convolve(ExpKernel(1.0, KernelSide.ANTICAUSAL), c, settings)
        assert a.values[:, 0] == pytest.approx(np.exp(-2 * c.grid) / 3, abs=1e-8)
        assert a.evaluate(np.array([22.0]), settings)[0, 0] == pytest.approx(math.exp(-44) / 3, rel=1e-8)

    def test_equal_rates_give_a_power_term(self, settings):
        c = exponential(1.0)
        a = convolve(ExpKernel(1.0), c, settings)
        # t·e^{−t}
        assert a.values[:, 0] == pytest.approx(c.grid * np.exp(-c.grid), abs=1e-8)
        assert a.evaluate(np.array([23.0]), settings)[0, 0] == pytest.approx(23 * math.exp(-23), rel=1e-8)

    def test_derivative_satisfies_the_ode(self, settings):
        c = exponential(2.0)
        a = convolve(ExpKernel(1.0), c, settings)
        assert a.derivative == pytest.approx(-a.values + c.values)

    def test_complex_rates(self, settings):
        grid = uniformGrid(20, 2001)
        rate = complex(1, 3)
        c = GridFunction(grid, np.exp(-rate * grid), tail=(ExpTerm(np.array([np.exp(-rate * 20)]), rate, 0),))
        a = convolve(ExpKernel(0.5, KernelSide.ANTICAUSAL), c, settings)
        assert a.isComplex
        assert a.values[:, 0] == pytest.approx(np.exp(-rate * grid) / (0.5 + rate), abs=1e-6)


class TestYoung:
    TRIPLES = [(1, 1), (2, 2), (2, 1), ("inf", 1), ("inf", 2), (4, 2), ("inf", "inf"), (3, 1.5)]

    @pytest.mark.parametrize("side", KernelSide)
    @pytest.mark.parametrize("lam", [0.5, 1.0, 4.0])
    def test_piecewise_linear_forcing(self, settings, rng, side, lam):
        local = settings.withOverrides({"nodes": 4097, "interpolation": "linear", "t_max": 5 + 20 / lam})
        grid = uniformGrid(local.T_MAX, local.NODES)
        breakpoints = grid[::2][grid[::2] <= 5]
        levels = rng.normal(size=len(breakpoints))
        levels[-1] = 0.0
        c = GridFunction(grid, np.interp(grid, breakpoints, levels, right=0.0), tail=ZERO_TAIL)
        kernel = ExpKernel(lam, side)
        for p, q in self.TRIPLES:
            report = youngCheck(kernel, c, ConjugateTriple.fromPQ(p, q), local)
            assert report.holds, (p, q, report)
            assert report.lhs > 0

    def test_random_nonnegative_forcing(self, settings, rng):
        # (1, 1) is an equality for c ≥ 0
        pairs = [
            (p, q) for q in (1, 1.5, 2, 3, 4, "inf") for p in (1, 1.5, 2, 3, 4, "inf")
            if Exponent(p) >= Exponent(q) and (p, q) != (1, 1)
        ]
        for _ in range(100):
            lam = float(rng.uniform(0.1, 10.0))
            side = KernelSide.CAUSAL if rng.random() < 0.5 else KernelSide.ANTICAUSAL
            p, q = pairs[int(rng.integers(len(pairs)))]
            local = settings.withOverrides({"nodes": 4097, "interpolation": "linear", "t_max": 5 + 20 / lam})
            grid = uniformGrid(local.T_MAX, local.NODES)
            c = piecewiseLinear(grid, rng.uniform(0.0, 1.0, size=len(grid)))
            report = youngCheck(ExpKernel(lam, side), c, ConjugateTriple.fromPQ(p, q), local)
            assert report.holds, (lam, side, p, q, report)

    def test_report_json(self, settings):
        report = youngCheck(ExpKernel(1.0), exponential(2.0), ConjugateTriple.fromPQ(2, 2), settings)
        data = report.toJson()
        assert set(data) == {"lhs", "rhs", "holds"}
        assert data["holds"]
