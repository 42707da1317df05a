from math import comb
import math

import numpy as np
import pytest

from hustab.classes import ExpTerm
from hustab.errors import CertificateFailure, NoConvergence, NotExpansion, PreconditionError, SmallnessViolation
from hustab.exponents_norms import ConjugateTriple, lpNorm
from hustab.grid_function import GridFunction, uniformGrid
from hustab.linear_evolution import DichotomySpec, LinearSystem, fitDichotomy
from hustab.shadowing import (
    PseudoSolution,
    SemilinearProblem,
    ShadowingOperator,
    applyT1,
    applyT2,
    contractionRatio,
    picardSolve,
    residual,
    sineNonlinearity,
    uniquenessCheck,
)
from hustab.shadowing.solver import odeDefect

L2 = ConjugateTriple.fromPQ(2, 2)
T_MAX = 30.0


def exponential(grid: np.ndarray, vector: np.ndarray, rate: float) -> GridFunction:
    """
    v·e^{−rate·t} with its derivative and exact tail
    """
    vector = np.atleast_1d(np.asarray(vector, dtype=float))
    values = np.exp(-rate * grid)[:, None] * vector[None, :]
    return GridFunction(
        grid,
        values,
        derivative=-rate * values,
        tail=(ExpTerm(values[-1].copy(), rate, 0),),
    )

def smoothBump(grid: np.ndarray, amplitude: float, power: int, rate: float) -> GridFunction:
    """
    a·t^k·e^{−ρt}, its tail expanded in powers of τ = t − T_max
    """
    tMax = grid[-1]
    values = amplitude * grid ** power * np.exp(-rate * grid)
    tail = tuple(
        ExpTerm(np.array([amplitude * comb(power, j) * tMax ** (power - j) * math.exp(-rate * tMax)]), rate, j)
        for j in range(power + 1)
    )
    return GridFunction(grid, values, tail=tail)

def sineProblem(settings, a: float = 1.0, b: float = 0.25) -> SemilinearProblem:
    return SemilinearProblem(
        LinearSystem([[a]]),
        DichotomySpec(1.0, a, np.zeros((1, 1))),
        f=sineNonlinearity(b),
        c=abs(b),
        linearPart=[[b]],
        vectorized=True,
        settings=settings,
    )


class TestProblem:
    def test_smallness_violation(self, settings):
        with pytest.raises(SmallnessViolation):
            sineProblem(settings, b=1.0)

    def test_declared_constant_too_small(self, settings):
        with pytest.raises(PreconditionError):
            SemilinearProblem(
                LinearSystem([[1.0]]), DichotomySpec(1.0, 1.0, np.zeros((1, 1))),
                f=sineNonlinearity(0.25), c=0.1, settings=settings,
            )

    def test_dimension_mismatch(self):
        with pytest.raises(PreconditionError):
            SemilinearProblem(LinearSystem(np.eye(2)), DichotomySpec(1.0, 1.0, np.zeros((1, 1))))

    def test_kappa(self, settings):
        prob = sineProblem(settings)
        assert prob.kappa == pytest.approx(0.25)
        assert prob.hasExactTails
        assert prob.lipschitzEstimate <= 0.25 + 1e-12
        assert prob.toJson()["c"] == 0.25

    def test_scalar_linear_part_is_expanded(self, settings):
        prob = SemilinearProblem(
            LinearSystem(np.eye(2)), DichotomySpec(1.0, 1.0, np.zeros((2, 2))),
            f=sineNonlinearity(0.1), c=0.1, linearPart=[[0.1]], vectorized=True, settings=settings,
        )
        assert prob.linearPart == pytest.approx(0.1 * np.eye(2))

    def test_residual_and_its_tail(self, settings):
        grid = uniformGrid(T_MAX, 1001)
        y = exponential(grid, [1.0], 1.0)
        w = residual(PseudoSolution(y), sineProblem(settings), settings)
        expected = -2 * np.exp(-grid) - 0.25 * np.sin(np.exp(-grid))
        assert w.values[:, 0] == pytest.approx(expected)
        assert len(w.tail) == 1
        assert w.tail[0].coefficient[0] == pytest.approx(-2.25 * math.exp(-T_MAX))


class TestOperators:
    def test_t1_on_a_contraction(self, settings):
        grid = uniformGrid(T_MAX, 2001)
        prob = SemilinearProblem(LinearSystem([[-1.0]]), DichotomySpec(1.0, 1.0, np.eye(1)))
        pseudo = PseudoSolution(exponential(grid, [1.0], 2.0))
        z = applyT1(GridFunction.zeros(grid), pseudo, prob, settings)
        # −w = e^{−2t}, convolved with e^{−t}
        assert z.values[:, 0] == pytest.approx(np.exp(-grid) - np.exp(-2 * grid), abs=1e-8)
        assert np.all(applyT2(GridFunction.zeros(grid), pseudo, prob, settings).values == 0)

    def test_t2_on_an_expansion(self, settings):
        grid = uniformGrid(T_MAX, 2001)
        prob = SemilinearProblem(LinearSystem([[1.0]]), DichotomySpec(1.0, 1.0, np.zeros((1, 1))))
        pseudo = PseudoSolution(exponential(grid, [1.0], 2.0))
        z = applyT2(GridFunction.zeros(grid), pseudo, prob, settings)
        # y + z is the only bounded solution, 0
        assert z.values[:, 0] == pytest.approx(-np.exp(-2 * grid), abs=1e-8)
        assert z.tail[0].rate == 2.0

    def test_saddle_splits_into_both_parts(self, settings):
        grid = uniformGrid(T_MAX, 2001)
        prob = SemilinearProblem(LinearSystem(np.diag([-1.0, 1.0])), DichotomySpec(1.0, 1.0, np.diag([1.0, 0.0])))
        pseudo = PseudoSolution(exponential(grid, [1.0, 1.0], 2.0))
        operator = ShadowingOperator(prob, pseudo, settings)
        zero = GridFunction.zeros(grid, 2)
        stable = operator.applyT1(zero)
        unstable = operator.applyT2(zero)
        assert np.all(stable.values[:, 1] == 0)
        assert np.all(unstable.values[:, 0] == 0)
        x = pseudo.y + operator.apply(zero)
        assert x.values[:, 0] == pytest.approx(np.exp(-grid), abs=1e-8)
        assert x.values[:, 1] == pytest.approx(np.zeros(len(grid)), abs=1e-8)

    def test_contraction_ratio_is_at_most_kappa(self, coarse, rng):
        grid = uniformGrid(T_MAX, coarse.NODES)
        prob = sineProblem(coarse)
        operator = ShadowingOperator(prob, PseudoSolution(exponential(grid, [1.0], 1.0)), coarse)
        for _ in range(50):
            z1, z2 = (
                smoothBump(grid, rng.uniform(-2, 2), int(rng.integers(0, 3)), rng.uniform(0.5, 2))
                for _ in range(2)
            )
            for p in (2, "inf"):
                assert contractionRatio(z1, z2, operator, p) <= 0.25 + 1e-6

    def test_contraction_ratio_of_equal_functions(self, coarse):
        grid = uniformGrid(T_MAX, coarse.NODES)
        operator = ShadowingOperator(sineProblem(coarse), PseudoSolution(exponential(grid, [1.0], 1.0)), coarse)
        z = smoothBump(grid, 1.0, 1, 1.0)
        assert contractionRatio(z, z, operator, 2) == 0


class TestPicard:
    def test_sine_problem(self, coarse):
        grid = uniformGrid(T_MAX, coarse.NODES)
        pseudo = PseudoSolution(exponential(grid, [1.0], 1.0))
        x, certificate = picardSolve(pseudo, sineProblem(coarse), L2, settings=coarse)
        assert certificate.converged
        assert certificate.L == pytest.approx(4 / 3)
        assert certificate.deviation <= certificate.L * certificate.epsilon
        # 0 is the only bounded solution
        assert x.values[:, 0] == pytest.approx(np.zeros(len(grid)), abs=1e-5)
        assert certificate.deviation == pytest.approx(math.sqrt(0.5), rel=1e-4)
        updates = [r for r, step in zip(certificate.updateRatios, certificate.trace[1:]) if step > 1e-12]
        assert all(r <= 0.26 for r in updates)

    def test_solution_is_a_fixed_point(self, coarse):
        grid = uniformGrid(T_MAX, coarse.NODES)
        prob = sineProblem(coarse)
        pseudo = PseudoSolution(exponential(grid, [1.0], 1.0))
        x, _ = picardSolve(pseudo, prob, L2, settings=coarse)
        operator = ShadowingOperator(prob, pseudo, coarse)
        z = x - pseudo.y
        assert lpNorm(operator.apply(z) - z, "inf", coarse) <= 1e-6
        assert odeDefect(operator, z) <= coarse.ODE_CHECK_FACTOR * coarse.QUADRATURE_TOL

    def test_solving_from_a_solution_stays_there(self, coarse):
        grid = uniformGrid(T_MAX, coarse.NODES)
        prob = sineProblem(coarse)
        x, _ = picardSolve(PseudoSolution(exponential(grid, [1.0], 1.0)), prob, L2, settings=coarse)
        again, certificate = picardSolve(PseudoSolution(x), prob, L2, settings=coarse)
        assert certificate.converged
        assert certificate.deviation <= certificate.L * certificate.epsilon + coarse.CERTIFICATION_TOL
        assert certificate.deviation <= 1e-3
        assert again.values == pytest.approx(x.values, abs=1e-3)

    def test_linear_problem_takes_one_iteration(self, settings):
        grid = uniformGrid(T_MAX, 2001)
        prob = SemilinearProblem(LinearSystem([[-1.0]]), DichotomySpec(1.0, 1.0, np.eye(1)))
        x, certificate = picardSolve(PseudoSolution(exponential(grid, [1.0], 2.0)), prob, L2, settings=settings)
        assert certificate.iterations == 1
        assert certificate.kappa == 0
        assert x.values[:, 0] == pytest.approx(np.exp(-grid), abs=1e-8)

    def test_declared_epsilon_is_used(self, coarse):
        grid = uniformGrid(T_MAX, coarse.NODES)
        pseudo = PseudoSolution(exponential(grid, [1.0], 1.0), epsilon=10.0)
        _, certificate = picardSolve(pseudo, sineProblem(coarse), L2, settings=coarse)
        assert certificate.epsilon == 10.0
        assert certificate.epsilonMeasured < 10.0

    def test_declared_epsilon_below_the_residual(self, coarse):
        grid = uniformGrid(T_MAX, coarse.NODES)
        pseudo = PseudoSolution(exponential(grid, [1.0], 1.0), epsilon=1e-3)
        with pytest.raises(CertificateFailure):
            picardSolve(pseudo, sineProblem(coarse), L2, settings=coarse)

    def test_no_convergence(self, coarse):
        grid = uniformGrid(T_MAX, coarse.NODES)
        pseudo = PseudoSolution(exponential(grid, [1.0], 1.0))
        with pytest.raises(NoConvergence):
            picardSolve(pseudo, sineProblem(coarse), L2, settings=coarse.withOverrides({"picard_max_iter": 2}))

    def test_certificate_json(self, coarse):
        grid = uniformGrid(T_MAX, coarse.NODES)
        _, certificate = picardSolve(PseudoSolution(exponential(grid, [1.0], 1.0)), sineProblem(coarse), L2, settings=coarse)
        data = certificate.toJson()
        assert data["p"] == 2 and data["r"] == 1
        assert data["iterations"] == len(data["trace"])
        assert data["derivative_source"] == "analytic"

    @pytest.mark.parametrize("p", [1, 2, "inf"])
    def test_random_expansions(self, coarse, rng, p):
        triple = ConjugateTriple.fromPQ(p, p)
        grid = uniformGrid(20.0, coarse.NODES)
        for _ in range(7):
            mu = rng.uniform(0.5, 2.0, size=2)
            A = np.array([[mu[0], rng.uniform(-1, 1)], [0.0, mu[1]]])
            system = LinearSystem(A)
            spec = fitDichotomy(system, np.zeros((2, 2)), settings=coarse)
            b = float(rng.uniform(0, 0.8) * spec.lam / spec.D)
            prob = SemilinearProblem(
                system, spec, f=sineNonlinearity(b), c=b, linearPart=[[b]], vectorized=True, settings=coarse,
            )
            y = exponential(grid, rng.uniform(-1, 1, size=2), float(rng.uniform(0.5, 2.0)))
            _, certificate = picardSolve(PseudoSolution(y), prob, triple, settings=coarse)
            assert certificate.converged
            assert certificate.deviation <= certificate.L * certificate.epsilon + coarse.CERTIFICATION_TOL


class TestUniqueness:
    def test_perturbed_solutions_leave(self, coarse):
        grid = uniformGrid(T_MAX, coarse.NODES)
        prob = sineProblem(coarse)
        pseudo = PseudoSolution(exponential(grid, [1.0], 1.0))
        x, certificate = picardSolve(pseudo, prob, L2, settings=coarse)
        assert uniquenessCheck(prob, pseudo, x, L2, deviation=certificate.deviation, settings=coarse)
        assert uniquenessCheck(prob, pseudo, x, L2, perturbation=0.0, settings=coarse)

    def test_needs_an_expansion(self, settings):
        grid = uniformGrid(T_MAX, 101)
        prob = SemilinearProblem(LinearSystem([[-1.0]]), DichotomySpec(1.0, 1.0, np.eye(1)))
        pseudo = PseudoSolution(exponential(grid, [1.0], 1.0))
        with pytest.raises(NotExpansion):
            uniquenessCheck(prob, pseudo, pseudo.y, L2, settings=settings)
