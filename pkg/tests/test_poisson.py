import math

import numpy as np
import pytest

from ergo.exceptions import (
    AutoCenteredWarning,
    DimensionMismatch,
    IllPosed,
    ModelValidationError,
    NoConvergence,
    UnreachableBoundary,
    VacuousBound,
)
from ergo.services.chain_core import validate_chain
from ergo.services.ergodicity import invariant_measure
from ergo.services.poisson import (
    BoundaryProblem,
    SolveMethod,
    apply_generator,
    dirichlet_residual,
    dynkin_stopped_check,
    dynkin_verify,
    hitting_time_cap,
    martingale_increments,
    neumann_series,
    reaches_boundary,
    solve_dirichlet,
    solve_dirichlet_potential,
    solve_whole,
    solve_whole_potential,
)

F = np.array([1.0, -2.0])
LN2 = math.log(2.0)
PATHS = 20_000


def _within(estimate: np.ndarray, exact: np.ndarray, error: np.ndarray, sigmas: float = 4.0) -> bool:
    return bool(np.all(np.abs(estimate - exact) <= sigmas * error + 1e-12))


@pytest.fixture
def absorbing_problem(uniform3) -> BoundaryProblem:
    """Γ = {2}，内部源项 1，边界数据 0"""
    return BoundaryProblem(uniform3, (2,), np.ones(3), np.zeros(3))


class TestGenerator:
    def test_apply(self, p2):
        np.testing.assert_allclose(apply_generator(p2, F), -0.3 * F)
        np.testing.assert_allclose(apply_generator(p2, F, [LN2, LN2]), 0.35 * F - F)

    def test_dimension(self, p2):
        with pytest.raises(DimensionMismatch):
            apply_generator(p2, [1.0, 2.0, 3.0])

    def test_dynkin_p2(self, p2):
        check = dynkin_verify(p2, F, 0, 10)
        assert check.defect <= 1e-12
        assert check.lhs[0] == 1.0

    def test_dynkin_corpus(self, corpus):
        rng = np.random.default_rng(11)
        for chain in corpus[:50]:
            h = rng.normal(size=chain.size)
            c = rng.uniform(0.0, 1.0, size=chain.size)
            assert dynkin_verify(chain, h, 0, 50).defect <= 1e-10
            assert dynkin_verify(chain, h, chain.size - 1, 50, potential=c).defect <= 1e-10

    def test_martingale_increments_are_centered(self, p2):
        table = martingale_increments(p2, F, 0, 10, PATHS, seed=3)
        assert table.mean.shape == (10, 2)
        assert table.count[0].sum() == PATHS
        assert table.max_z() <= 5.0

    def test_martingale_with_potential(self, p2):
        table = martingale_increments(p2, F, 1, 6, PATHS, seed=4, potential=[0.1, 0.3])
        assert table.max_z() <= 5.0


class TestBoundaryProblem:
    def test_empty_boundary(self, uniform3):
        with pytest.raises(ModelValidationError):
            BoundaryProblem(uniform3, (), np.ones(3), np.zeros(3))

    def test_full_boundary(self, uniform3):
        with pytest.raises(ModelValidationError):
            BoundaryProblem(uniform3, (0, 1, 2), np.ones(3), np.zeros(3))

    def test_out_of_range(self, uniform3):
        with pytest.raises(DimensionMismatch):
            BoundaryProblem(uniform3, (5,), np.ones(3), np.zeros(3))

    def test_interior(self, absorbing_problem):
        assert absorbing_problem.interior == (0, 1)
        np.testing.assert_array_equal(absorbing_problem.boundary_mask, [False, False, True])

    def test_unreachable(self):
        chain = validate_chain([[1.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]])
        np.testing.assert_array_equal(reaches_boundary(chain, [2]), [False, True, True])
        problem = BoundaryProblem(chain, (2,), np.ones(3), np.zeros(3))
        with pytest.raises(UnreachableBoundary):
            solve_dirichlet(problem)

    def test_hitting_cap(self, absorbing_problem):
        cap = hitting_time_cap(absorbing_problem, tail=1e-9)
        assert cap.steps == 1
        assert cap.kappa_hit == pytest.approx(1 / 3)
        assert cap.cap == math.ceil(math.log(1e-9) / math.log(2 / 3))

    def test_method_parse(self):
        assert SolveMethod.parse("mc") is SolveMethod.MONTE_CARLO
        assert SolveMethod.parse("series") is SolveMethod.SERIES
        with pytest.raises(ValueError):
            SolveMethod.parse("magic")


class TestNeumannSeries:
    def test_geometric(self):
        result = neumann_series(0.5 * np.eye(2), np.ones(2))
        np.testing.assert_allclose(result.values, 2.0, atol=1e-12)
        assert result.tail_bound < 1e-12

    def test_nilpotent(self):
        result = neumann_series(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(result.values, [2.0, 1.0])

    def test_divergent(self):
        with pytest.raises(NoConvergence):
            neumann_series(np.eye(2), np.ones(2), max_block=10)


class TestDirichlet:
    @pytest.mark.parametrize("method", ["linear", "series"])
    def test_expected_hitting_time(self, absorbing_problem, method):
        solution = solve_dirichlet(absorbing_problem, method)
        np.testing.assert_allclose(solution.values, [3.0, 3.0, 0.0], atol=1e-10)
        assert solution.residual <= 1e-10
        assert solution.wellposedness["spectral_radius"] == pytest.approx(2 / 3, abs=1e-9)

    def test_monte_carlo(self, absorbing_problem):
        solution = solve_dirichlet(absorbing_problem, "mc", paths=PATHS, seed=8)
        assert solution.method == SolveMethod.MONTE_CARLO
        assert _within(solution.values, np.array([3.0, 3.0, 0.0]), solution.std_error)
        assert solution.values[2] == 0.0
        assert solution.wellposedness["path_cap"] >= 1

    def test_monte_carlo_deterministic(self, absorbing_problem):
        first = solve_dirichlet(absorbing_problem, "mc", paths=2000, seed=8)
        second = solve_dirichlet(absorbing_problem, "mc", paths=2000, seed=8)
        np.testing.assert_array_equal(first.values, second.values)

    def test_drops_potential(self, uniform3):
        problem = BoundaryProblem(uniform3, (2,), np.ones(3), np.zeros(3), potential=np.full(3, LN2))
        np.testing.assert_allclose(solve_dirichlet(problem).values, [3.0, 3.0, 0.0], atol=1e-10)

    def test_corpus(self, corpus):
        rng = np.random.default_rng(5)
        for chain in corpus:
            problem = BoundaryProblem(chain, (0,), rng.normal(size=chain.size), rng.normal(size=chain.size))
            linear = solve_dirichlet(problem, SolveMethod.LINEAR)
            series = solve_dirichlet(problem, SolveMethod.SERIES)
            assert linear.residual <= 1e-10
            assert series.residual <= 1e-10
            assert series.crosscheck <= 1e-8

    def test_maximum_principle(self, corpus):
        rng = np.random.default_rng(6)
        for chain in corpus:
            g = rng.normal(size=chain.size)
            boundary = tuple(range(max(1, chain.size // 2)))
            solution = solve_dirichlet(BoundaryProblem(chain, boundary, np.zeros(chain.size), g))
            edge = g[list(boundary)]
            assert np.all(solution.values >= edge.min() - 1e-12)
            assert np.all(solution.values <= edge.max() + 1e-12)

    def test_stopped_dynkin(self, absorbing_problem):
        h = np.array([0.5, -1.0, 2.0])
        result = dynkin_stopped_check(absorbing_problem, h, 0, paths=PATHS, seed=12)
        assert abs(result.mean) <= 4 * result.std_error + 1e-12


class TestDirichletPotential:
    def test_discounted_hitting(self, uniform3):
        # u(x) = E_x 2^{−τ}
        problem = BoundaryProblem(uniform3, (2,), np.zeros(3), np.ones(3), potential=np.full(3, LN2))
        for method in ("linear", "series"):
            solution = solve_dirichlet_potential(problem, method)
            np.testing.assert_allclose(solution.values, [0.25, 0.25, 1.0], atol=1e-10)
            assert solution.residual <= 1e-10
        mc = solve_dirichlet_potential(problem, "monte_carlo", paths=PATHS, seed=21)
        assert _within(mc.values, np.array([0.25, 0.25, 1.0]), mc.std_error)

    def test_zero_potential_matches_plain(self, absorbing_problem, uniform3):
        plain = solve_dirichlet(absorbing_problem)
        weighted = solve_dirichlet_potential(
            BoundaryProblem(uniform3, (2,), np.ones(3), np.zeros(3), potential=np.zeros(3))
        )
        np.testing.assert_allclose(weighted.values, plain.values, atol=1e-12)

    def test_ill_posed(self, uniform3):
        problem = BoundaryProblem(uniform3, (2,), np.ones(3), np.zeros(3), potential=np.full(3, -LN2))
        with pytest.raises(IllPosed) as info:
            solve_dirichlet_potential(problem)
        assert info.value.spectral_radius == pytest.approx(4 / 3, abs=1e-8)

    def test_corpus(self, corpus):
        rng = np.random.default_rng(9)
        for chain in corpus:
            problem = BoundaryProblem(
                chain,
                (chain.size - 1,),
                rng.normal(size=chain.size),
                rng.normal(size=chain.size),
                potential=rng.uniform(0.0, 1.0, size=chain.size),
            )
            for method in (SolveMethod.LINEAR, SolveMethod.SERIES):
                assert solve_dirichlet_potential(problem, method).residual <= 1e-10
            assert dirichlet_residual(problem, solve_dirichlet_potential(problem).values) <= 1e-10

    def test_stopped_dynkin_with_potential(self, uniform3):
        problem = BoundaryProblem(uniform3, (2,), np.zeros(3), np.zeros(3), potential=np.array([0.2, 0.5, 0.0]))
        result = dynkin_stopped_check(problem, np.array([1.0, 3.0, -1.0]), 1, paths=PATHS, seed=13)
        assert abs(result.mean) <= 4 * result.std_error + 1e-12


class TestWholeSpace:
    @pytest.mark.parametrize("method", ["series", "linear"])
    def test_p2(self, p2, method):
        solution = solve_whole(p2, F, method)
        np.testing.assert_allclose(solution.values, [10 / 3, -20 / 3], atol=1e-10)
        assert solution.residual <= 1e-10
        assert abs(float(solution.values @ invariant_measure(p2))) <= 1e-10
        assert solution.crosscheck <= 1e-10

    def test_auto_centering(self, p2):
        with pytest.warns(AutoCenteredWarning):
            solution = solve_whole(p2, F + 1.0)
        np.testing.assert_allclose(solution.values, [10 / 3, -20 / 3], atol=1e-10)
        assert solution.wellposedness["centering_shift"] == pytest.approx(1.0)

    def test_vacuous(self, swap):
        with pytest.raises(VacuousBound):
            solve_whole(swap, [1.0, -1.0])

    def test_monte_carlo(self, p2):
        solution = solve_whole(p2, F, "mc", paths=PATHS, seed=31)
        exact = np.array([10 / 3, -20 / 3])
        assert np.all(np.abs(solution.values - exact) <= 8 * solution.std_error.max())

    def test_corpus_centering(self, corpus):
        rng = np.random.default_rng(10)
        for chain in corpus:
            mu = invariant_measure(chain)
            f = rng.normal(size=chain.size)
            f = f - float(f @ mu)
            solution = solve_whole(chain, f)
            assert solution.residual <= 1e-10
            assert abs(float(solution.values @ mu)) <= 1e-10
            # 两种解法只差常数，中心化后为 0
            assert solution.crosscheck <= 1e-10


class TestWholeSpacePotential:
    @pytest.mark.parametrize("method", ["linear", "series"])
    def test_constant_potential(self, p2, method):
        solution = solve_whole_potential(p2, [LN2, LN2], F, method)
        np.testing.assert_allclose(solution.values, F / 0.65, atol=1e-10)
        assert solution.residual <= 1e-10
        assert solution.wellposedness["spectral_radius"] == pytest.approx(0.5, abs=1e-9)
        assert solution.wellposedness["sign_condition"]

    def test_monte_carlo(self, p2):
        solution = solve_whole_potential(p2, [LN2, LN2], F, "mc", paths=PATHS, seed=41)
        assert _within(solution.values, F / 0.65, solution.std_error)

    def test_ill_posed(self, p2):
        with pytest.raises(IllPosed):
            solve_whole_potential(p2, [-0.1, -0.1], F)

    def test_positive_mean_potential_is_well_posed(self, corpus):
        rng = np.random.default_rng(12)
        for chain in corpus:
            c = rng.uniform(0.05, 1.0, size=chain.size)
            f = rng.normal(size=chain.size)
            for method in (SolveMethod.LINEAR, SolveMethod.SERIES):
                solution = solve_whole_potential(chain, c, f, method)
                assert solution.residual <= 1e-10
                assert solution.wellposedness["spectral_radius"] < 1.0
