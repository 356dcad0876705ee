import math

import numpy as np
import pytest

from transformed_euler.solver import (
    PathError,
    PiecewiseFn,
    SdeProblem,
    consecutive_l2_errors,
    fit_order,
    generate_lattice,
)
from transformed_euler.solver.examples import load_example
from transformed_euler.solver.harness import simulate_terminals


def deterministic_problem():
    return SdeProblem(PiecewiseFn([], ["-x"]), PiecewiseFn.constant(0.0), x0=1.0)


class TestLattice:
    def test_pairwise_sums(self):
        lattice = generate_lattice(42, 3, 8, 1.0)
        for level in range(8):
            coarse = lattice.increments(level)
            fine = lattice.increments(level + 1)
            assert coarse.shape == (2**level,)
            assert np.array_equal(coarse, fine[0::2] + fine[1::2])

    def test_coarsest_level_is_total(self):
        lattice = generate_lattice(42, 0, 10, 1.0)
        assert lattice.increments(0)[0] == pytest.approx(np.sum(lattice.finest), abs=1e-12)

    def test_variance(self):
        lattice = generate_lattice(2024, range(100), 10, 1.0)
        draws = lattice.finest.ravel()
        assert draws.size > 10**5
        delta = lattice.delta(10)
        assert abs(np.var(draws) - delta) <= 0.03 * delta
        assert abs(np.mean(draws)) <= 4 * math.sqrt(delta / draws.size)

    def test_pure_function_of_seed_and_path(self):
        single = generate_lattice(42, 5, 6, 1.0)
        batch = generate_lattice(42, [3, 4, 5], 6, 1.0)
        assert np.array_equal(single.finest, batch.finest[2])
        assert np.array_equal(single.finest, generate_lattice(42, 5, 6, 1.0).finest)

    def test_paths_and_seeds_differ(self):
        a = generate_lattice(42, 0, 4, 1.0).finest
        assert not np.array_equal(a, generate_lattice(42, 1, 4, 1.0).finest)
        assert not np.array_equal(a, generate_lattice(43, 0, 4, 1.0).finest)

    def test_finer_lattice_extends_coarser(self):
        # Step j of a path is the same draw whatever the finest level
        coarse = generate_lattice(42, 0, 4, 1.0)
        fine = generate_lattice(42, 0, 5, 1.0)
        assert np.allclose(coarse.finest / math.sqrt(2**-4), fine.finest[:16] / math.sqrt(2**-5))

    def test_horizon_scales_increments(self):
        lattice = generate_lattice(1, 0, 3, 4.0)
        assert lattice.delta(3) == 0.5

    def test_invalid_level(self):
        with pytest.raises(ValueError):
            generate_lattice(42, 0, 0, 1.0)
        with pytest.raises(ValueError):
            generate_lattice(42, 0, 3, 1.0).increments(4)


class TestFitOrder:
    deltas = [2.0**-k for k in range(4, 11)]

    def test_square_root(self):
        points = [(d, 3.0 * d**0.5) for d in self.deltas]
        assert abs(fit_order(points) - 0.5) <= 1e-12

    def test_linear(self):
        points = [(d, 0.7 * d) for d in self.deltas]
        assert abs(fit_order(points) - 1.0) <= 1e-12

    def test_noisy(self):
        rng = np.random.default_rng(5)
        points = [(d, 2.0 * d**0.75 * (1 + 0.05 * rng.standard_normal())) for d in self.deltas]
        assert abs(fit_order(points) - 0.75) <= 0.05

    def test_zero_error_excluded(self, caplog):
        points = [(d, d) for d in self.deltas] + [(1.0, 0.0)]
        assert abs(fit_order(points) - 1.0) <= 1e-12
        assert "Excluding zero error" in caplog.text

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_order([(0.5, 0.0), (0.25, 0.0)])
        with pytest.raises(ValueError):
            fit_order([(0.5, 1.0)])

    def test_bad_input(self):
        with pytest.raises(ValueError):
            fit_order([(0.0, 1.0), (0.5, 1.0)])
        with pytest.raises(ValueError):
            fit_order([(0.25, -1.0), (0.5, 1.0)])


class TestConsecutiveErrors:
    def test_deterministic_order_one(self):
        report = consecutive_l2_errors(deterministic_problem(), "em", None, 1, 2, 4, 10)
        assert 0.9 <= report.fitted_order <= 1.1
        assert all(level.stderr == 0 for level in report.levels)

    def test_report_layout(self):
        report = consecutive_l2_errors(load_example("ex1").problem, "emt", 1 / 16, 42, 64, 3, 7)
        assert [level.k for level in report.levels] == [4, 5, 6, 7]
        for coarse, fine in zip(report.levels, report.levels[1:]):
            assert fine.delta == coarse.delta / 2
        assert all(level.error >= 0 for level in report.levels)
        assert report.method == "emt"
        assert report.kappa == 1 / 16
        assert report.paths == 64
        assert report.high_variance_level == 7

    def test_error_definition(self):
        problem = load_example("ex2").problem
        terminals = simulate_terminals(problem, "em", None, 9, 32, 3, 6)
        report = consecutive_l2_errors(problem, "em", None, 9, 32, 3, 6)
        for column, level in enumerate(report.levels):
            differences = terminals[:, column + 1] - terminals[:, column]
            assert level.error == pytest.approx(np.sqrt(np.mean(differences**2)), rel=1e-12)

    def test_reproducible(self):
        problem = load_example("ex3").problem
        first = consecutive_l2_errors(problem, "emt", 1 / 16, 42, 100, 3, 7)
        second = consecutive_l2_errors(problem, "emt", 1 / 16, 42, 100, 3, 7)
        assert first == second

    def test_independent_of_workers_and_chunks(self):
        problem = load_example("ex2").problem
        one = consecutive_l2_errors(problem, "emt", 1 / 16, 42, 300, 4, 8, workers=1)
        many = consecutive_l2_errors(
            problem, "emt", 1 / 16, 42, 300, 4, 8, workers=8, chunk_size=7
        )
        assert one.levels == many.levels
        assert one.fitted_order == many.fitted_order

    def test_doubling_paths(self):
        problem = load_example("ex1").problem
        small = consecutive_l2_errors(problem, "em", None, 42, 512, 4, 8)
        large = consecutive_l2_errors(problem, "em", None, 42, 1024, 4, 8)
        for a, b in zip(small.levels, large.levels):
            # Compare mean squared differences against their standard errors
            assert abs(a.error**2 - b.error**2) <= 3 * max(a.stderr, b.stderr)

    def test_path_failure_has_coordinates(self):
        problem = SdeProblem(
            PiecewiseFn([], ["x^3"]), PiecewiseFn.constant(1.0), x0=10.0, T=10.0
        )
        with pytest.raises(PathError) as info:
            consecutive_l2_errors(problem, "em", None, 42, 4, 1, 3, workers=2, chunk_size=2)
        assert info.value.level in (1, 2, 3)
        assert info.value.path in range(4)

    def test_errors_decrease_for_lipschitz_coefficients(self):
        problem = SdeProblem(
            PiecewiseFn([], ["-x"]), PiecewiseFn([], ["1 + 0.1 * sin(x)"]), x0=0.5
        )
        report = consecutive_l2_errors(problem, "em", None, 42, 1024, 4, 10)
        errors = [level.error for level in report.levels]
        increases = sum(fine > coarse for coarse, fine in zip(errors, errors[1:]))
        assert increases <= 1

    def test_invalid_arguments(self):
        problem = load_example("ex1").problem
        with pytest.raises(ValueError):
            consecutive_l2_errors(problem, "em", None, 42, 1, 4, 10)
        with pytest.raises(ValueError):
            consecutive_l2_errors(problem, "em", None, 42, 16, 5, 5)
        with pytest.raises(ValueError):
            consecutive_l2_errors(problem, "milstein", None, 42, 16, 4, 6)


@pytest.mark.slow
class TestOrderReproduction:
    def test_four_jumps_transformed(self):
        report = consecutive_l2_errors(
            load_example("ex2").problem, "emt", 1 / 16, 42, 1024, 4, 10, workers=4
        )
        assert 0.35 <= report.fitted_order <= 0.75

    def test_sign_drift_crude(self):
        report = consecutive_l2_errors(
            load_example("ex1").problem, "em", None, 42, 1024, 4, 10, workers=4
        )
        assert 0.8 <= report.fitted_order <= 1.2

    def test_sign_drift_transformed(self):
        report = consecutive_l2_errors(
            load_example("ex1").problem, "emt", 1 / 16, 42, 1024, 4, 10, workers=4
        )
        assert report.fitted_order >= 0.35

    @pytest.mark.parametrize("method, kappa", [("em", None), ("emt", 1 / 16)])
    def test_dividend_threshold(self, method, kappa):
        report = consecutive_l2_errors(
            load_example("ex3").problem, method, kappa, 42, 1024, 4, 10, workers=4
        )
        errors = [level.error for level in report.levels]
        assert all(np.isfinite(errors))
        assert errors[-1] < errors[0]
        if method == "emt":
            assert report.fitted_order >= 0.35

    def test_thread_count_does_not_matter(self):
        problem = load_example("ex2").problem
        one = consecutive_l2_errors(problem, "emt", 1 / 16, 42, 1024, 4, 10, workers=1)
        eight = consecutive_l2_errors(problem, "emt", 1 / 16, 42, 1024, 4, 10, workers=8)
        assert one == eight
