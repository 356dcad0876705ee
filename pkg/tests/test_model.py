import numpy as np
import pytest

from transformed_euler.solver import (
    AssumptionError,
    PiecewiseFn,
    SdeProblem,
    TransformedSde,
    validate_assumptions,
)
from transformed_euler.solver.examples import load_example
from transformed_euler.solver.model import (
    estimate_lipschitz,
    transformed_diffusion,
    transformed_drift,
)

KAPPAS = [1 / 16, 1 / 64, 1 / 256]
EXAMPLES = ["ex1", "ex2", "ex3"]
# Offset of the straddling evaluations from each breakpoint
STRADDLE = 1e-9


class TestProblem:
    def test_invalid_horizon(self):
        with pytest.raises(ValueError):
            SdeProblem(PiecewiseFn.constant(0.0), PiecewiseFn.constant(1.0), T=0.0)

    def test_with_overrides_ignores_none(self):
        problem = load_example("ex1").problem
        changed = problem.with_overrides(x0=0.0, T=None)
        assert changed.x0 == 0.0
        assert changed.T == problem.T

    def test_window(self):
        assert load_example("ex2").problem.window() == (-3.0, 3.0)


class TestValidateAssumptions:
    def test_sign_drift(self):
        problem = load_example("ex1").problem.with_overrides(c_bar=0.5)
        report = validate_assumptions(problem)
        assert report.sigma_squared == {0.0: 1.0}
        assert report.drift_quotients == [0.0, 0.0]
        assert report.heuristic is True
        assert "heuristic" in report.summary()

    def test_four_jumps(self):
        report = validate_assumptions(load_example("ex2").problem)
        assert set(report.sigma_squared) == {-1.0, -0.5, 0.0, 1.0}
        assert all(s >= 0.25 for s in report.sigma_squared.values())

    @pytest.mark.parametrize("example", EXAMPLES)
    def test_examples_pass(self, example):
        validate_assumptions(load_example(example).problem)

    def test_degenerate_diffusion(self):
        problem = SdeProblem(PiecewiseFn([0.0], ["1", "-1"]), PiecewiseFn.constant(0.0))
        with pytest.raises(AssumptionError) as info:
            validate_assumptions(problem)
        assert info.value.kind == "ellipticity"
        assert info.value.location == 0.0

    def test_steep_branch(self):
        problem = SdeProblem(
            PiecewiseFn([0.0], ["1", "1e9 * x"]), PiecewiseFn.constant(1.0)
        )
        with pytest.raises(AssumptionError) as info:
            validate_assumptions(problem)
        assert info.value.kind == "lipschitz"
        assert info.value.branch == 1

    def test_cap_is_configurable(self):
        problem = SdeProblem(PiecewiseFn([0.0], ["1", "100 * x"]), PiecewiseFn.constant(1.0))
        validate_assumptions(problem)
        with pytest.raises(AssumptionError):
            validate_assumptions(problem, quotient_cap=10.0)

    def test_discontinuous_diffusion(self):
        problem = SdeProblem(
            PiecewiseFn([0.0], ["1", "-1"]), PiecewiseFn([0.5], ["1", "2"])
        )
        with pytest.raises(AssumptionError) as info:
            validate_assumptions(problem)
        assert info.value.location == 0.5


class TestTransformedCoefficients:
    def test_sign_drift_at_zero(self):
        model = TransformedSde.build(load_example("ex1").problem, 1 / 16)
        assert transformed_drift(model, 0.0) == 0.0
        assert transformed_diffusion(model, 0.0) == 1.0

    def test_outside_bumps(self):
        problem = load_example("ex2").problem
        model = TransformedSde.build(problem, 1 / 16)
        for z in [-2.5, 2.5]:
            assert model.drift(z) == problem.drift(z)
            assert model.diffusion(z) == problem.diffusion(z)

    def test_no_discontinuity(self):
        problem = SdeProblem(PiecewiseFn([], ["-x"]), PiecewiseFn([], ["1 + 0.1 * sin(x)"]))
        model = TransformedSde.build(problem, 1 / 16)
        z = np.linspace(-4, 4, 81)
        assert np.array_equal(model.drift(z), problem.drift(z))
        assert np.array_equal(model.diffusion(z), problem.diffusion(z))
        assert model.z0 == problem.x0

    @pytest.mark.parametrize("example", EXAMPLES)
    @pytest.mark.parametrize("kappa", KAPPAS)
    def test_drift_continuous_at_breakpoints(self, example, kappa):
        model = TransformedSde.build(load_example(example).problem, kappa)
        for bump in model.transform.bumps:
            below = model.drift(bump.xi - STRADDLE)
            above = model.drift(bump.xi + STRADDLE)
            assert abs(above - below) <= 1e-5
            assert abs(below - bump.mu_bar) <= 1e-5
            assert abs(above - bump.mu_bar) <= 1e-5
            assert model.drift(bump.xi) == pytest.approx(bump.mu_bar, abs=1e-12)

    @pytest.mark.parametrize("example", EXAMPLES)
    @pytest.mark.parametrize("kappa", KAPPAS)
    def test_diffusion_bound(self, example, kappa):
        problem = load_example(example).problem
        model = TransformedSde.build(problem, kappa)
        z = np.linspace(*problem.window(), 10_000)
        bound = (1 + kappa / (1 + kappa)) * np.max(np.abs(problem.diffusion(z)))
        assert np.max(np.abs(model.diffusion(z))) <= bound + 1e-12

    @pytest.mark.parametrize("example", EXAMPLES)
    def test_lipschitz_stable_under_refinement(self, example):
        problem = load_example(example).problem
        model = TransformedSde.build(problem, 1 / 16)
        lower, upper = problem.window()
        for coefficient in (model.drift, model.diffusion):
            coarse = estimate_lipschitz(coefficient, lower, upper, 10_001)
            fine = estimate_lipschitz(coefficient, lower, upper, 40_001)
            assert np.isfinite(coarse)
            assert fine <= 1.05 * coarse

    def test_lipschitz_grows_as_kappa_shrinks(self):
        problem = load_example("ex1").problem
        wide = TransformedSde.build(problem, 1 / 16).lipschitz_estimates()
        narrow = TransformedSde.build(problem, 1 / 256).lipschitz_estimates()
        assert narrow["mu_tilde"] > wide["mu_tilde"]

    def test_samples(self):
        model = TransformedSde.build(load_example("ex2").problem, 1 / 16)
        samples = model.samples(2001)
        assert set(samples) == {
            "x", "g", "g_prime", "g_second_left", "g_second_right",
            "mu", "sigma", "mu_tilde", "sigma_tilde",
        }
        assert all(values.shape == (2001,) for values in samples.values())
        assert samples["x"][0] == -3.0 and samples["x"][-1] == 3.0
