"""Built-in problems: three SDEs with discontinuous drift and constant or smooth diffusion."""

from dataclasses import dataclass

from .errors import ConfigError
from .model import SdeProblem
from .piecewise import PiecewiseFn

EXAMPLE_C_BAR = 0.25
# Initial value and horizon are not part of the example definitions, these are our choice
EXAMPLE_X0 = 0.5
EXAMPLE_T = 1.0

# Optimal dividend threshold for theta = 1, K = 1.8, sigma = 1
THRESHOLD_B = 0.895635


@dataclass(frozen=True)
class NamedExample:
    id: str
    problem: SdeProblem
    description: str

    @property
    def defaults(self) -> dict:
        return {"x0": self.problem.x0, "T": self.problem.T, "c_bar": self.problem.c_bar}


def threshold_problem(
    theta: float = 1.0,
    K: float = 1.8,
    b: float = THRESHOLD_B,
    sigma: float = 1.0,
    x0: float = EXAMPLE_X0,
    T: float = EXAMPLE_T,
    c_bar: float = EXAMPLE_C_BAR,
) -> SdeProblem:
    """Surplus of an insurer paying dividends at rate K above the threshold b.

    dX = (theta - K 1{X >= b}) dt + sigma dW
    """
    return SdeProblem(
        drift=PiecewiseFn([b], [repr(float(theta)), repr(float(theta - K))]),
        diffusion=PiecewiseFn.constant(sigma),
        x0=x0,
        T=T,
        c_bar=c_bar,
    )


def _sign_drift() -> NamedExample:
    problem = SdeProblem(
        drift=PiecewiseFn([0.0], ["1", "-1"]),
        diffusion=PiecewiseFn.constant(1.0),
        x0=EXAMPLE_X0,
        T=EXAMPLE_T,
        c_bar=EXAMPLE_C_BAR,
    )
    return NamedExample("ex1", problem, "dX = -sign(X) dt + dW")


def _four_jumps() -> NamedExample:
    problem = SdeProblem(
        drift=PiecewiseFn(
            [-1.0, -0.5, 0.0, 1.0],
            ["x - 2", "2", "1 - x^2", "x^2", "-x - 1"],
        ),
        diffusion=PiecewiseFn([], ["0.5 * (1 + 1 / (x^2 + 1))"]),
        x0=EXAMPLE_X0,
        T=EXAMPLE_T,
        c_bar=EXAMPLE_C_BAR,
    )
    return NamedExample(
        "ex2",
        problem,
        "piecewise drift with jumps at -1, -0.5, 0, 1 and sigma = (1 + 1/(x²+1)) / 2",
    )


def _dividend_threshold() -> NamedExample:
    return NamedExample(
        "ex3",
        threshold_problem(),
        f"dividend threshold strategy: dX = (1 - 1.8 1{{X >= {THRESHOLD_B}}}) dt + dW",
    )


EXAMPLES = {
    "ex1": _sign_drift,
    "ex2": _four_jumps,
    "ex3": _dividend_threshold,
}


def load_example(id: str) -> NamedExample:
    try:
        return EXAMPLES[id]()
    except KeyError:
        raise ConfigError(
            f"unknown example {id!r}, choose one of {', '.join(EXAMPLES)}"
        ) from None
