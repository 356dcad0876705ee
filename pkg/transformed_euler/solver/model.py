"""SDE problem data, the coefficient assumptions, and the transformed coefficients.

For dX = mu(X) dt + sigma(X) dW and the transform g with inverse h, Z = g(X) solves

    dZ = mu~(Z) dt + sigma~(Z) dW,
    mu~(z) = mu(h(z)) g'(h(z)) + sigma²(h(z)) g''(h(z)) / 2,
    sigma~(z) = sigma(h(z)) g'(h(z)),

whose drift is continuous, and hence Lipschitz, when the jump coefficients of g are
chosen from the drift's one-sided limits.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError
from .piecewise import PiecewiseFn
from .transform import DEFAULT_C_BAR, Transform, build_transform

DEFAULT_QUOTIENT_CAP = 1e6
QUOTIENT_SAMPLES = 1001
SIGMA_CONTINUITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SdeProblem:
    """dX = drift(X) dt + diffusion(X) dW on [0, T] with X_0 = x0."""

    drift: PiecewiseFn
    diffusion: PiecewiseFn
    x0: float = 0.5
    T: float = 1.0
    c_bar: float = DEFAULT_C_BAR

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be a positive number, not {self.T}")
        if not math.isfinite(self.x0):
            raise ValueError(f"x0 must be finite, not {self.x0}")
        if not self.c_bar > 0:
            raise ValueError(f"c_bar must be positive, not {self.c_bar}")

    def with_overrides(self, **changes):
        """Copy of the problem with the given non-None fields replaced."""
        return dataclasses.replace(
            self, **{k: v for k, v in changes.items() if v is not None}
        )

    def window(self, margin: float = 2.0) -> tuple[float, float]:
        """[xi_1 - margin, xi_m + margin] over the breakpoints of both coefficients."""
        points = [*self.drift.breakpoints, *self.diffusion.breakpoints]
        if not points:
            points = [self.x0]
        return min(points) - margin, max(points) + margin

    def to_dict(self) -> dict:
        return {
            "x0": self.x0,
            "T": self.T,
            "c_bar": self.c_bar,
            "drift": self.drift.to_dict(),
            "diffusion": self.diffusion.to_dict(),
        }


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of `validate_assumptions`.

    The Lipschitz part is a heuristic: it reports the largest sampled difference
    quotient of every branch, which only bounds the true Lipschitz constant from below.
    """

    sigma_squared: dict[float, float]
    drift_quotients: list[float]
    diffusion_quotients: list[float]
    window: tuple[float, float]
    quotient_cap: float
    heuristic: bool = field(default=True)

    def summary(self) -> str:
        lines = [
            "ellipticity: "
            + ", ".join(f"sigma²({xi:g}) = {s:.6g}" for xi, s in self.sigma_squared.items()),
            "max sampled difference quotient per drift branch: "
            + ", ".join(f"{q:.6g}" for q in self.drift_quotients),
            "max sampled difference quotient per diffusion branch: "
            + ", ".join(f"{q:.6g}" for q in self.diffusion_quotients),
            f"(Lipschitz check is heuristic: sampled on {self.window}, cap {self.quotient_cap:g})",
        ]
        return "\n".join(lines)


def estimate_lipschitz(fn, lower: float, upper: float, samples: int = 10001) -> float:
    """Largest difference quotient of `fn` over adjacent points of a uniform grid."""
    x = np.linspace(lower, upper, samples)
    y = np.asarray(fn(x), dtype=float)
    return float(np.max(np.abs(np.diff(y)) / np.diff(x)))


def _branch_quotients(f: PiecewiseFn, window, cap, name):
    quotients = []
    for i, branch in enumerate(f.branches):
        lower, upper = f.interval(i)
        lower, upper = max(lower, window[0]), min(upper, window[1])
        if not lower < upper:
            quotients.append(0.0)
            continue
        # Branches extend continuously to their closed interval
        x = np.linspace(lower, upper, QUOTIENT_SAMPLES)
        y = np.broadcast_to(branch.evaluate(x), x.shape)
        q = np.abs(np.diff(y)) / np.diff(x)
        worst = int(np.argmax(q))
        if q[worst] > cap:
            raise AssumptionError(
                f"{name} branch {i} ({branch}) looks non-Lipschitz near x = {x[worst]:g}: "
                f"difference quotient {q[worst]:.6g} exceeds cap {cap:g}",
                kind="lipschitz",
                location=float(x[worst]),
                branch=i,
            )
        quotients.append(float(q[worst]))
    return quotients


def validate_assumptions(
    problem: SdeProblem,
    quotient_cap: float = DEFAULT_QUOTIENT_CAP,
) -> AssumptionReport:
    """Check ellipticity exactly at the drift breakpoints and Lipschitz-ness heuristically.

    Raises `AssumptionError` on the first violation.
    """
    sigma_squared = {}
    for xi in problem.drift.breakpoints:
        variance = problem.diffusion(xi) ** 2
        if not variance >= problem.c_bar:
            raise AssumptionError(
                f"ellipticity violated at xi = {xi}: sigma²(xi) = {variance} < c_bar = {problem.c_bar}",
                kind="ellipticity",
                location=xi,
            )
        sigma_squared[xi] = variance

    for xi, left, right in problem.diffusion.jumps():
        if abs(left - right) > SIGMA_CONTINUITY_TOLERANCE * max(1.0, abs(right)):
            raise AssumptionError(
                f"diffusion must be continuous, but jumps from {left} to {right} at x = {xi}",
                kind="lipschitz",
                location=xi,
            )

    window = problem.window()
    report = AssumptionReport(
        sigma_squared=sigma_squared,
        drift_quotients=_branch_quotients(problem.drift, window, quotient_cap, "drift"),
        diffusion_quotients=_branch_quotients(
            problem.diffusion, window, quotient_cap, "diffusion"
        ),
        window=window,
        quotient_cap=quotient_cap,
    )
    logging.info("Coefficient assumptions satisfied:\n" + report.summary())
    return report


@dataclass(frozen=True)
class TransformedSde:
    """The problem together with its transform; exposes mu~ and sigma~."""

    base: SdeProblem
    transform: Transform

    @classmethod
    def build(cls, problem: SdeProblem, kappa: float):
        return cls(
            problem,
            build_transform(problem.drift, problem.diffusion, kappa, problem.c_bar),
        )

    @property
    def z0(self) -> float:
        return self.transform.g(self.base.x0)

    def drift(self, z):
        """mu~(z), with g'' taken from the right at knots as the drift is."""
        if self.transform.is_identity:
            return self.base.drift(z)
        x = self.transform.h(z)
        mu = self.base.drift(x)
        sigma = self.base.diffusion(x)
        return mu * self.transform.g_prime(x) + 0.5 * sigma**2 * self.transform.g_second(x)

    def diffusion(self, z):
        """sigma~(z)."""
        if self.transform.is_identity:
            return self.base.diffusion(z)
        x = self.transform.h(z)
        return self.base.diffusion(x) * self.transform.g_prime(x)

    def lipschitz_estimates(self, samples: int = 10001) -> dict[str, float]:
        lower, upper = self.base.window()
        return {
            "mu_tilde": estimate_lipschitz(self.drift, lower, upper, samples),
            "sigma_tilde": estimate_lipschitz(self.diffusion, lower, upper, samples),
        }

    def samples(self, n: int = 2001) -> dict[str, np.ndarray]:
        """Uniform samples of g, its derivatives and all coefficients over the window.

        mu_tilde and sigma_tilde are evaluated with the grid value taken as z.
        """
        lower, upper = self.base.window()
        x = np.linspace(lower, upper, n)
        t = self.transform
        return {
            "x": x,
            "g": t.g(x),
            "g_prime": t.g_prime(x),
            "g_second_left": t.g_second(x, "left"),
            "g_second_right": t.g_second(x, "right"),
            "mu": self.base.drift(x),
            "sigma": self.base.diffusion(x),
            "mu_tilde": self.drift(x),
            "sigma_tilde": self.diffusion(x),
        }


def transformed_drift(model: TransformedSde, z):
    return model.drift(z)


def transformed_diffusion(model: TransformedSde, z):
    return model.diffusion(z)
