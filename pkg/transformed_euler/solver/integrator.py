"""Euler-Maruyama on the transformed SDE (method "emt") and on the original one ("em").

Brownian increments are always supplied by the caller. All functions accept a 1-D
array of increments for a single path or a 2-D array (paths x steps) to advance many
paths at once; the arithmetic is elementwise, so a path's result does not depend on
which other paths it is simulated with.
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PathError
from .model import SdeProblem, TransformedSde

Coefficient = Callable[[float | np.ndarray], float | np.ndarray]


@dataclass(frozen=True)
class PathResult:
    """Terminal value(s) of one or many simulated paths."""

    terminal: float | np.ndarray
    steps: int
    step_size: float
    method: str


def em_step(drift: Coefficient, diffusion: Coefficient, z, delta: float, dW):
    """One Euler-Maruyama step z + drift(z) delta + diffusion(z) dW."""
    return z + drift(z) * delta + diffusion(z) * dW


def em_path(
    drift: Coefficient,
    diffusion: Coefficient,
    z0: float,
    increments,
    delta: float,
    method: str = "em",
    first_path: int = 0,
) -> PathResult:
    """Fold `em_step` over the increments (the last axis is time).

    `first_path` is the global index of the first row, used in error reports. Raises
    `PathError` as soon as any path becomes non-finite.
    """
    increments = np.asarray(increments, dtype=float)
    steps = increments.shape[-1]
    if increments.ndim == 1:
        z = float(z0)
    else:
        z = np.full(increments.shape[0], float(z0))
    for step in range(steps):
        try:
            z = em_step(drift, diffusion, z, delta, increments[..., step])
        except DomainError as error:
            bad = error.index or 0
            raise PathError(step, path=first_path + bad, reason=str(error)) from error
        finite = np.isfinite(z)
        if not np.all(finite):
            bad = 0 if np.ndim(z) == 0 else int(np.argmin(finite))
            raise PathError(step, path=first_path + bad)
    if np.ndim(z) == 0:
        z = float(z)
    return PathResult(terminal=z, steps=steps, step_size=delta, method=method)


def scheme_phi(
    model: TransformedSde,
    increments,
    delta: float,
    x: float | None = None,
    first_path: int = 0,
) -> PathResult:
    """The transformed scheme h(phi^n(g(x))) started from `x` (default: the problem's x0)."""
    x = model.base.x0 if x is None else x
    z0 = model.transform.g(x)
    result = em_path(
        model.drift, model.diffusion, z0, increments, delta, "emt", first_path
    )
    return PathResult(
        terminal=model.transform.h(result.terminal),
        steps=result.steps,
        step_size=delta,
        method="emt",
    )


def crude_em_path(
    problem: SdeProblem,
    increments,
    delta: float,
    x: float | None = None,
    first_path: int = 0,
) -> PathResult:
    """Plain Euler-Maruyama on the original, discontinuous coefficients."""
    x = problem.x0 if x is None else x
    return em_path(
        problem.drift, problem.diffusion, x, increments, delta, "em", first_path
    )
