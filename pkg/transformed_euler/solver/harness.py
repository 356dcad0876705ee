"""Coupled multi-level Monte Carlo estimates of the strong convergence order.

Each path gets its own Brownian lattice: 2^k_max increments on the finest level drawn
from a Philox stream keyed by (master seed, path index), and every coarser level made
of exact pairwise sums of the finer one. The terminal values of one path at levels
k and k - 1 therefore come from the same Brownian motion, and

    error^(k) = sqrt(mean over paths of (X_T^(k) - X_T^(k-1))²)

measures strong convergence. The order is the least-squares slope of log error
against log delta.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.stats import norm

from .errors import PathError
from .integrator import crude_em_path, scheme_phi
from .model import SdeProblem, TransformedSde
from .runner import Runner

METHODS = ("em", "emt")
DEFAULT_CHUNK_SIZE = 256

_SEED_MASK = (1 << 64) - 1
# Uniforms are built from the top 52 bits of each raw draw, offset by half a unit,
# so they lie strictly inside (0, 1)
_UNIFORM_SHIFT = np.uint64(12)
_UNIFORM_SCALE = 2.0**-52


def _path_uniforms(master_seed: int, path_index: int, count: int) -> np.ndarray:
    """`count` uniforms from the counter-based stream of one path.

    The counter of the generator is the step index, so draw j of a path does not
    depend on how many other draws or paths are made.
    """
    key = np.array([master_seed & _SEED_MASK, path_index], dtype=np.uint64)
    raw = np.random.Philox(key=key).random_raw(count)
    return ((raw >> _UNIFORM_SHIFT).astype(np.float64) + 0.5) * _UNIFORM_SCALE


@dataclass(frozen=True, eq=False)
class BrownianLattice:
    """Brownian increments of one or more paths at every dyadic level up to `k_max`.

    `finest` holds the level-`k_max` increments, one row per path (or a 1-D array if
    the lattice was made for a single path index).
    """

    master_seed: int
    path_indices: tuple[int, ...]
    k_max: int
    T: float
    finest: np.ndarray

    def delta(self, level: int) -> float:
        """Step size T 2^-level."""
        return self.T * 2.0**-level

    def increments(self, level: int) -> np.ndarray:
        """Increments at `level`, each the sum of its two children on level + 1."""
        if not 0 <= level <= self.k_max:
            raise ValueError(f"level must be between 0 and {self.k_max}, not {level}")
        increments = self.finest
        for _ in range(self.k_max - level):
            increments = increments[..., 0::2] + increments[..., 1::2]
        return increments


def generate_lattice(
    master_seed: int,
    path_index: int | Sequence[int],
    k_max: int,
    T: float,
) -> BrownianLattice:
    """Draw the finest increments N(0, T 2^-k_max) of the given path(s).

    Normals come from the uniforms through the inverse normal CDF.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be at least 1, not {k_max}")
    single = np.ndim(path_index) == 0
    indices = tuple(int(i) for i in np.atleast_1d(path_index))
    if any(i < 0 for i in indices):
        raise ValueError("path indices must be nonnegative")
    steps = 2**k_max
    scale = math.sqrt(T / steps)
    finest = np.empty((len(indices), steps))
    for row, index in enumerate(indices):
        finest[row] = norm.ppf(_path_uniforms(master_seed, index, steps)) * scale
    if single:
        finest = finest[0]
    return BrownianLattice(master_seed, indices, k_max, T, finest)


@dataclass(frozen=True)
class LevelError:
    """The error between levels k and k - 1.

    `stderr` is the standard error of the mean squared difference.
    """

    k: int
    delta: float
    error: float
    stderr: float


@dataclass(frozen=True)
class ConvergenceReport:
    levels: tuple[LevelError, ...]
    paths: int
    fitted_order: float
    method: str
    kappa: float | None
    seed: int
    k_min: int
    k_max: int
    high_variance_level: int | None = field(default=None)

    def points(self) -> list[tuple[float, float]]:
        return [(level.delta, level.error) for level in self.levels]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "kappa": self.kappa,
            "paths": self.paths,
            "seed": self.seed,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "fitted_order": self.fitted_order,
            "high_variance_level": self.high_variance_level,
            "levels": [
                {"k": l.k, "delta": l.delta, "l2_error": l.error, "stderr": l.stderr}
                for l in self.levels
            ],
        }


def fit_order(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(delta).

    Points with zero error are dropped with a warning. Raises `ValueError` if fewer
    than two points remain, or if any delta is not positive or any error negative.
    """
    usable = []
    for delta, error in points:
        if not delta > 0:
            raise ValueError(f"step sizes must be positive, not {delta}")
        if error < 0 or not math.isfinite(error):
            raise ValueError(f"errors must be finite and nonnegative, not {error}")
        if error == 0:
            logging.warning(f"Excluding zero error at delta = {delta} from the order fit")
            continue
        usable.append((delta, error))
    if len(usable) < 2:
        raise ValueError(
            f"at least two points with positive error are needed to fit an order, got {len(usable)}"
        )
    delta, error = np.array(usable).T
    slope, _ = np.polyfit(np.log(delta), np.log(error), 1)
    return float(slope)


def _simulate_chunk(
    problem: SdeProblem,
    model: TransformedSde | None,
    master_seed: int,
    k_min: int,
    k_max: int,
    start: int,
    stop: int,
) -> np.ndarray:
    """Terminal values of paths start..stop-1 at levels k_min..k_max (paths x levels)."""
    lattice = generate_lattice(master_seed, range(start, stop), k_max, problem.T)
    terminals = np.empty((stop - start, k_max - k_min + 1))
    for column, level in enumerate(range(k_min, k_max + 1)):
        increments = lattice.increments(level)
        delta = lattice.delta(level)
        try:
            if model is None:
                result = crude_em_path(problem, increments, delta, first_path=start)
            else:
                result = scheme_phi(model, increments, delta, first_path=start)
        except PathError as error:
            raise error.at(path=start if error.path is None else None, level=level) from error
        terminals[:, column] = result.terminal
    return terminals


def simulate_terminals(
    problem: SdeProblem,
    method: str,
    kappa: float | None,
    master_seed: int,
    paths: int,
    k_min: int,
    k_max: int,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    progress_callback: Callable[[int, int], None] | None = None,
) -> np.ndarray:
    """Terminal values of all paths at every level from k_min to k_max (paths x levels).

    Paths are simulated in chunks of `chunk_size` on `workers` threads. The result
    does not depend on either.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, not {method!r}")
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be at least 1, not {chunk_size}")
    model = TransformedSde.build(problem, kappa) if method == "emt" else None
    chunks = [
        (start, min(start + chunk_size, paths)) for start in range(0, paths, chunk_size)
    ]
    job = partial(_simulate_chunk, problem, model, master_seed, k_min, k_max)
    callback = None
    if progress_callback is not None:
        callback = partial(progress_callback, total=len(chunks))
    outputs = Runner(workers).map(job, chunks, callback)
    return np.concatenate(outputs, axis=0)


def consecutive_l2_errors(
    problem: SdeProblem,
    method: str,
    kappa: float | None,
    master_seed: int,
    paths: int,
    k_min: int,
    k_max: int,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    progress_callback: Callable[[int, int], None] | None = None,
) -> ConvergenceReport:
    """Estimate error^(k) for k = k_min + 1 .. k_max and fit the convergence order.

    `kappa` is only used by the "emt" method. Any failing path aborts the run with a
    `PathError` carrying the path and level.
    """
    if paths < 2:
        raise ValueError(f"paths must be at least 2, not {paths}")
    if not 1 <= k_min < k_max:
        raise ValueError(f"need 1 <= k_min < k_max, got k_min = {k_min}, k_max = {k_max}")
    logging.info(
        f"Estimating consecutive L2 errors: method {method}, kappa {kappa}, "
        f"{paths} paths, levels {k_min} to {k_max}, seed {master_seed}"
    )
    terminals = simulate_terminals(
        problem, method, kappa, master_seed, paths, k_min, k_max,
        workers, chunk_size, progress_callback,
    )

    squares = np.diff(terminals, axis=1) ** 2
    levels = []
    for column, k in enumerate(range(k_min + 1, k_max + 1)):
        # Path order is fixed, fsum makes the sum exact
        mean = math.fsum(squares[:, column]) / paths
        stderr = float(np.std(squares[:, column], ddof=1) / math.sqrt(paths))
        level = LevelError(k, problem.T * 2.0**-k, math.sqrt(mean), stderr)
        logging.info(f"Level {k}: delta = {level.delta:.6g}, L2 error = {level.error:.6g}")
        levels.append(level)

    logging.warning(
        f"The finest pair (level {k_max}) has the highest relative variance, "
        f"its error is {levels[-1].error:.6g} ± {levels[-1].stderr:.2g} (squared)"
    )
    try:
        order = fit_order([(l.delta, l.error) for l in levels])
    except ValueError as error:
        logging.warning(f"No order could be fitted: {error}")
        order = math.nan
    logging.info(f"Fitted order for {method}: {order:.4f}")
    return ConvergenceReport(
        levels=tuple(levels),
        paths=paths,
        fitted_order=order,
        method=method,
        kappa=kappa if method == "emt" else None,
        seed=master_seed,
        k_min=k_min,
        k_max=k_max,
        high_variance_level=k_max,
    )
