"""Piecewise-defined scalar functions with exact breakpoint bookkeeping.

A `PiecewiseFn` with breakpoints xi_1 < ... < xi_m has m + 1 branches; branch i is
used on the interval (xi_i, xi_{i+1}) with xi_0 = -inf and xi_{m+1} = +inf. The
value at a breakpoint itself belongs to the branch on its right, i.e. functions are
represented right-continuously. Branch expressions must extend continuously to the
closure of their interval, which is what lets `one_sided_limit` simply evaluate the
neighbouring branch at the breakpoint.
"""

import math
from collections.abc import Sequence

import numpy as np

from .errors import BreakpointError, DomainError
from .expression import Node, parse_expression

BREAKPOINT_TOLERANCE = 1e-12

# Number of probe points per branch used to check finiteness at construction
PROBE_POINTS = 65
# How far the unbounded outer branches are probed
PROBE_REACH = 10.0


def validate_breakpoints(breakpoints: Sequence[float]) -> None:
    """Check that breakpoints are finite and strictly increasing.

    Two breakpoints closer than `BREAKPOINT_TOLERANCE` count as duplicates. Raises
    `BreakpointError` naming the index of the offending breakpoint.
    """
    for i, xi in enumerate(breakpoints):
        if not math.isfinite(xi):
            raise BreakpointError(i, "non-finite", xi)
        if i == 0:
            continue
        previous = breakpoints[i - 1]
        if abs(xi - previous) <= BREAKPOINT_TOLERANCE:
            raise BreakpointError(i, "duplicate", xi)
        if xi < previous:
            raise BreakpointError(i, "unordered", xi)


class PiecewiseFn:
    """A scalar function given by ordered breakpoints and one expression per interval.

    Instances are immutable after construction and can be shared between threads.
    Branches may be given as `Node` objects or as source strings, which are parsed.
    """

    def __init__(
        self,
        breakpoints: Sequence[float],
        branches: Sequence[Node | str],
    ):
        breakpoints = [float(xi) for xi in breakpoints]
        validate_breakpoints(breakpoints)
        if len(branches) != len(breakpoints) + 1:
            raise ValueError(
                f"{len(breakpoints)} breakpoints need {len(breakpoints) + 1} branches, got {len(branches)}"
            )
        self._breakpoints = np.array(breakpoints, dtype=float)
        self._breakpoints.flags.writeable = False
        self._branches = tuple(
            parse_expression(b) if isinstance(b, str) else b for b in branches
        )
        self._probe()

    @classmethod
    def constant(cls, value: float):
        return cls([], [str(float(value))])

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(float(xi) for xi in self._breakpoints)

    @property
    def branches(self) -> tuple[Node, ...]:
        return self._branches

    def interval(self, i: int) -> tuple[float, float]:
        """The interval on which branch `i` is used."""
        lower = self._breakpoints[i - 1] if i > 0 else -math.inf
        upper = self._breakpoints[i] if i < len(self._breakpoints) else math.inf
        return float(lower), float(upper)

    def _probe(self):
        """Check every branch is finite on a sample grid over its closed interval."""
        for i, branch in enumerate(self._branches):
            lower, upper = self.interval(i)
            if math.isinf(lower) and math.isinf(upper):
                lower, upper = -PROBE_REACH, PROBE_REACH
            elif math.isinf(lower):
                lower = upper - PROBE_REACH
            elif math.isinf(upper):
                upper = lower + PROBE_REACH
            grid = np.linspace(lower, upper, PROBE_POINTS)
            with np.errstate(all="ignore"):
                values = branch.evaluate(grid)
            bad = ~np.isfinite(values)
            if np.any(bad):
                x = float(grid[np.argmax(bad)])
                raise DomainError(
                    f"branch {i} ({branch}) is not finite at x = {x} on its interval [{lower}, {upper}]",
                    x,
                )

    def branch_index(self, x, side: str = "right"):
        """Index of the branch owning `x`; at a breakpoint `side` decides which."""
        return np.searchsorted(self._breakpoints, x, side=side)

    def _evaluate(self, x, side: str):
        if np.ndim(x) == 0:
            branch = self._branches[int(self.branch_index(x, side))]
            with np.errstate(all="ignore"):
                value = branch.evaluate(float(x))
            if not np.isfinite(value):
                raise DomainError(f"non-finite value {value} of {branch} at x = {x}", float(x))
            return float(value)

        x = np.asarray(x, dtype=float)
        index = self.branch_index(x, side)
        out = np.empty_like(x)
        with np.errstate(all="ignore"):
            for i, branch in enumerate(self._branches):
                mask = index == i
                if np.any(mask):
                    out[mask] = branch.evaluate(x[mask])
        bad = ~np.isfinite(out)
        if np.any(bad):
            index = int(np.flatnonzero(bad)[0])
            culprit = float(x.flat[index])
            raise DomainError(
                f"non-finite value of {self} at x = {culprit}", culprit, index
            )
        return out

    def __call__(self, x):
        """Evaluate at `x` (float or array); breakpoints take the right branch's value."""
        return self._evaluate(x, "right")

    def one_sided_limit(self, xi: float, side: str) -> float:
        """Limit of the function approaching `xi` from `side` ("left" or "right").

        At a non-breakpoint both sides give the plain value, through the same code
        path as evaluation.
        """
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', not {side!r}")
        return self._evaluate(float(xi), side)

    def jumps(self) -> list[tuple[float, float, float]]:
        """(xi, left limit, right limit) for every breakpoint."""
        return [
            (xi, self.one_sided_limit(xi, "left"), self.one_sided_limit(xi, "right"))
            for xi in self.breakpoints
        ]

    def to_dict(self) -> dict:
        """Breakpoints and branch sources, in the layout used by problem config files."""
        return {
            "breakpoints": list(self.breakpoints),
            "branches": [b.to_source() for b in self._branches],
        }

    def __eq__(self, other):
        if not isinstance(other, PiecewiseFn):
            return NotImplemented
        return (
            self.breakpoints == other.breakpoints and self._branches == other._branches
        )

    def __hash__(self):
        return hash((self.breakpoints, self._branches))

    def __repr__(self):
        return f"PiecewiseFn({list(self.breakpoints)}, {[str(b) for b in self._branches]})"


def evaluate(f: PiecewiseFn, x):
    """Value of `f` at `x` under the right-continuous convention."""
    return f(x)


def one_sided_limit(f: PiecewiseFn, xi: float, side: str) -> float:
    return f.one_sided_limit(xi, side)
