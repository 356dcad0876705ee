"""The C^1 piecewise-cubic transform g that removes jumps from the drift, and its inverse h.

Around every drift discontinuity xi two "bumps" are laid down for g'': one on the
right of xi with g''(xi+) = alpha and one on the left with g''(xi-) = beta. Each
bump is a continuous, piecewise linear g'' on six pieces whose first and second
antiderivatives both vanish at the ends of the bump, so that g(x) = x and
g'(x) = 1 outside the bumps and at every xi. g itself is stored as a piecewise cubic
(`scipy.interpolate.PPoly`) with coefficients written down in closed form, g' and
g'' likewise as quadratic and linear `PPoly`s.

Shape of a right bump of width d (u = x - xi, a = alpha):

    u       0     d/2      d       5d/4        7d/4       2d
    g''     a     -a/2     0       -2a/3       2a/3       0
    g'-1    0     a d/8    0       -a d/12     -a d/12    0
    g-x     0     a d²/16  a d²/12 11a d²/144  a d²/144   0

g'' is linear between these knots. The left bump is the mirror image x -> 2 xi - x
with beta in place of alpha, which flips the sign of g' - 1 and keeps g - x.
max|g' - 1| over a bump is |a| d / 6 (reached at u = d/3 and u = 3d/2) and
max|g - x| is |a| d² / 12.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PPoly

from .errors import AssumptionError, InversionError
from .piecewise import PiecewiseFn

DEFAULT_C_BAR = 1e-6

INVERSION_TOLERANCE = 1e-12
INVERSION_MAX_ITERATIONS = 100

# Knots of a bump in units of its width d, and the closed-form values of g'', g' - 1
# and g - x there (g' - 1 in units of a*d, g - x in units of a*d²)
_KNOTS = (0.0, 0.5, 1.0, 1.25, 1.75, 2.0)
_SECOND = (1.0, -0.5, 0.0, -2.0 / 3.0, 2.0 / 3.0, 0.0)
_FIRST = (0.0, 1.0 / 8.0, 0.0, -1.0 / 12.0, -1.0 / 12.0, 0.0)
_ZEROTH = (0.0, 1.0 / 16.0, 1.0 / 12.0, 11.0 / 144.0, 1.0 / 144.0, 0.0)


@dataclass(frozen=True)
class BumpSpec:
    """Correction data for one drift discontinuity.

    `d_left`/`d_right` are None where the corresponding jump coefficient is zero
    and no bump is needed on that side. The right bump covers (xi, xi + 2 d_right],
    the left bump [xi - 2 d_left, xi).
    """

    xi: float
    alpha: float
    beta: float
    d_left: float | None
    d_right: float | None
    mu_bar: float

    @property
    def c(self) -> float | None:
        """Centre of the right bump, c = xi + d_right."""
        return None if self.d_right is None else self.xi + self.d_right

    @property
    def support(self) -> tuple[float, float]:
        lower = self.xi - 2 * self.d_left if self.d_left is not None else self.xi
        upper = self.xi + 2 * self.d_right if self.d_right is not None else self.xi
        return lower, upper

    def knots(self) -> list[float]:
        """All knots of g'' belonging to this discontinuity, in increasing order."""
        knots = set()
        if self.d_left is not None:
            knots.update(self.xi - k * self.d_left for k in _KNOTS)
        if self.d_right is not None:
            knots.update(self.xi + k * self.d_right for k in _KNOTS)
        return sorted(knots)


def compute_jump_coefficients(
    mu: PiecewiseFn,
    sigma: PiecewiseFn,
    xi: float,
    c_bar: float = DEFAULT_C_BAR,
) -> tuple[float, float, float]:
    """Return (alpha, beta, mu_bar) for the drift discontinuity at `xi`.

    mu_bar is the average of the one-sided drift limits and
    alpha = 2 (mu_bar - mu(xi+)) / sigma²(xi), beta = 2 (mu_bar - mu(xi-)) / sigma²(xi).
    """
    left = mu.one_sided_limit(xi, "left")
    right = mu.one_sided_limit(xi, "right")
    variance = sigma(xi) ** 2
    if not variance >= c_bar:
        raise AssumptionError(
            f"ellipticity violated at xi = {xi}: sigma²(xi) = {variance} < c_bar = {c_bar}",
            kind="ellipticity",
            location=xi,
        )
    mu_bar = (left + right) / 2
    alpha = 2 * (mu_bar - right) / variance
    beta = 2 * (mu_bar - left) / variance
    return alpha, beta, mu_bar


def choose_bump_width(
    xi_prev: float,
    xi: float,
    xi_next: float,
    alpha: float,
    beta: float,
    kappa: float,
) -> tuple[float | None, float | None]:
    """Return the widths (d_left, d_right) of the bumps around `xi`.

    Each width is the largest one for which the bump stays within a quarter of the
    gap to the neighbouring breakpoint and |g' - 1| = |coefficient| d / 6 stays below
    kappa / (1 + kappa). A side whose coefficient is zero gets no bump (None).
    """
    cap = kappa / (1 + kappa)

    def width(gap, coefficient):
        if coefficient == 0:
            return None
        return min(gap / 4, 6 * cap / abs(coefficient))

    return width(xi - xi_prev, beta), width(xi_next - xi, alpha)


def _bump_pieces(xi: float, a: float, d: float, side: str):
    """Pieces (start, end, g'' at start, slope of g'', g'-1 at start, g-x at start)."""
    knots = [k * d for k in _KNOTS]
    second = [s * a for s in _SECOND]
    first = [f * a * d for f in _FIRST]
    zeroth = [z * a * d * d for z in _ZEROTH]
    pieces = []
    for i in range(len(knots) - 1):
        u0, u1 = knots[i], knots[i + 1]
        slope = (second[i + 1] - second[i]) / (u1 - u0)
        if side == "right":
            pieces.append((xi + u0, xi + u1, second[i], slope, first[i], zeroth[i]))
        else:
            # Mirror image: the piece starts (in x) where u = u1
            pieces.append(
                (xi - u1, xi - u0, second[i + 1], -slope, -first[i + 1], zeroth[i + 1])
            )
    if side == "left":
        pieces.reverse()
    return pieces


class Transform:
    """The pair (g, h) built for a set of drift discontinuities.

    Immutable after construction; evaluation is thread-safe and vectorised.
    """

    def __init__(self, kappa: float, bumps: list[BumpSpec]):
        self.kappa = kappa
        self.bumps = tuple(sorted(bumps, key=lambda b: b.xi))

        pieces = []
        for bump in self.bumps:
            if bump.d_left is not None:
                pieces.extend(_bump_pieces(bump.xi, bump.beta, bump.d_left, "left"))
            if bump.d_right is not None:
                pieces.extend(_bump_pieces(bump.xi, bump.alpha, bump.d_right, "right"))
        self.is_identity = len(pieces) == 0

        # Zero pieces fill the gaps between bumps and pad both ends, so that PPoly's
        # extrapolation gives g = x outside
        if self.is_identity:
            rows = [(0.0, 0.0, 0.0, 0.0, 0.0)]
            breaks = [0.0, 1.0]
        else:
            rows = [(pieces[0][0] - 1.0, 0.0, 0.0, 0.0, 0.0)]
            end = pieces[0][0]
            for start, stop, second, slope, first, zeroth in pieces:
                if start > end:
                    rows.append((end, 0.0, 0.0, 0.0, 0.0))
                rows.append((start, second, slope, first, zeroth))
                end = stop
            rows.append((end, 0.0, 0.0, 0.0, 0.0))
            breaks = [row[0] for row in rows] + [end + 1.0]

        self.knots = np.array(breaks)
        table = np.array([row[1:] for row in rows]).T
        second, slope, first, zeroth = table
        self._g_second = PPoly(np.vstack([slope, second]), self.knots)
        self._g_first = PPoly(np.vstack([slope / 2, second, first]), self.knots)
        self._g_zeroth = PPoly(np.vstack([slope / 6, second / 2, first, zeroth]), self.knots)

        supports = [b.support for b in self.bumps if b.support[0] < b.support[1]]
        self._support_lower = np.array([s[0] for s in supports])
        self._support_upper = np.array([s[1] for s in supports])

        offsets = [0.0]
        for bump in self.bumps:
            if bump.d_right is not None:
                offsets.append(abs(bump.alpha) * bump.d_right**2 / 12)
            if bump.d_left is not None:
                offsets.append(abs(bump.beta) * bump.d_left**2 / 12)
        # sup |g(x) - x|, used to bracket the inversion
        self.sup_offset = max(offsets)

    @staticmethod
    def _result(value, x):
        return float(value) if np.ndim(x) == 0 else value

    def g(self, x):
        x_arr = np.asarray(x, dtype=float)
        return self._result(x_arr + self._g_zeroth(x_arr), x)

    def g_prime(self, x):
        x_arr = np.asarray(x, dtype=float)
        return self._result(1.0 + self._g_first(x_arr), x)

    def g_second(self, x, side: str = "right"):
        """g''(x); at knots (including every xi) `side` selects the one-sided limit."""
        x_arr = np.asarray(x, dtype=float)
        if side == "right":
            return self._result(self._g_second(x_arr), x)
        if side != "left":
            raise ValueError(f"side must be 'left' or 'right', not {side!r}")
        c = self._g_second.c
        index = np.clip(np.searchsorted(self.knots, x_arr, side="left") - 1, 0, c.shape[1] - 1)
        s = x_arr - self.knots[index]
        return self._result(c[0, index] * s + c[1, index], x)

    def inside_support(self, z):
        """Mask of points lying strictly inside some bump (where g and h differ from id)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self._support_lower.size == 0:
            return np.zeros(z.shape, dtype=bool)
        index = np.searchsorted(self._support_lower, z, side="right") - 1
        inside = index >= 0
        inside[inside] &= z[inside] < self._support_upper[index[inside]]
        return inside

    def h(self, z):
        """Inverse of g. Identity outside the bumps, safeguarded Newton inside."""
        z_arr = np.atleast_1d(np.asarray(z, dtype=float))
        x = z_arr.copy()
        if not self.is_identity:
            inside = self.inside_support(z_arr)
            if np.any(inside):
                x[inside] = self._invert(z_arr[inside])
        return float(x[0]) if np.ndim(z) == 0 else x.reshape(np.shape(z))

    def h_prime(self, z):
        return self._result(1.0 / np.asarray(self.g_prime(self.h(z))), z)

    def _invert(self, z: np.ndarray) -> np.ndarray:
        """Solve g(x) = z by Newton's method, falling back to bisection.

        Every element iterates independently and is frozen once converged, so the
        result for one element never depends on the others.
        """
        pad = self.sup_offset + 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(z))
        lower = z - pad
        upper = z + pad
        x = z.copy()
        tolerance = INVERSION_TOLERANCE * np.maximum(1.0, np.abs(z))
        active = np.arange(z.size)
        for _ in range(INVERSION_MAX_ITERATIONS):
            xa = x[active]
            residual = self.g(xa) - z[active]
            done = np.abs(residual) <= tolerance[active]
            # g is increasing, so the sign of the residual tells which side the root is on
            above = residual > 0
            upper[active[above]] = xa[above]
            lower[active[~above]] = xa[~above]
            step = xa - residual / self.g_prime(xa)
            lo, hi = lower[active], upper[active]
            outside = ~((step > lo) & (step < hi))
            step[outside] = 0.5 * (lo[outside] + hi[outside])
            done |= step == xa
            pending = ~done
            x[active[pending]] = step[pending]
            active = active[pending]
            if active.size == 0:
                return x
        raise InversionError(
            f"inverting g did not converge within {INVERSION_MAX_ITERATIONS} iterations for z = {z[active][:5]}"
        )


def build_transform(
    mu: PiecewiseFn,
    sigma: PiecewiseFn,
    kappa: float,
    c_bar: float = DEFAULT_C_BAR,
) -> Transform:
    """Construct the transform for drift `mu` and diffusion `sigma`.

    Breakpoints of `mu` where the drift is continuous get no bumps.
    """
    if not 0 < kappa < 1:
        raise ValueError("kappa must be in (0,1)")
    xis = list(mu.breakpoints)
    bumps = []
    for k, xi in enumerate(xis):
        xi_prev = xis[k - 1] if k > 0 else xis[0] - 1
        xi_next = xis[k + 1] if k < len(xis) - 1 else xis[-1] + 1
        alpha, beta, mu_bar = compute_jump_coefficients(mu, sigma, xi, c_bar)
        d_left, d_right = choose_bump_width(xi_prev, xi, xi_next, alpha, beta, kappa)
        logging.info(
            f"Bump at xi = {xi}: alpha = {alpha:.6g}, beta = {beta:.6g}, d_left = {d_left}, d_right = {d_right}"
        )
        bumps.append(BumpSpec(xi, alpha, beta, d_left, d_right, mu_bar))
    return Transform(kappa, bumps)


def eval_g(transform: Transform, x):
    return transform.g(x)


def eval_g_prime(transform: Transform, x):
    return transform.g_prime(x)


def eval_g_second(transform: Transform, x, side: str = "right"):
    return transform.g_second(x, side)


def eval_h(transform: Transform, z):
    return transform.h(z)


def eval_h_prime(transform: Transform, z):
    return transform.h_prime(z)


def offset_bound(transform: Transform) -> float:
    """(kappa / 2) max(1, largest gap between consecutive discontinuities)."""
    xis = [b.xi for b in transform.bumps]
    gaps = [b - a for a, b in zip(xis, xis[1:])]
    return transform.kappa / 2 * max([1.0, *gaps])
