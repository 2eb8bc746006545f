"""Diffusion in a random potential as a speed motion on a mesh.

On the mesh ``x_j = j h`` the scale increments and speed masses are

    r_h(x_j, x_{j+1}) = int_{x_j}^{x_{j+1}} exp(W),
    nu_h(x_j) = (1/2) int_{x_{j-1}}^{x_{j+1}} exp(-W),

(trapezoid rule on the potential's own grid) and the chain jumps from x to a
neighbour y at rate ``1 / (2 nu_h(x) r_h(x, y))``. With ``W = 0`` both rates
equal ``1 / (2 h^2)`` and the chain converges to standard Brownian motion.
The two end points of the potential's window are absorbing exits.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from .._spectral import ctmc_law
from .._validation import check_positive, check_positive_int, check_random_state
from ..exceptions import InvalidParameterError, WindowExitError

__all__ = ["BroxChain", "BroxPath", "brox_chain", "brox_simulate", "brox_positions", "brox_law"]


@dataclass(frozen=True, eq=False)
class BroxChain:
    """Interior mesh points with their jump rates; ``r_edge`` has one more
    entry than ``x`` (it includes the two exit edges)."""

    x: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    r_edge: np.ndarray = field(repr=False)
    h: float = 0.0

    @property
    def rate_right(self):
        return 1.0 / (2.0 * self.nu * self.r_edge[1:])

    @property
    def rate_left(self):
        return 1.0 / (2.0 * self.nu * self.r_edge[:-1])

    def index(self, x0):
        j = int(np.rint((x0 - self.x[0]) / self.h))
        if not 0 <= j < self.x.size:
            raise InvalidParameterError(f"start {x0} is outside the mesh")
        return j


def brox_chain(W, h):
    """Mesh-``h`` chain for the sampled potential ``W`` (a ContinuumPotential
    whose mesh divides ``h``)."""
    h = check_positive(h, "h")
    ratio = h / W.mesh
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-6 * max(1.0, ratio):
        raise InvalidParameterError(f"mesh {h} is not a multiple of the potential mesh {W.mesh}")
    zero = int(np.argmin(np.abs(W.grid)))
    sel = np.arange(zero % k, W.grid.size, k)
    if sel.size < 3:
        raise InvalidParameterError("window holds fewer than three mesh points")
    # per-cell trapezoids summed in blocks; differencing cumulative integrals
    # would cancel catastrophically when exp(W) spans many orders
    dx = np.diff(W.grid)
    ew, emw = np.exp(W.values), np.exp(-W.values)
    cell_r = 0.5 * dx * (ew[1:] + ew[:-1])
    cell_m = 0.5 * dx * (emw[1:] + emw[:-1])
    r_edge = np.add.reduceat(cell_r[: sel[-1]], sel[:-1])
    m_edge = np.add.reduceat(cell_m[: sel[-1]], sel[:-1])
    x = W.grid[sel][1:-1]
    nu = 0.5 * (m_edge[:-1] + m_edge[1:])
    return BroxChain(x, nu, r_edge, h)


@dataclass(frozen=True)
class BroxPath:
    times: np.ndarray
    positions: np.ndarray
    horizon: float
    truncated: bool = False

    def at(self, t):
        return self.positions[np.searchsorted(self.times, t, side="right") - 1]


def _exit(chain, where):
    return WindowExitError(
        f"path left the potential window near {where}; widen the window",
        position=where,
        window=(float(chain.x[0] - chain.h), float(chain.x[-1] + chain.h)),
    )


def brox_simulate(W, horizon, h, rng=None, *, start=0.0, max_jumps=50_000_000):
    """One path up to ``horizon``."""
    horizon = check_positive(horizon, "horizon")
    rng = check_random_state(rng)
    chain = brox_chain(W, h)
    t, idx, status = _kernels.birth_death_path(
        rng, chain.rate_right, chain.rate_left, chain.index(start), horizon, int(max_jumps)
    )
    if status == 2:
        raise _exit(chain, float(chain.x[idx[-1]]))
    return BroxPath(t, chain.x[idx], horizon, status == 1)


def brox_positions(W, horizons, h, n_paths, rng=None, *, start=0.0):
    """Positions of independent paths at the sorted ``horizons``; shape
    ``(n_paths, len(horizons))``."""
    rng = check_random_state(rng)
    hz = np.atleast_1d(np.asarray(horizons, dtype=float))
    if np.any(hz <= 0) or np.any(np.diff(hz) < 0):
        raise InvalidParameterError("horizons must be positive and sorted")
    chain = brox_chain(W, h)
    out, bad = _kernels.birth_death_positions(
        rng, chain.rate_right, chain.rate_left, chain.index(start), hz, check_positive_int(n_paths, "n_paths")
    )
    if bad >= 0:
        raise _exit(chain, float("nan"))
    return chain.x[out]


def brox_law(W, t, h, *, start=0.0, cutoff=40.0):
    """Exact law of the mesh chain at time ``t``: ``(x, probabilities)``.

    Mass that reached the window ends is missing from the total.
    """
    chain = brox_chain(W, h)
    c = 1.0 / chain.r_edge
    law = ctmc_law(
        c[1:-1], 2.0 * chain.nu, chain.index(start), float(t),
        kill_left=c[0], kill_right=c[-1], cutoff=cutoff,
    )
    return chain.x, law
