"""Nearest-neighbour random environments on a finite window of the integers.

An environment stores ``log rho_z = log(omega_z^- / omega_z^+)`` directly, so
that extreme transition probabilities never overflow. The potential ``V`` is
the two-sided cumulative sum of ``log rho`` pinned at ``V(0) = 0``; edge
``{z, z+1}`` carries resistance ``exp(V_z)``.
"""

from dataclasses import dataclass, field
import io

import numpy as np
from scipy.special import expit, log1p, logit, polygamma

from . import _kernels
from ._spectral import dtmc_law
from ._validation import (
    check_positive,
    check_positive_int,
    check_probability,
    check_random_state,
)
from .exceptions import InvalidParameterError, SiteRangeError, WindowExitError

__all__ = [
    "Environment1D",
    "Potential1D",
    "BarrierEnvironment",
    "flatten",
    "potential1d",
    "resistance1d",
    "invariant1d",
    "escape_resistance",
    "barrier_env",
    "barrier_potential",
    "simulate_walk",
    "walk_positions",
    "walk_law",
    "write_columns",
    "read_columns",
]


def _check_window(lo, hi):
    lo, hi = int(lo), int(hi)
    if not lo <= 0 <= hi:
        raise InvalidParameterError(f"window [{lo}, {hi}] must contain 0")
    return lo, hi


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Environment1D:
    """Transition probabilities on the window ``[lo, hi]``.

    ``log_rho[k]`` belongs to site ``lo + k``. ``flatten_index`` records the
    m of the flattening already applied and ``sigma2`` the variance of the
    unflattened ``log rho`` when it is known (NaN otherwise).
    """

    lo: int
    hi: int
    log_rho: np.ndarray = field(repr=False)
    flatten_index: int = 1
    sigma2: float = float("nan")

    def __post_init__(self):
        lo, hi = _check_window(self.lo, self.hi)
        log_rho = _frozen(self.log_rho)
        if log_rho.shape != (hi - lo + 1,):
            raise InvalidParameterError(
                f"log_rho has shape {log_rho.shape}, window needs {hi - lo + 1} sites"
            )
        if not np.all(np.isfinite(log_rho)):
            raise InvalidParameterError("log_rho must be finite, i.e. 0 < omega < 1")
        check_positive_int(self.flatten_index, "flatten_index")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "log_rho", log_rho)

    @classmethod
    def from_omega_minus(cls, omega_minus, lo, *, sigma2=float("nan")):
        om = np.asarray(omega_minus, dtype=float)
        if np.any(~(om > 0) | ~(om < 1)):
            raise InvalidParameterError("omega_minus must lie strictly inside (0, 1)")
        # log(om) - log(1 - om), the second term via log1p for om near 0
        log_rho = np.log(om) - log1p(-om)
        return cls(lo, lo + om.size - 1, log_rho, 1, sigma2)

    @classmethod
    def sample(cls, lo, hi, rng=None, law="gaussian", **params):
        """I.i.d. environment on ``[lo, hi]``.

        ``law`` is one of ``"gaussian"`` (``log rho ~ N(mean, sigma^2)``),
        ``"beta"`` (``omega^- ~ Beta(a, b)``, which covers Dirichlet laws on
        the two directions), ``"uniform"`` (``omega^- ~ U(a, b)``) or a
        callable ``f(rng, size)`` returning ``omega^-`` values.
        """
        lo, hi = _check_window(lo, hi)
        rng = check_random_state(rng)
        size = hi - lo + 1
        if callable(law):
            return cls.from_omega_minus(law(rng, size), lo, sigma2=params.get("sigma2", np.nan))
        if law == "gaussian":
            sigma = float(params.get("sigma", 1.0))
            if not sigma >= 0:
                raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
            mean = float(params.get("mean", 0.0))
            return cls(lo, hi, mean + sigma * rng.standard_normal(size), 1, sigma**2)
        if law == "beta":
            a = check_positive(params.get("a", 1.0), "a")
            b = check_positive(params.get("b", 1.0), "b")
            om = rng.beta(a, b, size)
            # logit of a Beta(a, b) variable has variance trigamma(a) + trigamma(b)
            s2 = float(polygamma(1, a) + polygamma(1, b))
            return cls.from_omega_minus(np.clip(om, 1e-300, 1 - 1e-16), lo, sigma2=s2)
        if law == "uniform":
            a = float(params.get("a", 0.25))
            b = float(params.get("b", 0.75))
            if not 0 < a < b < 1:
                raise InvalidParameterError("uniform law needs 0 < a < b < 1")
            return cls.from_omega_minus(rng.uniform(a, b, size), lo)
        raise InvalidParameterError(f"unknown environment law {law!r}")

    @property
    def sites(self):
        return np.arange(self.lo, self.hi + 1)

    @property
    def omega_minus(self):
        return expit(self.log_rho)

    @property
    def omega_plus(self):
        return expit(-self.log_rho)

    def index(self, z):
        z = int(z)
        if not self.lo <= z <= self.hi:
            raise SiteRangeError(f"site {z} outside window [{self.lo}, {self.hi}]")
        return z - self.lo


@dataclass(frozen=True)
class Potential1D:
    """Values of ``V`` on ``[lo, hi]`` with ``V(0) = 0``."""

    lo: int
    hi: int
    values: np.ndarray = field(repr=False)
    sigma2: float = float("nan")

    def __post_init__(self):
        lo, hi = _check_window(self.lo, self.hi)
        values = _frozen(self.values)
        if values.shape != (hi - lo + 1,):
            raise InvalidParameterError("values do not match the window")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "values", values)

    def __call__(self, z):
        if np.ndim(z) == 0:
            return float(self.values[self.index(z)])
        return self.values[self.index(z)]

    def index(self, z):
        if np.ndim(z) == 0:
            z = int(z)
            if not self.lo <= z <= self.hi:
                raise SiteRangeError(f"site {z} outside window [{self.lo}, {self.hi}]")
            return z - self.lo
        z = np.asarray(z, dtype=np.int64)
        if np.any((z < self.lo) | (z > self.hi)):
            raise SiteRangeError(f"sites outside window [{self.lo}, {self.hi}]")
        return z - self.lo

    @property
    def sites(self):
        return np.arange(self.lo, self.hi + 1)

    def to_environment(self, flatten_index=1):
        """The environment whose potential this is.

        Increments fix ``log rho`` at every site but ``lo``, where the left
        neighbour is missing; that site gets ``log rho = 0`` (a fair coin).
        """
        log_rho = np.zeros(self.values.size)
        log_rho[1:] = np.diff(self.values)
        return Environment1D(self.lo, self.hi, log_rho, flatten_index, self.sigma2)


def flatten(env, m):
    """Replace every ``rho_z`` by ``rho_z ** (m ** -1/2)``."""
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidParameterError(f"flatten index must be a positive integer, got {m!r}")
    m = int(m)
    if m == 1:
        return env
    return Environment1D(
        env.lo, env.hi, env.log_rho / np.sqrt(m), env.flatten_index * m, env.sigma2
    )


def potential1d(env):
    lr = env.log_rho
    k0 = -env.lo
    v = np.zeros(lr.size)
    # right half: V(x) = sum_{i=1}^x log rho_i
    v[k0 + 1 :] = np.cumsum(lr[k0 + 1 :])
    # left half: V(x) = -sum_{i=x+1}^0 log rho_i
    if k0 > 0:
        v[:k0] = -np.cumsum(lr[1 : k0 + 1][::-1])[::-1]
    s2 = env.sigma2 / env.flatten_index
    return Potential1D(env.lo, env.hi, v, s2)


def resistance1d(V, x, y):
    """``sum_{z=min}^{max-1} exp(V_z)``."""
    i, j = V.index(x), V.index(y)
    if i > j:
        i, j = j, i
    return float(np.sum(np.exp(V.values[i:j])))


def invariant1d(V, x):
    """``exp(-V_x) + exp(-V_{x-1})``."""
    i = V.index(x)
    V.index(x - 1)
    return float(np.exp(-V.values[i]) + np.exp(-V.values[i - 1]))


def escape_resistance(V, radius, scale=1.0):
    """Effective resistance from 0 to the complement of the ball of the given
    radius in the metric ``scale * r``.

    The two sides are in parallel; each side's resistance is measured up to
    the first site strictly outside the ball.
    """
    cum = np.concatenate([[0.0], np.cumsum(np.exp(V.values[:-1]))]) * scale
    k0 = -V.lo
    dist = np.abs(cum - cum[k0])
    out = dist > radius
    right = np.flatnonzero(out[k0:])
    left = np.flatnonzero(out[: k0 + 1][::-1])
    if right.size == 0 or left.size == 0:
        raise WindowExitError(
            f"resistance ball of radius {radius} is not contained in the window",
            window=(V.lo, V.hi),
        )
    r_right = dist[k0 + right[0]]
    r_left = dist[k0 - left[0]]
    return float(r_right * r_left / (r_right + r_left))


@dataclass(frozen=True)
class BarrierEnvironment:
    """Bernoulli barrier marks with a biased coin at barrier sites.

    ``xi[k]`` is the mark ``xi_z`` of ``z = lo - 1 + k``; the extra mark left of
    the window is needed because a site ``z <= 0`` is a barrier when
    ``xi_{z-1} = 1`` (this is what makes ``V = log(q/p) * beta`` hold on both
    half-lines).
    """

    alpha: float
    p: float
    lo: int
    hi: int
    xi: np.ndarray = field(repr=False)

    def __post_init__(self):
        lo, hi = _check_window(self.lo, self.hi)
        xi = np.array(self.xi, dtype=np.int8)
        if xi.shape != (hi - lo + 2,) or not np.all((xi == 0) | (xi == 1)):
            raise InvalidParameterError("xi must be 0/1 marks on [lo - 1, hi]")
        xi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "xi", xi)

    @property
    def q(self):
        return 1.0 - self.p

    @property
    def sites(self):
        return np.arange(self.lo, self.hi + 1)

    def xi_at(self, z):
        return int(self.xi[z - self.lo + 1])

    @property
    def beta(self):
        x = self.xi[1:].astype(np.int64)  # marks on the window
        k0 = -self.lo
        b = np.zeros(x.size, dtype=np.int64)
        b[k0 + 1 :] = np.cumsum(x[k0 + 1 :])
        if k0 > 0:
            b[:k0] = -np.cumsum(x[:k0][::-1])[::-1]
        return b

    @property
    def barrier(self):
        """0/1 indicator of the sites where the biased coin is used."""
        k0 = -self.lo
        ind = np.empty(self.hi - self.lo + 1, dtype=np.int8)
        ind[k0 + 1 :] = self.xi[k0 + 2 :]
        ind[: k0 + 1] = self.xi[: k0 + 1]
        return ind

    def to_environment(self):
        lr = self.barrier * (np.log(self.q) - np.log(self.p))
        var = self.alpha * (1 - self.alpha) * (np.log(self.q / self.p)) ** 2
        return Environment1D(self.lo, self.hi, lr, 1, float(var))


def barrier_env(success_prob, p, window, rng=None):
    alpha = check_probability(success_prob, "success_prob", open_right=False)
    p = check_probability(p, "p")
    lo, hi = _check_window(*window)
    rng = check_random_state(rng)
    xi = (rng.random(hi - lo + 2) < alpha).astype(np.int8)
    return BarrierEnvironment(alpha, p, lo, hi, xi)


def barrier_potential(benv):
    vals = np.log(benv.q / benv.p) * benv.beta
    return Potential1D(benv.lo, benv.hi, vals, benv.to_environment().sigma2)


def _exit_error(env, position):
    return WindowExitError(
        f"walk reached site {position} outside window [{env.lo}, {env.hi}]; widen the window",
        position=int(position),
        window=(env.lo, env.hi),
    )


def simulate_walk(env, start, steps, rng=None):
    """Discrete-time path ``X_0 = start, ..., X_steps``."""
    env.index(start)
    steps = check_positive_int(steps, "steps", minimum=0)
    rng = check_random_state(rng)
    path, exit_at = _kernels.walk1d_path(rng, env.omega_plus, env.lo, int(start), steps)
    if exit_at >= 0:
        pos = path[-1] + (1 if path[-1] == env.hi else -1)
        raise _exit_error(env, pos)
    return path


def walk_positions(env, record, walkers, rng=None, start=0):
    """Positions of independent walkers at the step counts in ``record``.

    Returns an array of shape ``(walkers, len(record))``; ``record`` must be
    nondecreasing.
    """
    env.index(start)
    record = np.asarray(record, dtype=np.int64)
    if record.ndim != 1 or np.any(record < 0) or np.any(np.diff(record) < 0):
        raise InvalidParameterError("record must be a nondecreasing list of step counts")
    walkers = check_positive_int(walkers, "walkers")
    rng = check_random_state(rng)
    out, w, pos = _kernels.walk1d_positions(rng, env.omega_plus, env.lo, int(start), record, walkers)
    if w >= 0:
        raise _exit_error(env, pos)
    return out


def walk_law(env, start, steps, *, cutoff=40.0):
    """Exact quenched law of ``X_steps`` on the window (mass lost through the
    ends is dropped; ``1 - law.sum()`` is the exit probability up to
    ``exp(-cutoff)``)."""
    i = env.index(start)
    return dtmc_law(env.omega_plus, env.omega_minus, i, int(steps), cutoff=cutoff)


def write_columns(env, fh=None):
    """Serialize as whitespace-separated columns ``site omega_minus V``.

    Metadata lines start with ``#``. Returns the text when ``fh`` is None.
    """
    V = potential1d(env)
    buf = io.StringIO() if fh is None else fh
    buf.write(f"# flatten_index {env.flatten_index}\n# sigma2 {float(env.sigma2)!r}\n")
    buf.write("# site omega_minus V\n")
    for z, om, v in zip(env.sites, env.omega_minus, V.values):
        buf.write(f"{int(z)} {float(om)!r} {float(v)!r}\n")
    if fh is None:
        return buf.getvalue()
    return None


def read_columns(source):
    """Inverse of :func:`write_columns`; ``source`` is text or a file object.

    ``log rho`` is rebuilt from ``omega_minus``.
    """
    text = source if isinstance(source, str) else source.read()
    meta = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2:
                meta[parts[0]] = parts[1]
            continue
        rows.append(line.split())
    data = np.array(rows, dtype=float)
    sites = data[:, 0].astype(np.int64)
    if np.any(np.diff(sites) != 1):
        raise InvalidParameterError("sites must be consecutive")
    om = data[:, 1]
    return Environment1D(
        int(sites[0]),
        int(sites[-1]),
        logit(om),
        int(meta.get("flatten_index", 1)),
        float(meta.get("sigma2", "nan")),
    )
