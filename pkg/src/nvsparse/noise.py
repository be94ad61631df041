"""Static Gaussian detuning and Ornstein-Uhlenbeck dynamical noise."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.signal import lfilter

FWHM_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))
OU_GRID_DT = 2.0


@dataclass(frozen=True)
class NoiseConfig:
    """Noise parameters, rates in rad/ns and times in ns.

    ``ou_sigma`` is the stationary OU standard deviation ``sqrt(c tau / 2)``;
    the diffusion constant ``c`` is derived from it.
    """

    fwhm: float = 2 * math.pi * 26.5e-3
    tau: float = 20_000.0
    ou_sigma: float = 2 * math.pi * 50e-6
    readout_sigma: float = 0.01

    def __post_init__(self):
        for name in ("fwhm", "tau", "ou_sigma", "readout_sigma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative")

    @property
    def sigma_g(self):
        return self.fwhm / FWHM_FACTOR

    @property
    def diffusion(self):
        if self.tau == 0:
            return 0.0
        return 2.0 * self.ou_sigma ** 2 / self.tau

    @classmethod
    def default(cls):
        return cls()

    @classmethod
    def silent(cls):
        return cls(0.0, 20_000.0, 0.0, 0.0)


@dataclass(frozen=True)
class NoiseRealization:
    """One draw of static detuning plus an OU trajectory on a uniform grid.

    The trajectory is held constant within each grid cell (zero-order hold).
    """

    delta: float = 0.0
    ou: np.ndarray = None
    grid_dt: float = OU_GRID_DT
    seed: tuple = ()

    @property
    def has_dynamics(self):
        return self.ou is not None

    @property
    def span(self):
        if self.ou is None:
            return math.inf
        return (self.ou.size - 1) * self.grid_dt

    def value(self, t):
        if self.ou is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        k = np.clip(np.floor(np.asarray(t) / self.grid_dt).astype(int), 0, self.ou.size - 1)
        return self.ou[k]

    def cumulative(self, t):
        """Integral of the held trajectory from 0 to ``t``."""
        t = np.asarray(t, dtype=float)
        if self.ou is None:
            return np.zeros_like(t)
        cum = getattr(self, "_cum", None)
        if cum is None:
            cum = np.concatenate(([0.0], np.cumsum(self.ou * self.grid_dt)))
            object.__setattr__(self, "_cum", cum)
        k = np.clip(np.floor(t / self.grid_dt).astype(int), 0, self.ou.size - 1)
        return cum[k] + self.ou[k] * (t - k * self.grid_dt)

    def integral(self, t0, t1):
        return self.cumulative(t1) - self.cumulative(t0)


def sample_static_detuning(cfg, rng):
    if cfg.sigma_g == 0:
        return 0.0
    return float(rng.normal(0.0, cfg.sigma_g))


def ou_step(value, dt, cfg, rng):
    """Exact OU update over ``dt``."""
    if cfg.tau <= 0:
        raise ValueError("OU correlation time must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    decay = math.exp(-dt / cfg.tau)
    scale = cfg.ou_sigma * math.sqrt(-math.expm1(-2.0 * dt / cfg.tau))
    return value * decay + scale * float(rng.standard_normal())


def ou_trajectory(duration, grid_dt, cfg, rng):
    """OU path of ``ceil(duration/grid_dt) + 1`` points, started in equilibrium."""
    if cfg.tau <= 0:
        raise ValueError("OU correlation time must be positive")
    if grid_dt <= 0:
        raise ValueError("grid_dt must be positive")
    n = int(math.ceil(duration / grid_dt - 1e-9)) + 1
    decay = math.exp(-grid_dt / cfg.tau)
    scale = cfg.ou_sigma * math.sqrt(-math.expm1(-2.0 * grid_dt / cfg.tau))
    z = rng.standard_normal(n)
    z[0] *= cfg.ou_sigma
    z[1:] *= scale
    # x_k = decay * x_{k-1} + z_k as a linear recurrence
    return lfilter([1.0], [1.0, -decay], z)


def detuning_grid(m, width):
    """``m`` equally spaced detunings on ``[-width, width]`` with Gaussian weights.

    ``width`` is the FWHM ``W``; weights follow the density with
    ``sigma_g = W / (2 sqrt(2 ln 2))`` and are normalised to sum to one.
    """
    if m < 1:
        raise ValueError("need at least one detuning")
    if m == 1 or width == 0:
        return np.zeros(1), np.ones(1)
    d = np.linspace(-width, width, m)
    d = 0.5 * (d - d[::-1])  # exact antisymmetry
    sg = width / FWHM_FACTOR
    w = np.exp(-0.5 * (d / sg) ** 2)
    w = 0.5 * (w + w[::-1])
    return d, w / w.sum()


def realization_rng(seed, *index):
    """Independent stream for realization ``index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, index)]))


def make_ensemble(cfg, duration, n_detunings=15, n_trajectories=20, seed=0,
                  grid_dt=OU_GRID_DT):
    """Weighted ensemble: detuning grid x OU trajectories.

    Returns ``(realizations, weights)``. Static detunings come from the
    weighted grid; each OU trajectory has its own derived stream and is
    shared across detunings.
    """
    if n_detunings < 1 or n_trajectories < 1:
        raise ValueError("ensemble counts must be >= 1")
    deltas, wd = detuning_grid(n_detunings, cfg.fwhm)
    trajs = []
    for j in range(n_trajectories):
        if cfg.ou_sigma > 0 and cfg.tau > 0:
            trajs.append(ou_trajectory(duration, grid_dt, cfg, realization_rng(seed, 1, j)))
        else:
            trajs.append(None)
    reals, weights = [], []
    for i, d in enumerate(deltas):
        for j, tr in enumerate(trajs):
            reals.append(NoiseRealization(float(d), tr, grid_dt, (seed, i, j)))
            weights.append(wd[i] / n_trajectories)
    return reals, np.array(weights)
