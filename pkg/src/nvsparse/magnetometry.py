"""Ensemble-averaged response curves, slope, sensitivity and field inversion."""
from dataclasses import dataclass
import csv
import math

import numpy as np

from .noise import NoiseConfig, make_ensemble
from .spin import DT_PULSE, compile_sequence, ensemble_populations, ideal_population

# 2*pi x 28 Hz/nT expressed in rad/ns per nT
GAMMA = 2 * math.pi * 28.0e-9


def first_zero_field(t_total, gamma=GAMMA):
    """Field where the ideal accumulated phase ``4 gamma B t / pi`` reaches pi."""
    return math.pi ** 2 / (4.0 * gamma * t_total)


@dataclass
class ResponseCurve:
    protocol: str
    b: np.ndarray
    p0: np.ndarray
    ensemble_size: int
    t_total: float
    gamma: float = GAMMA

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        self.p0 = np.asarray(self.p0, dtype=float)
        if self.b.shape != self.p0.shape or self.b.ndim != 1:
            raise ValueError("B grid and P0 must be 1-D and equally long")
        if np.any(np.diff(self.b) <= 0):
            raise ValueError("B grid must be strictly increasing")

    @property
    def contrast(self):
        return float(self.p0.max() - self.p0.min())

    def first_branch(self):
        """Slice of the grid covering the first falling branch.

        The ideal curve falls from its maximum at B = 0 to its first zero at
        :func:`first_zero_field`. Under noise the fringe keeps its phase but
        loses contrast and can wobble near the ends, so the branch runs from
        the maximum below half that field to the minimum between half and
        1.5 times that field.
        """
        b_pi = first_zero_field(self.t_total, self.gamma)
        head = np.nonzero(self.b <= 0.5 * b_pi)[0]
        tail = np.nonzero((self.b >= 0.5 * b_pi) & (self.b <= 1.5 * b_pi))[0]
        if head.size == 0 or tail.size == 0:
            raise ValueError("B grid does not cover the first branch")
        start = head[np.argmax(self.p0[head])]
        end = tail[np.argmin(self.p0[tail])]
        return slice(start, end + 1)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["B_nT", "P0"])
            for b, p in zip(self.b, self.p0):
                w.writerow([repr(float(b)), repr(float(p))])

    def to_dict(self):
        return {
            "protocol": self.protocol,
            "B_nT": self.b.tolist(),
            "P0": self.p0.tolist(),
            "ensemble_size": self.ensemble_size,
            "t_total_ns": self.t_total,
            "gamma_rad_per_ns_nT": self.gamma,
        }


class Sensor:
    """A pulse sequence plus a fixed noise ensemble.

    The ensemble (static detunings x OU trajectories) is drawn once from
    ``seed`` and reused for every field value, so curves are smooth in B.
    """

    def __init__(self, seq, noise=None, ensemble=(15, 20), seed=0, dt=DT_PULSE, gamma=GAMMA):
        n_det, n_traj = ensemble
        if n_det < 1 or n_traj < 1:
            raise ValueError("ensemble counts must be >= 1")
        self.seq = seq
        self.noise = NoiseConfig.default() if noise is None else noise
        self.gamma = gamma
        self.schedule = compile_sequence(seq, dt)
        self.realizations, self.weights = make_ensemble(
            self.noise, seq.total_time, n_det, n_traj, seed)
        self._table = None

    @property
    def t_total(self):
        return self.seq.total_time

    @property
    def protocol(self):
        return f"xy8-{self.seq.kind}-N{self.seq.n_blocks}"

    def mean_population(self, b):
        """Noiseless ensemble-mean P0 for each field in ``b`` (nT)."""
        g = self.gamma * np.atleast_1d(np.asarray(b, dtype=float))
        p = ensemble_populations(self.schedule, g, self.realizations, self.weights)
        return np.clip(p, 0.0, 1.0)

    def response_curve(self, b_grid):
        b_grid = np.asarray(b_grid, dtype=float)
        return ResponseCurve(self.protocol, b_grid, self.mean_population(b_grid),
                             len(self.realizations), self.t_total, self.gamma)

    def tabulate(self, b_max, n=401):
        """Cache the mean response on ``[0, b_max]`` for fast repeated lookups."""
        grid = np.linspace(0.0, b_max, n)
        self._table = (grid, self.mean_population(grid))
        return self._table

    def lookup(self, b):
        """Mean P0 from the cached table (linear interpolation)."""
        if self._table is None:
            raise RuntimeError("call tabulate() first")
        grid, p = self._table
        b = np.asarray(b, dtype=float)
        if np.any(b < grid[0] - 1e-9) or np.any(b > grid[-1] + 1e-9):
            raise ValueError("field outside the tabulated range")
        return np.interp(b, grid, p)

    def measure(self, b, rng, tabulated=False):
        """Single-shot readings: ensemble mean plus one N(0, sigma^2) draw each."""
        mean = self.lookup(b) if tabulated else self.mean_population(b)
        mean = np.atleast_1d(mean)
        sigma = self.noise.readout_sigma
        if sigma > 0:
            mean = mean + rng.normal(0.0, sigma, mean.shape)
        return mean


def ensemble_population(b, seq, noise=None, ensemble=(15, 20), rng=None, seed=0):
    """One noisy measurement of P0 at field ``b``."""
    sensor = Sensor(seq, noise, ensemble, seed)
    rng = np.random.default_rng(seed) if rng is None else rng
    return float(sensor.measure([b], rng)[0])


def response_curve(seq, noise=None, b_grid=None, ensemble=(15, 20), seed=0):
    if b_grid is None:
        b_grid = default_b_grid(seq.total_time)
    return Sensor(seq, noise, ensemble, seed).response_curve(b_grid)


def default_b_grid(t_total, n=201, span=1.25):
    """``n`` fields from 0 to ``span`` times the ideal first zero."""
    return np.linspace(0.0, span * first_zero_field(t_total), n)


def max_slope(curve):
    """``(B*, k)`` of the steepest point on the first monotonic branch."""
    if curve.b.size < 3:
        raise ValueError("need at least 3 grid points")
    slope = np.gradient(curve.p0, curve.b)
    br = curve.first_branch()
    s = np.abs(slope[br])
    i = int(np.argmax(s))
    k = float(s[i])
    if not k > 0:
        raise ValueError("flat response curve: slope is zero")
    return float(curve.b[br][i]), k


def sensitivity(sigma, k, t):
    """``eta = sigma sqrt(T) / k`` with ``T`` in seconds, ``k`` per nT."""
    if not k > 0:
        raise ValueError("slope k must be positive")
    if not t > 0:
        raise ValueError("measurement time must be positive")
    return sigma * math.sqrt(t) / k


@dataclass(frozen=True)
class SensitivityReport:
    sigma: float
    k: float
    t: float
    eta: float
    b_star: float

    @classmethod
    def from_curve(cls, curve, sigma):
        b_star, k = max_slope(curve)
        t = curve.t_total * 1e-9
        return cls(sigma, k, t, sensitivity(sigma, k, t), b_star)

    def to_dict(self):
        return {"sigma": self.sigma, "k_per_nT": self.k, "T_s": self.t,
                "eta_nT_per_sqrtHz": self.eta, "B_star_nT": self.b_star}


def ideal_curve(b, t_total, gamma=GAMMA):
    return ideal_population(gamma * np.asarray(b, dtype=float), t_total)


def field_from_population(p, t_total, branch=(0.0, None), gamma=GAMMA):
    """Invert the noiseless ideal curve on a monotonic branch.

    ``branch`` is ``(b_lo, b_hi)`` in nT and must lie within the first
    branch ``[0, first_zero_field(t_total)]``; ``None`` means its end.
    Returns ``(b, clamped)`` where ``clamped`` flags readings outside the
    branch's population range.
    """
    b_pi = first_zero_field(t_total, gamma)
    lo, hi = branch
    hi = b_pi if hi is None else hi
    if not (0.0 <= lo < hi <= b_pi * (1 + 1e-12)):
        raise ValueError("empty or invalid inversion branch")
    p = np.atleast_1d(np.asarray(p, dtype=float))
    p_hi = float(ideal_curve(lo, t_total, gamma))
    p_lo = float(ideal_curve(hi, t_total, gamma))
    clamped = (p < p_lo) | (p > p_hi)
    pc = np.clip(p, p_lo, p_hi)
    # P = (1 + cos(phi)) / 2, phi = 4 gamma B t / pi, phi in [0, pi]
    phi = np.arccos(np.clip(2.0 * pc - 1.0, -1.0, 1.0))
    b = phi * math.pi / (4.0 * gamma * t_total)
    return np.clip(b, lo, hi), clamped
