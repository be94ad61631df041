"""Synthetic ground-truth field maps, sampling layouts and reference points."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.spatial import cKDTree

STRATEGIES = ("random", "spiral", "square-loop", "serpentine", "grid")
PERTURBATIONS = ("uniform", "normal")

# (center, width, amplitude, sign)
PRESETS = {
    "single": [((0.463, 0.527), 0.3, 1.0, 1)],
    "double": [((0.3, 0.3), 0.3, 1.0, 1), ((0.7, 0.7), 0.3, 0.8, -1)],
    "triple": [((0.15, 0.2), 0.22, 1.0, 1), ((0.85, 0.25), 0.22, 1.0, 1),
               ((0.45, 0.85), 0.22, 1.0, 1)],
}


@dataclass
class FieldMap:
    """Row-major map with top-left origin; pixel ``(i, j)`` is centred at
    ``x = (j + 0.5) / width``, ``y = (i + 0.5) / height``."""

    values: np.ndarray
    b_min: float = 0.0
    b_max: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("field values must be 2-D")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def pixel_centers(self):
        """``(x, y)`` arrays of shape ``(height, width)``."""
        x = (np.arange(self.width) + 0.5) / self.width
        y = (np.arange(self.height) + 0.5) / self.height
        return np.meshgrid(x, y)

    def to_physical(self, v):
        return self.b_min + np.asarray(v, dtype=float) * (self.b_max - self.b_min)

    def to_normalized(self, b):
        span = self.b_max - self.b_min
        if span == 0:
            raise ValueError("degenerate physical window")
        return (np.asarray(b, dtype=float) - self.b_min) / span

    def with_window(self, b_min, b_max):
        return FieldMap(self.values, b_min, b_max)


def make_field(extrema, width=100, height=100):
    """Sum of isotropic Gaussian bumps, rescaled to span exactly [0, 1]."""
    if not extrema:
        raise ValueError("need at least one extremum")
    xx, yy = FieldMap(np.zeros((height, width))).pixel_centers()
    v = np.zeros_like(xx)
    for (cx, cy), w, amp, sign in extrema:
        if not w > 0:
            raise ValueError("bump width must be positive")
        v += sign * amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * w * w))
    lo, hi = v.min(), v.max()
    if hi == lo:
        raise ValueError("field is constant")
    return FieldMap((v - lo) / (hi - lo))


def preset_field(name, width=100, height=100):
    if name not in PRESETS:
        raise KeyError(f"unknown field preset {name!r}; choose from {sorted(PRESETS)}")
    return make_field(PRESETS[name], width, height)


def local_maxima(values):
    """Pixels strictly greater than all of their (up to 8) neighbours."""
    v = np.asarray(values, dtype=float)
    pad = np.pad(v, 1, constant_values=-np.inf)
    h, w = v.shape
    is_max = np.ones_like(v, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_max &= v > pad[1 + di:1 + di + h, 1 + dj:1 + dj + w]
    return list(zip(*np.nonzero(is_max)))


def sample_field(fmap, coords):
    """Bilinear interpolation between pixel centres at continuous ``(x, y)``.

    Coordinates between the border and the outermost pixel centres take the
    edge value along that axis.
    """
    c = np.atleast_2d(np.asarray(coords, dtype=float))
    if np.any(c < 0.0) or np.any(c > 1.0) or not np.all(np.isfinite(c)):
        raise ValueError("coordinates must lie in [0, 1]^2")
    fx = np.clip(c[:, 0] * fmap.width - 0.5, 0.0, fmap.width - 1)
    fy = np.clip(c[:, 1] * fmap.height - 0.5, 0.0, fmap.height - 1)
    j0 = np.minimum(np.floor(fx).astype(int), fmap.width - 2) if fmap.width > 1 else np.zeros(len(c), int)
    i0 = np.minimum(np.floor(fy).astype(int), fmap.height - 2) if fmap.height > 1 else np.zeros(len(c), int)
    j1 = np.minimum(j0 + 1, fmap.width - 1)
    i1 = np.minimum(i0 + 1, fmap.height - 1)
    tx = fx - j0
    ty = fy - i0
    v = fmap.values
    top = v[i0, j0] * (1 - tx) + v[i0, j1] * tx
    bot = v[i1, j0] * (1 - tx) + v[i1, j1] * tx
    return top * (1 - ty) + bot * ty


# ------------------------------------------------------------ sampling layouts


def _along_path(vertices, n):
    """``n`` points evenly spaced by arc length (cell midpoints) on a polyline."""
    p = np.asarray(vertices, dtype=float)
    seg = np.hypot(*np.diff(p, axis=0).T)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    target = (np.arange(n) + 0.5) / n * s[-1]
    return np.column_stack([np.interp(target, s, p[:, 0]), np.interp(target, s, p[:, 1])])


def _spiral_path(turns=3.0, samples=4000):
    th = np.linspace(0.0, 2 * math.pi * turns, samples)
    r = 0.45 * th / th[-1]
    return np.column_stack([0.5 + r * np.cos(th), 0.5 + r * np.sin(th)])


def _square_loop_path(halves=(0.4, 0.25, 0.1)):
    pts = []
    for h in halves:
        pts += [(0.5 - h, 0.5 - h), (0.5 + h, 0.5 - h), (0.5 + h, 0.5 + h),
                (0.5 - h, 0.5 + h), (0.5 - h, 0.5 - h)]
    return pts


def _serpentine_path(rows):
    pts = []
    for k in range(rows):
        y = (k + 0.5) / rows
        xs = (0.1, 0.9) if k % 2 == 0 else (0.9, 0.1)
        pts += [(xs[0], y), (xs[1], y)]
    return pts


def _perturb(points, bound, rng, perturbation):
    if bound == 0:
        return points
    if perturbation == "uniform":
        d = rng.uniform(-bound, bound, points.shape)
    elif perturbation == "normal":
        # normal variant: std bound/2, truncated at the bound
        d = np.clip(rng.normal(0.0, bound / 2.0, points.shape), -bound, bound)
    else:
        raise ValueError(f"unknown perturbation {perturbation!r}")
    return points + d


def strategy_points(kind, n, bound=0.3, rng=None, perturbation="uniform"):
    """``n`` sampling coordinates in [0, 1]^2 for one of :data:`STRATEGIES`."""
    if n < 1:
        raise ValueError("need at least one sampling point")
    if kind not in STRATEGIES:
        raise ValueError(f"unknown strategy {kind!r}")
    rng = np.random.default_rng(0) if rng is None else rng
    if kind == "random":
        return rng.uniform(0.0, 1.0, (n, 2))
    if kind == "grid":
        m = math.isqrt(n)
        c = (np.arange(m) + 0.5) / m
        gx, gy = np.meshgrid(c, c)
        base = np.column_stack([gx.ravel(), gy.ravel()])
        pts = np.clip(_perturb(base, bound, rng, perturbation), 0.0, 1.0)
        extra = rng.uniform(0.0, 1.0, (n - m * m, 2))
        return np.vstack([pts, extra])
    if kind == "spiral":
        path = _spiral_path()
    elif kind == "square-loop":
        path = _square_loop_path()
    else:
        path = _serpentine_path(max(1, math.isqrt(n)))
    base = _along_path(path, n)
    return np.clip(_perturb(base, bound, rng, perturbation), 0.0, 1.0)


# ------------------------------------------------------------ reference points


@dataclass
class SampleSet:
    coords: np.ndarray
    values: np.ndarray
    strategy: str = "grid"
    seed: int = 0
    clamped: np.ndarray = None
    true_values: np.ndarray = None


@dataclass
class ReferenceSet:
    coords: np.ndarray
    nominal: np.ndarray
    measured: np.ndarray = None
    clamped: np.ndarray = None

    @property
    def count(self):
        return len(self.nominal)


def choose_references(sample_values, fmap, count=10):
    """Pixels whose true values are nearest to ``count`` evenly spaced targets
    on ``[min, max]`` of ``sample_values``."""
    sv = np.asarray(sample_values, dtype=float)
    lo, hi = float(sv.min()), float(sv.max())
    if hi == lo:
        raise ValueError("sample values are constant; references cannot span them")
    if count < 1:
        raise ValueError("need at least one reference")
    xx, yy = fmap.pixel_centers()
    flat = fmap.values.ravel()
    # only pixels inside the sampled range, so nominals stay within it
    inside = np.nonzero((flat >= lo) & (flat <= hi))[0]
    if inside.size == 0:
        inside = np.arange(flat.size)
    order = inside[np.argsort(flat[inside], kind="stable")]
    sorted_vals = flat[order]
    targets = np.linspace(lo, hi, count)
    pos = np.clip(np.searchsorted(sorted_vals, targets), 0, sorted_vals.size - 1)
    left = np.clip(pos - 1, 0, sorted_vals.size - 1)
    pick = np.where(np.abs(sorted_vals[left] - targets) <= np.abs(sorted_vals[pos] - targets), left, pos)
    idx = order[pick]
    coords = np.column_stack([xx.ravel()[idx], yy.ravel()[idx]])
    return ReferenceSet(coords, flat[idx].copy())


def nearest_neighbor_map(coords, values, width=100, height=100):
    """Paint every pixel with the value of its nearest sample."""
    xx, yy = FieldMap(np.zeros((height, width))).pixel_centers()
    tree = cKDTree(np.asarray(coords, dtype=float))
    _, idx = tree.query(np.column_stack([xx.ravel(), yy.ravel()]))
    return np.asarray(values, dtype=float)[idx].reshape(height, width)
