"""Ordinary kriging with a separable power-exponential correlation.

Hyperparameters are fitted by maximizing the concentrated log-likelihood
(mean and process variance profiled out); predictions use the best linear
unbiased predictor. Reference-point calibration corrects systematic
measurement bias before fitting.
"""
from dataclasses import dataclass, replace
import logging
import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize

from .fields import FieldMap

log = logging.getLogger(__name__)

LN_ALPHA_BOUNDS = (math.log(1e-2), math.log(1e3))
P_BOUNDS = (1.0, 2.0)
NUGGET_START = 1e-10
NUGGET_CAP = 1e-4
# smallest admissible squared Cholesky pivot (conditional variance of a point)
MIN_PIVOT2 = 1e-13


class SingularCorrelation(ValueError):
    pass


@dataclass(frozen=True)
class KrigingHyper:
    alpha: tuple = (1.0, 1.0)
    p: tuple = (2.0, 2.0)
    nugget: float = 0.0

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        p = tuple(float(v) for v in self.p)
        if len(alpha) != len(p):
            raise ValueError("alpha and P must have one entry per axis")
        if any(not (a >= 0 and math.isfinite(a)) for a in alpha):
            raise ValueError("alpha must be finite and non-negative")
        if any(not (P_BOUNDS[0] <= v <= P_BOUNDS[1]) for v in p):
            raise ValueError("P must lie in [1, 2]")
        if not (self.nugget >= 0 and math.isfinite(self.nugget)):
            raise ValueError("nugget must be finite and non-negative")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_theta(cls, theta, nugget=0.0):
        """From search coordinates ``(ln a_1, ln a_2, P_1, P_2)``."""
        theta = np.asarray(theta, dtype=float)
        d = theta.size // 2
        p = np.clip(theta[d:], *P_BOUNDS)
        return cls(tuple(np.exp(theta[:d])), tuple(p), nugget)

    def to_dict(self):
        return {"alpha": list(self.alpha), "P": list(self.p), "nugget": self.nugget}


def correlation(xi, xj, hyper):
    d = np.abs(np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float))
    return float(math.exp(-sum(a * dh ** p for a, dh, p in zip(hyper.alpha, d, hyper.p))))


def correlation_matrix(xa, xb, hyper):
    """``exp(-sum_h alpha_h |xa_h - xb_h|^P_h)`` for all pairs, shape (na, nb)."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    s = np.zeros((xa.shape[0], xb.shape[0]))
    for h, (a, p) in enumerate(zip(hyper.alpha, hyper.p)):
        s += a * np.abs(xa[:, h, None] - xb[None, :, h]) ** p
    return np.exp(-s)


@dataclass
class RFactor:
    cho: tuple
    logdet: float
    n: int
    nugget: float

    def solve(self, b):
        return cho_solve(self.cho, b)


def build_R(coords, hyper):
    """Cholesky factor of ``R + nugget I``; raises SingularCorrelation."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    n = coords.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    r = correlation_matrix(coords, coords, hyper)
    r[np.diag_indices(n)] += hyper.nugget
    try:
        c, lower = cho_factor(r, lower=True)
    except LinAlgError as exc:
        raise SingularCorrelation("correlation matrix is not positive definite") from exc
    diag = np.diag(c)
    if not np.all(np.isfinite(diag)) or np.min(diag) ** 2 < MIN_PIVOT2 * (1.0 + hyper.nugget):
        raise SingularCorrelation("correlation matrix is numerically singular")
    return RFactor((c, lower), float(2.0 * np.log(diag).sum()), n, hyper.nugget)


def build_R_adaptive(coords, hyper, start=NUGGET_START, cap=NUGGET_CAP):
    """``build_R`` with the nugget raised tenfold (from ``start``) on failure."""
    nugget = hyper.nugget
    while True:
        try:
            return build_R(coords, replace(hyper, nugget=nugget))
        except SingularCorrelation:
            nxt = start if nugget < start else nugget * 10.0
            if nxt > cap * (1 + 1e-9):
                raise
            nugget = nxt


def gls_mean_var(factor, y):
    """Generalized least-squares mean and the profiled process variance."""
    y = np.asarray(y, dtype=float)
    ones = np.ones(factor.n)
    ri_y = factor.solve(y)
    ri_1 = factor.solve(ones)
    mu = float(ones @ ri_y / (ones @ ri_1))
    resid = y - mu
    sigma2 = float(resid @ factor.solve(resid) / factor.n)
    return mu, max(sigma2, 0.0)


def log_likelihood(hyper, coords, y, adaptive=False):
    """Concentrated log-likelihood; ``-inf`` on degeneracy or singular R.

    With ``adaptive`` the nugget is raised on factorization failure
    (see :func:`build_R_adaptive`) before giving up.
    """
    try:
        f = build_R_adaptive(coords, hyper) if adaptive else build_R(coords, hyper)
    except SingularCorrelation:
        return -math.inf
    _, s2 = gls_mean_var(f, y)
    if not s2 > 0:
        return -math.inf
    return -0.5 * f.n * math.log(s2) - 0.5 * f.logdet


@dataclass
class KrigingModel:
    coords: np.ndarray
    y: np.ndarray
    hyper: KrigingHyper
    mu: float
    sigma2: float
    loglik: float
    weights: np.ndarray
    degenerate: bool = False

    def to_dict(self):
        return {
            "coords": self.coords.tolist(),
            "values": self.y.tolist(),
            "hyper": self.hyper.to_dict(),
            "nugget": self.hyper.nugget,
            "mu": self.mu,
            "sigma2": self.sigma2,
            "loglik": None if not math.isfinite(self.loglik) else self.loglik,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, doc):
        h = doc["hyper"]
        hyper = KrigingHyper(tuple(h["alpha"]), tuple(h["P"]), h.get("nugget", doc.get("nugget", 0.0)))
        return model_from_hyper(doc["coords"], doc["values"], hyper, adapt=False)


def model_from_hyper(coords, y, hyper, adapt=True):
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    y = np.asarray(y, dtype=float)
    f = build_R_adaptive(coords, hyper) if adapt else build_R(coords, hyper)
    mu, s2 = gls_mean_var(f, y)
    hyper = replace(hyper, nugget=f.nugget)
    ll = -0.5 * f.n * math.log(s2) - 0.5 * f.logdet if s2 > 0 else -math.inf
    return KrigingModel(coords, y, hyper, mu, s2, ll, f.solve(y - mu))


def fit(coords, y, budget=400, seed=0, starts=8):
    """Multi-start bounded Nelder-Mead over ``(ln alpha, P)``.

    The search runs on standardized values; the concentrated likelihood
    only shifts by a constant under ``y -> c y + d``, so the argmax is the
    same. ``budget`` caps evaluations per start. Ties go to the lowest start
    index.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    y = np.asarray(y, dtype=float)
    n, d = coords.shape
    if n < 2:
        raise ValueError("need at least two samples")
    if np.ptp(y) == 0:
        log.warning("constant sample values; model predicts the constant")
        hyper = KrigingHyper((1.0,) * d, (2.0,) * d)
        return KrigingModel(coords, y, hyper, float(y[0]), 0.0, -math.inf,
                            np.zeros(n), degenerate=True)
    ys = (y - y.mean()) / y.std()
    bounds = [LN_ALPHA_BOUNDS] * d + [P_BOUNDS] * d
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def neg(theta):
        ll = log_likelihood(KrigingHyper.from_theta(theta), coords, ys, adaptive=True)
        return 1e10 if not math.isfinite(ll) else -ll

    rng = np.random.default_rng(seed)
    best_theta, best_val = None, math.inf
    for _ in range(starts):
        x0 = lo + (hi - lo) * rng.uniform(size=2 * d)
        res = minimize(neg, x0, method="Nelder-Mead", bounds=bounds,
                       options={"maxfev": budget, "xatol": 1e-4, "fatol": 1e-8})
        if res.fun < best_val:
            best_theta, best_val = np.clip(res.x, lo, hi), res.fun
    hyper = KrigingHyper.from_theta(best_theta)
    return model_from_hyper(coords, y, hyper)


def predict(model, x):
    """BLUP ``mu + r(x)' R^-1 (y - mu)`` at points ``x`` (shape (m, 2))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if model.degenerate:
        return np.full(x.shape[0], model.mu)
    return model.mu + correlation_matrix(x, model.coords, model.hyper) @ model.weights


def predict_grid(model, width=100, height=100):
    """Raw (unclamped) predictions at every pixel centre."""
    xx, yy = FieldMap(np.zeros((height, width))).pixel_centers()
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return FieldMap(predict(model, pts).reshape(height, width))


def calibrate_bias(values, refs):
    """Additive correction by the nominal-minus-measured reference mean."""
    if refs.count == 0:
        raise ValueError("no reference points")
    shift = float(np.mean(refs.nominal) - np.mean(refs.measured))
    return np.asarray(values, dtype=float) + shift


def calibrate_proportional(values, refs):
    """Multiplicative correction by the nominal-to-measured reference mean."""
    if refs.count == 0:
        raise ValueError("no reference points")
    m = float(np.mean(refs.measured))
    if m == 0:
        raise ValueError("mean measured reference value is zero")
    return np.asarray(values, dtype=float) * float(np.mean(refs.nominal)) / m


CALIBRATIONS = {
    "none": lambda values, refs: np.asarray(values, dtype=float),
    "bias": calibrate_bias,
    "proportional": calibrate_proportional,
}


def calibrate(values, refs, mode):
    if mode not in CALIBRATIONS:
        raise ValueError(f"unknown calibration {mode!r}")
    return CALIBRATIONS[mode](values, refs)
