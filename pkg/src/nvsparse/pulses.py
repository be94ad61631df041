"""Gate fidelity of pi pulses under detuning, and PM pulse optimization."""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.optimize import minimize

from .kernels import su2_product
from .spin import DT_PULSE, ID2, SX, SY, SZ, pulse_steps, to_matrix
from .waveforms import DEFAULT_T_PULSE, MAX_AMPLITUDE, PMParams

log = logging.getLogger(__name__)

TARGETS = {"X": SX, "Y": SY}
_TARGET_PHASE = {"X": 0.0, "Y": math.pi / 2}


@dataclass(frozen=True)
class GateSpec:
    """A pi pulse aimed at Pauli-X or Pauli-Y.

    ``waveform`` is ``"rect"`` or a :class:`PMParams`. The drive axis phase
    defaults to the target (0 for X, pi/2 for Y), which realizes the
    ``(sx, sy) -> (sy, -sx)`` map between pi_x and pi_y.
    """

    target: str = "X"
    waveform: object = "rect"
    phase: float = None
    t_pulse: float = None

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {sorted(TARGETS)}")
        if self.phase is None:
            object.__setattr__(self, "phase", _TARGET_PHASE[self.target])
        if self.t_pulse is None:
            t = self.waveform.t_pulse if isinstance(self.waveform, PMParams) else DEFAULT_T_PULSE
            object.__setattr__(self, "t_pulse", float(t))

    @property
    def kind(self):
        return "pm" if isinstance(self.waveform, PMParams) else "rect"

    @property
    def pm(self):
        return self.waveform if isinstance(self.waveform, PMParams) else None

    @property
    def u_target(self):
        return TARGETS[self.target]


def gate_fidelity(u, u_target, tol=1e-6):
    """Average gate fidelity ``1/2 + 1/3 sum_k Tr[V s_k/2 V^+ U s_k/2 U^+]``."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(u_target, dtype=complex)
    for m in (u, v):
        if np.linalg.norm(m.conj().T @ m - ID2) > tol:
            raise ValueError("gate_fidelity needs unitary inputs")
    total = 0.0
    for s in (SX, SY, SZ):
        total += np.trace(v @ (s / 2) @ v.conj().T @ u @ (s / 2) @ u.conj().T).real
    return float(0.5 + total / 3.0)


def _gate_pairs(spec, deltas, dt):
    tm, h, ox, oy = pulse_steps(spec.kind, spec.t_pulse, spec.phase, spec.pm, dt)
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if not np.all(np.isfinite(deltas)):
        raise ValueError("detuning must be finite")
    az = np.ascontiguousarray(0.5 * deltas[:, None] * h[None, :])
    return su2_product(0.5 * ox * h, 0.5 * oy * h, az)


def gate_under_detuning(spec, delta, dt=DT_PULSE):
    """Propagator of the pulse alone at constant detuning ``delta``."""
    a, b = _gate_pairs(spec, [delta], dt)
    return to_matrix(a[0], b[0])


def fidelities(spec, deltas, dt=DT_PULSE):
    a, b = _gate_pairs(spec, deltas, dt)
    return np.array([gate_fidelity(to_matrix(x, y), spec.u_target) for x, y in zip(a, b)])


def ensemble_objective(spec, grid, dt=DT_PULSE):
    """Weighted mean fidelity over a ``(deltas, weights)`` detuning grid."""
    deltas, weights = grid
    deltas = np.asarray(deltas, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if deltas.size == 0:
        raise ValueError("empty detuning grid")
    return float(np.dot(weights, fidelities(spec, deltas, dt)))


@dataclass
class OptimizationResult:
    params: PMParams
    objective: float
    initial_objective: float
    improved: bool
    n_evals: int
    history: list = field(default_factory=list)


def optimize_pm(initial, grid, budget=600, seed=0, restarts=5, target="X",
                limit=MAX_AMPLITUDE, jitter=0.1, dt=DT_PULSE):
    """Nelder-Mead over ``(a_j, b_j, nu_j)`` with a quadratic amplitude penalty.

    The first start is ``initial`` itself; the remaining ``restarts - 1``
    starts are jittered copies drawn from ``seed``. ``budget`` caps the total
    number of objective evaluations. Returned parameters always satisfy the
    amplitude limit; if nothing beats ``initial``, it is returned with
    ``improved=False``.
    """
    if not initial.satisfies_constraint(limit):
        raise ValueError("initial PM parameters violate the amplitude limit")
    t_pulse = initial.t_pulse
    f0 = ensemble_objective(GateSpec(target, initial), grid, dt)
    if budget <= 0:
        log.warning("optimization budget is zero; returning initial parameters")
        return OptimizationResult(initial, f0, f0, False, 0)

    evals = 0
    penalty_scale = 1e4 / limit ** 2

    def negobj(vec):
        nonlocal evals
        evals += 1
        vec = np.asarray(vec)
        if np.any(vec.reshape(-1, 3)[:, 2] == 0.0):
            return 1.0
        amp = np.abs(vec.reshape(-1, 3)[:, 0]).sum()
        excess = max(0.0, amp - limit)
        p = PMParams.from_vector(vec, t_pulse)
        return -ensemble_objective(GateSpec(target, p), grid, dt) + penalty_scale * excess ** 2

    rng = np.random.default_rng(seed)
    x0 = initial.as_vector()
    starts = [x0] + [x0 * (1 + jitter * rng.uniform(-1, 1, x0.size)) for _ in range(restarts - 1)]
    per_start = max(1, budget // len(starts))
    best_vec, best_val = x0, f0
    history = []
    for i, start in enumerate(starts):
        remaining = budget - evals
        if remaining <= 0:
            break
        res = minimize(negobj, start, method="Nelder-Mead",
                       options={"maxfev": min(per_start, remaining), "xatol": 1e-7, "fatol": 1e-9})
        cand = _project(res.x, limit)
        val = ensemble_objective(GateSpec(target, PMParams.from_vector(cand, t_pulse)), grid, dt)
        history.append((i, float(val)))
        if val > best_val:
            best_vec, best_val = cand, val
    improved = best_val > f0
    if not improved:
        log.warning("optimizer found no improvement over the initial parameters")
    best = PMParams.from_vector(best_vec, t_pulse) if improved else initial
    return OptimizationResult(best, float(best_val), f0, improved, evals, history)


def _project(vec, limit):
    vec = np.array(vec, dtype=float).reshape(-1, 3)
    amp = np.abs(vec[:, 0]).sum()
    if amp > limit:
        vec[:, 0] *= limit / amp
    return vec.ravel()
