"""Control waveforms for pi pulses: rectangular and phase-modulated (PM)."""
from dataclasses import dataclass, field
import math

import numpy as np

# 2*pi x 10 MHz in rad/ns
MAX_AMPLITUDE = 2 * math.pi * 10e-3
DEFAULT_T_PULSE = 50.0
DEFAULT_PM = (0.0628, 0.0830, 0.0316)
# one half-period of the phase modulation; the default set is a local optimum here
PM_T_PULSE = math.pi / DEFAULT_PM[2]


@dataclass(frozen=True)
class PMParams:
    """Phase-modulated waveform ``sum_j (a_j/2)[cos(phi_j) sx + sin(phi_j) sy]``.

    ``phi_j(t) = (b_j/nu_j) sin(nu_j t)``. All rates are in rad/ns, ``t_pulse``
    in ns. ``terms`` holds ``(a_j, b_j, nu_j)`` triples.
    """

    terms: tuple = field(default_factory=tuple)
    t_pulse: float = DEFAULT_T_PULSE

    def __post_init__(self):
        terms = tuple(tuple(float(v) for v in term) for term in self.terms)
        if not terms:
            raise ValueError("PMParams needs at least one term")
        for a, b, nu in terms:
            if nu == 0.0:
                raise ValueError("PM modulation frequency nu must be nonzero")
            if not all(math.isfinite(v) for v in (a, b, nu)):
                raise ValueError("PM parameters must be finite")
        if not self.t_pulse > 0:
            raise ValueError("t_pulse must be positive")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, a, b, nu, t_pulse=DEFAULT_T_PULSE):
        return cls(((a, b, nu),), t_pulse)

    @classmethod
    def default(cls):
        return cls.single(*DEFAULT_PM, t_pulse=PM_T_PULSE)

    @property
    def total_amplitude(self):
        return sum(abs(a) for a, _, _ in self.terms)

    def satisfies_constraint(self, limit=MAX_AMPLITUDE):
        return self.total_amplitude <= limit + 1e-12

    def as_vector(self):
        return np.array([v for term in self.terms for v in term])

    @classmethod
    def from_vector(cls, vec, t_pulse=DEFAULT_T_PULSE):
        vec = np.asarray(vec, dtype=float).reshape(-1, 3)
        return cls(tuple(map(tuple, vec)), t_pulse)

    def to_dict(self):
        if len(self.terms) == 1:
            a, b, nu = self.terms[0]
            return {"a": a, "b": b, "nu": nu, "t_pulse_ns": self.t_pulse}
        return {"terms": [list(t) for t in self.terms], "t_pulse_ns": self.t_pulse}

    @classmethod
    def from_dict(cls, doc):
        t_pulse = float(doc.get("t_pulse_ns", DEFAULT_T_PULSE))
        if "terms" in doc:
            return cls(tuple(tuple(t) for t in doc["terms"]), t_pulse)
        return cls.single(doc["a"], doc["b"], doc["nu"], t_pulse)


def pm_waveform(p, t):
    """Sigma-coefficients ``(hx, hy)`` of the pi_x PM Hamiltonian at time ``t``.

    These multiply the Pauli matrices directly; the Rabi-rate vector is twice
    this (see :func:`pm_rabi`).
    """
    t = np.asarray(t, dtype=float)
    hx = np.zeros_like(t)
    hy = np.zeros_like(t)
    for a, b, nu in p.terms:
        phi = (b / nu) * np.sin(nu * t)
        hx = hx + 0.5 * a * np.cos(phi)
        hy = hy + 0.5 * a * np.sin(phi)
    if hx.ndim == 0:
        return float(hx), float(hy)
    return hx, hy


def pm_rabi(p, t):
    hx, hy = pm_waveform(p, t)
    return 2 * np.asarray(hx), 2 * np.asarray(hy)


def rotate_axis(ox, oy, phase):
    """Rotate a drive vector in the xy plane; phase pi/2 maps pi_x onto pi_y."""
    c, s = math.cos(phase), math.sin(phase)
    return ox * c - oy * s, ox * s + oy * c


def pulse_rabi(kind, t, t_pulse, phase=0.0, pm=None):
    """Rabi vector ``(Omega_x, Omega_y)`` of a pi pulse at local time ``t``."""
    t = np.asarray(t, dtype=float)
    if kind == "rect":
        amp = math.pi / t_pulse
        ox = np.full_like(t, amp)
        oy = np.zeros_like(t)
    elif kind == "pm":
        if pm is None:
            raise ValueError("PM pulse requires PMParams")
        ox, oy = pm_rabi(pm, t)
    else:
        raise ValueError(f"unknown pulse kind {kind!r}")
    return rotate_axis(ox, oy, phase)
