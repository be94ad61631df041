"""Two-level spin dynamics under piecewise control and XY-8 decoupling.

Hamiltonian convention (rad/ns, ns)::

    H(t) = (delta/2) sz + g_ac cos(w_ac t + phi) sz + (Omega_x/2) sx + (Omega_y/2) sy

``Omega`` is the Rabi rate, so a constant ``Omega`` applied for ``pi/Omega``
is a pi rotation. Drive-free stretches commute with themselves and are
integrated exactly; driven stretches use midpoint piecewise-constant steps.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .kernels import su2_affine, su2_product
from .waveforms import pulse_rabi

DT_PULSE = 0.5
XY8_PHASES = (0.0, math.pi / 2, 0.0, math.pi / 2, math.pi / 2, 0.0, math.pi / 2, 0.0)
PULSE_KINDS = ("ideal", "rect", "pm")

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class Segment:
    length: float
    delta: float = 0.0
    omega_x: float = 0.0
    omega_y: float = 0.0
    g_ac: float = 0.0
    w_ac: float = 0.0
    ac_phase: float = 0.0

    def __post_init__(self):
        vals = (self.length, self.delta, self.omega_x, self.omega_y,
                self.g_ac, self.w_ac, self.ac_phase)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("segment parameters must be finite")
        if self.length <= 0:
            raise ValueError("segment length must be positive")

    @property
    def driven(self):
        return self.omega_x != 0.0 or self.omega_y != 0.0


@dataclass(frozen=True)
class HamiltonianTrack:
    segments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def duration(self):
        return sum(s.length for s in self.segments)


def to_matrix(a, b):
    """2x2 matrix of the SU(2) pair ``(a, b)``."""
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]], dtype=complex)


def _ac_integral(g, w, phase, t0, t1):
    if w == 0.0:
        return g * math.cos(phase) * (t1 - t0)
    return g / w * (math.sin(w * t1 + phase) - math.sin(w * t0 + phase))


def propagate(track, dt=DT_PULSE, t0=0.0):
    """Time-ordered propagator of ``track`` starting at absolute time ``t0``."""
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError("dt must be positive and finite")
    ax, ay, az = [], [], []
    t = t0
    for seg in track.segments:
        if not seg.driven:
            ax.append(0.0)
            ay.append(0.0)
            az.append(0.5 * seg.delta * seg.length
                      + _ac_integral(seg.g_ac, seg.w_ac, seg.ac_phase, t, t + seg.length))
        else:
            m = max(1, math.ceil(seg.length / dt - 1e-9))
            h = seg.length / m
            tm = t + (np.arange(m) + 0.5) * h
            hz = 0.5 * seg.delta + seg.g_ac * np.cos(seg.w_ac * tm + seg.ac_phase)
            ax.extend([0.5 * seg.omega_x * h] * m)
            ay.extend([0.5 * seg.omega_y * h] * m)
            az.extend(hz * h)
        t += seg.length
    if not ax:
        return ID2.copy()
    a, b = su2_product(np.array(ax), np.array(ay), np.array(az)[None, :])
    return to_matrix(a[0], b[0])


def unitarity_error(u):
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - ID2))


# ---------------------------------------------------------------- sequences


@dataclass(frozen=True)
class Pulse:
    center: float
    phase: float


@dataclass(frozen=True)
class PulseSequence:
    n_blocks: int
    t_pulse: float
    tau_p: float
    kind: str
    pulses: tuple
    pm: object = None

    @property
    def cell(self):
        return self.t_pulse + self.tau_p

    @property
    def total_time(self):
        return 8 * self.n_blocks * self.cell

    @property
    def n_pulses(self):
        return len(self.pulses)

    @property
    def phases(self):
        return [p.phase for p in self.pulses]

    @property
    def w_ac(self):
        """AC angular frequency matched to the pulse spacing (half period = one cell)."""
        return math.pi / self.cell


def build_xy8(n_blocks, t_pulse=50.0, tau_p=950.0, kind="rect", pm=None):
    """XY-8 sequence with pulse centres at ``(k + 1/2)(t_pulse + tau_p)``."""
    if int(n_blocks) != n_blocks or n_blocks < 1:
        raise ValueError("XY-8 needs at least one block")
    if not (t_pulse > 0 and tau_p > 0):
        raise ValueError("t_pulse and tau_p must be positive")
    if kind not in PULSE_KINDS:
        raise ValueError(f"unknown pulse kind {kind!r}")
    if kind == "pm" and pm is None:
        raise ValueError("PM sequence requires PMParams")
    n_blocks = int(n_blocks)
    if kind == "pm" and abs(pm.t_pulse - t_pulse) > 1e-12:
        pm = type(pm)(pm.terms, t_pulse)
    cell = t_pulse + tau_p
    pulses = tuple(
        Pulse((k + 0.5) * cell, XY8_PHASES[k % 8]) for k in range(8 * n_blocks)
    )
    return PulseSequence(n_blocks, float(t_pulse), float(tau_p), kind, pulses, pm)


def pulse_steps(kind, t_pulse, phase=0.0, pm=None, dt=DT_PULSE):
    """Midpoint step table of one pulse: local midpoints, step lengths, Rabi vectors."""
    m = max(1, math.ceil(t_pulse / dt - 1e-9))
    h = t_pulse / m
    tm = (np.arange(m) + 0.5) * h
    ox, oy = pulse_rabi(kind, tm, t_pulse, phase, pm)
    return tm, np.full(m, h), np.asarray(ox, float), np.asarray(oy, float)


def modulation_function(t, w_ac, offset=math.pi / 2):
    """Toggling-frame sign ``sgn(sin(w_ac t + offset))``.

    The default offset flips the sign at the zeros of ``cos(w_ac t)``, which is
    where the pi pulses sit.
    """
    return np.sign(np.sin(w_ac * np.asarray(t, dtype=float) + offset))


def ideal_population(g_ac, t):
    """Noiseless ideal-pulse signal ``(1 + cos(4 g t / pi)) / 2``."""
    return 0.5 * (1.0 + np.cos(4.0 * np.asarray(g_ac) * np.asarray(t) / math.pi))


@dataclass
class Schedule:
    """Flat step table for a sequence; ``az`` is assembled per noise realization."""

    t0: np.ndarray
    t1: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    ac_weight: np.ndarray
    total_time: float
    w_ac: float

    @property
    def n_steps(self):
        return self.t0.size


def compile_sequence(seq, dt=DT_PULSE, w_ac=None, ac_phase=0.0):
    """Flatten ``seq`` into gap steps (exact) and pulse steps (midpoint)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    w = seq.w_ac if w_ac is None else float(w_ac)
    half = 0.0 if seq.kind == "ideal" else 0.5 * seq.t_pulse
    t0s, t1s, axs, ays, acw = [], [], [], [], []
    cache = {}
    cursor = 0.0

    def gap(a, b):
        if b > a:
            t0s.append(np.array([a]))
            t1s.append(np.array([b]))
            axs.append(np.zeros(1))
            ays.append(np.zeros(1))
            acw.append(np.array([_ac_integral(1.0, w, ac_phase, a, b)]))

    for p in seq.pulses:
        start = p.center - half
        gap(cursor, start)
        if seq.kind == "ideal":
            t0s.append(np.array([p.center]))
            t1s.append(np.array([p.center]))
            axs.append(np.array([0.5 * math.pi * math.cos(p.phase)]))
            ays.append(np.array([0.5 * math.pi * math.sin(p.phase)]))
            acw.append(np.zeros(1))
            cursor = p.center
            continue
        if p.phase not in cache:
            cache[p.phase] = pulse_steps(seq.kind, seq.t_pulse, p.phase, seq.pm, dt)
        tm, h, ox, oy = cache[p.phase]
        t0s.append(start + tm - 0.5 * h)
        t1s.append(start + tm + 0.5 * h)
        axs.append(0.5 * ox * h)
        ays.append(0.5 * oy * h)
        acw.append(np.cos(w * (start + tm) + ac_phase) * h)
        cursor = start + seq.t_pulse
    gap(cursor, seq.total_time)
    cat = np.concatenate
    return Schedule(cat(t0s), cat(t1s), cat(axs), cat(ays), cat(acw),
                    seq.total_time, w)


def _readout_p0(a, b):
    # pi/2_x preparation, sequence (a, b), pi/2_{-x} readout
    return np.real(a) ** 2 + np.real(b) ** 2


def _base_phases(sched, noise, delta=0.0):
    dur = sched.t1 - sched.t0
    static = delta + (0.0 if noise is None else noise.delta)
    base = 0.5 * static * dur
    if noise is not None and noise.has_dynamics:
        if noise.span < sched.total_time - 1e-9:
            raise ValueError("noise trajectory shorter than the sequence")
        base = base + 0.5 * noise.integral(sched.t0, sched.t1)
    return base


def schedule_populations(sched, g_values, delta=0.0, noise=None):
    """P0 for each ``g_ac`` in ``g_values`` under one noise realization.

    ``noise`` may be None or any object with ``delta``, ``has_dynamics``,
    ``span`` and ``integral(t0, t1)`` (see
    :class:`nvsparse.noise.NoiseRealization`); an explicit ``delta`` is added
    to the realization's static detuning.
    """
    g_values = np.atleast_1d(np.asarray(g_values, dtype=float))
    base = _base_phases(sched, noise, delta)
    a, b = su2_affine(sched.ax, sched.ay, base[None, :], sched.ac_weight, g_values)
    return _readout_p0(a[0], b[0])


def ensemble_populations(sched, g_values, realizations, weights, chunk=16):
    """Weighted mean of P0 over noise realizations, one value per ``g_ac``."""
    g_values = np.atleast_1d(np.asarray(g_values, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if len(realizations) != weights.size or weights.size == 0:
        raise ValueError("need one weight per realization")
    total = np.zeros(g_values.size)
    for i0 in range(0, len(realizations), chunk):
        part = realizations[i0:i0 + chunk]
        base = np.stack([_base_phases(sched, r) for r in part])
        a, b = su2_affine(sched.ax, sched.ay, base, sched.ac_weight, g_values)
        total += weights[i0:i0 + len(part)] @ _readout_p0(a, b)
    return total


def run_protocol(seq, g_ac, w_ac=None, noise=None, dt=DT_PULSE):
    """Ramsey-style P0 after ``seq`` with AC amplitude ``g_ac``."""
    sched = compile_sequence(seq, dt, w_ac)
    return float(schedule_populations(sched, [g_ac], noise=noise)[0])


def sequence_track(seq, g_ac=0.0, delta=0.0, w_ac=None, dt=DT_PULSE):
    """The sequence as an explicit HamiltonianTrack (no OU term).

    Used to cross-check the flattened schedule against :func:`propagate`.
    Ideal pulses have no finite-duration representation and are rejected.
    """
    if seq.kind == "ideal":
        raise ValueError("ideal pulses cannot be expressed as a track")
    w = seq.w_ac if w_ac is None else w_ac
    segs = []
    cursor = 0.0
    for p in seq.pulses:
        start = p.center - 0.5 * seq.t_pulse
        if start > cursor:
            segs.append(Segment(start - cursor, delta, g_ac=g_ac, w_ac=w))
        tm, h, ox, oy = pulse_steps(seq.kind, seq.t_pulse, p.phase, seq.pm, dt)
        for hk, x, y in zip(h, ox, oy):
            segs.append(Segment(hk, delta, x, y, g_ac, w))
        cursor = start + seq.t_pulse
    if seq.total_time > cursor:
        segs.append(Segment(seq.total_time - cursor, delta, g_ac=g_ac, w_ac=w))
    return HamiltonianTrack(segs)
