"""Experiment configuration and the end-to-end sensing/reconstruction chain.

The CLI is a thin layer over these functions; tests call them directly.
"""
from dataclasses import dataclass
import copy
import functools
import json
import math

import numpy as np

from . import fields as fl
from . import kriging as kr
from .io import config_hash, read_json
from .magnetometry import GAMMA, Sensor, field_from_population, first_zero_field
from .metrics import MetricsReport
from .noise import NoiseConfig, detuning_grid
from .spin import build_xy8
from .waveforms import DEFAULT_T_PULSE, PMParams

PRESETS_VERSION = "1"
CALIBRATION_MODES = ("none", "bias", "proportional")
MHZ = 2 * math.pi * 1e-3  # rad/ns per MHz

DEFAULTS = {
    "seed": 0,
    "sequence": {
        "n_blocks": 16,
        "cell_ns": 1000.0,
        "t_pulse_ns": DEFAULT_T_PULSE,
        "pulse": "pm",
        "pm": "default",
        "dt_ns": 0.5,
    },
    "noise": {
        "fwhm_mhz": 26.5,
        "tau_us": 20.0,
        "ou_sigma_khz": 50.0,
        "readout_sigma": 0.01,
        "n_detunings": 15,
        "n_trajectories": 20,
        "ensemble_seed": 0,
    },
    "field": {"preset": "triple", "width": 100, "height": 100, "window": "auto",
              "window_hi": 0.85, "table_points": 201},
    "sampling": {"strategy": "grid", "n": 25, "bound": 0.3, "perturbation": "uniform"},
    "references": 10,
    "calibration": "proportional",
    "kriging": {"budget": 400, "starts": 8},
    "optimize": {"budget": 600, "restarts": 5, "grid_points": 15, "jitter": 0.1},
    "characterize": {"n_blocks": [16, 32], "b_points": 201, "fringe_blocks": 50,
                     "fringe_points": 41},
    "sweep": {"variable": "n", "values": [25, 36, 64, 81, 100], "repetitions": 20,
              "workers": 1},
}


class ConfigError(ValueError):
    pass


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


@dataclass
class ExperimentConfig:
    data: dict

    @classmethod
    def load(cls, path=None, overrides=None):
        """Defaults, then the JSON file at ``path``, then ``overrides``."""
        data = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                doc = read_json(path)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
            _check(isinstance(doc, dict), "config root must be an object")
            data = _merge(data, doc)
        if overrides:
            data = _merge(data, overrides)
        cfg = cls(data)
        cfg.validate()
        return cfg

    def validate(self):
        d = self.data
        _check(isinstance(d["seed"], int) and d["seed"] >= 0, "seed must be a non-negative integer")
        s = d["sequence"]
        _check(s["pulse"] in ("ideal", "rect", "pm"), f"unknown pulse kind {s['pulse']!r}")
        _check(int(s["n_blocks"]) == s["n_blocks"] and s["n_blocks"] >= 1, "n_blocks must be >= 1")
        _check(s["cell_ns"] > 0 and s["t_pulse_ns"] > 0 and s["dt_ns"] > 0, "times must be positive")
        _check(s["t_pulse_ns"] < s["cell_ns"], "pulse longer than the cell")
        n = d["noise"]
        for k in ("fwhm_mhz", "tau_us", "ou_sigma_khz", "readout_sigma"):
            _check(isinstance(n[k], (int, float)) and n[k] >= 0, f"noise.{k} must be >= 0")
        _check(n["n_detunings"] >= 1 and n["n_trajectories"] >= 1, "ensemble counts must be >= 1")
        f = d["field"]
        _check(f["preset"] in fl.PRESETS, f"unknown field preset {f['preset']!r}")
        _check(f["width"] >= 11 and f["height"] >= 11, "maps must be at least 11x11")
        w = f["window"]
        _check(w in ("auto", "central") or (isinstance(w, list) and len(w) == 2 and w[0] < w[1]),
               "field.window must be 'auto', 'central' or [b_min, b_max]")
        sm = d["sampling"]
        _check(sm["strategy"] in fl.STRATEGIES, f"unknown strategy {sm['strategy']!r}")
        _check(int(sm["n"]) == sm["n"] and sm["n"] >= 2, "sampling.n must be >= 2")
        _check(sm["perturbation"] in fl.PERTURBATIONS, "unknown perturbation")
        _check(0 <= sm["bound"] <= 1, "sampling.bound must be in [0, 1]")
        _check(d["references"] >= 1, "need at least one reference")
        _check(d["calibration"] in CALIBRATION_MODES, f"unknown calibration {d['calibration']!r}")
        sw = d["sweep"]
        _check(sw["variable"] in ("n", "strategy"), "sweep.variable must be n or strategy")
        _check(sw["repetitions"] >= 1 and sw["workers"] >= 1, "sweep counts must be >= 1")
        try:
            self.pm_params()
        except (KeyError, TypeError, ValueError, OSError) as exc:
            raise ConfigError(f"bad PM parameters: {exc}") from exc

    # -------------------------------------------------------------- accessors

    @property
    def seed(self):
        return self.data["seed"]

    @property
    def hash(self):
        return config_hash(self.data)

    def noise_config(self):
        n = self.data["noise"]
        return NoiseConfig(n["fwhm_mhz"] * MHZ, n["tau_us"] * 1e3, n["ou_sigma_khz"] * MHZ * 1e-3,
                           n["readout_sigma"])

    @property
    def ensemble(self):
        n = self.data["noise"]
        return int(n["n_detunings"]), int(n["n_trajectories"])

    def pm_params(self):
        pm = self.data["sequence"]["pm"]
        if pm == "default":
            return PMParams.default()
        if isinstance(pm, str):
            return PMParams.from_dict(read_json(pm))
        return PMParams.from_dict(pm)

    def sequence(self, kind=None, n_blocks=None):
        s = self.data["sequence"]
        kind = s["pulse"] if kind is None else kind
        n_blocks = int(s["n_blocks"] if n_blocks is None else n_blocks)
        cell = float(s["cell_ns"])
        if kind == "pm":
            pm = self.pm_params()
            return build_xy8(n_blocks, pm.t_pulse, cell - pm.t_pulse, "pm", pm)
        t_pulse = float(s["t_pulse_ns"])
        return build_xy8(n_blocks, t_pulse, cell - t_pulse, kind)

    def sensor(self, kind=None, n_blocks=None, seed=None):
        seed = self.data["noise"]["ensemble_seed"] if seed is None else seed
        return Sensor(self.sequence(kind, n_blocks), self.noise_config(), self.ensemble, seed,
                      self.data["sequence"]["dt_ns"])


# ------------------------------------------------------------ measurement model


@dataclass(frozen=True)
class MeasurementModel:
    """Tabulated mean response plus the field window mapped onto [0, 1].

    Cheap to copy into worker processes.
    """

    grid: np.ndarray
    p0: np.ndarray
    t_total: float
    b_min: float
    b_max: float
    readout_sigma: float
    gamma: float = GAMMA

    @property
    def b_pi(self):
        return first_zero_field(self.t_total, self.gamma)

    def mean(self, b):
        b = np.asarray(b, dtype=float)
        if np.any(b < self.grid[0] - 1e-9) or np.any(b > self.grid[-1] + 1e-9):
            raise ValueError("field outside the tabulated range")
        return np.interp(b, self.grid, self.p0)

    def measure(self, y, rng):
        """Measured normalized values for true normalized values ``y``.

        Returns ``(y_hat, p_meas, clamped)``.
        """
        b = self.b_min + np.asarray(y, dtype=float) * (self.b_max - self.b_min)
        p = self.mean(b)
        if self.readout_sigma > 0:
            p = p + rng.normal(0.0, self.readout_sigma, p.shape)
        b_hat, clamped = field_from_population(p, self.t_total, (0.0, self.b_pi), self.gamma)
        return (b_hat - self.b_min) / (self.b_max - self.b_min), p, clamped


def fixed_point_window(grid, p0, t_total, hi_frac=0.85, gamma=GAMMA):
    """Window whose lower edge is where ideal-curve inversion is unbiased.

    Inverting the noisy mean curve through the ideal curve gives an estimate
    ``B_hat(B)`` that crosses ``B`` once on the first branch. Anchoring the
    normalized scale there makes the systematic error close to a pure
    rescaling of the normalized value. Falls back to the central 60% of the
    branch when the two curves never cross (noiseless ideal pulses).
    """
    b_pi = first_zero_field(t_total, gamma)
    inside = grid <= b_pi
    g = grid[inside]
    b_hat, _ = field_from_population(p0[inside], t_total, (0.0, b_pi), gamma)
    d = b_hat - g
    if np.max(np.abs(d)) < 1e-3 * b_pi:
        return 0.2 * b_pi, 0.8 * b_pi
    cross = np.nonzero((d[:-1] > 0) & (d[1:] <= 0))[0]
    if cross.size == 0:
        raise FloatingPointError("no unbiased working point on the first branch")
    j = cross[0]
    lo = float(np.interp(0.0, [d[j + 1], d[j]], [g[j + 1], g[j]]))
    hi = hi_frac * b_pi
    if not lo < hi:
        raise FloatingPointError("working point lies beyond the window's upper edge")
    return lo, hi


def _model_key(cfg):
    d = cfg.data
    return json.dumps([d["sequence"], d["noise"], d["field"]["window"], d["field"]["window_hi"],
                       d["field"]["table_points"]], sort_keys=True)


@functools.lru_cache(maxsize=8)
def _cached_model(key):
    d = json.loads(key)
    cfg = ExperimentConfig.load(overrides={"sequence": d[0], "noise": d[1],
                                           "field": {"window": d[2], "window_hi": d[3],
                                                     "table_points": d[4]}})
    sensor = cfg.sensor()
    b_pi = first_zero_field(sensor.t_total)
    grid, p0 = sensor.tabulate(b_pi, int(d[4]))
    window = d[2]
    if window == "auto":
        lo, hi = fixed_point_window(grid, p0, sensor.t_total, d[3])
    elif window == "central":
        lo, hi = 0.2 * b_pi, 0.8 * b_pi
    else:
        lo, hi = map(float, window)
        if not (0 <= lo < hi <= b_pi):
            raise ConfigError("field.window must lie on the first branch")
    return MeasurementModel(grid, p0, sensor.t_total, lo, hi, sensor.noise.readout_sigma)


def measurement_model(cfg):
    """Tabulated measurement model for ``cfg`` (memoized per process)."""
    return _cached_model(_model_key(cfg))


# ------------------------------------------------------------ sensing


def sense(cfg, model, truth, seed=None, strategy=None, n=None):
    """Sample and reference measurements; returns ``(SampleSet, ReferenceSet)``.

    Draw order from the seed: sample layout, sample readout noise,
    reference readout noise.
    """
    d = cfg.data
    seed = cfg.seed if seed is None else seed
    strategy = d["sampling"]["strategy"] if strategy is None else strategy
    n = int(d["sampling"]["n"] if n is None else n)
    rng = np.random.default_rng(seed)
    coords = fl.strategy_points(strategy, n, d["sampling"]["bound"], rng, d["sampling"]["perturbation"])
    y_true = fl.sample_field(truth, coords)
    y_hat, _, clamped = model.measure(y_true, rng)
    samples = fl.SampleSet(coords, y_hat, strategy, seed, clamped, y_true)
    if np.ptp(y_hat) == 0:
        raise FloatingPointError("measured sample values are constant")
    refs = fl.choose_references(y_hat, truth, d["references"])
    refs.measured, _, refs.clamped = model.measure(refs.nominal, rng)
    return samples, refs


def calibration_errors(samples, refs):
    """Mean |calibrated - true| at the sample points for each mode."""
    return {m: float(np.mean(np.abs(kr.calibrate(samples.values, refs, m) - samples.true_values)))
            for m in CALIBRATION_MODES}


@dataclass
class Reconstruction:
    model: kr.KrigingModel
    prediction: fl.FieldMap
    metrics: MetricsReport
    baseline: MetricsReport
    calibrated: np.ndarray


def reconstruct(cfg, samples, refs, truth, mode=None, seed=None):
    d = cfg.data
    mode = d["calibration"] if mode is None else mode
    seed = cfg.seed if seed is None else seed
    values = kr.calibrate(samples.values, refs, mode)
    model = kr.fit(samples.coords, values, d["kriging"]["budget"], seed, d["kriging"]["starts"])
    pred = kr.predict_grid(model, truth.width, truth.height)
    if not np.all(np.isfinite(pred.values)):
        raise FloatingPointError("non-finite kriging prediction")
    base = fl.nearest_neighbor_map(samples.coords, samples.values, truth.width, truth.height)
    return Reconstruction(model, pred, MetricsReport.compute(truth.values, pred.values),
                          MetricsReport.compute(truth.values, base), values)


def truth_map(cfg, preset=None):
    f = cfg.data["field"]
    return fl.preset_field(f["preset"] if preset is None else preset, f["width"], f["height"])


def repetition_seed(seed, *index):
    """Derived integer seed for repetition ``index`` of a batch."""
    return int(np.random.SeedSequence([int(seed), *map(int, index)]).generate_state(1)[0])


def run_once(cfg, model, seed, strategy=None, n=None, preset=None):
    """One sense + reconstruct pass; returns the MABE MetricsReport."""
    truth = truth_map(cfg, preset)
    samples, refs = sense(cfg, model, truth, seed, strategy, n)
    return reconstruct(cfg, samples, refs, truth, seed=seed).metrics


def optimization_grid(cfg):
    n = cfg.data["noise"]
    return detuning_grid(cfg.data["optimize"]["grid_points"], n["fwhm_mhz"] * MHZ)
