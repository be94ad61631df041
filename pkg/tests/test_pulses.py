import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from nvsparse.noise import detuning_grid
from nvsparse.pulses import (GateSpec, ensemble_objective, fidelities, gate_fidelity,
                             gate_under_detuning, optimize_pm)
from nvsparse.spin import ID2, SX, SY, SZ
from nvsparse.waveforms import (MAX_AMPLITUDE, DEFAULT_PM, PM_T_PULSE, PMParams, pm_rabi,
                                pm_waveform, pulse_rabi, rotate_axis)

GRID15 = detuning_grid(15, 2 * math.pi * 26.5e-3)


def haar(seed):
    z = np.random.default_rng(seed).normal(size=(2, 2)) + 1j * np.random.default_rng(seed + 1).normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


def test_fidelity_identity_and_orthogonal_paulis():
    assert gate_fidelity(SX, SX) == pytest.approx(1.0)
    assert gate_fidelity(SX, SY) == pytest.approx(1.0 / 3.0)


@given(st.integers(0, 10_000), st.floats(0, 2 * math.pi))
def test_fidelity_global_phase_invariant_and_bounded(seed, phi):
    u, v = haar(seed), haar(seed + 7)
    f = gate_fidelity(u, v)
    assert 1.0 / 3.0 - 1e-12 <= f <= 1.0 + 1e-12
    assert gate_fidelity(np.exp(1j * phi) * u, v) == pytest.approx(f, abs=1e-12)


def test_fidelity_rejects_non_unitary():
    with pytest.raises(ValueError):
        gate_fidelity(2 * ID2, SX)


def test_rect_pulse_matches_closed_form_exponential():
    spec = GateSpec("X", "rect")
    omega = math.pi / 50.0
    for delta in (0.0, 0.03, -0.07):
        exact = expm(-1j * 50.0 * (0.5 * omega * SX + 0.5 * delta * SZ))
        assert np.allclose(gate_under_detuning(spec, delta), exact, atol=1e-12)
    assert fidelities(spec, [0.0])[0] == pytest.approx(1.0, abs=1e-12)


def test_pm_pulse_matches_fine_step_oracle():
    p = PMParams.default()
    spec = GateSpec("X", p)
    delta = 0.04
    m = 4000
    h = p.t_pulse / m
    u = ID2.copy()
    for k in range(m):
        hx, hy = pm_waveform(p, (k + 0.5) * h)
        u = expm(-1j * h * (hx * SX + hy * SY + 0.5 * delta * SZ)) @ u
    assert gate_fidelity(gate_under_detuning(spec, delta), u) == pytest.approx(1.0, abs=1e-6)


def test_y_target_uses_rotated_axis():
    spec = GateSpec("Y", "rect")
    assert spec.phase == pytest.approx(math.pi / 2)
    assert fidelities(spec, [0.0])[0] == pytest.approx(1.0, abs=1e-12)
    assert gate_fidelity(gate_under_detuning(spec, 0.0), SX) == pytest.approx(1 / 3, abs=1e-12)


def test_pm_waveform_is_half_rabi_vector():
    p = PMParams.single(*DEFAULT_PM)
    t = np.linspace(0, 50, 7)
    hx, hy = pm_waveform(p, t)
    ox, oy = pm_rabi(p, t)
    assert np.allclose(ox, 2 * hx) and np.allclose(oy, 2 * hy)
    assert pm_waveform(p, 0.0) == (pytest.approx(DEFAULT_PM[0] / 2), 0.0)


def test_rotate_axis_maps_x_to_y():
    x, y = rotate_axis(1.0, 0.0, math.pi / 2)
    assert (x, y) == (pytest.approx(0.0, abs=1e-16), pytest.approx(1.0))


def test_pulse_rabi_errors():
    with pytest.raises(ValueError):
        pulse_rabi("pm", [0.0], 50.0)
    with pytest.raises(ValueError):
        pulse_rabi("gauss", [0.0], 50.0)


def test_pm_params_validation_and_serialization():
    with pytest.raises(ValueError):
        PMParams.single(0.06, 0.08, 0.0)
    with pytest.raises(ValueError):
        PMParams(())
    p = PMParams.default()
    assert PMParams.from_dict(p.to_dict()) == p
    two = PMParams(((0.03, 0.1, 0.02), (0.02, 0.05, 0.04)), 80.0)
    assert PMParams.from_dict(two.to_dict()) == two
    assert PMParams.from_vector(two.as_vector(), 80.0) == two
    assert not PMParams.single(0.05, 0.1, 0.03).satisfies_constraint(0.04)


def test_objective_weighted_mean_of_fidelities():
    spec = GateSpec("X", "rect")
    d, w = GRID15
    assert ensemble_objective(spec, GRID15) == pytest.approx(float(w @ fidelities(spec, d)))
    with pytest.raises(ValueError):
        ensemble_objective(spec, (np.array([]), np.array([])))


def test_objective_values_frozen():
    # frozen from the closed-form oracle above and the 0.5 ns midpoint scheme
    assert ensemble_objective(GateSpec("X", "rect"), GRID15) == pytest.approx(0.677672, abs=1e-5)
    assert ensemble_objective(GateSpec("X", PMParams.default()), GRID15) == pytest.approx(0.767511, abs=1e-5)


def test_optimizer_zero_budget_returns_initial(caplog):
    p = PMParams.default()
    res = optimize_pm(p, GRID15, budget=0)
    assert res.params == p and not res.improved and res.n_evals == 0
    assert "budget is zero" in caplog.text


def test_optimizer_respects_constraint_and_is_deterministic():
    start = PMParams.single(0.05, 0.06, 0.03, t_pulse=PM_T_PULSE)
    a = optimize_pm(start, GRID15, budget=120, seed=3, restarts=3)
    b = optimize_pm(start, GRID15, budget=120, seed=3, restarts=3)
    assert a.params == b.params and a.objective == b.objective
    assert a.params.satisfies_constraint(MAX_AMPLITUDE)
    assert a.objective >= a.initial_objective
    assert a.n_evals <= 120


def test_optimizer_rejects_infeasible_start():
    with pytest.raises(ValueError):
        optimize_pm(PMParams.single(0.1, 0.1, 0.03), GRID15)
