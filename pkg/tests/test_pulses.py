import math

import numpy as np
import pytest

from czsim import pulses
from czsim.errors import UnsupportedShapeError
from czsim.linalg import COMPUTATIONAL_IDX, is_unitary
from czsim.pulses import (FAMILIES, Pulse, build_pulse, calibrate,
                          conditional_phase_estimate, detuning_from_theta,
                          evaluate_pulse, fourier_weights, pulse_with_lambdas,
                          shape_waveform, theta_dot, theta_idle_of, theta_of,
                          theta_trajectory)


def test_idle_mixing_angle_value(default_dev):
    # sqrt(2) * 0.018 / (7.05 - 5.10 - 0.75) in GHz units
    expected = math.sqrt(2.0) * 0.018 / 1.2
    assert theta_idle_of(default_dev) == pytest.approx(expected, rel=1e-12)


def test_detuning_theta_roundtrip(default_dev):
    idle = theta_idle_of(default_dev)
    assert detuning_from_theta(idle, default_dev) == \
        pytest.approx(default_dev.omega1_idle, rel=1e-12)
    for theta in (0.05, 0.3, 1.0):
        w1 = detuning_from_theta(theta, default_dev)
        back = math.sqrt(2.0) * default_dev.g / (w1 - default_dev.omega2
                                                 + default_dev.alpha)
        assert back == pytest.approx(theta, rel=1e-12)
    with pytest.raises(ValueError):
        detuning_from_theta(0.0, default_dev)


def test_fourier_weights_normalized():
    assert fourier_weights(1) == pytest.approx([1.0])
    for m in (2, 4, 8):
        w = fourier_weights(m)
        assert len(w) == m
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        fourier_weights(0)


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_trajectory_peaks_at_requested_amplitude(family, default_dev):
    p = build_pulse(family, default_dev, 100e-9, 0.4)
    mid = float(theta_of(50e-9, p, default_dev)[0])
    assert mid == pytest.approx(0.4, rel=1e-9)
    edge = float(theta_of(0.0, p, default_dev)[0])
    assert edge == pytest.approx(p.theta_idle, rel=1e-9)


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_trajectory_symmetric_about_midpoint(family, default_dev):
    p = build_pulse(family, default_dev, 120e-9, 0.35)
    ts = np.linspace(0.0, 120e-9, 241)
    th = theta_of(ts, p, default_dev)
    assert np.max(np.abs(th - th[::-1])) < 1e-12


def test_build_pulse_validation(default_dev):
    idle = theta_idle_of(default_dev)
    with pytest.raises(ValueError):
        build_pulse("slepian", default_dev, 100e-9, idle / 2.0)
    with pytest.raises(ValueError):
        build_pulse("slepian", default_dev, 100e-9, math.pi / 2.0)
    with pytest.raises(ValueError):
        build_pulse("gaussian", default_dev, 100e-9, 0.3)


def test_pulse_dataclass_validation():
    with pytest.raises(ValueError):
        Pulse(family="square", t_gate=0.0, theta_idle=0.02, theta_max=0.4)
    with pytest.raises(ValueError):
        Pulse(family="square", t_gate=1e-7, theta_idle=0.02, theta_max=0.4,
              cutoff=2e-7)
    with pytest.raises(ValueError):
        Pulse(family="slepian", t_gate=1e-7, theta_idle=0.02, theta_max=0.4)


def test_theta_dot_matches_numerical_derivative(default_dev):
    p = build_pulse("fourier-4", default_dev, 100e-9, 0.45)
    eps = 1e-15
    for t in (13e-9, 31e-9, 72e-9, 88e-9):
        num = (theta_of(t + eps, p, default_dev)[0]
               - theta_of(t - eps, p, default_dev)[0]) / (2 * eps)
        assert theta_dot(t, p) == pytest.approx(num, rel=1e-4, abs=1e3)
    with pytest.raises(UnsupportedShapeError):
        theta_dot(10e-9, build_pulse("square", default_dev, 100e-9, 0.4))


def test_cutoff_parks_back_at_idle(default_dev):
    full = build_pulse("slepian", default_dev, 100e-9, 0.4)
    cut = Pulse(family=full.family, t_gate=full.t_gate,
                theta_idle=full.theta_idle, theta_max=full.theta_max,
                lambdas=full.lambdas, cutoff=60e-9)
    assert cut.duration == pytest.approx(60e-9)
    assert full.duration == pytest.approx(100e-9)
    before = theta_of(55e-9, cut, default_dev)[0]
    assert before == pytest.approx(theta_of(55e-9, full, default_dev)[0])
    assert theta_of(70e-9, cut, default_dev)[0] == pytest.approx(cut.theta_idle)


def test_theta_trajectory_grid(default_dev):
    p = build_pulse("hanning", default_dev, 100e-9, 0.3)
    ts, th = theta_trajectory(p, default_dev)
    assert ts[0] == 0.0 and ts[-1] == pytest.approx(100e-9)
    assert len(ts) == len(th) == pulses.FINAL_STEPS + 1
    with pytest.raises(ValueError):
        theta_trajectory(p, default_dev, dt=p.t_gate / 10)


def test_shape_waveform_returns_frequency(default_dev):
    p = build_pulse("cosine", default_dev, 100e-9, 0.4)
    w = shape_waveform(p, np.array([0.0, 50e-9]), default_dev)
    assert w[0] == pytest.approx(default_dev.omega1_idle, rel=1e-12)
    assert w[1] == pytest.approx(detuning_from_theta(0.4, default_dev), rel=1e-12)
    assert w[1] < w[0]


def test_square_phase_estimate_closed_form(default_dev):
    theta_p = 0.5
    t_gate = 150e-9
    p = build_pulse("square", default_dev, t_gate, theta_p)
    expected = math.sqrt(2.0) * default_dev.g * math.tan(theta_p) * t_gate
    assert conditional_phase_estimate(p, default_dev) == \
        pytest.approx(expected, rel=1e-3)


def test_evaluate_pulse_returns_unitary_blocks(default_dev, slepian_pulse):
    ev = evaluate_pulse(slepian_pulse, default_dev)
    assert is_unitary(ev.u9, tol=1e-7)
    assert np.allclose(ev.u4,
                       ev.u9[np.ix_(COMPUTATIONAL_IDX, COMPUTATIONAL_IDX)])
    assert 0.0 <= ev.fidelity <= 1.0


def test_solved_amplitude_default_device(default_dev, slepian_pulse):
    # 176.9 ns slepian on the 7.05 GHz device
    assert slepian_pulse.theta_max == pytest.approx(0.4621, abs=2e-3)
    ev = evaluate_pulse(slepian_pulse, default_dev)
    assert abs(pulses._wrap(ev.phase - math.pi)) < 1e-5
    assert ev.fidelity > 0.9999


def test_solved_amplitude_strong_zz_device(bench_dev, bench_pulse):
    # The 6.10 GHz device reaches phase pi with a much shallower excursion
    # because the static ZZ background accumulates most of the phase.
    assert bench_pulse.theta_max == pytest.approx(0.1975, abs=2e-3)
    ev = evaluate_pulse(bench_pulse, bench_dev)
    assert abs(pulses._wrap(ev.phase - math.pi)) < 1e-5
    assert ev.fidelity > 0.999


def test_warm_start_agrees_with_cold_start(default_dev, slepian_pulse):
    warm = pulses._solve_theta("slepian", default_dev, 176.9e-9,
                               pulses.FINAL_STEPS,
                               guess=slepian_pulse.theta_max * 1.001)
    assert warm is not None
    assert warm[0] == pytest.approx(slepian_pulse.theta_max, abs=1e-6)


def test_calibrate_narrow_window(default_dev):
    res = calibrate("slepian", default_dev, t_range=(176.7e-9, 177.1e-9),
                    t_step=0.1e-9, workers=1, n_blocks=2)
    assert res.fidelity > 0.999
    assert abs(pulses._wrap(res.phase - math.pi)) < 1e-4
    assert len(res.trace) == 5
    times = [t for t, _ in res.trace]
    assert times == sorted(times)
    assert res.pulse.t_gate in times


def test_calibrate_range_validation(default_dev):
    with pytest.raises(ValueError):
        calibrate("slepian", default_dev, t_range=(10e-9, 50e-9))
    with pytest.raises(ValueError):
        calibrate("slepian", default_dev, t_range=(150e-9, 250e-9))


def test_pulse_with_lambdas_rescales_peak(default_dev):
    p = build_pulse("fourier-2", default_dev, 100e-9, 0.4)
    doubled = pulse_with_lambdas(p, tuple(2 * l for l in p.lambdas))
    excursion = p.theta_max - p.theta_idle
    assert doubled.theta_max - doubled.theta_idle == \
        pytest.approx(2 * excursion, rel=1e-9)
    mid = theta_of(50e-9, doubled, default_dev)[0]
    assert mid == pytest.approx(doubled.theta_max, rel=1e-9)
