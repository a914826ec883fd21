import math

import numpy as np
import pytest

from czsim import circuits, faults, metrics, pulses
from czsim.device import DecoherenceParams, static_zz
from czsim.errors import FaultKindError, ShapeError, UnsupportedShapeError
from czsim.faults import (ALL_GATES, FaultSpec, LeakageParams,
                          apply_parameter_fault, enumerate_faults,
                          faulty_cz_channel, faulty_cz_unitary,
                          leakage_generator, missing_gate_unitary,
                          noisy_gate_from_leakage)
from czsim.linalg import is_hermitian, is_unitary


def test_fault_spec_validation():
    with pytest.raises(ValueError):
        FaultSpec(kind="glitch")
    with pytest.raises(ValueError):
        FaultSpec(kind="ratio", magnitude=0.6, coefficient_index=1)
    with pytest.raises(ValueError):
        FaultSpec(kind="ratio", magnitude=-0.1, coefficient_index=1)
    with pytest.raises(ValueError):
        FaultSpec(kind="bias", magnitude=0.1, coefficient_index=0)
    with pytest.raises(ValueError):
        FaultSpec(kind="leakage")
    with pytest.raises(ValueError):
        FaultSpec(kind="decoherence")
    # valid corners
    FaultSpec(kind="truncation", magnitude=0.5)
    FaultSpec(kind="missing_gate", target_gate=3)


def test_fault_descriptions():
    assert FaultSpec(kind="ratio", magnitude=0.1,
                     coefficient_index=1).describe() == "ratio(l1)@ALL"
    assert FaultSpec(kind="bias", magnitude=0.1, coefficient_index=2,
                     target_gate=4).describe() == "bias(l2)@4"
    assert FaultSpec(kind="truncation", magnitude=0.1,
                     target_gate=5).describe() == "truncation@5"
    assert FaultSpec(kind="missing_gate").describe() == "missing_gate@ALL"


def test_leakage_params_validation():
    with pytest.raises(ValueError):
        LeakageParams(chi=(0.2, 0.0, 0.0), zeta=(0.0,) * 4)
    with pytest.raises(ValueError):
        LeakageParams(chi=(0.0,) * 3, zeta=(0.0, 0.0, 0.0, -0.2))
    with pytest.raises(ValueError):
        LeakageParams(chi=(0.0,) * 2, zeta=(0.0,) * 4)


def test_enumerate_fault_counts():
    full_adder = circuits.decompose_to_cz(circuits.build_full_adder())
    u2 = enumerate_faults(full_adder, 2)
    assert u2.n_cz == 15
    assert u2.pulse_fault_count == 75
    assert u2.total_count == 90
    assert len(u2.faults) == 90

    random = circuits.build_random_circuit(seed=7, width=4, n_cz=9)
    u1 = enumerate_faults(random, 2)
    assert u1.pulse_fault_count == 45
    assert u1.total_count == 54

    with pytest.raises(ValueError):
        enumerate_faults(full_adder, 0)


def test_enumerate_targets_cz_positions_in_order():
    circ = circuits.build_random_circuit(seed=3, width=4, n_cz=4)
    universe = enumerate_faults(circ, 1, epsilon=0.07)
    targets = sorted({f.target_gate for f in universe.faults})
    assert targets == sorted(circ.cz_indices)
    assert all(f.magnitude == 0.07 for f in universe.faults
               if f.kind != "missing_gate")
    # per gate: ratio, bias (m terms each), truncation, missing gate
    per_gate = [f.kind for f in universe.faults if f.target_gate == targets[0]]
    assert per_gate == ["ratio", "bias", "truncation", "missing_gate"]


def test_parameter_fault_zero_epsilon_is_identity(slepian_pulse):
    f = FaultSpec(kind="ratio", magnitude=0.0, coefficient_index=1)
    assert apply_parameter_fault(slepian_pulse, f) is slepian_pulse


def test_ratio_fault_scales_one_coefficient(slepian_pulse):
    f = FaultSpec(kind="ratio", magnitude=0.2, coefficient_index=2)
    faulty = apply_parameter_fault(slepian_pulse, f)
    assert faulty.lambdas[1] == pytest.approx(1.2 * slepian_pulse.lambdas[1])
    untouched = [i for i in range(slepian_pulse.m) if i != 1]
    for i in untouched:
        assert faulty.lambdas[i] == slepian_pulse.lambdas[i]


def test_bias_fault_adds_dominant_coefficient(slepian_pulse):
    f = FaultSpec(kind="bias", magnitude=0.1, coefficient_index=3)
    faulty = apply_parameter_fault(slepian_pulse, f)
    expected = slepian_pulse.lambdas[2] + 0.1 * slepian_pulse.lambdas[0]
    assert faulty.lambdas[2] == pytest.approx(expected)


def test_truncation_fault_shortens_schedule(slepian_pulse):
    f = FaultSpec(kind="truncation", magnitude=0.25)
    faulty = apply_parameter_fault(slepian_pulse, f)
    assert faulty.cutoff == pytest.approx(0.75 * slepian_pulse.t_gate)
    assert faulty.duration == pytest.approx(0.75 * slepian_pulse.t_gate)
    assert faulty.lambdas == slepian_pulse.lambdas


def test_parameter_fault_errors(slepian_pulse, default_dev):
    with pytest.raises(FaultKindError):
        apply_parameter_fault(slepian_pulse, FaultSpec(kind="missing_gate"))
    with pytest.raises(ValueError):
        apply_parameter_fault(slepian_pulse,
                              FaultSpec(kind="ratio", magnitude=0.1,
                                        coefficient_index=slepian_pulse.m + 1))
    square = pulses.build_pulse("square", default_dev, 100e-9, 0.4)
    with pytest.raises(UnsupportedShapeError):
        apply_parameter_fault(square, FaultSpec(kind="ratio", magnitude=0.1,
                                                coefficient_index=1))


def test_missing_gate_unitary_structure():
    u = missing_gate_unitary(2e6, 100e-9)
    assert np.allclose(np.diag(u)[:3], 1.0)
    assert np.angle(u[3, 3]) == pytest.approx(2e6 * 100e-9)
    # a slot lasting pi over the ZZ rate accidentally implements CZ
    zeta = 3e6
    u_cz = missing_gate_unitary(zeta, math.pi / zeta)
    assert np.max(np.abs(u_cz - metrics.CZ)) < 1e-12


def test_missing_gate_periodicity():
    zeta = 2.5e6
    t = 40e-9
    period = 2.0 * math.pi / zeta
    f0 = metrics.gate_fidelity(metrics.CZ, missing_gate_unitary(zeta, t))
    f1 = metrics.gate_fidelity(metrics.CZ, missing_gate_unitary(zeta, t + period))
    assert f1 == pytest.approx(f0, abs=1e-9)


def test_leakage_generator_is_hermitian():
    s = leakage_generator(chi=(0.05, -0.02, 0.03), zeta_l=(0.01, 0.0, -0.04, 0.02),
                          phi=(0.3, -1.2, 0.7))
    assert s.shape == (6, 6)
    assert is_hermitian(s)
    assert s[1, 1] == pytest.approx(0.01)
    assert s[5, 5] == pytest.approx(0.02)
    # coupling amplitude i*chi*e^{i phi} sits on the |01>-|10> block
    assert abs(s[1, 3]) == pytest.approx(0.05)
    zero = leakage_generator((0.0,) * 3, (0.0,) * 4, (0.0,) * 3)
    assert np.max(np.abs(zero)) == 0.0


def test_noisy_gate_from_leakage_stays_unitary():
    s = leakage_generator(chi=(0.04, 0.02, 0.05), zeta_l=(0.02, -0.01, 0.03, 0.0),
                          phi=(0.1, 0.2, 0.3))
    u6 = np.eye(6, dtype=complex)
    noisy = noisy_gate_from_leakage(u6, s)
    assert is_unitary(noisy, tol=1e-10)
    assert np.max(np.abs(noisy - np.eye(6))) > 1e-3

    zero = leakage_generator((0.0,) * 3, (0.0,) * 4, (0.0,) * 3)
    assert np.allclose(noisy_gate_from_leakage(u6, zero), u6)


def test_noisy_gate_embeds_small_generator_into_two_qutrit():
    s = leakage_generator(chi=(0.03, 0.0, 0.02), zeta_l=(0.0,) * 4, phi=(0.0,) * 3)
    u9 = np.eye(9, dtype=complex)
    noisy = noisy_gate_from_leakage(u9, s)
    assert noisy.shape == (9, 9)
    assert is_unitary(noisy, tol=1e-10)
    # states outside the low-energy span are untouched
    for idx in (5, 7, 8):
        assert noisy[idx, idx] == pytest.approx(1.0)
    with pytest.raises(ShapeError):
        noisy_gate_from_leakage(np.eye(4, dtype=complex), s)


def test_faulty_unitary_at_zero_epsilon_matches_clean(default_dev, slepian_pulse):
    f = FaultSpec(kind="ratio", magnitude=0.0, coefficient_index=1)
    u4 = faulty_cz_unitary(slepian_pulse, default_dev, f)
    # the 4x4 block is unitary only up to the pulse's real leakage residual
    assert is_unitary(u4, tol=1e-3)
    assert metrics.gate_fidelity(metrics.CZ, u4) > 0.9999
    # virtual-Z correction leaves no local phases behind
    assert np.angle(u4[1, 1] / u4[0, 0]) == pytest.approx(0.0, abs=1e-9)
    assert np.angle(u4[2, 2] / u4[0, 0]) == pytest.approx(0.0, abs=1e-9)


def test_faulty_unitary_missing_gate_uses_static_zz(default_dev, slepian_pulse):
    f = FaultSpec(kind="missing_gate", target_gate=2)
    u4 = faulty_cz_unitary(slepian_pulse, default_dev, f)
    expected = missing_gate_unitary(static_zz(default_dev), slepian_pulse.t_gate)
    assert np.allclose(u4, expected)


def test_faulty_unitary_rejects_non_gate_kinds(default_dev, slepian_pulse):
    leak = FaultSpec(kind="leakage",
                     leakage=LeakageParams((0.01,) * 3, (0.0,) * 4))
    with pytest.raises(FaultKindError):
        faulty_cz_unitary(slepian_pulse, default_dev, leak)
    dec = FaultSpec(kind="decoherence",
                    decoherence=DecoherenceParams(t1=50e-6))
    with pytest.raises(FaultKindError):
        faulty_cz_channel(slepian_pulse, default_dev, dec)


def test_fault_lowers_gate_fidelity_monotonically(default_dev, slepian_pulse):
    fids = []
    for eps in (0.0, 0.1, 0.2):
        f = FaultSpec(kind="ratio", magnitude=eps, coefficient_index=1)
        u4 = faulty_cz_unitary(slepian_pulse, default_dev, f)
        fids.append(metrics.gate_fidelity(metrics.CZ, u4))
    assert fids[0] > fids[1] > fids[2]


def test_dressed_channel_suppresses_background_exchange(default_dev,
                                                        slepian_pulse):
    f = FaultSpec(kind="ratio", magnitude=0.0, coefficient_index=1)
    chan = faulty_cz_channel(slepian_pulse, default_dev, f)
    bare = faulty_cz_unitary(slepian_pulse, default_dev, f)
    off = ~np.eye(4, dtype=bool)
    # projecting onto the idle dressed eigenstates removes the residual
    # exchange coupling that the bare computational projection keeps
    assert np.max(np.abs(chan[off])) < np.max(np.abs(bare[off]))
    assert np.max(np.abs(chan[off])) < 1e-4
    assert is_unitary(chan, tol=1e-3)


def test_fault_injection_is_deterministic(default_dev, slepian_pulse):
    f = FaultSpec(kind="bias", magnitude=0.15, coefficient_index=2)
    a = faulty_cz_unitary(slepian_pulse, default_dev, f)
    b = faulty_cz_unitary(slepian_pulse, default_dev, f)
    assert np.array_equal(a, b)
