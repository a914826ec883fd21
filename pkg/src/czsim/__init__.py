"""Pulse-level fault simulation for frequency-tunable transmon CZ gates.

The package is organized bottom-up:

- ``linalg``: dense operator helpers, tolerance constants, basis conventions.
- ``device``: two-qutrit device model, Hamiltonian, tracked eigensystem,
  decoherence parameters and collapse operators.
- ``pulses``: adiabatic pulse shapes, conditional-phase estimate, calibration.
- ``evolution``: time-ordered propagators and a fixed-step Lindblad solver.
- ``metrics``: state/gate fidelities and single-qubit phase correction.
- ``faults``: fault taxonomy applied to calibrated pulses and gates.
- ``circuits``: gate-level circuits, CZ decomposition, density-matrix runs.
- ``testgen``: chi-square statistics and minimal test-repetition estimates.
- ``experiments``: orchestration of the CLI/service workflows.
- ``service`` and ``cli``: FastAPI wrapper and its thin command-line client.
"""

__version__ = "0.1.0"
