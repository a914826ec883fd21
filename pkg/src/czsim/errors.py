"""Exception types shared across the package."""


class CapacityError(ValueError):
    """Requested operator dimension exceeds the configured maximum."""


class ShapeError(ValueError):
    """Input array has the wrong shape for the requested operation."""


class LabelingError(RuntimeError):
    """Eigenvector could not be assigned a bare-state label unambiguously."""


class CalibrationError(RuntimeError):
    """Pulse calibration failed to find an acceptable working point."""


class StepSizeError(RuntimeError):
    """Fixed-step integrator failed its convergence or trace-drift check."""


class UnsupportedShapeError(ValueError):
    """Pulse family does not define the requested waveform quantity."""


class FaultKindError(ValueError):
    """Fault specification has the wrong kind for the requested injector."""
