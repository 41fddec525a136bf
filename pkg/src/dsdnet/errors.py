"""Exception types raised across the package."""


class ParameterError(ValueError):
    """An argument violates an operation's precondition."""


class DegenerateBasisError(ArithmeticError):
    """Basis activations sum to (numerically) zero at some phase."""


class NumericalBlowupError(FloatingPointError):
    """Integration produced NaN or Inf."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at integration step {step}")


class TooShortError(ParameterError):
    """Trajectory has too few samples for the requested operation."""


class CapacityError(ParameterError):
    """More segments were detected than the dataset capacity M allows."""

    def __init__(self, count, capacity, record=None):
        self.count = count
        self.capacity = capacity
        self.record = record
        where = f" (record {record})" if record is not None else ""
        super().__init__(f"{count} segments exceed capacity M={capacity}{where}")


class PaddingError(ParameterError):
    """Some segment slot has no donor record to average over."""

