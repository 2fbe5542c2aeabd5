"""Exception types raised by the simulator."""


class InvalidInputError(ValueError):
    """An argument has the wrong shape, length or range."""


class InvalidConfigError(ValueError):
    """A configuration combination cannot be realised."""


class OracleGuardError(RuntimeError):
    """A dense reference matrix was requested above the allowed size."""


class ReceiverDivergedError(FloatingPointError):
    """A message became non-finite during iterative detection."""

    def __init__(self, iteration, slot):
        self.iteration = iteration
        self.slot = slot
        super().__init__(f"non-finite message in {slot!r} at iteration {iteration}")
