"""Exception hierarchy shared by the library and the CLI."""


class ValidationError(ValueError):
    """Bad input: wrong shape, non-density matrix, inconsistent schedule."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap."""


class PropagationError(RuntimeError):
    """Trace or norm drifted past the abort threshold during integration."""


class DivergenceError(RuntimeError):
    """Training blew up even after repeated learning-rate halving."""
