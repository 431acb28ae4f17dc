"""Exception types shared across the library.

The CLI maps these onto exit codes: invalid input -> 2, failed
verification -> 1, numerical non-convergence -> 3.
"""


class InvalidInputError(ValueError):
    """Raised when a torus, field, or parameter violates a precondition."""


class GammaPoleError(InvalidInputError):
    """Gamma evaluated at a non-positive integer pole."""

    def __init__(self, pole):
        self.pole = pole
        super().__init__(f"gamma pole at s = {pole}")


class NonConvergenceError(RuntimeError):
    """A sum, quadrature, or fit could not reach the requested tolerance.

    Carries the tolerance actually achieved so callers can report it.
    """

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        if achieved is not None:
            message = f"{message} (achieved {achieved:.3e})"
        super().__init__(message)


class ModeOverflowError(RuntimeError):
    """A spectral operation produced Fourier modes beyond the declared radius."""
