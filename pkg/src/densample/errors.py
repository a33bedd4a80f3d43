"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input data, configuration, or precondition.

    The CLI maps this to exit code 2; every other failure maps to 1.
    """
