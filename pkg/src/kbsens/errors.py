"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A study configuration document failed validation.

    The message always starts with the dotted path of the offending field,
    e.g. ``sizes.m: must be an integer >= 2``.
    """


class KernelOverflowError(FloatingPointError):
    """An exponential-kernel exponent exceeded the configured cap."""


class DegenerateOutputError(ValueError):
    """The output sample is constant at working precision.

    Raised when the normalizing kernel moment of the centered output
    coincides with the kernel value at the origin, which makes every
    sensitivity ratio 0/0.
    """


class DegenerateStatisticError(ValueError):
    """The null-variance estimate vanished at working precision.

    Happens when the output is numerically constant in the tested subset:
    every plug-in total-effect residual is exactly zero, so the studentized
    statistic has no scale to divide by.
    """
