"""Exception hierarchy shared across the package.

Every failure a caller might want to branch on gets its own class; the CLI
maps these onto distinct exit codes (data 3, numeric 4, classification 5).
"""


class RdcsError(Exception):
    """Base class for all package errors."""


class DataError(RdcsError):
    """Invalid input data: bad file, missing column, non-numeric cell,
    or a sample that is empty on one side of the cutoff."""


class InsufficientSupportError(RdcsError):
    """A local polynomial fit is rank deficient at the requested bandwidth:
    fewer than p+1 distinct running-variable values receive positive kernel
    weight on one side."""

    def __init__(self, side: str, bandwidth: float, needed: int, found: int):
        self.side = side
        self.bandwidth = bandwidth
        self.needed = needed
        self.found = found
        super().__init__(
            f"insufficient support at bandwidth {bandwidth:g}: "
            f"{side} side has {found} distinct in-window point(s), needs {needed}"
        )


class DegenerateVarianceError(RdcsError):
    """All in-window variance estimates are zero, so the standard error of
    the jump estimator vanishes and t-ratios are undefined."""


class WeakIdentificationError(RdcsError):
    """The estimated jump in treatment probability is too close to zero for
    a delta-method confidence interval to be meaningful."""


class ClassificationError(RdcsError):
    """The root pattern of the pseudo-p-value could not be matched to one of
    the admissible confidence-set shapes, even after grid expansion."""

    def __init__(self, message: str, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
