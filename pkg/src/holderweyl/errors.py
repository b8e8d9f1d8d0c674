"""Exception hierarchy shared by all modules."""


class HolderWeylError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(HolderWeylError, ValueError):
    pass


class ResolutionTooCoarse(HolderWeylError):
    """The grid (or sample) resolution cannot represent the requested object."""


class NumericalBreakdown(HolderWeylError, ArithmeticError):
    """The LDL^T factorisation kept hitting tiny pivots after all retries."""


class OracleScaleExceeded(HolderWeylError):
    pass


class SingularSample(HolderWeylError):
    def __init__(self, message, cell_index=None):
        super().__init__(message)
        self.cell_index = cell_index


class SingularWeight(HolderWeylError):
    pass


class InvalidPartition(HolderWeylError, ValueError):
    pass


class InvalidPolicy(HolderWeylError, ValueError):
    pass


class DecompositionNotExact(HolderWeylError):
    pass


class InvalidConfiguration(HolderWeylError, ValueError):
    pass
