"""Exception types shared across the package."""


class StorallocError(Exception):
    pass


class InvalidParameterError(StorallocError, ValueError):
    pass


class OutOfDomainError(StorallocError, ValueError):
    pass


class SizeLimitError(StorallocError, ValueError):
    """An exhaustive enumeration would exceed its guard."""


class InfeasibleError(StorallocError, ValueError):
    pass


class InsufficientPointsError(StorallocError, ValueError):
    pass
