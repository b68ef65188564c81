"""Exception types shared across the package."""


class MomoptError(Exception):
    """Base class for errors raised by this package."""


class DegreeTooHigh(MomoptError, ValueError):
    pass


class LengthMismatch(MomoptError, ValueError):
    pass


class OrderTooSmall(MomoptError, ValueError):
    pass


class EmptyGeneratorDegree(MomoptError, ValueError):
    pass


class TooManyGenerators(MomoptError, ValueError):
    pass


class CapExceeded(MomoptError):
    def __init__(self, count: int, cap: int, hint: str = "switch to branch or kkt mode"):
        self.count = count
        self.cap = cap
        super().__init__(f"polar generator count {count} exceeds cap {cap}; {hint}")
