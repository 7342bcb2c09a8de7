"""Exception hierarchy shared by all workbench modules."""


class BellError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BellError):
    """Inputs are structurally valid but outside an operation's domain."""


class InvalidScenarioError(DomainError):
    """Scenario parameters violate N >= 2 or d >= 2."""


class FamilyMismatchError(DomainError):
    """A weight family was used with an incompatible scenario."""


class ResourceError(BellError):
    """An enumeration or dimension budget would be exceeded."""


class NumericError(BellError):
    """An iterative numerical routine failed to converge."""
