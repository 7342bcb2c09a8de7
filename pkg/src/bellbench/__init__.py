"""Workbench for two-setting N-qudit correlation Bell inequalities.

Construction and exact classical analysis of the four-term inequality
families, multiport-beamsplitter quantum simulation, violation search, and
reference inequalities for comparison.
"""

from .errors import (
    BellError,
    DomainError,
    FamilyMismatchError,
    InvalidScenarioError,
    NumericError,
    ResourceError,
)
from .scenario import (
    BIPARTITE_LEGACY,
    MULTIPARTITE,
    BellExpression,
    ProbabilityTable,
    Scenario,
    bell_expression,
    bell_value,
    correlation,
    euclid_mod,
    weight_bipartite,
    weight_multipartite,
)

__all__ = [
    "BellError",
    "DomainError",
    "FamilyMismatchError",
    "InvalidScenarioError",
    "NumericError",
    "ResourceError",
    "BIPARTITE_LEGACY",
    "MULTIPARTITE",
    "BellExpression",
    "ProbabilityTable",
    "Scenario",
    "bell_expression",
    "bell_value",
    "correlation",
    "euclid_mod",
    "weight_bipartite",
    "weight_multipartite",
]

__version__ = "0.1.0"
